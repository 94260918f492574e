#include "tomac/encoding.hpp"

#include <cmath>
#include <string>

namespace tomac::encoding
{

VectorXd encode_time(long t, int dim)
{
  if (dim < 0 || dim % 2 != 0) {
    throw std::invalid_argument("encoding dimension must be even and nonnegative, got " + std::to_string(dim));
  }
  if (t < 0) {
    throw std::invalid_argument("timestep must be nonnegative, got " + std::to_string(t));
  }
  VectorXd code(dim);
  for (int j = 0; 2 * j < dim; ++j) {
    const double rate = std::pow(kEncodingBase, static_cast<double>(2 * j) / dim);
    const double angle = static_cast<double>(t) / rate;
    code(2 * j) = std::sin(angle);
    code(2 * j + 1) = std::cos(angle);
  }
  return code;
}

VectorXd EncodedToken::flatten() const
{
  VectorXd out(size());
  out << base, wall_time_code, progress_code;
  return out;
}

bool EncodedToken::operator==(const EncodedToken & other) const
{
  return base == other.base && wall_time_code == other.wall_time_code &&
         progress_code == other.progress_code;
}

EncodedToken encode_macro_action(int action_id, int num_actions, long t, long t_m, int dim)
{
  if (action_id < 0 || action_id >= num_actions) {
    throw std::invalid_argument(
            "macro-action id " + std::to_string(action_id) + " outside [0, " +
            std::to_string(num_actions) + ")");
  }
  if (t_m < 0 || t_m > t) {
    throw std::invalid_argument(
            "progress " + std::to_string(t_m) + " exceeds wall time " + std::to_string(t));
  }
  EncodedToken token;
  token.base = VectorXd::Zero(num_actions);
  token.base(action_id) = 1.0;
  token.wall_time_code = encode_time(t, dim);
  token.progress_code = encode_time(t_m, dim);
  return token;
}

EncodedToken encode_macro_observation(const VectorXd & obs, long t, int dim)
{
  EncodedToken token;
  token.base = obs;
  token.wall_time_code = encode_time(t, dim);
  token.progress_code = VectorXd(0);
  return token;
}

}  // namespace tomac::encoding
