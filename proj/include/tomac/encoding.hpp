#pragma once

#include "tomac/numerics/tensor.hpp"

#include <stdexcept>

namespace tomac::encoding
{

using numerics::VectorXd;

inline constexpr int kDefaultEncodingDim = 8;
inline constexpr double kEncodingBase = 10000.0;

/// Sinusoidal code of a nonnegative timestep:
/// entry 2j = sin(t / base^(2j/d)), entry 2j+1 = cos(t / base^(2j/d)).
/// Throws std::invalid_argument for odd or negative `dim`.
VectorXd encode_time(long t, int dim);

/// Time-stamped token. `progress_code` is empty for macro-observations.
struct EncodedToken
{
  VectorXd base;
  VectorXd wall_time_code;
  VectorXd progress_code;

  VectorXd flatten() const;
  Eigen::Index size() const {return base.size() + wall_time_code.size() + progress_code.size();}
  bool operator==(const EncodedToken & other) const;
};

/// onehot(action_id) ⊕ f_e(t) ⊕ f_e(t_m). Requires 0 <= t_m <= t.
EncodedToken encode_macro_action(int action_id, int num_actions, long t, long t_m, int dim);

/// obs ⊕ f_e(t).
EncodedToken encode_macro_observation(const VectorXd & obs, long t, int dim);

}  // namespace tomac::encoding
