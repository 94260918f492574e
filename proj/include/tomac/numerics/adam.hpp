#pragma once

#include "tomac/numerics/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tomac::numerics
{

class NonFiniteGradient : public std::runtime_error
{
public:
  NonFiniteGradient(const std::string & path)
  : std::runtime_error("non-finite gradient for parameter " + path), path_(path) {}

  const std::string & path() const {return path_;}

private:
  std::string path_;
};

struct AdamOptions
{
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template<typename Scalar>
struct BasicAdamState
{
  AdamOptions options;
  std::map<std::string, Matrix<Scalar>> first_moment;
  std::map<std::string, Matrix<Scalar>> second_moment;
  std::int64_t step = 0;
};

using AdamState = BasicAdamState<double>;

template<typename Scalar>
BasicAdamState<Scalar> make_adam_state(const BasicParamBundle<Scalar> & params, AdamOptions options)
{
  BasicAdamState<Scalar> state;
  state.options = options;
  for (const auto & [path, value] : params.tensors) {
    state.first_moment[path] = Matrix<Scalar>::Zero(value.rows(), value.cols());
    state.second_moment[path] = Matrix<Scalar>::Zero(value.rows(), value.cols());
  }
  return state;
}

/// Adaptive-moment update. Paths missing from `grads` are treated as zero gradient.
/// Throws NonFiniteGradient before touching any parameter.
template<typename Scalar>
void adam_step(
  BasicParamBundle<Scalar> & params, const BasicGradMap<Scalar> & grads,
  BasicAdamState<Scalar> & state)
{
  for (const auto & [path, g] : grads) {
    if (!all_finite(g)) {
      throw NonFiniteGradient(path);
    }
  }
  state.step += 1;
  const auto & o = state.options;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar correction1 = Scalar(1) - std::pow(Scalar(o.beta1), t);
  const Scalar correction2 = Scalar(1) - std::pow(Scalar(o.beta2), t);
  for (auto & [path, value] : params.tensors) {
    auto git = grads.find(path);
    auto & m = state.first_moment.at(path);
    auto & v = state.second_moment.at(path);
    if (git == grads.end()) {
      m *= Scalar(o.beta1);
      v *= Scalar(o.beta2);
    } else {
      const auto & g = git->second;
      if (g.rows() != value.rows() || g.cols() != value.cols()) {
        throw DimensionError("adam_step: gradient " + shape_of(g) + " for " + path + " " + shape_of(value));
      }
      m = Scalar(o.beta1) * m + Scalar(1 - o.beta1) * g;
      v = Scalar(o.beta2) * v + Scalar(1 - o.beta2) * g.cwiseProduct(g);
    }
    value.array() -= Scalar(o.learning_rate) * (m.array() / correction1) /
      ((v.array() / correction2).sqrt() + Scalar(o.epsilon));
  }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
template<typename Scalar>
Scalar clip_global_norm(BasicGradMap<Scalar> & grads, Scalar max_norm)
{
  Scalar total = 0;
  for (const auto & [path, g] : grads) {
    total += g.squaredNorm();
  }
  const Scalar norm = std::sqrt(total);
  if (norm > max_norm && norm > Scalar(0)) {
    const Scalar factor = max_norm / norm;
    for (auto & [path, g] : grads) {
      g *= factor;
    }
  }
  return norm;
}

}  // namespace tomac::numerics
