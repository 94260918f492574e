#pragma once

#include "tomac/numerics/ops.hpp"

#include <cmath>
#include <random>
#include <string>

namespace tomac::numerics
{

/// Name of the weight initialisation scheme, recorded in checkpoint manifests.
inline constexpr const char * kInitScheme = "uniform_fan_in";

/// Fills `m` with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
template<typename Scalar, typename Rng>
void init_uniform_fan_in(Matrix<Scalar> & m, Eigen::Index fan_in, Rng & rng)
{
  const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng);
  }
}

// ----------------------------------------------------------------------------
// Affine layer: y = x W + b, with W stored in x out.

template<typename Scalar>
struct BasicLinearVars
{
  BasicVar<Scalar> weight;
  BasicVar<Scalar> bias;
};

template<typename Scalar, typename Rng>
void init_linear(
  BasicParamBundle<Scalar> & bundle, const std::string & prefix,
  Eigen::Index in, Eigen::Index out, Rng & rng)
{
  Matrix<Scalar> w(in, out);
  Matrix<Scalar> b(1, out);
  init_uniform_fan_in(w, in, rng);
  init_uniform_fan_in(b, in, rng);
  bundle.tensors[prefix + ".weight"] = std::move(w);
  bundle.tensors[prefix + ".bias"] = std::move(b);
}

template<typename Scalar>
BasicLinearVars<Scalar> bind_linear(
  BasicTape<Scalar> & tape, const BasicParamBundle<Scalar> & bundle, const std::string & prefix)
{
  return {tape.param(bundle, prefix + ".weight"), tape.param(bundle, prefix + ".bias")};
}

template<typename Scalar>
BasicVar<Scalar> linear(const BasicLinearVars<Scalar> & layer, const BasicVar<Scalar> & x)
{
  return add_rowwise(matmul(x, layer.weight), layer.bias);
}

// ----------------------------------------------------------------------------
// Gated recurrent unit. Gate blocks are packed [reset | update | candidate].

template<typename Scalar>
struct BasicGruVars
{
  BasicVar<Scalar> w_ih;
  BasicVar<Scalar> w_hh;
  BasicVar<Scalar> b_ih;
  BasicVar<Scalar> b_hh;
  Eigen::Index hidden = 0;
};

template<typename Scalar, typename Rng>
void init_gru(
  BasicParamBundle<Scalar> & bundle, const std::string & prefix,
  Eigen::Index in, Eigen::Index hidden, Rng & rng)
{
  Matrix<Scalar> w_ih(in, 3 * hidden);
  Matrix<Scalar> w_hh(hidden, 3 * hidden);
  Matrix<Scalar> b_ih(1, 3 * hidden);
  Matrix<Scalar> b_hh(1, 3 * hidden);
  init_uniform_fan_in(w_ih, hidden, rng);
  init_uniform_fan_in(w_hh, hidden, rng);
  init_uniform_fan_in(b_ih, hidden, rng);
  init_uniform_fan_in(b_hh, hidden, rng);
  bundle.tensors[prefix + ".w_ih"] = std::move(w_ih);
  bundle.tensors[prefix + ".w_hh"] = std::move(w_hh);
  bundle.tensors[prefix + ".b_ih"] = std::move(b_ih);
  bundle.tensors[prefix + ".b_hh"] = std::move(b_hh);
}

template<typename Scalar>
BasicGruVars<Scalar> bind_gru(
  BasicTape<Scalar> & tape, const BasicParamBundle<Scalar> & bundle, const std::string & prefix)
{
  BasicGruVars<Scalar> g{
    tape.param(bundle, prefix + ".w_ih"), tape.param(bundle, prefix + ".w_hh"),
    tape.param(bundle, prefix + ".b_ih"), tape.param(bundle, prefix + ".b_hh"), 0};
  g.hidden = g.w_hh.rows();
  return g;
}

/// h' = (1 - z) * n + z * h for a batch of rows.
template<typename Scalar>
BasicVar<Scalar> gru_step(
  const BasicGruVars<Scalar> & cell, const BasicVar<Scalar> & h_prev, const BasicVar<Scalar> & x)
{
  const Eigen::Index h = cell.hidden;
  if (h_prev.cols() != h || x.cols() != cell.w_ih.rows() || h_prev.rows() != x.rows()) {
    throw DimensionError(
            "gru_step: hidden " + shape_of(h_prev.value()) + ", input " + shape_of(x.value()) +
            " for cell in=" + std::to_string(cell.w_ih.rows()) + " hidden=" + std::to_string(h));
  }
  auto gi = add_rowwise(matmul(x, cell.w_ih), cell.b_ih);
  auto gh = add_rowwise(matmul(h_prev, cell.w_hh), cell.b_hh);
  auto reset = sigmoid(slice_cols(gi, 0, h) + slice_cols(gh, 0, h));
  auto update = sigmoid(slice_cols(gi, h, h) + slice_cols(gh, h, h));
  auto candidate = tanh(slice_cols(gi, 2 * h, h) + cwise_product(reset, slice_cols(gh, 2 * h, h)));
  return candidate + cwise_product(update, h_prev - candidate);
}

}  // namespace tomac::numerics
