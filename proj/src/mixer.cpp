#include "tomac/model/mixer.hpp"

#include <cmath>
#include <stdexcept>

namespace tomac::model
{

using namespace tomac::numerics;

namespace
{

void require_nonnegative(const MatrixXd & m, const char * what)
{
  if ((m.array() < 0.0).any()) {
    throw ContractViolation(std::string("mixer ") + what + " has a negative entry");
  }
}

double elu_value(double x) {return x > 0.0 ? x : std::expm1(x);}

}  // namespace

Var mix(const Var & q, const MixerParams & params)
{
  const int n = static_cast<int>(params.w1.size());
  if (q.cols() != n) {
    throw DimensionError("mix: " + std::to_string(q.cols()) + " utilities for " + std::to_string(n) + " agents");
  }
  for (const Var & w : params.w1) {
    require_nonnegative(w.value(), "w1");
  }
  require_nonnegative(params.w2.value(), "w2");
  Var hidden = params.b1;
  for (int i = 0; i < n; ++i) {
    hidden = hidden + scale_rows(params.w1[static_cast<std::size_t>(i)], slice_cols(q, i, 1));
  }
  return row_sum(cwise_product(elu(hidden), params.w2)) + params.b2;
}

double mix_value(const VectorXd & q, const MixValues & p)
{
  if (q.size() != p.w1.rows()) {
    throw DimensionError("mix_value: q of size " + std::to_string(q.size()) + " for w1 " + shape_of(p.w1));
  }
  require_nonnegative(p.w1, "w1");
  require_nonnegative(p.w2, "w2");
  const VectorXd pre = p.w1.transpose() * q + p.b1;
  double total = p.b2;
  for (Eigen::Index k = 0; k < pre.size(); ++k) {
    total += elu_value(pre(k)) * p.w2(k);
  }
  return total;
}

VectorXd mix_gradient(const VectorXd & q, const MixValues & p)
{
  const VectorXd pre = p.w1.transpose() * q + p.b1;
  VectorXd slope(pre.size());
  for (Eigen::Index k = 0; k < pre.size(); ++k) {
    slope(k) = (pre(k) > 0.0 ? 1.0 : std::exp(pre(k))) * p.w2(k);
  }
  return p.w1 * slope;
}

MixValues mix_values_at(const MixerParams & params, Eigen::Index row)
{
  MixValues v;
  const auto n = static_cast<Eigen::Index>(params.w1.size());
  const Eigen::Index h = params.b1.cols();
  v.w1.resize(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    v.w1.row(i) = params.w1[static_cast<std::size_t>(i)].value().row(row);
  }
  v.b1 = params.b1.value().row(row).transpose();
  v.w2 = params.w2.value().row(row).transpose();
  v.b2 = params.b2.value()(row, 0);
  return v;
}

JointChoice conditional_max(
  const std::vector<VectorXd> & q, const std::vector<int> & terminated,
  const std::vector<int> & current, const std::vector<std::uint32_t> & available,
  const MixValues & params)
{
  const std::size_t n = q.size();
  if (terminated.size() != n || current.size() != n || available.size() != n) {
    throw DimensionError("conditional_max: per-agent inputs disagree on agent count");
  }
  JointChoice out;
  VectorXd chosen(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const int a = terminated[i] ? masked_argmax(q[i], available[i]) : current[i];
    if (a < 0 || a >= q[i].size()) {
      throw std::out_of_range("agent " + std::to_string(i) + " has no valid macro-action");
    }
    out.actions.push_back(a);
    chosen(static_cast<Eigen::Index>(i)) = q[i](a);
  }
  out.q_total = mix_value(chosen, params);
  return out;
}

std::vector<std::vector<int>> conditional_choice(
  const std::vector<MatrixXd> & q, const std::vector<std::vector<int>> & terminated,
  const std::vector<std::vector<int>> & current, const std::vector<std::vector<std::uint32_t>> & available)
{
  const std::size_t n = q.size();
  const auto batch = static_cast<std::size_t>(n == 0 ? 0 : q[0].rows());
  std::vector<std::vector<int>> out(batch, std::vector<int>(n));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      out[b][i] = terminated[b][i] ?
        masked_argmax(q[i].row(static_cast<Eigen::Index>(b)).transpose(), available[b][i]) :
        current[b][i];
    }
  }
  return out;
}

}  // namespace tomac::model
