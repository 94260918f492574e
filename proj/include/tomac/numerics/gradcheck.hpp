#pragma once

#include "tomac/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace tomac::numerics
{

struct GradCheckOptions
{
  double perturbation = 1e-3;
  double tolerance = 1e-4;
  /// 0 checks every coordinate; otherwise a uniform sample of this many.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport
{
  std::size_t checked = 0;
  /// Coordinates whose +/- perturbation changed the sign pattern of a relu/abs input.
  /// Central differences are meaningless across a kink, so these are not compared.
  std::size_t skipped_kinks = 0;
  double max_error = 0.0;
  std::string worst_path;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const {return max_error <= tolerance;}
};

/// Compares reverse-mode gradients of `loss_fn` against central finite differences.
///
/// `loss_fn(tape, params)` must build a scalar loss on `tape` using `params`. The error
/// metric is |analytic - numeric| / max(1, |numeric|).
template<typename LossFn>
GradCheckReport check_gradients(
  LossFn && loss_fn, ParamBundle params, const GradCheckOptions & options = {})
{
  GradMap analytic;
  std::vector<unsigned char> base_signature;
  {
    Tape tape;
    Var loss = loss_fn(tape, static_cast<const ParamBundle &>(params));
    analytic = tape.backward(loss, params);
    base_signature = tape.kink_signature();
  }

  std::vector<std::pair<std::string, Eigen::Index>> coords;
  for (const auto & [path, value] : params.tensors) {
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      coords.emplace_back(path, i);
    }
  }
  if (options.max_coordinates != 0 && coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
  }

  auto evaluate = [&](std::vector<unsigned char> & signature) {
      Tape tape;
      Var loss = loss_fn(tape, static_cast<const ParamBundle &>(params));
      signature = tape.kink_signature();
      return loss.scalar();
    };

  GradCheckReport report;
  std::vector<unsigned char> sig_plus;
  std::vector<unsigned char> sig_minus;
  for (const auto & [path, index] : coords) {
    double & x = params.at(path).data()[index];
    const double saved = x;
    x = saved + options.perturbation;
    const double f_plus = evaluate(sig_plus);
    x = saved - options.perturbation;
    const double f_minus = evaluate(sig_minus);
    x = saved;
    if (sig_plus != base_signature || sig_minus != base_signature) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (f_plus - f_minus) / (2.0 * options.perturbation);
    const double a = analytic.at(path).data()[index];
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
    ++report.checked;
    if (err > report.max_error || report.worst_index < 0) {
      report.max_error = std::max(report.max_error, err);
      report.worst_path = path;
      report.worst_index = index;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace tomac::numerics
