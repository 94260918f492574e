#pragma once

#include "tomac/model/atpg.hpp"

#include <cstdint>
#include <vector>

namespace tomac::model
{

/// Q_total = ELU(Σ_i q_i w1_i + b1) · w2 + b2 for a batch: q is B x n, result B x 1.
/// Throws ContractViolation if any w1 or w2 entry is negative.
Var mix(const Var & q, const MixerParams & params);

/// Mixer parameters for a single state, as plain values.
struct MixValues
{
  MatrixXd w1;     // n x h
  VectorXd b1;     // h
  VectorXd w2;     // h
  double b2 = 0.0;
};

double mix_value(const VectorXd & q, const MixValues & params);

/// Gradient of mix_value with respect to q.
VectorXd mix_gradient(const VectorXd & q, const MixValues & params);

/// Row `row` of batched generated parameters.
MixValues mix_values_at(const MixerParams & params, Eigen::Index row);

struct JointChoice
{
  std::vector<int> actions;
  double q_total = 0.0;
};

/// Continuing agents keep `current[i]`; each terminated agent takes its own lowest-id
/// argmax over the ids in `available[i]`. q_total is the mix at that joint choice.
JointChoice conditional_max(
  const std::vector<VectorXd> & q, const std::vector<int> & terminated,
  const std::vector<int> & current, const std::vector<std::uint32_t> & available,
  const MixValues & params);

/// Batched greedy half of conditional_max: per-row joint choice from B x |M| tables.
std::vector<std::vector<int>> conditional_choice(
  const std::vector<MatrixXd> & q, const std::vector<std::vector<int>> & terminated,
  const std::vector<std::vector<int>> & current, const std::vector<std::vector<std::uint32_t>> & available);

}  // namespace tomac::model
