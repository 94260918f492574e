#pragma once

#include "tomac/numerics/tensor.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace tomac::numerics
{

template<typename Scalar>
class BasicTape;

/// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
template<typename Scalar>
class BasicVar
{
public:
  BasicVar() = default;
  BasicVar(BasicTape<Scalar> * tape, std::size_t id)
  : tape_(tape), id_(id) {}

  const Matrix<Scalar> & value() const {return tape_->value(*this);}
  Eigen::Index rows() const {return value().rows();}
  Eigen::Index cols() const {return value().cols();}
  Scalar scalar() const {return value()(0, 0);}

  BasicTape<Scalar> * tape() const {return tape_;}
  std::size_t id() const {return id_;}
  bool valid() const {return tape_ != nullptr;}

private:
  BasicTape<Scalar> * tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape over dense matrices.
///
/// Operations evaluate eagerly. When recording is disabled no backward closures are
/// kept, which is what rollouts use. Nonsmooth operations (relu, abs) append the sign
/// pattern of their inputs to a signature that gradient checks use to detect kink
/// crossings.
template<typename Scalar>
class BasicTape
{
public:
  using MatrixType = Matrix<Scalar>;
  using Var = BasicVar<Scalar>;
  using BackwardFn = std::function<void (BasicTape &, const MatrixType &)>;

  explicit BasicTape(bool recording = true)
  : recording_(recording) {}

  BasicTape(const BasicTape &) = delete;
  BasicTape & operator=(const BasicTape &) = delete;

  bool recording() const {return recording_;}
  std::size_t size() const {return nodes_.size();}

  Var constant(MatrixType value)
  {
    return push(std::move(value), false, {});
  }

  Var constant_scalar(Scalar value)
  {
    MatrixType m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
  }

  /// Leaf whose gradient is reported under `path` by backward().
  Var param(const std::string & path, const MatrixType & value)
  {
    Var v = push(value, recording_, {});
    if (recording_) {
      param_leaves_.emplace_back(path, v.id());
    }
    return v;
  }

  template<typename Bundle>
  Var param(const Bundle & bundle, const std::string & path)
  {
    return param(path, bundle.at(path));
  }

  const MatrixType & value(const Var & v) const {return nodes_[v.id()].value;}
  bool requires_grad(const Var & v) const {return nodes_[v.id()].requires_grad;}

  /// Records a node computed from `inputs`; `backward` receives the upstream gradient.
  Var record(MatrixType value, std::initializer_list<Var> inputs, BackwardFn backward)
  {
    bool needs = false;
    if (recording_) {
      for (const Var & in : inputs) {
        needs = needs || nodes_[in.id()].requires_grad;
      }
    }
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  Var record(MatrixType value, const std::vector<Var> & inputs, BackwardFn backward)
  {
    bool needs = false;
    if (recording_) {
      for (const Var & in : inputs) {
        needs = needs || nodes_[in.id()].requires_grad;
      }
    }
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  /// Adds `grad` into the gradient slot of `v` (no-op if `v` does not need gradients).
  void accumulate(const Var & v, const MatrixType & grad)
  {
    Node & node = nodes_[v.id()];
    if (!node.requires_grad) {
      return;
    }
    MatrixType & slot = grads_[v.id()];
    if (slot.size() == 0) {
      slot = grad;
    } else {
      slot += grad;
    }
  }

  template<typename Derived>
  void accumulate_block(
    const Var & v, Eigen::Index row, Eigen::Index col,
    const Eigen::MatrixBase<Derived> & grad)
  {
    Node & node = nodes_[v.id()];
    if (!node.requires_grad) {
      return;
    }
    MatrixType & slot = grads_[v.id()];
    if (slot.size() == 0) {
      slot = MatrixType::Zero(node.value.rows(), node.value.cols());
    }
    slot.block(row, col, grad.rows(), grad.cols()) += grad;
  }

  /// Exact reverse-mode gradients of a scalar loss with respect to every param leaf.
  BasicGradMap<Scalar> backward(const Var & loss)
  {
    if (!recording_) {
      throw ContractViolation("backward() on a non-recording tape");
    }
    const MatrixType & lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractViolation("backward() needs a scalar loss, got " + shape_of(lv));
    }
    grads_.assign(nodes_.size(), MatrixType());
    if (nodes_[loss.id()].requires_grad) {
      grads_[loss.id()] = MatrixType::Ones(1, 1);
    }
    for (std::size_t i = loss.id() + 1; i-- > 0; ) {
      if (grads_[i].size() == 0 || !nodes_[i].backward) {
        continue;
      }
      nodes_[i].backward(*this, grads_[i]);
    }

    BasicGradMap<Scalar> out;
    for (const auto & [path, id] : param_leaves_) {
      const MatrixType & g = grads_[id].size() == 0 ?
        MatrixType(MatrixType::Zero(nodes_[id].value.rows(), nodes_[id].value.cols())) :
        grads_[id];
      auto it = out.find(path);
      if (it == out.end()) {
        out.emplace(path, g);
      } else {
        it->second += g;
      }
    }
    grads_.clear();
    return out;
  }

  /// Same as backward(), with every path of `bundle` present (zero when unreachable).
  template<typename Bundle>
  BasicGradMap<Scalar> backward(const Var & loss, const Bundle & bundle)
  {
    BasicGradMap<Scalar> out = backward(loss);
    for (const auto & [path, value] : bundle.tensors) {
      if (out.find(path) == out.end()) {
        out.emplace(path, MatrixType::Zero(value.rows(), value.cols()));
      }
    }
    return out;
  }

  void note_kinks(const MatrixType & pre_activation)
  {
    kink_signature_.reserve(kink_signature_.size() + pre_activation.size());
    for (Eigen::Index i = 0; i < pre_activation.size(); ++i) {
      kink_signature_.push_back(pre_activation.data()[i] > Scalar(0) ? 1 : 0);
    }
  }

  void note_kink_flag(bool flag) {kink_signature_.push_back(flag ? 1 : 0);}

  const std::vector<unsigned char> & kink_signature() const {return kink_signature_;}

private:
  struct Node
  {
    MatrixType value;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(MatrixType value, bool requires_grad, BackwardFn backward)
  {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  bool recording_;
  std::vector<Node> nodes_;
  std::vector<MatrixType> grads_;
  std::vector<std::pair<std::string, std::size_t>> param_leaves_;
  std::vector<unsigned char> kink_signature_;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;

}  // namespace tomac::numerics
