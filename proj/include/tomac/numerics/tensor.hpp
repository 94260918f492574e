#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomac::numerics
{

template<typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template<typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Tensor = Matrix<double>;
using VectorXd = Vector<double>;

class DimensionError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class ContractViolation : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols)
{
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template<typename Derived>
std::string shape_of(const Eigen::DenseBase<Derived> & m)
{
  return shape_string(m.rows(), m.cols());
}

template<typename Derived>
bool all_finite(const Eigen::DenseBase<Derived> & m)
{
  return m.derived().array().isFinite().all();
}

/// Named collection of trainable tensors. Paths are dotted ("agent.gru.w_ih").
template<typename Scalar>
struct BasicParamBundle
{
  std::map<std::string, Matrix<Scalar>> tensors;
  std::int64_t version = 1;

  Matrix<Scalar> & at(const std::string & path)
  {
    auto it = tensors.find(path);
    if (it == tensors.end()) {
      throw std::out_of_range("unknown parameter path: " + path);
    }
    return it->second;
  }

  const Matrix<Scalar> & at(const std::string & path) const
  {
    auto it = tensors.find(path);
    if (it == tensors.end()) {
      throw std::out_of_range("unknown parameter path: " + path);
    }
    return it->second;
  }

  bool contains(const std::string & path) const {return tensors.count(path) != 0;}

  std::vector<std::string> paths() const
  {
    std::vector<std::string> out;
    out.reserve(tensors.size());
    for (const auto & [path, value] : tensors) {
      out.push_back(path);
    }
    return out;
  }

  std::size_t parameter_count() const
  {
    std::size_t count = 0;
    for (const auto & [path, value] : tensors) {
      count += static_cast<std::size_t>(value.size());
    }
    return count;
  }

  /// Same paths and shapes.
  bool same_layout(const BasicParamBundle & other) const
  {
    if (tensors.size() != other.tensors.size()) {
      return false;
    }
    auto a = tensors.begin();
    auto b = other.tensors.begin();
    for (; a != tensors.end(); ++a, ++b) {
      if (a->first != b->first || a->second.rows() != b->second.rows() ||
        a->second.cols() != b->second.cols())
      {
        return false;
      }
    }
    return true;
  }
};

using ParamBundle = BasicParamBundle<double>;

template<typename Scalar>
using BasicGradMap = std::map<std::string, Matrix<Scalar>>;

using GradMap = BasicGradMap<double>;

}  // namespace tomac::numerics
