#pragma once

#include "tomac/numerics/gradcheck.hpp"
#include "tomac/numerics/ops.hpp"

#include <random>

namespace testing
{

using tomac::numerics::Matrix;
using tomac::numerics::ParamBundle;
using tomac::numerics::Tape;
using tomac::numerics::Var;
using MatrixXd = Matrix<double>;

inline MatrixXd random_matrix(std::mt19937_64 & rng, Eigen::Index r, Eigen::Index c, double scale = 1.0)
{
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    m.data()[k] = u(rng);
  }
  return m;
}

/// Weighted sum against a fixed random matrix, so every output entry matters differently.
inline Var probe(Tape & tape, const Var & out, const MatrixXd & weights)
{
  return tomac::numerics::sum(tomac::numerics::cwise_product(out, tape.constant(weights)));
}

}  // namespace testing
