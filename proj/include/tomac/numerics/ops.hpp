#pragma once

#include "tomac/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

// Differentiable free functions over BasicVar. Every op checks shapes and throws
// DimensionError naming both operands.

namespace tomac::numerics
{

namespace detail
{

template<typename Scalar>
void require_same_shape(const char * op, const BasicVar<Scalar> & a, const BasicVar<Scalar> & b)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(
            std::string(op) + ": shape mismatch " + shape_of(a.value()) + " vs " +
            shape_of(b.value()));
  }
}

template<typename Scalar>
BasicTape<Scalar> & tape_of(const BasicVar<Scalar> & a)
{
  return *a.tape();
}

}  // namespace detail

template<typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar> & a, const BasicVar<Scalar> & b)
{
  if (a.cols() != b.rows()) {
    throw DimensionError(
            "matmul: inner extents disagree " + shape_of(a.value()) + " x " +
            shape_of(b.value()));
  }
  auto & tape = detail::tape_of(a);
  Matrix<Scalar> out = a.value() * b.value();
  return tape.record(
    std::move(out), {a, b},
    [a, b](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      if (t.requires_grad(a)) {t.accumulate(a, g * b.value().transpose());}
      if (t.requires_grad(b)) {t.accumulate(b, a.value().transpose() * g);}
    });
}

template<typename Scalar>
BasicVar<Scalar> operator+(const BasicVar<Scalar> & a, const BasicVar<Scalar> & b)
{
  detail::require_same_shape("add", a, b);
  return detail::tape_of(a).record(
    a.value() + b.value(), {a, b},
    [a, b](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
}

template<typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar> & a, const BasicVar<Scalar> & b)
{
  detail::require_same_shape("sub", a, b);
  return detail::tape_of(a).record(
    a.value() - b.value(), {a, b},
    [a, b](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(a, g);
      t.accumulate(b, -g);
    });
}

template<typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar> & a)
{
  return detail::tape_of(a).record(
    -a.value(), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {t.accumulate(a, -g);});
}

template<typename Scalar>
BasicVar<Scalar> scale(const BasicVar<Scalar> & a, Scalar s)
{
  return detail::tape_of(a).record(
    a.value() * s, {a},
    [a, s](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {t.accumulate(a, g * s);});
}

template<typename Scalar>
BasicVar<Scalar> operator*(Scalar s, const BasicVar<Scalar> & a)
{
  return scale(a, s);
}

template<typename Scalar>
BasicVar<Scalar> add_scalar(const BasicVar<Scalar> & a, Scalar s)
{
  Matrix<Scalar> out = a.value().array() + s;
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {t.accumulate(a, g);});
}

template<typename Scalar>
BasicVar<Scalar> cwise_product(const BasicVar<Scalar> & a, const BasicVar<Scalar> & b)
{
  detail::require_same_shape("cwise_product", a, b);
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return detail::tape_of(a).record(
    std::move(out), {a, b},
    [a, b](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      if (t.requires_grad(a)) {t.accumulate(a, g.cwiseProduct(b.value()));}
      if (t.requires_grad(b)) {t.accumulate(b, g.cwiseProduct(a.value()));}
    });
}

/// a (R x C) plus a 1 x C row broadcast over rows.
template<typename Scalar>
BasicVar<Scalar> add_rowwise(const BasicVar<Scalar> & a, const BasicVar<Scalar> & row)
{
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError(
            "add_rowwise: " + shape_of(a.value()) + " + row " + shape_of(row.value()));
  }
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return detail::tape_of(a).record(
    std::move(out), {a, row},
    [a, row](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(a, g);
      if (t.requires_grad(row)) {t.accumulate(row, g.colwise().sum());}
    });
}

/// a (R x C) plus an R x 1 column broadcast over columns.
template<typename Scalar>
BasicVar<Scalar> add_colwise(const BasicVar<Scalar> & a, const BasicVar<Scalar> & col)
{
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError(
            "add_colwise: " + shape_of(a.value()) + " + col " + shape_of(col.value()));
  }
  Matrix<Scalar> out = a.value().colwise() + col.value().col(0);
  return detail::tape_of(a).record(
    std::move(out), {a, col},
    [a, col](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(a, g);
      if (t.requires_grad(col)) {t.accumulate(col, g.rowwise().sum());}
    });
}

/// Multiplies row r of `a` by col(r).
template<typename Scalar>
BasicVar<Scalar> scale_rows(const BasicVar<Scalar> & a, const BasicVar<Scalar> & col)
{
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError(
            "scale_rows: " + shape_of(a.value()) + " by " + shape_of(col.value()));
  }
  Matrix<Scalar> out = (a.value().array().colwise() * col.value().col(0).array()).matrix();
  return detail::tape_of(a).record(
    std::move(out), {a, col},
    [a, col](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      if (t.requires_grad(a)) {
        t.accumulate(a, (g.array().colwise() * col.value().col(0).array()).matrix());
      }
      if (t.requires_grad(col)) {
        t.accumulate(col, g.cwiseProduct(a.value()).rowwise().sum());
      }
    });
}

namespace detail
{

template<typename Scalar>
Matrix<Scalar> sigmoid_value(const Matrix<Scalar> & x)
{
  return x.unaryExpr(
    [](Scalar v) {
      return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v)) :
      std::exp(v) / (Scalar(1) + std::exp(v));
    });
}

}  // namespace detail

template<typename Scalar>
BasicVar<Scalar> sigmoid(const BasicVar<Scalar> & a)
{
  return detail::tape_of(a).record(
    detail::sigmoid_value(a.value()), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      const Matrix<Scalar> s = detail::sigmoid_value(a.value());
      t.accumulate(a, (g.array() * s.array() * (Scalar(1) - s.array())).matrix());
    });
}

template<typename Scalar>
BasicVar<Scalar> tanh(const BasicVar<Scalar> & a)
{
  return detail::tape_of(a).record(
    a.value().array().tanh().matrix(), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      const Matrix<Scalar> s = a.value().array().tanh().matrix();
      t.accumulate(a, (g.array() * (Scalar(1) - s.array().square())).matrix());
    });
}

template<typename Scalar>
BasicVar<Scalar> relu(const BasicVar<Scalar> & a)
{
  auto & tape = detail::tape_of(a);
  if (tape.recording()) {tape.note_kinks(a.value());}
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return tape.record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(
        a, (a.value().array() > Scalar(0)).select(g, Matrix<Scalar>::Zero(g.rows(), g.cols())));
    });
}

/// ELU with alpha = 1.
template<typename Scalar>
BasicVar<Scalar> elu(const BasicVar<Scalar> & a)
{
  Matrix<Scalar> out = a.value().unaryExpr(
    [](Scalar x) {return x > Scalar(0) ? x : std::expm1(x);});
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Matrix<Scalar> d = a.value().unaryExpr(
        [](Scalar x) {return x > Scalar(0) ? Scalar(1) : std::exp(x);});
      t.accumulate(a, g.cwiseProduct(d));
    });
}

template<typename Scalar>
BasicVar<Scalar> abs(const BasicVar<Scalar> & a)
{
  auto & tape = detail::tape_of(a);
  if (tape.recording()) {tape.note_kinks(a.value());}
  Matrix<Scalar> out = a.value().cwiseAbs();
  return tape.record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Matrix<Scalar> sign = a.value().unaryExpr(
        [](Scalar x) {return x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0));});
      t.accumulate(a, g.cwiseProduct(sign));
    });
}

template<typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar> & a)
{
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(a, Matrix<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
    });
}

template<typename Scalar>
BasicVar<Scalar> mean(const BasicVar<Scalar> & a)
{
  if (a.value().size() == 0) {
    throw DimensionError("mean of an empty tensor");
  }
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

/// R x C -> R x 1.
template<typename Scalar>
BasicVar<Scalar> row_sum(const BasicVar<Scalar> & a)
{
  Matrix<Scalar> out = a.value().rowwise().sum();
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate(a, g.col(0).replicate(1, a.cols()));
    });
}

template<typename Scalar>
BasicVar<Scalar> transpose(const BasicVar<Scalar> & a)
{
  Matrix<Scalar> out = a.value().transpose();
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {t.accumulate(a, g.transpose());});
}

/// Value copy that blocks gradient flow.
template<typename Scalar>
BasicVar<Scalar> detach(const BasicVar<Scalar> & a)
{
  return detail::tape_of(a).constant(a.value());
}

template<typename Scalar>
BasicVar<Scalar> concat_cols(const std::vector<BasicVar<Scalar>> & parts)
{
  if (parts.empty()) {
    throw DimensionError("concat_cols of nothing");
  }
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto & p : parts) {
    if (p.rows() != rows) {
      throw DimensionError(
              "concat_cols: row mismatch " + shape_of(parts.front().value()) + " vs " +
              shape_of(p.value()));
    }
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto & p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return detail::tape_of(parts.front()).record(
    std::move(out), parts,
    [parts](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Eigen::Index offset = 0;
      for (const auto & p : parts) {
        if (t.requires_grad(p)) {t.accumulate(p, g.middleCols(offset, p.cols()));}
        offset += p.cols();
      }
    });
}

template<typename Scalar>
BasicVar<Scalar> concat_rows(const std::vector<BasicVar<Scalar>> & parts)
{
  if (parts.empty()) {
    throw DimensionError("concat_rows of nothing");
  }
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto & p : parts) {
    if (p.cols() != cols) {
      throw DimensionError(
              "concat_rows: column mismatch " + shape_of(parts.front().value()) + " vs " +
              shape_of(p.value()));
    }
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto & p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return detail::tape_of(parts.front()).record(
    std::move(out), parts,
    [parts](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Eigen::Index offset = 0;
      for (const auto & p : parts) {
        if (t.requires_grad(p)) {t.accumulate(p, g.middleRows(offset, p.rows()));}
        offset += p.rows();
      }
    });
}

template<typename Scalar>
BasicVar<Scalar> slice_cols(const BasicVar<Scalar> & a, Eigen::Index start, Eigen::Index count)
{
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError(
            "slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) + ") of " +
            shape_of(a.value()));
  }
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a, start](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate_block(a, 0, start, g);
    });
}

template<typename Scalar>
BasicVar<Scalar> slice_rows(const BasicVar<Scalar> & a, Eigen::Index start, Eigen::Index count)
{
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError(
            "slice_rows [" + std::to_string(start) + ", +" + std::to_string(count) + ") of " +
            shape_of(a.value()));
  }
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a, start](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      t.accumulate_block(a, start, 0, g);
    });
}

/// Selects rows by index (repeats allowed).
template<typename Scalar>
BasicVar<Scalar> gather_rows(const BasicVar<Scalar> & a, std::vector<Eigen::Index> rows)
{
  Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) {
      throw DimensionError(
              "gather_rows: index " + std::to_string(rows[r]) + " outside " +
              shape_of(a.value()));
    }
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  }
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a, rows = std::move(rows)](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Matrix<Scalar> acc = Matrix<Scalar>::Zero(a.rows(), a.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        acc.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
      }
      t.accumulate(a, acc);
    });
}

/// out(r) = a(r, cols[r]); returns R x 1.
template<typename Scalar>
BasicVar<Scalar> pick(const BasicVar<Scalar> & a, std::vector<Eigen::Index> cols)
{
  if (static_cast<Eigen::Index>(cols.size()) != a.rows()) {
    throw DimensionError(
            "pick: " + std::to_string(cols.size()) + " indices for " + shape_of(a.value()));
  }
  Matrix<Scalar> out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (cols[r] < 0 || cols[r] >= a.cols()) {
      throw DimensionError(
              "pick: column " + std::to_string(cols[r]) + " outside " + shape_of(a.value()));
    }
    out(r, 0) = a.value()(r, cols[r]);
  }
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a, cols = std::move(cols)](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Matrix<Scalar> acc = Matrix<Scalar>::Zero(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        acc(r, cols[r]) = g(r, 0);
      }
      t.accumulate(a, acc);
    });
}

/// Row softmax of raw values with optional keep-mask (1 = keep). Masked entries are 0;
/// a fully masked row is all zeros. Subtracts the row max before exponentiating.
template<typename Scalar>
Matrix<Scalar> softmax_rows_value(const Matrix<Scalar> & x, const Matrix<Scalar> * mask = nullptr)
{
  Matrix<Scalar> y = Matrix<Scalar>::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c) != Scalar(0)) {best = std::max(best, x(r, c));}
    }
    if (best == -std::numeric_limits<Scalar>::infinity()) {
      continue;
    }
    Scalar total = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c) != Scalar(0)) {
        y(r, c) = std::exp(x(r, c) - best);
        total += y(r, c);
      }
    }
    y.row(r) /= total;
  }
  return y;
}

template<typename Scalar>
BasicVar<Scalar> softmax_rows(const BasicVar<Scalar> & a, const Matrix<Scalar> * mask = nullptr)
{
  if (mask != nullptr && (mask->rows() != a.rows() || mask->cols() != a.cols())) {
    throw DimensionError(
            "softmax_rows: mask " + shape_of(*mask) + " for " + shape_of(a.value()));
  }
  Matrix<Scalar> keep = mask != nullptr ? *mask : Matrix<Scalar>::Ones(a.rows(), a.cols());
  Matrix<Scalar> out = softmax_rows_value(a.value(), &keep);
  return detail::tape_of(a).record(
    std::move(out), {a},
    [a, keep = std::move(keep)](BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      const Matrix<Scalar> s = softmax_rows_value(a.value(), &keep);
      Matrix<Scalar> inner = g.cwiseProduct(s).rowwise().sum();
      t.accumulate(a, s.cwiseProduct(g - inner.replicate(1, g.cols())));
    });
}

/// Single-head causal self-attention applied independently to consecutive row blocks.
///
/// Rows of q, k, v are stacked sequences; `lengths` gives each block's row count. Within a
/// block, row i attends to rows 0..i with weights softmax(scale * q_i . k_j).
template<typename Scalar>
BasicVar<Scalar> causal_attention(
  const BasicVar<Scalar> & q, const BasicVar<Scalar> & k, const BasicVar<Scalar> & v,
  std::vector<Eigen::Index> lengths, Scalar scale_factor)
{
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols()) {
    throw DimensionError(
            "causal_attention: q " + shape_of(q.value()) + ", k " + shape_of(k.value()) +
            ", v " + shape_of(v.value()));
  }
  Eigen::Index total = 0;
  for (auto len : lengths) {
    total += len;
  }
  if (total != q.rows()) {
    throw DimensionError(
            "causal_attention: block lengths sum to " + std::to_string(total) + " for " +
            std::to_string(q.rows()) + " rows");
  }
  Matrix<Scalar> out(q.rows(), v.cols());
  std::vector<Matrix<Scalar>> weights;
  weights.reserve(lengths.size());
  Eigen::Index offset = 0;
  for (auto len : lengths) {
    Matrix<Scalar> scores = q.value().middleRows(offset, len) *
      k.value().middleRows(offset, len).transpose() * scale_factor;
    Matrix<Scalar> mask = Matrix<Scalar>::Zero(len, len);
    mask.template triangularView<Eigen::Lower>().setOnes();
    weights.push_back(softmax_rows_value(scores, &mask));
    out.middleRows(offset, len) = weights.back() * v.value().middleRows(offset, len);
    offset += len;
  }
  return detail::tape_of(q).record(
    std::move(out), {q, k, v},
    [q, k, v, lengths = std::move(lengths), weights = std::move(weights), scale_factor](
      BasicTape<Scalar> & t, const Matrix<Scalar> & g) {
      Matrix<Scalar> dq = Matrix<Scalar>::Zero(q.rows(), q.cols());
      Matrix<Scalar> dk = Matrix<Scalar>::Zero(k.rows(), k.cols());
      Matrix<Scalar> dv = Matrix<Scalar>::Zero(v.rows(), v.cols());
      Eigen::Index at = 0;
      for (std::size_t b = 0; b < lengths.size(); ++b) {
        const Eigen::Index len = lengths[b];
        const Matrix<Scalar> & w = weights[b];
        const auto gb = g.middleRows(at, len);
        dv.middleRows(at, len) = w.transpose() * gb;
        Matrix<Scalar> dw = gb * v.value().middleRows(at, len).transpose();
        Matrix<Scalar> inner = dw.cwiseProduct(w).rowwise().sum();
        Matrix<Scalar> ds = w.cwiseProduct(dw - inner.replicate(1, len)) * scale_factor;
        dq.middleRows(at, len) = ds * k.value().middleRows(at, len);
        dk.middleRows(at, len) = ds.transpose() * q.value().middleRows(at, len);
        at += len;
      }
      t.accumulate(q, dq);
      t.accumulate(k, dk);
      t.accumulate(v, dv);
    });
}

}  // namespace tomac::numerics
