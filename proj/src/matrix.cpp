#include "spdc/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spdc {

namespace {

void check_finite(const std::vector<double>& data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw Error("matrix entry is not finite");
  }
}

void check_square(const Matrix& m, const char* what) {
  if (!m.square()) throw DimensionError(std::string(what) + ": matrix must be square");
}

// Near-zero pivot test relative to the working U row, per lu_plain's
// contract. Row scale zero means the whole row vanished.
bool pivot_ok(double pivot, double row_scale) {
  if (row_scale == 0.0) return false;
  return std::fabs(pivot) >= 1e-12 * row_scale;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be >= 1");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be >= 1");
  if (data_.size() != rows * cols)
    throw DimensionError("matrix data length does not match rows*cols");
  check_finite(data_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  if (rows_ == 0 || cols_ == 0) throw DimensionError("matrix dimensions must be >= 1");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged initializer rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  check_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

double Matrix::max_abs() const {
  double mx = 0.0;
  for (double v : data_) mx = std::max(mx, std::fabs(v));
  return mx;
}

Rotation rotation_from_degrees(int deg) {
  switch (deg) {
    case 90: return Rotation::cw90;
    case 180: return Rotation::cw180;
    case 270: return Rotation::cw270;
    case 360: return Rotation::cw360;
  }
  throw Error("rotation must be one of 90, 180, 270, 360 degrees");
}

Matrix rotate(const Matrix& m, Rotation theta) {
  check_square(m, "rotate");
  const std::size_t n = m.rows();
  Matrix out(n, n);
  switch (theta) {
    case Rotation::cw90:
      // transpose, then reverse column order
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = m.at(n - 1 - j, i);
      break;
    case Rotation::cw180:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = m.at(n - 1 - i, n - 1 - j);
      break;
    case Rotation::cw270:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = m.at(j, n - 1 - i);
      break;
    case Rotation::cw360:
      out = m;
      break;
  }
  return out;
}

int rotation_sign(std::size_t n, Rotation theta) {
  if (n == 0) throw DimensionError("rotation_sign: n must be >= 1");
  if (theta == Rotation::cw180 || theta == Rotation::cw360) return 1;
  return (n / 2) % 2 == 0 ? 1 : -1;
}

Matrix augment(const Matrix& m, std::size_t p, AugmentFill fill, std::mt19937_64& rng) {
  check_square(m, "augment");
  auto draw = [&rng]() {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  };
  Matrix cur = m;
  for (std::size_t step = 0; step < p; ++step) {
    const std::size_t n = cur.rows();
    Matrix next(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next.at(i, j) = cur.at(i, j);
    next.at(n, n) = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (fill == AugmentFill::zero_col) {
        next.at(k, n) = 0.0;
        next.at(n, k) = draw();
      } else {
        next.at(n, k) = 0.0;
        next.at(k, n) = draw();
      }
    }
    cur = std::move(next);
  }
  return cur;
}

BlockGrid::BlockGrid(std::size_t n_servers, std::size_t block_size, std::vector<Matrix> blocks)
    : n_(n_servers), block_size_(block_size), blocks_(std::move(blocks)) {
  if (n_ < 1 || block_size_ <= 1) throw DimensionError("block grid needs block size > 1");
  if (blocks_.size() != n_ * n_) throw DimensionError("block grid needs N*N blocks");
  for (const auto& b : blocks_) {
    if (b.rows() != block_size_ || b.cols() != block_size_)
      throw DimensionError("block grid blocks must all be block_size square");
  }
}

Matrix BlockGrid::reassemble() const {
  const std::size_t side = n_ * block_size_;
  Matrix out(side, side);
  for (std::size_t bi = 0; bi < n_; ++bi)
    for (std::size_t bj = 0; bj < n_; ++bj) {
      const Matrix& b = block(bi, bj);
      for (std::size_t i = 0; i < block_size_; ++i)
        for (std::size_t j = 0; j < block_size_; ++j)
          out.at(bi * block_size_ + i, bj * block_size_ + j) = b.at(i, j);
    }
  return out;
}

BlockGrid partition(const Matrix& m, std::size_t n_servers) {
  check_square(m, "partition");
  const std::size_t side = m.rows();
  if (n_servers < 1) throw DimensionError("partition: need at least one server");
  if (side % n_servers != 0 || side / n_servers <= 1)
    throw DimensionError(
        "partition: matrix side must be divisible by the server count with "
        "block size > 1; pad the matrix first");
  const std::size_t bs = side / n_servers;
  std::vector<Matrix> blocks;
  blocks.reserve(n_servers * n_servers);
  for (std::size_t bi = 0; bi < n_servers; ++bi)
    for (std::size_t bj = 0; bj < n_servers; ++bj) {
      Matrix b(bs, bs);
      for (std::size_t i = 0; i < bs; ++i)
        for (std::size_t j = 0; j < bs; ++j)
          b.at(i, j) = m.at(bi * bs + i, bj * bs + j);
      blocks.push_back(std::move(b));
    }
  return BlockGrid(n_servers, bs, std::move(blocks));
}

DetValue det_oracle(const Matrix& m) {
  check_square(m, "det_oracle");
  const std::size_t n = m.rows();
  std::vector<double> a = m.data();
  auto at = [&a, n](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  DetValue det = DetValue::one();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(at(i, k)) > std::fabs(at(piv, k))) piv = i;
    if (at(piv, k) == 0.0) return DetValue::zero();
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(at(piv, j), at(k, j));
      det.flip_sign(-1);
    }
    det.scale(at(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = at(i, k) / at(k, k);
      for (std::size_t j = k + 1; j < n; ++j) at(i, j) -= f * at(k, j);
    }
  }
  return det;
}

LuPair lu_plain(const Matrix& m, std::uint64_t* flops) {
  check_square(m, "lu_plain");
  const std::size_t n = m.rows();
  Matrix l = Matrix::identity(n);
  Matrix u(n, n);
  std::uint64_t ops = 0;

  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = k; j < n; ++j) {
      double s = m.at(k, j);
      for (std::size_t t = 0; t < k; ++t) {
        s -= l.at(k, t) * u.at(t, j);
        ops += 2;
      }
      u.at(k, j) = s;
    }
    double row_scale = 0.0;
    for (std::size_t j = k; j < n; ++j) row_scale = std::max(row_scale, std::fabs(u.at(k, j)));
    if (!pivot_ok(u.at(k, k), row_scale))
      throw SingularPivotError("lu_plain: zero or near-zero pivot at row " + std::to_string(k + 1));
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = m.at(i, k);
      for (std::size_t t = 0; t < k; ++t) {
        s -= l.at(i, t) * u.at(t, k);
        ops += 2;
      }
      l.at(i, k) = s / u.at(k, k);
      ops += 1;
    }
  }
  if (flops) *flops += ops;
  return {std::move(l), std::move(u)};
}

Matrix multiply(const Matrix& a, const Matrix& b, std::uint64_t* flops) {
  if (a.cols() != b.rows()) throw DimensionError("multiply: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
    }
  if (flops) *flops += 2ull * a.rows() * a.cols() * b.cols();
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b, std::uint64_t* flops) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("subtract: shapes differ");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j) - b.at(i, j);
  if (flops) *flops += a.rows() * a.cols();
  return out;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x, std::uint64_t* flops) {
  if (a.cols() != x.size()) throw DimensionError("matvec: size mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a.at(i, j) * x[j];
  if (flops) *flops += 2ull * a.rows() * a.cols();
  return y;
}

std::vector<double> matvec_transposed(const Matrix& a, const std::vector<double>& x,
                                      std::uint64_t* flops) {
  if (a.rows() != x.size()) throw DimensionError("matvec_transposed: size mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += a.at(i, j) * x[i];
  if (flops) *flops += 2ull * a.rows() * a.cols();
  return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b, std::uint64_t* flops) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  if (flops) *flops += 2ull * a.size();
  return s;
}

Matrix solve_unit_lower(const Matrix& l, const Matrix& b, std::uint64_t* flops) {
  if (!l.square() || l.rows() != b.rows())
    throw DimensionError("solve_unit_lower: size mismatch");
  const std::size_t n = l.rows();
  Matrix y = b;
  std::uint64_t ops = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = b.at(i, j);
      for (std::size_t t = 0; t < i; ++t) {
        s -= l.at(i, t) * y.at(t, j);
        ops += 2;
      }
      y.at(i, j) = s;  // unit diagonal: no division
    }
  if (flops) *flops += ops;
  return y;
}

Matrix solve_upper_right(const Matrix& b, const Matrix& u, std::uint64_t* flops) {
  if (!u.square() || b.cols() != u.rows())
    throw DimensionError("solve_upper_right: size mismatch");
  const std::size_t n = u.rows();
  Matrix y(b.rows(), n);
  std::uint64_t ops = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double col_scale = 0.0;
    for (std::size_t t = 0; t <= j; ++t) col_scale = std::max(col_scale, std::fabs(u.at(t, j)));
    if (!pivot_ok(u.at(j, j), col_scale))
      throw SingularPivotError("solve_upper_right: singular diagonal at column " +
                               std::to_string(j + 1));
    for (std::size_t i = 0; i < b.rows(); ++i) {
      double s = b.at(i, j);
      for (std::size_t t = 0; t < j; ++t) {
        s -= y.at(i, t) * u.at(t, j);
        ops += 2;
      }
      y.at(i, j) = s / u.at(j, j);
      ops += 1;
    }
  }
  if (flops) *flops += ops;
  return y;
}

}  // namespace spdc
