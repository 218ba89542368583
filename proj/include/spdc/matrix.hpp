#ifndef SPDC_MATRIX_HPP
#define SPDC_MATRIX_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "spdc/det_value.hpp"
#include "spdc/error.hpp"

namespace spdc {

// Dense real matrix, row-major. Entries are validated finite on
// construction; all operations treat matrices as immutable values.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  std::size_t size() const { return data_.size(); }

  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  double max_abs() const;

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

// Clockwise rotation angle; the only matrix rotations with a proven
// determinant sign law, all others are rejected.
enum class Rotation { cw90 = 90, cw180 = 180, cw270 = 270, cw360 = 360 };

Rotation rotation_from_degrees(int deg);
inline int degrees(Rotation r) { return static_cast<int>(r); }

// How an augmentation border is zero-filled: the new column (entries above
// the unit corner) or the new row.
enum class AugmentFill { zero_col, zero_row };

// Clockwise rotation as a pure index permutation; entries are never
// recomputed, so rotation is exact.
Matrix rotate(const Matrix& m, Rotation theta);

// Determinant sign factor of an n x n rotation: (-1)^floor(n/2) for 90/270
// degrees, +1 for 180/360.
int rotation_sign(std::size_t n, Rotation theta);

// Grows m by p unit-diagonal borders, one at a time. The zeroed side makes
// each step block-triangular, so the determinant is preserved exactly; the
// other side is filled from rng draws in [-1, 1].
Matrix augment(const Matrix& m, std::size_t p, AugmentFill fill, std::mt19937_64& rng);

// N x N grid of square blocks covering a matrix whose side is divisible
// by N. Block coordinates are 0-based; block (i,j) holds rows/cols of the
// (i+1, j+1) block position.
class BlockGrid {
 public:
  BlockGrid(std::size_t n_servers, std::size_t block_size, std::vector<Matrix> blocks);

  std::size_t servers() const { return n_; }
  std::size_t block_size() const { return block_size_; }

  const Matrix& block(std::size_t i, std::size_t j) const { return blocks_[i * n_ + j]; }

  Matrix reassemble() const;

 private:
  std::size_t n_, block_size_;
  std::vector<Matrix> blocks_;
};

BlockGrid partition(const Matrix& m, std::size_t n_servers);

// Reference determinant: LU with partial pivoting accumulated in sign/log
// form. Exactly-zero pivot after pivoting reports a zero determinant.
DetValue det_oracle(const Matrix& m);

struct LuPair {
  Matrix l, u;
};

// Doolittle factorization, no pivoting, unit diagonal L. A pivot smaller
// than 1e-12 times the max magnitude of its U row is rejected as singular.
LuPair lu_plain(const Matrix& m, std::uint64_t* flops = nullptr);

// Arithmetic helpers. Each optionally accumulates its scalar operation
// count (mul/add/div all count 1) into *flops.
Matrix multiply(const Matrix& a, const Matrix& b, std::uint64_t* flops = nullptr);
Matrix subtract(const Matrix& a, const Matrix& b, std::uint64_t* flops = nullptr);
std::vector<double> matvec(const Matrix& a, const std::vector<double>& x,
                           std::uint64_t* flops = nullptr);
std::vector<double> matvec_transposed(const Matrix& a, const std::vector<double>& x,
                                      std::uint64_t* flops = nullptr);
double dot(const std::vector<double>& a, const std::vector<double>& b,
           std::uint64_t* flops = nullptr);

// Solve L * Y = B with L unit lower triangular (forward substitution).
Matrix solve_unit_lower(const Matrix& l, const Matrix& b, std::uint64_t* flops = nullptr);

// Solve Y * U = B with U upper triangular (column-wise substitution);
// rejects a near-zero diagonal like lu_plain.
Matrix solve_upper_right(const Matrix& b, const Matrix& u, std::uint64_t* flops = nullptr);

}  // namespace spdc

#endif
