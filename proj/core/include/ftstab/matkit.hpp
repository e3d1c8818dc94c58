#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "ftstab/errors.hpp"

namespace ftstab {

// Hard cap on entries a single constructed product (kron) may have. The
// stacked transition matrices grow as 4^depth, so unbounded requests are a
// usage error, not an allocation problem to discover via bad_alloc.
inline constexpr std::size_t kEntryCap = std::size_t{1} << 24;

// Dense row-major matrix of doubles with value semantics. This is the whole
// linear-algebra surface of the library; it is deliberately self-contained.
class Mat {
public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols);  // zero-filled
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const;  // bounds-checked

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  Mat transpose() const;
  Mat block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const;
  void set_block(std::size_t r0, std::size_t c0, const Mat& src);

  double frob_norm() const;
  double max_abs() const;
  bool all_finite() const noexcept;

  Mat& operator+=(const Mat& rhs);
  Mat& operator-=(const Mat& rhs);
  Mat& operator*=(double s);

  friend bool operator==(const Mat& a, const Mat& b) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(const Mat& a, const Mat& b);
Mat operator*(double s, Mat a);
Mat operator-(Mat a);

// Symmetric square matrix. Construction symmetrizes (S+S')/2 and records the
// relative asymmetry of the input; anything beyond `residual_cap` means the
// caller handed over data that was never meant to be symmetric, which is a
// contract error rather than something to silently average away.
class SymMat {
public:
  explicit SymMat(const Mat& raw, double residual_cap = 1e-9);

  static SymMat identity(std::size_t n);
  static SymMat zero(std::size_t n);
  static SymMat scaled_identity(std::size_t n, double value);

  std::size_t dim() const noexcept { return m_.rows(); }
  const Mat& mat() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  // Relative asymmetry of the matrix this was constructed from.
  double asymmetry() const noexcept { return asym_; }

private:
  SymMat() = default;
  Mat m_;
  double asym_ = 0.0;
};

// Eigenvalues sorted descending; eigenvectors are the matching columns of an
// orthonormal matrix.
struct EigResult {
  std::vector<double> values;
  Mat vectors;
};

// Cyclic Jacobi eigendecomposition. Converges when the off-diagonal Frobenius
// mass falls below 1e-14 * ||S||_F.
EigResult sym_eig(const SymMat& s);

double eig_max(const SymMat& s);
double eig_min(const SymMat& s);

Mat kron(const Mat& a, const Mat& b, std::size_t entry_cap = kEntryCap);
Mat vstack(std::span<const Mat> blocks);
Mat vstack(std::initializer_list<Mat> blocks);

// Sum of the r diagonal sub-blocks of a square matrix whose dimension is
// divisible by r. Preserves the scalar trace exactly (same additions, reordered).
Mat block_trace(const Mat& a, std::size_t r);

struct SqrtPair {
  SymMat root;
  SymMat inv_root;
};

// Symmetric square root and inverse square root of a positive definite
// matrix. Rejects inputs whose smallest eigenvalue is <= 1e-12 * largest.
SqrtPair psd_sqrt_pair(const SymMat& s);

struct DomResult {
  bool holds;
  double margin;     // eig_min(big - small)
  double threshold;  // -tol * (1 + ||big||_2), the acceptance line
};

// Loewner comparison big >= small with a relative tolerance.
DomResult psd_dominates(const SymMat& big, const SymMat& small, double tol = 1e-9);

// Largest singular value, via the Gram of the (smaller) side.
double spectral_norm(const Mat& a);

}  // namespace ftstab
