#include "ftstab/matkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ftstab {

namespace {

std::string dims(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

// ===== Mat =====

Mat::Mat(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw_shape("Mat: " + std::to_string(data_.size()) + " values for a " +
                std::to_string(rows_) + "x" + std::to_string(cols_) + " matrix");
  }
  if (!all_finite()) {
    throw_contract("Mat: non-finite entry in input data");
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw_shape("Mat::from_rows: ragged row lengths");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Mat(r, c, std::move(data));
}

double Mat::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) {
    throw_shape("Mat::at: (" + std::to_string(i) + "," + std::to_string(j) +
                ") outside " + dims(*this));
  }
  return (*this)(i, j);
}

Mat Mat::transpose() const {
  Mat t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Mat Mat::block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
  if (r0 + rows > rows_ || c0 + cols > cols_) {
    throw_shape("Mat::block: [" + std::to_string(r0) + "+" + std::to_string(rows) + "," +
                std::to_string(c0) + "+" + std::to_string(cols) + ") outside " + dims(*this));
  }
  Mat out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = (*this)(r0 + i, c0 + j);
  return out;
}

void Mat::set_block(std::size_t r0, std::size_t c0, const Mat& src) {
  if (r0 + src.rows() > rows_ || c0 + src.cols() > cols_) {
    throw_shape("Mat::set_block: " + dims(src) + " at (" + std::to_string(r0) + "," +
                std::to_string(c0) + ") outside " + dims(*this));
  }
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) (*this)(r0 + i, c0 + j) = src(i, j);
}

double Mat::frob_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

double Mat::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Mat::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat& Mat::operator+=(const Mat& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw_shape("Mat +: " + dims(*this) + " vs " + dims(rhs));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Mat& Mat::operator-=(const Mat& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw_shape("Mat -: " + dims(*this) + " vs " + dims(rhs));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Mat& Mat::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator*(double s, Mat a) { return a *= s; }
Mat operator-(Mat a) { return a *= -1.0; }

Mat operator*(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw_shape("Mat *: " + dims(a) + " vs " + dims(b));
  }
  Mat out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double aik = ad[i * k + l];
      if (aik == 0.0) continue;
      const double* brow = bd + l * m;
      double* orow = od + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// ===== SymMat =====

SymMat::SymMat(const Mat& raw, double residual_cap) {
  if (raw.rows() != raw.cols()) {
    throw_shape("SymMat: input is " + dims(raw) + ", must be square");
  }
  const std::size_t n = raw.rows();
  double worst = 0.0;
  Mat sym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      worst = std::max(worst, std::abs(raw(i, j) - raw(j, i)));
      const double v = 0.5 * (raw(i, j) + raw(j, i));
      sym(i, j) = v;
      sym(j, i) = v;
    }
  }
  asym_ = worst / (1.0 + raw.max_abs());
  if (asym_ > residual_cap) {
    throw_contract("SymMat: relative asymmetry " + std::to_string(asym_) + " exceeds " +
                   std::to_string(residual_cap));
  }
  m_ = std::move(sym);
}

SymMat SymMat::identity(std::size_t n) { return SymMat(Mat::identity(n)); }

SymMat SymMat::zero(std::size_t n) { return SymMat(Mat(n, n)); }

SymMat SymMat::scaled_identity(std::size_t n, double value) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = value;
  return SymMat(m);
}

// ===== eigendecomposition =====

namespace {

double offdiag_frob(const Mat& a) {
  const std::size_t n = a.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(acc);
}

// One Jacobi rotation zeroing a(p,q), accumulated into v.
void jacobi_rotate(Mat& a, Mat& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (theta >= 0.0) {
    t = 1.0 / (theta + std::sqrt(1.0 + theta * theta));
  } else {
    t = -1.0 / (-theta + std::sqrt(1.0 + theta * theta));
  }
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  const std::size_t n = a.rows();
  const double app = a(p, p), aqq = a(q, q);
  a(p, p) = app - t * apq;
  a(q, q) = aqq + t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == p || i == q) continue;
    const double aip = a(i, p), aiq = a(i, q);
    a(i, p) = aip - s * (aiq + tau * aip);
    a(p, i) = a(i, p);
    a(i, q) = aiq + s * (aip - tau * aiq);
    a(q, i) = a(i, q);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double vip = v(i, p), viq = v(i, q);
    v(i, p) = vip - s * (viq + tau * vip);
    v(i, q) = viq + s * (vip - tau * viq);
  }
}

}  // namespace

EigResult sym_eig(const SymMat& s) {
  const std::size_t n = s.dim();
  Mat a = s.mat();
  Mat v = Mat::identity(n);

  if (n > 1) {
    const double thresh = 1e-14 * a.frob_norm();
    constexpr int kMaxSweeps = 64;
    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
      if (offdiag_frob(a) <= thresh) break;
      for (std::size_t p = 0; p + 1 < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) jacobi_rotate(a, v, p, q);
    }
    if (sweep == kMaxSweeps && offdiag_frob(a) > thresh) {
      throw_internal("sym_eig: no convergence after " + std::to_string(kMaxSweeps) +
                     " sweeps on a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigResult out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

double eig_max(const SymMat& s) {
  if (s.dim() == 0) throw_shape("eig_max: empty matrix");
  return sym_eig(s).values.front();
}

double eig_min(const SymMat& s) {
  if (s.dim() == 0) throw_shape("eig_min: empty matrix");
  return sym_eig(s).values.back();
}

// ===== structured products =====

Mat kron(const Mat& a, const Mat& b, std::size_t entry_cap) {
  const std::size_t rows = a.rows() * b.rows();
  const std::size_t cols = a.cols() * b.cols();
  if (rows != 0 && cols > entry_cap / rows) {
    throw_size_limit("kron: result " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " exceeds the cap of " + std::to_string(entry_cap) + " entries");
  }
  Mat out(rows, cols);
  for (std::size_t ia = 0; ia < a.rows(); ++ia)
    for (std::size_t ja = 0; ja < a.cols(); ++ja) {
      const double av = a(ia, ja);
      if (av == 0.0) continue;
      for (std::size_t ib = 0; ib < b.rows(); ++ib)
        for (std::size_t jb = 0; jb < b.cols(); ++jb)
          out(ia * b.rows() + ib, ja * b.cols() + jb) = av * b(ib, jb);
    }
  return out;
}

Mat vstack(std::span<const Mat> blocks) {
  if (blocks.empty()) throw_shape("vstack: empty block list");
  const std::size_t cols = blocks.front().cols();
  std::size_t rows = 0;
  for (const Mat& b : blocks) {
    if (b.cols() != cols) {
      throw_shape("vstack: block with " + std::to_string(b.cols()) + " cols among " +
                  std::to_string(cols) + "-col blocks");
    }
    rows += b.rows();
  }
  Mat out(rows, cols);
  std::size_t r0 = 0;
  for (const Mat& b : blocks) {
    out.set_block(r0, 0, b);
    r0 += b.rows();
  }
  return out;
}

Mat vstack(std::initializer_list<Mat> blocks) {
  std::vector<Mat> v(blocks);
  return vstack(std::span<const Mat>(v));
}

Mat block_trace(const Mat& a, std::size_t r) {
  if (a.rows() != a.cols()) throw_shape("block_trace: input is " + dims(a) + ", must be square");
  if (r == 0 || a.rows() % r != 0) {
    throw_shape("block_trace: dim " + std::to_string(a.rows()) + " not divisible into " +
                std::to_string(r) + " blocks");
  }
  const std::size_t s = a.rows() / r;
  Mat out(s, s);
  for (std::size_t blk = 0; blk < r; ++blk) {
    const std::size_t o = blk * s;
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) out(i, j) += a(o + i, o + j);
  }
  return out;
}

// ===== definite-matrix helpers =====

SqrtPair psd_sqrt_pair(const SymMat& s) {
  const EigResult eig = sym_eig(s);
  const std::size_t n = s.dim();
  if (n == 0) throw_shape("psd_sqrt_pair: empty matrix");
  const double lo = eig.values.back();
  const double hi = eig.values.front();
  if (lo <= 1e-12 * hi) {
    throw_definiteness("psd_sqrt_pair: eigenvalue " + std::to_string(lo) +
                       " is not positive enough relative to the largest eigenvalue " +
                       std::to_string(hi));
  }
  Mat root(n, n), inv_root(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double prod = eig.vectors(i, k) * eig.vectors(j, k);
        const double sq = std::sqrt(eig.values[k]);
        a += prod * sq;
        b += prod / sq;
      }
      root(i, j) = a;
      root(j, i) = a;
      inv_root(i, j) = b;
      inv_root(j, i) = b;
    }
  }
  return SqrtPair{SymMat(root), SymMat(inv_root)};
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  const Mat gram = a.rows() >= a.cols() ? a.transpose() * a : a * a.transpose();
  const double top = eig_max(SymMat(gram));
  return top > 0.0 ? std::sqrt(top) : 0.0;
}

DomResult psd_dominates(const SymMat& big, const SymMat& small, double tol) {
  if (big.dim() != small.dim()) {
    throw_shape("psd_dominates: dims " + std::to_string(big.dim()) + " vs " +
                std::to_string(small.dim()));
  }
  const SymMat diff(big.mat() - small.mat());
  const double margin = eig_min(diff);
  const EigResult be = sym_eig(big);
  const double norm2 =
      be.values.empty() ? 0.0 : std::max(std::abs(be.values.front()), std::abs(be.values.back()));
  const double threshold = -tol * (1.0 + norm2);
  return DomResult{margin >= threshold, margin, threshold};
}

}  // namespace ftstab
