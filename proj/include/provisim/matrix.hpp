#pragma once

// Small dense row-major matrices for the filters. Dimensions stay tiny
// (one entry per controlled component, at most kMaxDim), so everything is
// plain loops over a std::vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "provisim/errors.hpp"

namespace provisim {

using Vec = std::vector<double>;

inline constexpr std::size_t kMaxDim = 8;
inline constexpr double kSingularTol = 1e-12;
inline constexpr double kDefiniteTol = 1e-12;

class Mat {
 public:
  Mat() : Mat(1, 1) {}

  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw UsageError("Mat: rows and cols must be >= 1");
    }
  }

  // Row-major nested initializer: Mat{{1, 2}, {3, 4}}.
  Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    if (rows_ == 0 || cols_ == 0) {
      throw UsageError("Mat: empty initializer");
    }
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) {
        throw UsageError("Mat: ragged initializer");
      }
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Mat identity(std::size_t n) { return scaled_identity(n, 1.0); }

  static Mat scaled_identity(std::size_t n, double s) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = s;
    return m;
  }

  static Mat diagonal(std::span<const double> d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static Mat column(std::span<const double> v) {
    Mat m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> entries() const noexcept { return data_; }

  Mat transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  // (M + M^T) / 2
  Mat symmetrized() const {
    require_square("symmetrized");
    Mat s(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c)
        s(r, c) = 0.5 * ((*this)(r, c) + (*this)(c, r));
    return s;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Mat& operator+=(const Mat& o) {
    require_same_shape(o, "+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    require_same_shape(o, "-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double s) { return a *= s; }
  friend Mat operator*(double s, Mat a) { return a *= s; }

  friend bool operator==(const Mat&, const Mat&) = default;

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t r = 0; r < rows_; ++r) {
      os << (r ? ", [" : "[");
      for (std::size_t c = 0; c < cols_; ++c) os << (c ? ", " : "") << (*this)(r, c);
      os << ']';
    }
    os << ']';
    return os.str();
  }

  void require_square(const char* op) const {
    if (!square()) {
      throw UsageError(std::string(op) + ": matrix must be square, got " + shape());
    }
  }

  std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

 private:
  void require_same_shape(const Mat& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw UsageError(std::string("Mat ") + op + ": shape mismatch " + shape() + " vs " + o.shape());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Mat mat_mul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw UsageError("mat_mul: dimension mismatch " + a.shape() + " x " + b.shape());
  }
  Mat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

inline Mat operator*(const Mat& a, const Mat& b) { return mat_mul(a, b); }

inline Vec mat_vec(const Mat& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw UsageError("mat_vec: dimension mismatch " + a.shape() + " x " + std::to_string(x.size()));
  }
  Vec out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out[i] += a(i, j) * x[j];
  return out;
}

inline Vec vec_sub(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("vec_sub: size mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vec vec_add(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("vec_add: size mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

// Gauss-Jordan elimination with partial pivoting.
inline Mat mat_inv(const Mat& a, double tol = kSingularTol) {
  a.require_square("mat_inv");
  const std::size_t n = a.rows();
  Mat work = a;
  Mat inv = Mat::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(work(r, col)) > std::abs(work(piv, col))) piv = r;
    const double p = work(piv, col);
    if (!(std::abs(p) > tol)) {
      throw NumericalError("mat_inv: singular matrix (pivot " + std::to_string(p) + " in column " +
                               std::to_string(col) + ")",
                           p);
    }
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(work(piv, c), work(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    }
    const double scale = 1.0 / p;
    for (std::size_t c = 0; c < n; ++c) {
      work(col, c) *= scale;
      inv(col, c) *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        work(r, c) -= f * work(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

// Leading principal minors of the symmetric part, computed by elimination
// without pivoting (valid because we stop at the first non-positive pivot).
inline bool is_positive_definite(const Mat& a, double tol = kDefiniteTol) {
  a.require_square("is_positive_definite");
  Mat s = a.symmetrized();
  const std::size_t n = s.rows();
  double minor = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pivot = s(k, k);
    if (!std::isfinite(pivot)) return false;
    minor *= pivot;
    if (!(pivot > 0.0) || !(minor > tol)) return false;
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = s(r, k) / pivot;
      for (std::size_t c = k; c < n; ++c) s(r, c) -= f * s(k, c);
    }
  }
  return true;
}

// Eigenvalues of the symmetric part by cyclic Jacobi rotations, ascending.
inline Vec symmetric_eigenvalues(const Mat& a) {
  a.require_square("symmetric_eigenvalues");
  Mat s = a.symmetrized();
  const std::size_t n = s.rows();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s(p, q) == 0.0) continue;
        const double tau = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
    }
  }
  Vec ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = s(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline bool is_positive_semidefinite(const Mat& a, double tol = 1e-9) {
  const Vec ev = symmetric_eigenvalues(a);
  double scale = 1.0;
  for (double v : ev) scale = std::max(scale, std::abs(v));
  return ev.front() >= -tol * scale;
}

// x^T M x
inline double weighted_sq_norm(std::span<const double> x, const Mat& m) {
  m.require_square("weighted_sq_norm");
  if (m.rows() != x.size()) {
    throw UsageError("weighted_sq_norm: dimension mismatch " + m.shape() + " vs " +
                     std::to_string(x.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) acc += x[i] * m(i, j) * x[j];
  return acc;
}

}  // namespace provisim
