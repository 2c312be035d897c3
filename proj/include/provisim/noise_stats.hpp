#pragma once

// Sliding-window process-noise estimation from differenced observations.
//
// Each component keeps the last T differences z_t = y_t - y_{t-1}. With the
// measurement noise pinned, var(z) is dominated by the random-walk increment
// variance, so the per-step process variance is the window's population
// variance divided by T. Cross-covariances use the same scaling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "provisim/errors.hpp"
#include "provisim/matrix.hpp"

namespace provisim {

inline constexpr double kCorrelationShrink = 1.0 - 1e-9;

class DiffWindow {
 public:
  DiffWindow(std::size_t components, std::size_t capacity)
      : capacity_(capacity), diffs_(components) {
    if (components == 0 || components > kMaxDim) {
      throw UsageError("DiffWindow: component count must be in [1, 8]");
    }
    if (capacity == 0) throw UsageError("DiffWindow: capacity must be >= 1");
  }

  // The first observation only primes y_prev.
  void push(std::span<const double> y) {
    if (y.size() != diffs_.size()) {
      throw UsageError("DiffWindow::push: expected " + std::to_string(diffs_.size()) +
                       " components, got " + std::to_string(y.size()));
    }
    for (double v : y) {
      if (!std::isfinite(v)) throw InputError("DiffWindow::push: non-finite observation");
    }
    if (prev_) {
      for (std::size_t i = 0; i < y.size(); ++i) {
        auto& buf = diffs_[i];
        buf.push_back(y[i] - (*prev_)[i]);
        if (buf.size() > capacity_) buf.pop_front();
      }
    }
    prev_ = Vec(y.begin(), y.end());
  }

  void clear() {
    for (auto& d : diffs_) d.clear();
    prev_.reset();
  }

  std::size_t components() const noexcept { return diffs_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return diffs_.front().size(); }
  bool full() const noexcept { return size() == capacity_; }
  const std::optional<Vec>& previous() const noexcept { return prev_; }
  const std::deque<double>& diffs(std::size_t component) const { return diffs_.at(component); }

 private:
  std::size_t capacity_;
  std::vector<std::deque<double>> diffs_;
  std::optional<Vec> prev_;
};

// (1/T) * [ sum(z^2)/T - (sum(z)/T)^2 ]. Empty while the window warms up.
inline std::optional<double> estimate_siso_variance(const DiffWindow& w, std::size_t component) {
  if (component >= w.components()) throw UsageError("estimate_siso_variance: bad component");
  if (!w.full()) return std::nullopt;
  const auto& z = w.diffs(component);
  const double t = static_cast<double>(w.capacity());
  double sum = 0.0, sum_sq = 0.0;
  for (double v : z) {
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / t;
  // Raw-moment form can go slightly negative through cancellation.
  return std::max(0.0, (sum_sq / t - mean * mean) / t);
}

// Clamp each off-diagonal to just inside sqrt(W_ii W_jj). For n > 2 the
// pairwise clamp alone does not guarantee PSD, so off-diagonals are then
// shrunk toward zero until the matrix passes.
inline Mat repair_psd(Mat w) {
  w.require_square("repair_psd");
  const std::size_t n = w.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double bound = std::sqrt(std::max(0.0, w(i, i)) * std::max(0.0, w(j, j))) * kCorrelationShrink;
      const double v = std::clamp(0.5 * (w(i, j) + w(j, i)), -bound, bound);
      w(i, j) = v;
      w(j, i) = v;
    }
  for (int iter = 0; iter < 64 && n > 2 && !is_positive_semidefinite(w, 0.0); ++iter) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) w(i, j) *= 0.5;
  }
  return w;
}

inline std::optional<Mat> estimate_mimo_covariance(const DiffWindow& w) {
  if (!w.full()) return std::nullopt;
  const std::size_t n = w.components();
  const double t = static_cast<double>(w.capacity());
  Vec mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : w.diffs(i)) mean[i] += v;
    mean[i] /= t;
  }
  Mat out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out(i, i) = *estimate_siso_variance(w, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& zi = w.diffs(i);
      const auto& zj = w.diffs(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < zi.size(); ++k) acc += (zi[k] - mean[i]) * (zj[k] - mean[j]);
      out(i, j) = out(j, i) = (acc / t) / t;
    }
  }
  return repair_psd(std::move(out));
}

}  // namespace provisim
