#pragma once

// Predict/update recursions for the three utilization trackers: the Kalman
// baseline, the H-infinity (minimax) filter and the maximum correntropy
// criterion Kalman filter (MCC-KF). Each comes in a matrix form for jointly
// tracked components and a scalar form for a single component.
//
// Every step is a pure function (state, observation, noise) -> state: the
// prior is formed from the previous posterior, then corrected with y.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "provisim/errors.hpp"
#include "provisim/matrix.hpp"

namespace provisim {

enum class FilterKind { kalman, hinf, mcc };

inline const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::kalman: return "kalman";
    case FilterKind::hinf: return "hinf";
    case FilterKind::mcc: return "mcc";
  }
  return "?";
}

inline constexpr double kKernelWeightMin = 1e-12;
inline constexpr double kKernelWeightMax = 1e12;

struct FilterState {
  Vec x;        // posterior x_{k|k}
  Mat P;        // posterior covariance P_{k|k}
  Vec x_pred;   // prior x_{k|k-1}
  Mat P_pred;   // prior covariance P_{k|k-1}
  Mat gain;     // last gain K_k (zero before the first update)
  double kernel_weight = 1.0;        // last MCC weight L_k
  std::uint64_t kernel_underflows = 0;

  static FilterState initial(std::span<const double> x0, const Mat& P0) {
    P0.require_square("FilterState::initial");
    if (P0.rows() != x0.size()) throw UsageError("FilterState::initial: P0 does not match x0");
    FilterState s;
    s.x.assign(x0.begin(), x0.end());
    s.P = P0;
    s.x_pred = s.x;
    s.P_pred = P0;
    s.gain = Mat(x0.size(), x0.size());
    return s;
  }

  std::size_t dim() const noexcept { return x.size(); }
};

struct SystemMatrices {
  Mat A;
  Mat C;

  static SystemMatrices identity(std::size_t n) { return {Mat::identity(n), Mat::identity(n)}; }
};

struct HinfConfig {
  double theta = 0.7;
  Mat D = Mat::scaled_identity(1, 10.0);  // allowable error per component, pp

  void validate() const {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw UsageError("HinfConfig: theta must be > 0");
    D.require_square("HinfConfig::D");
    for (std::size_t i = 0; i < D.rows(); ++i)
      for (std::size_t j = 0; j < D.cols(); ++j) {
        if (i == j ? !(D(i, j) > 0.0) : D(i, j) != 0.0) {
          throw UsageError("HinfConfig: D must be diagonal with positive entries");
        }
      }
  }
};

struct MccConfig {
  double sigma = 100.0;

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("MccConfig: sigma must be > 0");
  }
};

// G_sigma(t) = exp(-t^2 / (2 sigma^2))
inline double gaussian_kernel(double t, double sigma) {
  return std::exp(-(t * t) / (2.0 * sigma * sigma));
}

namespace detail {

inline void check_observation(std::span<const double> y, std::size_t expected) {
  if (y.size() != expected) {
    throw UsageError("filter step: observation has " + std::to_string(y.size()) +
                     " components, expected " + std::to_string(expected));
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw InputError("filter step: non-finite observation");
  }
}

inline void check_square(const Mat& m, std::size_t n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    throw UsageError(std::string("filter step: ") + name + " must be " + std::to_string(n) + "x" +
                     std::to_string(n) + ", got " + m.shape());
  }
}

inline void check_inputs(const FilterState& s, std::span<const double> y, const Mat& W,
                         const Mat& V, const SystemMatrices& sys) {
  const std::size_t n = s.dim();
  check_observation(y, n);
  check_square(W, n, "W");
  check_square(V, n, "V");
  check_square(sys.A, n, "A");
  check_square(sys.C, n, "C");
}

// x_{k|k-1} = A x_{k-1|k-1},  P_{k|k-1} = A P A^T + W
inline void predict(FilterState& s, const Mat& W, const Mat& A) {
  s.x_pred = mat_vec(A, s.x);
  s.P_pred = (A * s.P * A.transpose() + W).symmetrized();
}

inline void finish(FilterState& s) {
  s.P = s.P.symmetrized();
  if (!s.P.all_finite()) throw NumericalError("filter step: covariance became non-finite", 0.0);
}

}  // namespace detail

inline FilterState kalman_step(FilterState s, std::span<const double> y, const Mat& W, const Mat& V,
                               const SystemMatrices& sys) {
  detail::check_inputs(s, y, W, V, sys);
  detail::predict(s, W, sys.A);
  const Mat Ct = sys.C.transpose();
  const Mat S = sys.C * s.P_pred * Ct + V;
  s.gain = s.P_pred * Ct * mat_inv(S);
  const Vec innov = vec_sub(y, mat_vec(sys.C, s.x_pred));
  s.x = vec_add(s.x_pred, mat_vec(s.gain, innov));
  s.P = (Mat::identity(s.dim()) - s.gain * sys.C) * s.P_pred;
  detail::finish(s);
  s.kernel_weight = 1.0;
  return s;
}

// I - theta P_pred + C^T V^-1 C P_pred
inline Mat hinf_condition_matrix(const Mat& P_pred, const Mat& V, const Mat& C, double theta) {
  const std::size_t n = P_pred.rows();
  return Mat::identity(n) - theta * P_pred + C.transpose() * mat_inv(V) * C * P_pred;
}

inline bool hinf_feasibility(const Mat& P_pred, const Mat& V, const Mat& C, double theta) {
  return is_positive_definite(hinf_condition_matrix(P_pred, V, C, theta));
}

namespace detail {

inline void require_feasible(const Mat& M, double theta) {
  if (!is_positive_definite(M)) {
    const double lam = symmetric_eigenvalues(M).front();
    throw StabilityError("H-infinity condition violated for theta=" + std::to_string(theta) +
                             ": smallest eigenvalue of I - theta*P + C'V^-1 C P is " +
                             (lam < 0 ? "negative (" : "non-positive (") + std::to_string(lam) + ")",
                         theta, lam);
  }
}

}  // namespace detail

inline FilterState hinf_step_mimo(FilterState s, std::span<const double> y, const Mat& W, const Mat& V,
                                  const SystemMatrices& sys, const HinfConfig& cfg) {
  cfg.validate();
  detail::check_inputs(s, y, W, V, sys);
  detail::predict(s, W, sys.A);
  const Mat Vinv = mat_inv(V);
  const Mat Ct = sys.C.transpose();
  const Mat M = hinf_condition_matrix(s.P_pred, V, sys.C, cfg.theta);
  detail::require_feasible(M, cfg.theta);
  const Mat PMinv = s.P_pred * mat_inv(M);
  s.gain = PMinv * Ct * Vinv;
  const Vec innov = vec_sub(y, mat_vec(sys.C, s.x_pred));
  s.x = vec_add(s.x_pred, mat_vec(s.gain, innov));
  s.P = PMinv;
  detail::finish(s);
  s.kernel_weight = 1.0;
  return s;
}

inline FilterState hinf_step_siso(FilterState s, double y, double W, double V, const HinfConfig& cfg) {
  cfg.validate();
  if (s.dim() != 1) throw UsageError("hinf_step_siso: state must be scalar");
  if (!std::isfinite(y)) throw InputError("hinf_step_siso: non-finite observation");
  const double p_pred = s.P(0, 0) + W;
  const double denom = 1.0 - cfg.theta * p_pred + p_pred / V;
  if (!(denom > kDefiniteTol)) {
    throw StabilityError("H-infinity condition violated for theta=" + std::to_string(cfg.theta) +
                             ": 1 - theta*P + P/V = " + std::to_string(denom) + " is not positive",
                         cfg.theta, denom);
  }
  const double k = p_pred / (V * denom);
  s.x_pred = s.x;
  s.P_pred(0, 0) = p_pred;
  s.gain(0, 0) = k;
  s.x[0] = s.x_pred[0] + k * (y - s.x_pred[0]);
  s.P(0, 0) = p_pred / denom;
  s.kernel_weight = 1.0;
  return s;
}

namespace detail {

// Ratio of the innovation kernel to the prediction kernel, clamped so that a
// vanishing numerator does not zero the gain.
inline double kernel_weight(double innov_norm, double pred_norm, double sigma, std::uint64_t& underflows) {
  const double num = gaussian_kernel(innov_norm, sigma);
  const double den = gaussian_kernel(pred_norm, sigma);
  double L = (den > 0.0) ? num / den : kKernelWeightMax;
  if (!(L >= kKernelWeightMin) || !(L <= kKernelWeightMax)) {
    ++underflows;
    L = std::isnan(L) ? kKernelWeightMin : std::clamp(L, kKernelWeightMin, kKernelWeightMax);
  }
  return L;
}

}  // namespace detail

inline FilterState mcc_step_mimo(FilterState s, std::span<const double> y, const Mat& W, const Mat& V,
                                 const SystemMatrices& sys, const MccConfig& cfg) {
  cfg.validate();
  detail::check_inputs(s, y, W, V, sys);
  const Vec x_prev = s.x;
  detail::predict(s, W, sys.A);
  const Mat Vinv = mat_inv(V);
  const Mat Pinv = mat_inv(s.P_pred);
  const Mat Ct = sys.C.transpose();
  const Vec innov = vec_sub(y, mat_vec(sys.C, s.x_pred));
  const Vec pred_dev = vec_sub(s.x_pred, mat_vec(sys.A, x_prev));
  const double L = detail::kernel_weight(std::sqrt(weighted_sq_norm(innov, Vinv)),
                                         std::sqrt(weighted_sq_norm(pred_dev, Pinv)), cfg.sigma,
                                         s.kernel_underflows);
  const Mat CtVinv = Ct * Vinv;
  s.gain = mat_inv(Pinv + L * (CtVinv * sys.C)) * (L * CtVinv);
  s.x = vec_add(s.x_pred, mat_vec(s.gain, innov));
  const Mat IKC = Mat::identity(s.dim()) - s.gain * sys.C;
  s.P = IKC * s.P_pred * IKC.transpose() + s.gain * V * s.gain.transpose();
  detail::finish(s);
  s.kernel_weight = L;
  return s;
}

inline FilterState mcc_step_siso(FilterState s, double y, double W, double V, const MccConfig& cfg) {
  cfg.validate();
  if (s.dim() != 1) throw UsageError("mcc_step_siso: state must be scalar");
  if (!std::isfinite(y)) throw InputError("mcc_step_siso: non-finite observation");
  const double x_prev = s.x[0];
  const double x_pred = x_prev;
  const double p_pred = s.P(0, 0) + W;
  const double innov = y - x_pred;
  const double L = detail::kernel_weight(std::sqrt(innov * innov / V),
                                         std::sqrt((x_pred - x_prev) * (x_pred - x_prev) / p_pred),
                                         cfg.sigma, s.kernel_underflows);
  const double k = L / ((1.0 / p_pred + L / V) * V);
  s.x_pred[0] = x_pred;
  s.P_pred(0, 0) = p_pred;
  s.gain(0, 0) = k;
  s.x[0] = x_pred + k * innov;
  s.P(0, 0) = (1.0 - k) * (1.0 - k) * p_pred + k * k * V;
  s.kernel_weight = L;
  return s;
}

// Empirical audit of a chosen theta: (|w|^2_{W^-1} + |v|^2_{V^-1}) / |D|_2^2
// with residual proxies for the noise realizations. theta should stay below
// the running minimum of this ratio. Empty when W or V is not invertible.
inline std::optional<double> theta_audit_ratio(std::span<const double> w_resid,
                                               std::span<const double> v_resid, const Mat& W,
                                               const Mat& V, const Mat& D) {
  if (!is_positive_definite(W) || !is_positive_definite(V)) return std::nullopt;
  double d2 = 0.0;
  for (std::size_t i = 0; i < D.rows(); ++i) d2 = std::max(d2, D(i, i) * D(i, i));
  if (!(d2 > 0.0)) return std::nullopt;
  return (weighted_sq_norm(w_resid, mat_inv(W)) + weighted_sq_norm(v_resid, mat_inv(V))) / d2;
}

}  // namespace provisim
