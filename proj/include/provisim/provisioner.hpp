#pragma once

// The dynamic provisioning control loop. Every control interval it takes the
// smoothed utilization observation, refreshes the windowed process-noise
// estimate, runs one filter update, predicts next-interval utilization and
// turns that prediction into a clamped CPU allocation with headroom.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provisim/errors.hpp"
#include "provisim/estimators.hpp"
#include "provisim/matrix.hpp"
#include "provisim/noise_stats.hpp"

namespace provisim {

enum class Topology { siso, mimo };

inline const char* to_string(Topology t) { return t == Topology::siso ? "siso" : "mimo"; }

struct AllocationPolicy {
  double h = 0.25;  // headroom; c = 1 / (1 + h)
  double a_min = 20.0;
  double a_max = 100.0;

  static AllocationPolicy from_ratio(double c, double a_min = 20.0, double a_max = 100.0) {
    if (!(c > 0.5) || !(c < 1.0)) throw UsageError("AllocationPolicy: c must be in (0.5, 1)");
    return {1.0 / c - 1.0, a_min, a_max};
  }

  double ratio() const { return 1.0 / (1.0 + h); }

  void validate() const {
    if (!(h > 0.0 && h < 1.0)) throw UsageError("AllocationPolicy: h must be in (0, 1)");
    if (!(a_min >= 0.0 && a_min < a_max && a_max <= 100.0)) {
      throw UsageError("AllocationPolicy: need 0 <= a_min < a_max <= 100");
    }
  }
};

// a = max(a_min, min((1 + h) * max(x, 0), a_max)) per component.
inline Vec allocate(std::span<const double> x_pred, const AllocationPolicy& policy) {
  Vec a(x_pred.size());
  for (std::size_t i = 0; i < x_pred.size(); ++i) {
    if (!std::isfinite(x_pred[i])) throw InputError("allocate: non-finite prediction");
    const double want = (1.0 + policy.h) * std::max(x_pred[i], 0.0);
    a[i] = std::max(policy.a_min, std::min(want, policy.a_max));
  }
  return a;
}

struct ControllerSpec {
  FilterKind filter = FilterKind::kalman;
  Topology topology = Topology::siso;
  std::optional<double> theta;  // unset: 0.7 for siso, 0.1 for mimo
  double sigma = 100.0;
  double allowable_error = 10.0;  // diagonal of D, pp
  std::size_t window = 5;
  double W0 = 4.0;
  double V = 1.0;
  double P0 = 10.0;
  AllocationPolicy policy;
  double interval = 5.0;     // seconds per control step
  double subinterval = 1.0;  // seconds per raw measurement
  std::optional<double> x0;  // unset: seed from the first observation

  double effective_theta() const {
    if (theta) return *theta;
    return topology == Topology::siso ? 0.7 : 0.1;
  }

  std::size_t samples_per_interval() const {
    return static_cast<std::size_t>(std::llround(interval / subinterval));
  }

  void validate() const {
    policy.validate();
    if (window < 1) throw UsageError("ControllerSpec: window T must be >= 1");
    if (!(V > 0.0)) throw UsageError("ControllerSpec: V must be > 0");
    if (!(P0 > 0.0)) throw UsageError("ControllerSpec: P0 must be > 0");
    if (!(W0 >= 0.0)) throw UsageError("ControllerSpec: W0 must be >= 0");
    if (!(interval > 0.0) || !(subinterval > 0.0)) throw UsageError("ControllerSpec: intervals must be > 0");
    const double ratio = interval / subinterval;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) {
      throw UsageError("ControllerSpec: interval must be a positive multiple of subinterval");
    }
    if (!(allowable_error > 0.0)) throw UsageError("ControllerSpec: allowable error must be > 0");
    if (filter == FilterKind::hinf && !(effective_theta() > 0.0)) throw UsageError("ControllerSpec: theta must be > 0");
    if (filter == FilterKind::mcc && !(sigma > 0.0)) throw UsageError("ControllerSpec: sigma must be > 0");
    if (x0 && !std::isfinite(*x0)) throw UsageError("ControllerSpec: x0 must be finite");
  }
};

// Arithmetic mean of the raw measurements inside one control interval.
inline Vec smooth(std::span<const Vec> samples) {
  if (samples.empty()) throw UsageError("smooth: no samples");
  Vec mean(samples.front().size(), 0.0);
  for (const auto& s : samples) {
    if (s.size() != mean.size()) throw UsageError("smooth: ragged samples");
    for (std::size_t i = 0; i < s.size(); ++i) mean[i] += s[i];
  }
  for (auto& m : mean) m /= static_cast<double>(samples.size());
  return mean;
}

struct AllocationDecision {
  Vec a_next;
  Vec x_next;  // x_{k+1|k}
  std::vector<bool> clamped_low;
  std::vector<bool> clamped_high;
  std::vector<bool> held;  // H-infinity step rejected, previous allocation kept
  Vec w_used;              // diagonal of the process covariance used this step
  Vec kernel_weight;       // per channel component (1 for non-MCC filters)
  bool warming_up = false;
  std::uint64_t feasibility_rejections = 0;  // cumulative
  std::uint64_t kernel_underflows = 0;       // cumulative
  std::optional<double> theta_ratio_min;     // running min of the theta audit ratio
};

class ControlLoop {
 public:
  ControlLoop(ControllerSpec spec, std::size_t components) : spec_(std::move(spec)), n_(components) {
    spec_.validate();
    if (n_ == 0 || n_ > kMaxDim) throw UsageError("ControlLoop: component count must be in [1, 8]");
    reset();
  }

  const ControllerSpec& spec() const noexcept { return spec_; }
  std::size_t components() const noexcept { return n_; }
  std::uint64_t feasibility_rejections() const noexcept { return rejections_; }
  std::uint64_t kernel_underflows() const {
    std::uint64_t total = 0;
    for (const auto& c : channels_) total += c.state ? c.state->kernel_underflows : 0;
    return total;
  }
  const Vec& current_allocation() const noexcept { return allocation_; }

  // Per-channel filter state; one channel per component for siso.
  std::optional<FilterState> channel_state(std::size_t ch) const { return channels_.at(ch).state; }
  std::size_t channel_count() const noexcept { return channels_.size(); }

  void reset() {
    channels_.clear();
    if (spec_.topology == Topology::siso) {
      for (std::size_t i = 0; i < n_; ++i) channels_.push_back(Channel{{i}, DiffWindow(1, spec_.window), {}});
    } else {
      std::vector<std::size_t> all(n_);
      for (std::size_t i = 0; i < n_; ++i) all[i] = i;
      channels_.push_back(Channel{all, DiffWindow(n_, spec_.window), {}});
    }
    allocation_.assign(n_, spec_.policy.a_max);
    rejections_ = 0;
    theta_ratio_min_.reset();
  }

  AllocationDecision control_step(std::span<const double> y) {
    if (y.size() != n_) {
      throw UsageError("control_step: expected " + std::to_string(n_) + " components, got " +
                       std::to_string(y.size()));
    }
    for (double v : y) {
      if (!std::isfinite(v)) throw InputError("control_step: non-finite observation");
    }

    AllocationDecision d;
    d.x_next.assign(n_, 0.0);
    d.held.assign(n_, false);
    d.w_used.assign(n_, spec_.W0);
    d.kernel_weight.assign(n_, 1.0);

    for (auto& ch : channels_) {
      Vec ych(ch.comps.size());
      for (std::size_t j = 0; j < ch.comps.size(); ++j) ych[j] = y[ch.comps[j]];
      ch.window.push(ych);

      const bool rejected = run_channel(ch, ych, d);
      for (std::size_t j = 0; j < ch.comps.size(); ++j) {
        d.x_next[ch.comps[j]] = ch.state->x[j];  // A = I
        d.held[ch.comps[j]] = rejected;
        d.kernel_weight[ch.comps[j]] = ch.state->kernel_weight;
      }
    }

    const Vec proposed = allocate(d.x_next, spec_.policy);
    d.a_next.resize(n_);
    d.clamped_low.assign(n_, false);
    d.clamped_high.assign(n_, false);
    for (std::size_t i = 0; i < n_; ++i) {
      d.a_next[i] = d.held[i] ? allocation_[i] : proposed[i];
      const double want = (1.0 + spec_.policy.h) * std::max(d.x_next[i], 0.0);
      d.clamped_low[i] = !d.held[i] && want < spec_.policy.a_min;
      d.clamped_high[i] = !d.held[i] && want > spec_.policy.a_max;
    }
    allocation_ = d.a_next;
    d.feasibility_rejections = rejections_;
    d.kernel_underflows = kernel_underflows();
    d.theta_ratio_min = theta_ratio_min_;
    return d;
  }

 private:
  struct Channel {
    std::vector<std::size_t> comps;
    DiffWindow window;
    std::optional<FilterState> state;
  };

  Mat process_covariance(const Channel& ch, bool& warming) const {
    const std::size_t m = ch.comps.size();
    if (m == 1) {
      if (auto w = estimate_siso_variance(ch.window, 0)) return Mat::scaled_identity(1, *w);
    } else if (auto w = estimate_mimo_covariance(ch.window)) {
      return *w;
    }
    warming = true;
    return Mat::scaled_identity(m, spec_.W0);
  }

  // Returns true when the step was rejected.
  bool run_channel(Channel& ch, std::span<const double> y, AllocationDecision& d) {
    const std::size_t m = ch.comps.size();
    const Mat P0 = Mat::scaled_identity(m, spec_.P0);
    if (!ch.state && !spec_.x0) {
      ch.state = FilterState::initial(y, P0);
      d.warming_up = true;
      return false;
    }
    if (!ch.state) ch.state = FilterState::initial(Vec(m, *spec_.x0), P0);

    bool warming = false;
    const Mat W = process_covariance(ch, warming);
    d.warming_up = d.warming_up || warming;
    for (std::size_t j = 0; j < m; ++j) d.w_used[ch.comps[j]] = W(j, j);
    const Mat V = Mat::scaled_identity(m, spec_.V);
    const auto sys = SystemMatrices::identity(m);
    const FilterState& prev = *ch.state;

    try {
      FilterState next = [&] {
        switch (spec_.filter) {
          case FilterKind::kalman:
            return kalman_step(prev, y, W, V, sys);
          case FilterKind::hinf: {
            const HinfConfig cfg{spec_.effective_theta(), Mat::scaled_identity(m, spec_.allowable_error)};
            return m == 1 ? hinf_step_siso(prev, y[0], W(0, 0), spec_.V, cfg)
                          : hinf_step_mimo(prev, y, W, V, sys, cfg);
          }
          case FilterKind::mcc: {
            const MccConfig cfg{spec_.sigma};
            return m == 1 ? mcc_step_siso(prev, y[0], W(0, 0), spec_.V, cfg)
                          : mcc_step_mimo(prev, y, W, V, sys, cfg);
          }
        }
        throw UsageError("unknown filter kind");
      }();
      if (spec_.filter == FilterKind::hinf) {
        const Vec w_resid = vec_sub(next.x, prev.x);
        const Vec v_resid = vec_sub(y, next.x);
        if (auto r = theta_audit_ratio(w_resid, v_resid, W, V, Mat::scaled_identity(m, spec_.allowable_error))) {
          theta_ratio_min_ = theta_ratio_min_ ? std::min(*theta_ratio_min_, *r) : *r;
        }
      }
      ch.state = std::move(next);
      return false;
    } catch (const StabilityError&) {
      ++rejections_;
      return true;
    }
  }

  ControllerSpec spec_;
  std::size_t n_;
  std::vector<Channel> channels_;
  Vec allocation_;
  std::uint64_t rejections_ = 0;
  std::optional<double> theta_ratio_min_;
};

}  // namespace provisim
