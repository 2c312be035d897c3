#pragma once

// Discrete-time simulator of a two-tier (web + database) virtualized
// application. A phased client population produces CPU demand per tier; the
// granted allocation caps usage; unserved work accumulates as backlog; a
// congestion law maps utilization and backlog to mean response time (mRT).
//
// The congestion law is a calibration device, not a queueing model: it only
// has to show a flat region, a knee and a saturated region.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "provisim/errors.hpp"
#include "provisim/matrix.hpp"
#include "provisim/provisioner.hpp"

namespace provisim {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, step, sub-sample, component), so streams never perturb
// each other and any step can be regenerated in isolation.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::string_view name) : key_(mix(seed ^ fnv1a(name))) {}

  // Uniform in the open interval (0, 1).
  double uniform01(std::uint64_t k, std::uint64_t sub, std::uint64_t comp, std::uint64_t draw = 0) const {
    std::uint64_t h = mix(key_ ^ mix(k + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ mix(sub * 0xbf58476d1ce4e5b9ULL + 1));
    h = mix(h ^ mix(comp * 0x94d049bb133111ebULL + 2));
    h = mix(h ^ mix(draw + 3));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller on two independent uniforms.
  double normal(std::uint64_t k, std::uint64_t sub, std::uint64_t comp) const {
    const double u1 = uniform01(k, sub, comp, 0);
    const double u2 = uniform01(k, sub, comp, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

struct NoiseLaw {
  enum class Kind { none, gaussian, uniform };
  Kind kind = Kind::none;
  double scale = 0.0;  // gaussian: standard deviation; uniform: half-width

  static NoiseLaw none() { return {}; }
  static NoiseLaw gaussian(double stddev) { return {Kind::gaussian, stddev}; }
  static NoiseLaw uniform(double half_width) { return {Kind::uniform, half_width}; }

  double sample(const NoiseStream& s, std::uint64_t k, std::uint64_t sub, std::uint64_t comp) const {
    switch (kind) {
      case Kind::none: return 0.0;
      case Kind::gaussian: return scale == 0.0 ? 0.0 : scale * s.normal(k, sub, comp);
      case Kind::uniform: return scale == 0.0 ? 0.0 : scale * (2.0 * s.uniform01(k, sub, comp) - 1.0);
    }
    return 0.0;
  }

  void validate(const char* what) const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw UsageError(std::string(what) + ": noise scale must be finite and >= 0");
    }
  }
};

struct Phase {
  std::size_t start = 0;
  double clients = 0.0;
  double think_multiplier = 1.0;  // scales demand during the phase
};

inline constexpr double kReferenceThink = 7.0;

struct WorkloadSpec {
  std::vector<Phase> phases{{0, 700.0, 1.0}};
  double think = kReferenceThink;   // mean think time, seconds
  Vec gains{0.063, 0.0173};         // pp per client at 7 s think time
  NoiseLaw demand_noise = NoiseLaw::gaussian(0.02);  // relative, shared by all tiers
  std::uint64_t seed = 42;

  // 700 clients, +500 for 15 samples starting at samples 10 and 30.
  static WorkloadSpec wl1() {
    WorkloadSpec w;
    w.phases = {{0, 700, 1.0}, {10, 1200, 1.0}, {25, 700, 1.0}, {30, 1200, 1.0}, {45, 700, 1.0}};
    return w;
  }

  // Same population schedule with a heavier, phase-dependent think-time table.
  static WorkloadSpec wl2() {
    WorkloadSpec w = wl1();
    const double mult[] = {1.10, 1.25, 1.15, 1.30, 1.10};
    for (std::size_t i = 0; i < w.phases.size(); ++i) w.phases[i].think_multiplier = mult[i];
    return w;
  }

  const Phase& phase_at(std::size_t k) const {
    const Phase* cur = &phases.front();
    for (const auto& p : phases) {
      if (p.start <= k) cur = &p;
      else break;
    }
    return *cur;
  }

  std::size_t components() const noexcept { return gains.size(); }

  void validate() const {
    if (phases.empty()) throw UsageError("WorkloadSpec: at least one phase required");
    for (std::size_t i = 0; i < phases.size(); ++i) {
      if (!(phases[i].clients >= 0.0)) throw UsageError("WorkloadSpec: client count must be >= 0");
      if (!(phases[i].think_multiplier > 0.0)) throw UsageError("WorkloadSpec: think multiplier must be > 0");
      if (i && phases[i].start <= phases[i - 1].start) {
        throw UsageError("WorkloadSpec: phases must be sorted by strictly increasing start");
      }
    }
    if (gains.empty() || gains.size() > kMaxDim) throw UsageError("WorkloadSpec: need 1..8 gains");
    for (double g : gains) {
      if (!(g > 0.0)) throw UsageError("WorkloadSpec: gains must be > 0");
    }
    if (!(think > 0.0)) throw UsageError("WorkloadSpec: think time must be > 0");
    demand_noise.validate("WorkloadSpec");
  }
};

struct ServerModel {
  double r_base = 0.05;  // s
  double alpha = 0.13;   // s
  double gamma = 4.0;
  double beta = 0.01;    // s per pp*s of backlog
  double epsilon = 0.05;
  double kappa = 3.0;    // requests per pp*s
  double slo = 0.5;      // s
  NoiseLaw measurement_noise = NoiseLaw::gaussian(1.0);  // pp, per raw sample

  void validate() const {
    if (!(r_base > 0 && alpha > 0 && gamma > 0 && beta > 0 && kappa > 0 && slo > 0)) {
      throw UsageError("ServerModel: parameters must be positive");
    }
    if (!(epsilon > 0.0 && epsilon <= 0.1)) throw UsageError("ServerModel: epsilon must be in (0, 0.1]");
    measurement_noise.validate("ServerModel");
  }

  // Congestion delay of one tier at utilization ratio rho.
  double congestion(double rho) const {
    const double r = std::clamp(rho, 0.0, 1.0);
    return alpha * std::pow(r, gamma) / (1.0 - std::min(r, 1.0 - epsilon));
  }
};

// d_i(k) = g_i * N(k) * (7 / think) * multiplier * (1 + eta_k), clamped to [0, 100].
inline Vec gen_demand(const WorkloadSpec& spec, std::size_t k) {
  const Phase& p = spec.phase_at(k);
  const NoiseStream stream(spec.seed, "demand");
  const double eta = spec.demand_noise.sample(stream, k, 0, 0);
  Vec d(spec.gains.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double base = spec.gains[i] * p.clients * (kReferenceThink / spec.think) * p.think_multiplier;
    d[i] = std::clamp(base * (1.0 + eta), 0.0, 100.0);
  }
  return d;
}

struct ServeResult {
  Vec usage;
  Vec observation;  // mean of the raw samples in the interval
  Vec backlog;
  double mrt = 0.0;
  std::uint64_t completed = 0;
};

inline double response_time(const ServerModel& model, std::span<const double> usage,
                            std::span<const double> allocation, std::span<const double> backlog) {
  // Congestion comes from the bottleneck tier; backlog from every tier,
  // since each request passes through all of them.
  double congestion = 0.0;
  for (std::size_t i = 0; i < usage.size(); ++i) {
    congestion = std::max(congestion, model.congestion(usage[i] / std::max(allocation[i], model.epsilon)));
  }
  double mrt = model.r_base + congestion;
  for (double b : backlog) mrt += model.beta * b;
  return mrt;
}

inline ServeResult serve(std::span<const double> demand, std::span<const double> allocation,
                         const ServerModel& model, std::span<const double> backlog_prev,
                         double interval, std::size_t subsamples, const NoiseStream& meas, std::size_t k) {
  const std::size_t n = demand.size();
  if (allocation.size() != n || backlog_prev.size() != n) throw UsageError("serve: size mismatch");
  if (subsamples == 0) throw UsageError("serve: need at least one raw sample per interval");
  ServeResult r;
  r.usage.resize(n);
  r.observation.resize(n);
  r.backlog.resize(n);
  double served = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(allocation[i] >= 0.0 && allocation[i] <= 100.0)) throw UsageError("serve: allocation outside [0, 100]");
    r.usage[i] = std::min(demand[i], allocation[i]);
    r.backlog[i] = std::max(0.0, backlog_prev[i] + (demand[i] - allocation[i]) * interval);
    double acc = 0.0;
    for (std::size_t s = 0; s < subsamples; ++s) {
      acc += std::clamp(r.usage[i] + model.measurement_noise.sample(meas, k, s, i), 0.0, 100.0);
    }
    r.observation[i] = acc / static_cast<double>(subsamples);
    served += r.usage[i];
  }
  r.mrt = response_time(model, r.usage, allocation, r.backlog);
  r.completed = static_cast<std::uint64_t>(std::llround(model.kappa * served * interval));
  return r;
}

struct StepRecord {
  std::size_t k = 0;
  Vec demand;
  Vec usage;
  Vec observation;
  Vec allocation;
  Vec backlog;
  double mrt = 0.0;
  std::uint64_t completed = 0;
  bool flagged = false;  // controller rejected its step or failed
};

struct RunMetrics {
  std::uint64_t completed = 0;  // CR
  double avg_cpu_vm1 = 0.0;
  double avg_cpu_vm2 = 0.0;
  double amrt = 0.0;
  double sloo = 0.0;

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct RunResult {
  std::vector<StepRecord> records;
  std::vector<AllocationDecision> decisions;  // empty for static runs
  RunMetrics metrics;
  std::uint64_t feasibility_rejections = 0;
  std::uint64_t kernel_underflows = 0;
};

inline RunMetrics score(std::span<const StepRecord> records, double slo) {
  RunMetrics m;
  if (records.empty()) return m;
  double weighted_mrt = 0.0, within = 0.0, plain_mrt = 0.0, plain_within = 0.0;
  double cpu1 = 0.0, cpu2 = 0.0;
  for (const auto& r : records) {
    m.completed += r.completed;
    const double w = static_cast<double>(r.completed);
    weighted_mrt += w * r.mrt;
    plain_mrt += r.mrt;
    if (r.mrt <= slo) {
      within += w;
      plain_within += 1.0;
    }
    cpu1 += r.usage.size() > 0 ? r.usage[0] : 0.0;
    cpu2 += r.usage.size() > 1 ? r.usage[1] : 0.0;
  }
  const double steps = static_cast<double>(records.size());
  if (m.completed > 0) {
    m.amrt = weighted_mrt / static_cast<double>(m.completed);
    m.sloo = within / static_cast<double>(m.completed);
  } else {
    m.amrt = plain_mrt / steps;
    m.sloo = plain_within / steps;
  }
  m.avg_cpu_vm1 = cpu1 / steps;
  m.avg_cpu_vm2 = cpu2 / steps;
  return m;
}

// Drives the simulated cluster for `steps` control intervals. `decide` gets
// the step index and the smoothed observation and returns the allocation for
// the next interval (plus whether the step was flagged).
template <typename Decide>
RunResult simulate(const WorkloadSpec& workload, const ServerModel& model, Vec initial_allocation,
                   std::size_t steps, double interval, std::size_t subsamples, Decide&& decide) {
  workload.validate();
  model.validate();
  const std::size_t n = workload.components();
  if (initial_allocation.size() != n) throw UsageError("simulate: allocation size mismatch");
  const NoiseStream meas(workload.seed, "measurement");
  RunResult out;
  out.records.reserve(steps);
  Vec allocation = std::move(initial_allocation);
  Vec backlog(n, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.demand = gen_demand(workload, k);
    rec.allocation = allocation;
    ServeResult s = serve(rec.demand, allocation, model, backlog, interval, subsamples, meas, k);
    rec.usage = std::move(s.usage);
    rec.observation = std::move(s.observation);
    rec.backlog = s.backlog;
    rec.mrt = s.mrt;
    rec.completed = s.completed;
    backlog = std::move(s.backlog);
    rec.flagged = decide(k, rec.observation, allocation, out);
    out.records.push_back(std::move(rec));
  }
  out.metrics = score(out.records, model.slo);
  return out;
}

inline RunResult run_scenario(const WorkloadSpec& workload, const ServerModel& model,
                              const ControllerSpec& controller, std::size_t steps) {
  if (steps < controller.window) throw UsageError("run_scenario: steps must be >= window T");
  ControlLoop loop(controller, workload.components());
  RunResult r = simulate(workload, model, loop.current_allocation(), steps, controller.interval,
                         controller.samples_per_interval(),
                         [&](std::size_t, const Vec& y, Vec& allocation, RunResult& out) {
                           try {
                             AllocationDecision d = loop.control_step(y);
                             allocation = d.a_next;
                             const bool flagged =
                                 std::any_of(d.held.begin(), d.held.end(), [](bool h) { return h; });
                             out.decisions.push_back(std::move(d));
                             return flagged;
                           } catch (const std::exception&) {
                             return true;  // allocation stays as it was
                           }
                         });
  r.feasibility_rejections = loop.feasibility_rejections();
  r.kernel_underflows = loop.kernel_underflows();
  return r;
}

// Fixed allocation for every step, no controller.
inline RunResult run_static(const WorkloadSpec& workload, const ServerModel& model, Vec allocation,
                            std::size_t steps, double interval = 5.0, std::size_t subsamples = 5) {
  return simulate(workload, model, std::move(allocation), steps, interval, subsamples,
                  [](std::size_t, const Vec&, Vec&, RunResult&) { return false; });
}

// Noise-free steady-state mRT with every tier allocated 100 pp. Infinite
// once some tier's demand exceeds its allocation (backlog grows forever).
inline double steady_state_mrt(const ServerModel& model, std::span<const double> gains, double think,
                               double clients) {
  Vec usage(gains.size()), alloc(gains.size(), 100.0), backlog(gains.size(), 0.0);
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double d = gains[i] * clients * (kReferenceThink / think);
    if (d > 100.0) return std::numeric_limits<double>::infinity();
    usage[i] = d;
  }
  return response_time(model, usage, alloc, backlog);
}

// Smallest client count whose steady-state mRT at full allocation exceeds
// the SLO threshold.
inline std::size_t calibrate_knee(const ServerModel& model, std::span<const double> gains,
                                  double think = kReferenceThink) {
  model.validate();
  if (gains.empty()) throw UsageError("calibrate_knee: no gains");
  auto exceeds = [&](std::size_t n) {
    return steady_state_mrt(model, gains, think, static_cast<double>(n)) > model.slo;
  };
  if (exceeds(0)) return 0;
  const double g_max = *std::max_element(gains.begin(), gains.end()) * (kReferenceThink / think);
  std::size_t lo = 0;
  auto hi = static_cast<std::size_t>(std::ceil(100.0 / g_max)) + 1;  // demand > 100 there
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (exceeds(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace provisim
