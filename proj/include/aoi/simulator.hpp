#pragma once

// Discrete-event simulation of the two queue disciplines. The event set is
// implicit: at most one pending arrival and one pending service completion.
// Receptions are turned into AoI cycles (D_j, Phi_{j+1}): the age restarts
// at the system time D_j of reception j and rises with unit slope until the
// peak Phi_{j+1} = D_j + (delta_{j+1} - delta_j).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/phdist.hpp"

namespace aoi {

enum class Discipline { Bufferless, SingleBuffer };

struct SimConfig {
  Discipline model = Discipline::Bufferless;
  PhDistribution arrival;
  PhDistribution service;
  double prob = 0.0;  // p (bufferless) or r (single buffer)
  std::int64_t cycles = 1'000'000;
  std::int64_t warmup = 1'000;
  std::uint64_t seed = 1;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct SimResult {
  // One entry per retained AoI cycle.
  std::vector<double> system_times;  // D_j
  std::vector<double> peaks;         // Phi_{j+1}
  std::vector<double> sorted_peaks;

  Estimate mean_aoi, second_aoi;
  Estimate mean_paoi, second_paoi;
  Estimate mean_wait;

  struct Counts {
    std::int64_t arrivals = 0;
    std::int64_t successful = 0;
    std::int64_t preempted = 0;
    std::int64_t replaced = 0;
    std::int64_t dropped = 0;
    std::int64_t in_flight = 0;  // still in the system when the run stopped
  } counts;

  double total_time() const {
    double t = 0.0;
    for (std::size_t j = 0; j < peaks.size(); ++j) t += peaks[j] - system_times[j];
    return t;
  }
};

inline std::vector<std::string> validate(const SimConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.cycles < 10'000) out.push_back("cycles must be at least 10^4");
  if (cfg.warmup < 0) out.push_back("warmup must be nonnegative");
  if (!(cfg.prob >= 0.0 && cfg.prob <= 1.0)) out.push_back("p/r must lie in [0,1]");
  for (const auto& s : validate(cfg.arrival)) out.push_back("arrival: " + s);
  for (const auto& s : validate(cfg.service)) out.push_back("service: " + s);
  return out;
}

namespace detail {

// Batch-means standard error of a ratio estimator sum(num)/sum(den).
inline Estimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den,
                               int batches = 50) {
  const std::size_t n = num.size();
  Estimate e;
  double sn = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sn += num[i];
    sd += den[i];
  }
  e.value = sn / sd;
  if (n < static_cast<std::size_t>(2 * batches)) return e;
  const std::size_t per = n / batches;
  double acc = 0.0;
  for (int b = 0; b < batches; ++b) {
    double bn = 0.0, bd = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      bn += num[i];
      bd += den[i];
    }
    const double diff = bn / bd - e.value;
    acc += diff * diff;
  }
  e.std_error = std::sqrt(acc / (batches - 1) / batches);
  return e;
}

class Recorder {
public:
  Recorder(SimResult& res, std::int64_t warmup, std::int64_t cycles)
      : res_(res), warmup_(warmup), cycles_(cycles) {
    res_.system_times.reserve(cycles);
    res_.peaks.reserve(cycles);
    waits_.reserve(cycles);
  }

  // Returns true once enough cycles are retained.
  bool reception(double now, double arrival_time, double wait) {
    ++res_.counts.successful;
    const double D = now - arrival_time;
    if (have_prev_) {
      ++receptions_after_first_;
      if (receptions_after_first_ > warmup_) {
        res_.system_times.push_back(prev_D_);
        res_.peaks.push_back(prev_D_ + (now - prev_delta_));
        waits_.push_back(wait);
      }
    }
    have_prev_ = true;
    prev_D_ = D;
    prev_delta_ = now;
    return static_cast<std::int64_t>(res_.peaks.size()) >= cycles_;
  }

  void finish() {
    auto& r = res_;
    const std::size_t n = r.peaks.size();
    std::vector<double> len(n), first(n), second(n), ones(n, 1.0), phi2(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double D = r.system_times[j];
      const double P = r.peaks[j];
      len[j] = P - D;
      first[j] = 0.5 * (P * P - D * D);
      second[j] = (P * P * P - D * D * D) / 3.0;
      phi2[j] = P * P;
    }
    r.mean_aoi = ratio_estimate(first, len);
    r.second_aoi = ratio_estimate(second, len);
    r.mean_paoi = ratio_estimate(r.peaks, ones);
    r.second_paoi = ratio_estimate(phi2, ones);
    r.mean_wait = ratio_estimate(waits_, ones);
    r.sorted_peaks = r.peaks;
    std::sort(r.sorted_peaks.begin(), r.sorted_peaks.end());
  }

private:
  SimResult& res_;
  std::int64_t warmup_;
  std::int64_t cycles_;
  std::int64_t receptions_after_first_ = 0;
  bool have_prev_ = false;
  double prev_D_ = 0.0;
  double prev_delta_ = 0.0;
  std::vector<double> waits_;
};

inline void simulate_bufferless(const SimConfig& cfg, SimResult& res) {
  RandomStream rng(cfg.seed);
  const PhSampler interarrival(cfg.arrival);
  const PhSampler service(cfg.service);
  Recorder rec(res, cfg.warmup, cfg.cycles);
  constexpr double never = std::numeric_limits<double>::infinity();

  double next_arrival = interarrival(rng);
  double completion = never;
  double in_service_since = 0.0;
  for (;;) {
    if (completion <= next_arrival) {
      const double now = completion;
      completion = never;
      if (rec.reception(now, in_service_since, 0.0)) break;
      continue;
    }
    const double now = next_arrival;
    ++res.counts.arrivals;
    if (completion == never) {
      in_service_since = now;
      completion = now + service(rng);
    } else if (uniform01(rng) < cfg.prob) {
      ++res.counts.preempted;
      in_service_since = now;
      completion = now + service(rng);  // fresh service for the newcomer
    } else {
      ++res.counts.dropped;
    }
    next_arrival = now + interarrival(rng);
  }
  res.counts.in_flight = completion == never ? 0 : 1;
  rec.finish();
}

inline void simulate_single_buffer(const SimConfig& cfg, SimResult& res) {
  RandomStream rng(cfg.seed);
  const PhSampler interarrival(cfg.arrival);
  const PhSampler service(cfg.service);
  Recorder rec(res, cfg.warmup, cfg.cycles);
  constexpr double never = std::numeric_limits<double>::infinity();

  double next_arrival = interarrival(rng);
  double completion = never;
  double in_service_since = 0.0;  // arrival time of the packet in service
  double in_service_wait = 0.0;
  bool waiting = false;
  double waiting_since = 0.0;
  for (;;) {
    if (completion <= next_arrival) {
      const double now = completion;
      const bool done = rec.reception(now, in_service_since, in_service_wait);
      if (waiting) {
        waiting = false;
        in_service_since = waiting_since;
        in_service_wait = now - waiting_since;
        completion = now + service(rng);
      } else {
        completion = never;
      }
      if (done) break;
      continue;
    }
    const double now = next_arrival;
    ++res.counts.arrivals;
    if (completion == never) {
      in_service_since = now;
      in_service_wait = 0.0;
      completion = now + service(rng);
    } else if (!waiting) {
      waiting = true;
      waiting_since = now;
    } else if (uniform01(rng) < cfg.prob) {
      ++res.counts.replaced;
      waiting_since = now;
    } else {
      ++res.counts.dropped;
    }
    next_arrival = now + interarrival(rng);
  }
  res.counts.in_flight = (completion == never ? 0 : 1) + (waiting ? 1 : 0);
  rec.finish();
}

}  // namespace detail

inline SimResult simulate(const SimConfig& cfg) {
  const auto problems = validate(cfg);
  if (!problems.empty()) throw ContractError("invalid simulation config: " + problems.front());
  SimResult res;
  if (cfg.model == Discipline::Bufferless) {
    detail::simulate_bufferless(cfg, res);
  } else {
    detail::simulate_single_buffer(cfg, res);
  }
  return res;
}

/// Exact time-average of the piecewise-linear age path: fraction of time
/// the age is at most x.
inline double empirical_aoi_cdf(const SimResult& res, double x) {
  if (!(x >= 0.0)) throw DomainError("empirical_aoi_cdf: x must be nonnegative");
  double below = 0.0, total = 0.0;
  for (std::size_t j = 0; j < res.peaks.size(); ++j) {
    const double D = res.system_times[j];
    const double len = res.peaks[j] - D;
    below += std::clamp(x - D, 0.0, len);
    total += len;
  }
  return total > 0.0 ? below / total : 0.0;
}

/// Fraction of retained peaks at most x.
inline double empirical_paoi_cdf(const SimResult& res, double x) {
  if (!(x >= 0.0)) throw DomainError("empirical_paoi_cdf: x must be nonnegative");
  const auto& s = res.sorted_peaks;
  if (s.empty()) return 0.0;
  return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) /
         static_cast<double>(s.size());
}

}  // namespace aoi
