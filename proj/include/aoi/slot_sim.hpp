#pragma once

// Slot-level Monte Carlo simulation of zero-wait status updating.
//
// Time runs in slots t = 1, 2, .... Every sensor generates its first update
// at t = 0 (queue_b of a D-D pair at its offset instead) and, under the
// zero-wait policy, generates the next one in the slot its current update is
// delivered. The monitor's AoI is recorded once per slot, after that slot's
// deliveries have been applied; the value at t = 0 is 2.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "aoi/model.hpp"

namespace aoi {

enum class Source : int { a = 0, b = 1 };

inline constexpr std::uint64_t kMonitorStream = 2;

/// Uniform in [0, 1) from the top 53 bits of one 64-bit draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Service time in slots. Geometric service is drawn as a run of Bernoulli
/// trials (one per slot), which is bit-exact across platforms.
inline std::int64_t sample_service(const ServiceModel& model, std::mt19937_64& rng) {
  if (const auto* d = std::get_if<Deterministic>(&model.law())) return d->T;
  if (const auto* g = std::get_if<Geometric>(&model.law())) {
    std::int64_t s = 1;
    while (!(uniform01(rng) < g->p)) ++s;
    return s;
  }
  throw InvalidParameter("model", model.rate(), "discrete service model");
}

struct Delivery {
  std::int64_t generation_time;
  Source source;
};

struct DeliveryOutcome {
  std::int64_t new_aoi = 0;
  std::array<bool, 2> delivered{false, false};  ///< indexed by Source
  std::array<bool, 2> valid{false, false};
  std::optional<std::int64_t> peak;  ///< AoI just before a valid reset
};

/// Applies the deliveries of slot t to an AoI of `current_aoi` (the value
/// recorded at t - 1). An update is fresh iff t - G < current_aoi. At most
/// one update resets the AoI per slot: the freshest one, with a coin toss
/// between equal generation times. Everything else is obsolete.
inline DeliveryOutcome apply_deliveries(std::int64_t current_aoi,
                                        const std::vector<Delivery>& deliveries, std::int64_t t,
                                        std::mt19937_64& monitor_rng) {
  DeliveryOutcome out;
  const Delivery* winner = nullptr;
  for (const Delivery& d : deliveries) {
    out.delivered[static_cast<int>(d.source)] = true;
    if (t - d.generation_time >= current_aoi) continue;
    if (winner == nullptr || d.generation_time > winner->generation_time) {
      winner = &d;
    } else if (d.generation_time == winner->generation_time) {
      if (uniform01(monitor_rng) < 0.5) winner = &d;
    }
  }
  if (winner == nullptr) {
    out.new_aoi = current_aoi + 1;
    return out;
  }
  out.valid[static_cast<int>(winner->source)] = true;
  out.peak = current_aoi;
  out.new_aoi = t - winner->generation_time + 1;
  return out;
}

//---------------------------------------------------------------------------//
// Traces and per-round results
//---------------------------------------------------------------------------//

struct TraceRow {
  std::int64_t t = 0;
  std::int64_t aoi = 0;
  bool delivered_a = false;
  bool delivered_b = false;
  bool valid_a = false;
  bool valid_b = false;
  bool warmup = false;
};

using AoiTrace = std::vector<TraceRow>;

inline void write_trace(std::ostream& os, const AoiTrace& trace, char delimiter = ',') {
  os << "t" << delimiter << "aoi" << delimiter << "delivered_a" << delimiter << "delivered_b"
     << delimiter << "valid_a" << delimiter << "valid_b" << delimiter << "warmup\n";
  for (const TraceRow& r : trace) {
    os << r.t << delimiter << r.aoi << delimiter << r.delivered_a << delimiter << r.delivered_b
       << delimiter << r.valid_a << delimiter << r.valid_b << delimiter << r.warmup << '\n';
  }
}

struct RoundResult {
  double avg_aoi = 0.0;
  double avg_paoi = 0.0;
  double valid_per_period = 0.0;
  std::int64_t slots = 0;      ///< post-warmup slots
  std::int64_t periods = 0;    ///< post-warmup periods
  std::int64_t valid = 0;
  std::int64_t obsolete = 0;
  std::int64_t peak_sum = 0;
  std::map<StateKey, std::int64_t> state_counts;  ///< deterministic queue_b only
  std::array<std::int64_t, 2> completions{0, 0};
  std::array<std::int64_t, 2> service_slots{0, 0};  ///< sum of completed service times
  bool offset_degenerate = false;  ///< D-D offset reduced to 0 by T = 1
};

namespace detail {

struct SensorRun {
  ServiceModel model;
  std::mt19937_64 rng;
  std::int64_t generation_time;
  std::int64_t completion_time;
};

struct Layout {
  std::vector<ServiceModel> sensors;
  std::int64_t b_start = 0;
  std::int64_t period_length = 1;
  bool track_states = false;
  bool offset_degenerate = false;
};

inline std::int64_t nominal_period(const ServiceModel& m) {
  if (const auto* d = std::get_if<Deterministic>(&m.law())) return d->T;
  return static_cast<std::int64_t>(std::ceil(1.0 / m.rate()));
}

inline Layout layout_of(const SystemSpec& spec) {
  Layout layout;
  if (const auto* single = std::get_if<SingleQueueSpec>(&spec)) {
    layout.sensors = {single->queue};
    layout.period_length = nominal_period(single->queue);
    return layout;
  }
  const auto& dual = std::get<DualQueueSpec>(spec);
  layout.sensors = {dual.queue_a, dual.queue_b};
  layout.period_length = nominal_period(dual.queue_b);
  layout.track_states = dual.queue_b.is_deterministic();
  if (dual.queue_a.is_deterministic() && dual.queue_b.is_deterministic()) {
    const auto Tb = std::get<Deterministic>(dual.queue_b.law()).T;
    layout.b_start = dual.dd_offset_slots % Tb;
    layout.offset_degenerate = Tb == 1 && dual.dd_offset_slots != 0;
  }
  return layout;
}

}  // namespace detail

/// One round: `periods_per_round` periods of `period_length` slots, the
/// first `warmup_periods` of which are excluded from every statistic. A
/// period is queue_b's service period when queue_b is deterministic, and
/// ceil(1/rate) slots otherwise (ceil(1/rate) of the only queue for a
/// single-queue system).
inline RoundResult run_round(const SystemSpec& spec, const SimConfig& config,
                             std::uint64_t round_seed, AoiTrace* trace = nullptr) {
  validate(spec);
  validate(config);
  const detail::Layout layout = detail::layout_of(spec);

  std::vector<detail::SensorRun> sensors;
  for (std::size_t i = 0; i < layout.sensors.size(); ++i) {
    detail::SensorRun s{layout.sensors[i], std::mt19937_64(derive_stream_seed(round_seed, i)), 0,
                        0};
    s.generation_time = i == 1 ? layout.b_start : 0;
    s.completion_time = s.generation_time + sample_service(s.model, s.rng);
    sensors.push_back(std::move(s));
  }
  std::mt19937_64 monitor(derive_stream_seed(round_seed, kMonitorStream));

  const std::int64_t L = layout.period_length;
  const std::int64_t total_slots = config.periods_per_round * L;
  const std::int64_t warmup_slots = config.warmup_periods * L;

  RoundResult r;
  r.offset_degenerate = layout.offset_degenerate;
  r.periods = config.periods_per_round - config.warmup_periods;
  r.slots = total_slots - warmup_slots;
  if (trace) trace->reserve(static_cast<std::size_t>(total_slots));

  std::int64_t aoi = 2;
  std::int64_t aoi_sum = 0;
  std::int64_t a_in_prev_period = 0;
  std::int64_t a_in_period = 0;
  std::vector<Delivery> deliveries;
  deliveries.reserve(2);

  for (std::int64_t t = 1; t <= total_slots; ++t) {
    deliveries.clear();
    for (std::size_t i = 0; i < sensors.size(); ++i) {
      auto& s = sensors[i];
      if (s.completion_time != t) continue;
      deliveries.push_back(Delivery{s.generation_time, static_cast<Source>(i)});
      ++r.completions[i];
      r.service_slots[i] += t - s.generation_time;
      s.generation_time = t;
      s.completion_time = t + sample_service(s.model, s.rng);
    }
    if (sensors[0].generation_time == t) ++a_in_period;

    const DeliveryOutcome o = apply_deliveries(aoi, deliveries, t, monitor);
    aoi = o.new_aoi;
    const bool counted = t > warmup_slots;
    if (counted) {
      aoi_sum += aoi;
      for (int i = 0; i < 2; ++i) {
        if (!o.delivered[i]) continue;
        if (o.valid[i]) ++r.valid;
        else ++r.obsolete;
      }
      if (o.peak) r.peak_sum += *o.peak;
    }
    if (trace) {
      trace->push_back(TraceRow{t, aoi, o.delivered[0], o.delivered[1], o.valid[0], o.valid[1],
                                !counted});
    }
    if (t % L == 0) {
      const std::int64_t period_index = t / L - 1;
      if (layout.track_states && period_index >= config.warmup_periods && period_index >= 1)
        ++r.state_counts[StateKey{static_cast<int>(a_in_prev_period),
                                  static_cast<int>(a_in_period)}];
      a_in_prev_period = a_in_period;
      a_in_period = 0;
    }
  }

  r.avg_aoi = static_cast<double>(aoi_sum) / static_cast<double>(r.slots);
  r.avg_paoi = r.valid > 0 ? static_cast<double>(r.peak_sum) / static_cast<double>(r.valid)
                           : std::numeric_limits<double>::quiet_NaN();
  r.valid_per_period = static_cast<double>(r.valid) / static_cast<double>(r.periods);
  return r;
}

inline std::uint64_t round_seed_for(const SimConfig& config, std::int64_t round) {
  const auto index = config.seed_mode == SeedMode::fixed ? 0 : static_cast<std::uint64_t>(round);
  return derive_round_seed(config.master_seed, index);
}

/// Runs every round (in parallel on up to `threads` threads) and returns the
/// per-round results in round order. Round 0 fills `trace` when given.
inline std::vector<RoundResult> run(const SystemSpec& spec, const SimConfig& config,
                                    unsigned threads = 1, AoiTrace* trace = nullptr) {
  validate(spec);
  validate(config);
  const auto rounds = static_cast<std::size_t>(config.rounds);
  std::vector<RoundResult> results(rounds);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rounds; i = next++)
      results[i] = run_round(spec, config, round_seed_for(config, static_cast<std::int64_t>(i)),
                             i == 0 ? trace : nullptr);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rounds)));
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
  }
  return results;
}

namespace detail {

struct MeanSe {
  double mean;
  double se;
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); }))
    return {xs.front(), 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double n = static_cast<double>(xs.size());
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

/// Combines per-round results: means over rounds with their standard errors
/// (absent for a single round); state frequencies and the obsolete ratio are
/// pooled over all rounds.
inline AoiMetrics aggregate(const std::vector<RoundResult>& rounds) {
  AoiMetrics m;
  if (rounds.empty()) return m;
  std::vector<double> aoi, paoi, valid;
  std::int64_t n_valid = 0, n_obsolete = 0, n_states = 0;
  std::map<StateKey, std::int64_t> states;
  for (const auto& r : rounds) {
    aoi.push_back(r.avg_aoi);
    paoi.push_back(r.avg_paoi);
    valid.push_back(r.valid_per_period);
    n_valid += r.valid;
    n_obsolete += r.obsolete;
    for (const auto& [key, count] : r.state_counts) {
      states[key] += count;
      n_states += count;
    }
  }
  const auto a = detail::mean_and_se(aoi);
  const auto p = detail::mean_and_se(paoi);
  const auto v = detail::mean_and_se(valid);
  m.avg_aoi = a.mean;
  m.avg_paoi = p.mean;
  m.valid_updates_per_period = v.mean;
  const std::int64_t deliveries = n_valid + n_obsolete;
  m.obsolete_ratio =
      deliveries > 0 ? static_cast<double>(n_obsolete) / static_cast<double>(deliveries) : 0.0;
  for (const auto& [key, count] : states)
    m.state_frequency[key] = static_cast<double>(count) / static_cast<double>(n_states);
  if (rounds.size() >= 2) {
    m.stderr_aoi = a.se;
    m.stderr_paoi = p.se;
    m.stderr_valid = v.se;
  }
  return m;
}

inline AoiMetrics estimate_with_ci(const SystemSpec& spec, const SimConfig& config,
                                   unsigned threads = 1) {
  return aggregate(run(spec, config, threads));
}

/// (k, n) frequencies of a traced Geo-D run: per B-aligned period of
/// `period_length` slots, the count of A deliveries in the previous and the
/// current period. The first period has no predecessor and is skipped, as
/// are periods flagged as warm-up.
inline std::map<StateKey, double> empirical_state_frequencies(const AoiTrace& trace,
                                                              std::int64_t period_length) {
  if (period_length < 1)
    throw InvalidParameter("period_length", static_cast<double>(period_length), ">= 1");
  std::map<StateKey, std::int64_t> counts;
  std::int64_t total = 0;
  int prev = 0;
  int cur = 0;
  bool warm = false;
  for (const TraceRow& row : trace) {
    if (row.delivered_a) ++cur;
    warm = warm || row.warmup;
    if (row.t % period_length != 0) continue;
    if (row.t > period_length && !warm) {
      ++counts[StateKey{prev, cur}];
      ++total;
    }
    prev = cur;
    cur = 0;
    warm = false;
  }
  std::map<StateKey, double> freq;
  for (const auto& [key, c] : counts)
    freq[key] = static_cast<double>(c) / static_cast<double>(total);
  return freq;
}

}  // namespace aoi
