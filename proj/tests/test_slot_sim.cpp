#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aoi/closed_forms.hpp"
#include "aoi/slot_sim.hpp"

using namespace aoi;

namespace {

SystemSpec geo_d(double p, std::int64_t T) {
  return DualQueueSpec{ServiceModel::geometric(p), ServiceModel::deterministic(T)};
}

SystemSpec d_d(std::int64_t T, std::int64_t offset) {
  return DualQueueSpec{ServiceModel::deterministic(T), ServiceModel::deterministic(T), offset};
}

SimConfig small_config(std::int64_t periods = 2000, std::int64_t rounds = 4) {
  SimConfig c;
  c.periods_per_round = periods;
  c.rounds = rounds;
  return c;
}

}  // namespace

TEST(Sampling, GeometricMeanAndVariance) {
  std::mt19937_64 rng(derive_stream_seed(derive_round_seed(42, 0), 0));
  const double p = 0.3;
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  std::int64_t min = 1000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_service(ServiceModel::geometric(p), rng);
    min = std::min(min, s);
    sum += static_cast<double>(s);
    sq += static_cast<double>(s * s);
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_EQ(min, 1);
  EXPECT_NEAR(mean, 1.0 / p, 5.0 * std::sqrt((1 - p) / (p * p) / n));
  EXPECT_NEAR(var, (1 - p) / (p * p), 0.05 * (1 - p) / (p * p));
}

TEST(Sampling, DeterministicAndCertain) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_service(ServiceModel::deterministic(7), rng), 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_service(ServiceModel::geometric(1.0), rng), 1);
  EXPECT_THROW(sample_service(ServiceModel::exponential(1.0), rng), InvalidParameter);
}

TEST(Deliveries, FreshResetsAndStaleIsObsolete) {
  std::mt19937_64 rng(3);
  auto o = apply_deliveries(5, {{8, Source::a}}, 10, rng);
  EXPECT_EQ(o.new_aoi, 3);
  EXPECT_TRUE(o.valid[0]);
  EXPECT_EQ(o.peak, 5);

  o = apply_deliveries(2, {{7, Source::b}}, 10, rng);
  EXPECT_EQ(o.new_aoi, 3);
  EXPECT_TRUE(o.delivered[1]);
  EXPECT_FALSE(o.valid[1]);
  EXPECT_FALSE(o.peak.has_value());

  // Equal age is not fresher.
  o = apply_deliveries(3, {{7, Source::a}}, 10, rng);
  EXPECT_FALSE(o.valid[0]);
  EXPECT_EQ(o.new_aoi, 4);

  o = apply_deliveries(9, {}, 10, rng);
  EXPECT_EQ(o.new_aoi, 10);
}

TEST(Deliveries, FresherOfTwoWins) {
  std::mt19937_64 rng(3);
  const auto o = apply_deliveries(20, {{5, Source::a}, {8, Source::b}}, 10, rng);
  EXPECT_FALSE(o.valid[0]);
  EXPECT_TRUE(o.valid[1]);
  EXPECT_TRUE(o.delivered[0]);
  EXPECT_EQ(o.new_aoi, 3);
  EXPECT_EQ(o.peak, 20);
}

TEST(Deliveries, TiesAreSettledByAFairCoin) {
  std::mt19937_64 rng(derive_stream_seed(derive_round_seed(42, 0), kMonitorStream));
  const int n = 100000;
  int b_wins = 0;
  for (int i = 0; i < n; ++i) {
    const auto o = apply_deliveries(20, {{8, Source::a}, {8, Source::b}}, 10, rng);
    EXPECT_NE(o.valid[0], o.valid[1]);
    EXPECT_EQ(o.new_aoi, 3);
    b_wins += o.valid[1];
  }
  EXPECT_NEAR(static_cast<double>(b_wins) / n, 0.5, 0.005);
}

TEST(Simulation, CertainServiceGivesConstantAgeTwo) {
  const auto m = estimate_with_ci(geo_d(1.0, 4), small_config(500, 3));
  EXPECT_EQ(m.avg_aoi, 2.0);
  EXPECT_EQ(m.avg_paoi, 2.0);
  EXPECT_EQ(m.stderr_aoi, 0.0);
}

TEST(Simulation, SingleDeterministicQueueIsExact) {
  for (std::int64_t T : {1, 2, 5, 9}) {
    const auto m = estimate_with_ci(SingleQueueSpec{ServiceModel::deterministic(T)},
                                    small_config(300, 2));
    const auto ref = single_queue_metrics(ServiceModel::deterministic(T));
    EXPECT_DOUBLE_EQ(m.avg_aoi, ref.aoi) << T;
    EXPECT_DOUBLE_EQ(m.avg_paoi, ref.paoi) << T;
    EXPECT_EQ(m.obsolete_ratio, 0.0);
  }
}

TEST(Simulation, StaggeredDeterministicPairIsExact) {
  auto m = estimate_with_ci(d_d(5, 1), small_config(400, 3));
  EXPECT_DOUBLE_EQ(m.avg_aoi, 7.2);
  EXPECT_DOUBLE_EQ(m.avg_aoi, avg_aoi_d_d(0.2));
  EXPECT_EQ(m.stderr_aoi, 0.0);
  m = estimate_with_ci(d_d(2, 1), small_config(400, 3));
  EXPECT_DOUBLE_EQ(m.avg_aoi, 3.0);
  // Aligned pairs behave like one queue: every period one update is obsolete.
  m = estimate_with_ci(d_d(4, 0), small_config(400, 3));
  EXPECT_DOUBLE_EQ(m.avg_aoi, (3.0 * 4 + 1) / 2.0);
  EXPECT_NEAR(m.obsolete_ratio, 0.5, 1e-12);
}

TEST(Simulation, UnitPeriodFlagsDegenerateOffset) {
  auto r = run_round(d_d(1, 1), small_config(50, 1), 7);
  EXPECT_TRUE(r.offset_degenerate);
  EXPECT_DOUBLE_EQ(r.avg_aoi, 2.0);
  r = run_round(d_d(3, 1), small_config(50, 1), 7);
  EXPECT_FALSE(r.offset_degenerate);
}

TEST(Simulation, GeoDAgreesWithClosedFormWithinThreeSe) {
  for (double p : {0.1, 0.4, 0.8})
    for (std::int64_t T : {2, 5, 10}) {
      const auto m = estimate_with_ci(geo_d(p, T), SimConfig{}, 4);
      const double ref = avg_aoi_geo_d(GeoDParams::make(p, T));
      ASSERT_TRUE(m.stderr_aoi.has_value());
      EXPECT_LE(std::abs(m.avg_aoi - ref), 3.0 * *m.stderr_aoi) << p << " " << T;
      const double paoi = avg_paoi_geo_d(GeoDParams::make(p, T), PaoiForm::exact);
      EXPECT_LE(std::abs(m.avg_paoi - paoi), 3.5 * *m.stderr_paoi) << p << " " << T;
    }
}

TEST(Simulation, ValidCountFollowsExactForm) {
  for (double p : {0.2, 0.5})
    for (std::int64_t T : {3, 6}) {
      const auto m = estimate_with_ci(geo_d(p, T), SimConfig{}, 4);
      const double ref = expected_valid_geo_d_exact(p, T);
      EXPECT_LE(std::abs(m.valid_updates_per_period - ref), 3.5 * *m.stderr_valid) << p << " " << T;
    }
}

TEST(Simulation, PublishedPaoiIsRejectedWhereItDiffersMost) {
  const auto m = estimate_with_ci(geo_d(0.2, 5), SimConfig{}, 4);
  const double published = avg_paoi_geo_d(GeoDParams::make(0.2, 5), PaoiForm::published);
  EXPECT_GT(std::abs(m.avg_paoi - published), 3.0 * *m.stderr_paoi);
}

TEST(Simulation, GeoGeoAgreesWithClosedForm) {
  const DualQueueSpec spec{ServiceModel::geometric(0.5), ServiceModel::geometric(0.5)};
  const auto m = estimate_with_ci(spec, SimConfig{}, 4);
  EXPECT_LE(std::abs(m.avg_aoi - avg_aoi_geo_geo(0.5, 0.5)), 3.0 * *m.stderr_aoi);
  EXPECT_TRUE(m.state_frequency.empty());
}

TEST(Simulation, ZeroWaitConservation) {
  SimConfig c = small_config(1000, 1);
  c.warmup_periods = 0;
  for (const auto& spec : {geo_d(0.3, 4), d_d(4, 1)}) {
    const auto r = run_round(spec, c, 11);
    EXPECT_EQ(r.valid + r.obsolete, r.completions[0] + r.completions[1]);
    // Back-to-back service: completed service time never exceeds the horizon.
    for (int i = 0; i < 2; ++i) {
      EXPECT_LE(r.service_slots[i], r.slots);
      EXPECT_GT(r.service_slots[i], r.slots - 200);
    }
  }
}

TEST(Simulation, TraceInvariants) {
  AoiTrace trace;
  SimConfig c = small_config(200, 1);
  c.warmup_periods = 3;
  run_round(geo_d(0.3, 4), c, 5, &trace);
  ASSERT_EQ(trace.size(), 800u);
  std::int64_t prev = 2;
  for (const auto& row : trace) {
    EXPECT_GE(row.aoi, 2);
    EXPECT_EQ(row.warmup, row.t <= 12);
    if (row.valid_a || row.valid_b) {
      EXPECT_LT(row.aoi, prev + 1);
    } else {
      EXPECT_EQ(row.aoi, prev + 1);
    }
    if (row.valid_a) {
      EXPECT_TRUE(row.delivered_a);
    }
    if (row.valid_b) {
      EXPECT_TRUE(row.delivered_b);
    }
    EXPECT_FALSE(row.valid_a && row.valid_b);
    EXPECT_EQ(row.delivered_b, row.t % 4 == 0);
    prev = row.aoi;
  }
  std::ostringstream os;
  write_trace(os, trace);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "t,aoi,delivered_a,delivered_b,valid_a,valid_b,warmup");
}

TEST(Simulation, DeterministicAcrossThreadCounts) {
  const auto one = run(geo_d(0.3, 5), small_config(1000, 6), 1);
  const auto four = run(geo_d(0.3, 5), small_config(1000, 6), 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].avg_aoi, four[i].avg_aoi);
    EXPECT_EQ(one[i].peak_sum, four[i].peak_sum);
    EXPECT_EQ(one[i].state_counts, four[i].state_counts);
  }
  EXPECT_NE(one[0].avg_aoi, one[1].avg_aoi);
}

TEST(Simulation, FixedSeedReplicatesRoundZero) {
  SimConfig c = small_config(1000, 5);
  c.seed_mode = SeedMode::fixed;
  const auto m = estimate_with_ci(geo_d(0.3, 5), c);
  EXPECT_EQ(m.stderr_aoi, 0.0);
  c.seed_mode = SeedMode::per_round;
  EXPECT_EQ(m.avg_aoi, run(geo_d(0.3, 5), c)[0].avg_aoi);
}

TEST(Simulation, SingleRoundHasNoStandardError) {
  const auto m = estimate_with_ci(geo_d(0.3, 5), small_config(500, 1));
  EXPECT_FALSE(m.stderr_aoi.has_value());
  EXPECT_FALSE(m.stderr_paoi.has_value());
}

TEST(Simulation, StandardErrorShrinksWithRoundLength) {
  const auto short_runs = estimate_with_ci(geo_d(0.3, 5), small_config(500, 10), 4);
  const auto long_runs = estimate_with_ci(geo_d(0.3, 5), small_config(8000, 10), 4);
  const double ratio = *short_runs.stderr_aoi / *long_runs.stderr_aoi;
  EXPECT_GT(ratio, 2.0);
  EXPECT_LT(ratio, 8.0);
}

TEST(Simulation, WarmupLengthDoesNotBiasTheMean) {
  SimConfig a = SimConfig{};
  SimConfig b = SimConfig{};
  a.warmup_periods = 0;
  b.warmup_periods = 500;
  const auto ma = estimate_with_ci(geo_d(0.2, 6), a, 4);
  const auto mb = estimate_with_ci(geo_d(0.2, 6), b, 4);
  const double se = std::hypot(*ma.stderr_aoi, *mb.stderr_aoi);
  EXPECT_LE(std::abs(ma.avg_aoi - mb.avg_aoi), 4.0 * se);
}

TEST(Simulation, StateFrequenciesMatchBinomialProduct) {
  SimConfig c = small_config(50000, 1);
  const auto m = estimate_with_ci(geo_d(0.5, 2), c);
  const auto params = GeoDParams::make(0.5, 2);
  double total = 0.0;
  for (int k = 0; k <= 2; ++k)
    for (int n = 0; n <= 2; ++n) {
      const double expected = state_probability({k, n}, params);
      const double sd = std::sqrt(expected * (1 - expected) / 50000.0);
      const auto it = m.state_frequency.find({k, n});
      ASSERT_NE(it, m.state_frequency.end());
      EXPECT_NEAR(it->second, expected, 5.0 * sd) << k << "," << n;
      total += it->second;
    }
  EXPECT_NEAR(total, 1.0, 1e-12);
  // The k-marginal and the n-marginal are the same binomial law.
  for (int j = 0; j <= 2; ++j) {
    double mk = 0.0, mn = 0.0;
    for (int i = 0; i <= 2; ++i) {
      mk += m.state_frequency.at({j, i});
      mn += m.state_frequency.at({i, j});
    }
    EXPECT_NEAR(mk, mn, 0.01);
  }
}

TEST(Simulation, TraceStateFrequenciesMatchRoundCounts) {
  AoiTrace trace;
  SimConfig c = small_config(3000, 1);
  const auto r = run_round(geo_d(0.4, 3), c, 99, &trace);
  const auto freq = empirical_state_frequencies(trace, 3);
  std::int64_t total = 0;
  for (const auto& [key, count] : r.state_counts) total += count;
  for (const auto& [key, count] : r.state_counts)
    EXPECT_DOUBLE_EQ(freq.at(key), static_cast<double>(count) / static_cast<double>(total));
  EXPECT_THROW(empirical_state_frequencies(trace, 0), InvalidParameter);
}
