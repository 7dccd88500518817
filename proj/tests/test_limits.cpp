#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aoi/limits.hpp"

using namespace aoi;

TEST(Discretize, Examples) {
  const auto d = discretize(1.0, 1.0, 100);
  EXPECT_DOUBLE_EQ(d.params.p, 0.01);
  EXPECT_EQ(d.params.T, 100);
  EXPECT_DOUBLE_EQ(d.exact_slots, 100.0);

  const auto e = discretize(2.0, 0.5, 10);
  EXPECT_DOUBLE_EQ(e.params.p, 0.2);
  EXPECT_EQ(e.params.T, 5);
}

TEST(Discretize, RoundsHalfToEven) {
  EXPECT_EQ(discretize(1.0, 0.25, 10).params.T, 2);
  EXPECT_EQ(discretize(1.0, 0.75, 10).params.T, 8);
  EXPECT_EQ(discretize(1.0, 0.35, 10).params.T, 4);
  EXPECT_EQ(discretize(1.0, 0.34, 10).params.T, 3);
}

TEST(Discretize, RejectsCoarseGrids) {
  EXPECT_THROW(discretize(5.0, 1.0, 5), InvalidParameter);
  EXPECT_THROW(discretize(1.0, 0.01, 10), InvalidParameter);
  EXPECT_THROW(discretize(0.0, 1.0, 10), InvalidParameter);
  EXPECT_THROW(discretize(1.0, -1.0, 10), InvalidParameter);
}

TEST(Convergence, GeoDAgeApproachesContinuousReference) {
  ConvergenceRequest req;
  const auto rows = convergence_table(req, {10, 100, 1000});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].rel_err, 4.43e-2, 1e-3);
  EXPECT_NEAR(rows[1].rel_err, 4.36e-3, 1e-4);
  EXPECT_NEAR(rows[2].rel_err, 4.35e-4, 1e-5);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].abs_err, rows[i - 1].abs_err);
    EXPECT_EQ(rows[i].continuous_ref, rows[0].continuous_ref);
  }
}

TEST(Convergence, ErrorIsFirstOrderInSlotLength) {
  ConvergenceRequest req;
  req.lambda = 0.7;
  req.T_M = 2.0;
  const auto rows = convergence_table(req, {100, 1000, 10000});
  const double c1 = rows[1].abs_err * 1000.0;
  const double c2 = rows[2].abs_err * 10000.0;
  EXPECT_NEAR(c1 / c2, 1.0, 0.02);
}

TEST(Convergence, PeakAgeUnderBothForms) {
  for (auto form : {PaoiForm::published, PaoiForm::exact}) {
    ConvergenceRequest req;
    req.system = LimitSystem::geo_d_paoi;
    req.paoi_form = form;
    const auto rows = convergence_table(req, {10, 100, 1000, 10000});
    EXPECT_LT(rows.back().rel_err, 2e-4);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].abs_err, rows[i - 1].abs_err);
  }
  ConvergenceRequest req;
  req.system = LimitSystem::geo_d_paoi;
  const auto rows = convergence_table(req, {10, 100, 1000});
  EXPECT_NEAR(rows[0].rel_err, 1.43e-2, 1e-3);
  EXPECT_NEAR(rows[2].rel_err, 1.36e-4, 1e-5);
}

TEST(Convergence, GeoGeoWithUnequalRates) {
  ConvergenceRequest req;
  req.system = LimitSystem::geo_geo_aoi;
  req.lambda = 1.0;
  req.mu_b = 2.5;
  const auto rows = convergence_table(req, {10, 1000, 1000000});
  EXPECT_DOUBLE_EQ(rows[0].T, 4.0);
  EXPECT_LT(rows[2].rel_err, 1e-5);
  EXPECT_LT(rows[2].rel_err, rows[1].rel_err);
  EXPECT_EQ(rows[2].continuous_ref, continuous_reference(1.0, 2.5).aoi);

  req.mu_b = 1.0;
  const auto equal = convergence_row(req, 1000000);
  EXPECT_LT(equal.rel_err, 1e-6);
}

TEST(Convergence, RejectsUnorderedDeltas) {
  ConvergenceRequest req;
  EXPECT_THROW(convergence_table(req, {100, 10}), InvalidParameter);
  EXPECT_THROW(convergence_table(req, {100, 100}), InvalidParameter);
}

TEST(Convergence, CsvLayout) {
  ConvergenceRequest req;
  std::ostringstream os;
  write_convergence_csv(os, convergence_table(req, {10, 100}));
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), convergence_csv_header());
  EXPECT_EQ(std::string(convergence_csv_header()),
            "delta,p,T,scaled_discrete,continuous_ref,abs_err,rel_err");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_EQ(s.find("10,0.10000000000000001,10,"), s.find('\n') + 1);
}

TEST(GeoToExp, KnownValues) {
  EXPECT_NEAR(geo_to_exp_distance(1.0, 10), 0.0952, 1e-4);
  EXPECT_NEAR(geo_to_exp_distance(1.0, 100), 0.00995, 1e-5);
  EXPECT_NEAR(geo_to_exp_distance(1.0, 1000), 0.0009995, 1e-7);
  EXPECT_NEAR(geo_to_exp_distance(1.0, 10000), 1e-4, 1e-7);
}

TEST(GeoToExp, MonotoneInDelta) {
  for (double r : {0.5, 1.0, 2.0}) {
    double prev = 1.0;
    for (std::int64_t delta : {5, 10, 50, 100, 1000, 10000}) {
      const double d = geo_to_exp_distance(r, delta);
      EXPECT_LT(d, prev) << r << " " << delta;
      EXPECT_GT(d, 0.0);
      prev = d;
    }
  }
}

TEST(GeoToExp, MatchesDenseScan) {
  for (double r : {0.5, 2.0}) {
    const std::int64_t delta = 20;
    const double p = r / static_cast<double>(delta);
    double sup = 0.0;
    for (int i = 0; i < 200000; ++i) {
      const double x = i * 1e-4;
      const double j = std::floor(x * static_cast<double>(delta) + 1e-12);
      const double geo_cdf = 1.0 - std::pow(1.0 - p, j);
      sup = std::max(sup, std::abs(geo_cdf - (1.0 - std::exp(-r * x))));
    }
    const double exact = geo_to_exp_distance(r, delta);
    EXPECT_GE(exact, sup - 1e-12);
    EXPECT_NEAR(exact, sup, 1e-3);
  }
}

TEST(GeoToExp, RejectsInvalidInputs) {
  EXPECT_THROW(geo_to_exp_distance(0.0, 10), InvalidParameter);
  EXPECT_THROW(geo_to_exp_distance(20.0, 10), InvalidParameter);
}
