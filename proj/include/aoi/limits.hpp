#pragma once

// Discrete-to-continuous limits. A slot lasts 1/delta seconds, so a rate of
// r per second becomes a per-slot probability r/delta and a period of T_M
// seconds becomes delta*T_M slots. Ages are scaled back to seconds by 1/delta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "aoi/closed_forms.hpp"
#include "aoi/model.hpp"

namespace aoi {

struct Discretization {
  GeoDParams params;
  double exact_slots;  ///< delta * T_M before rounding
};

/// p = lambda/delta and T = delta*T_M rounded to nearest, ties to even.
inline Discretization discretize(double lambda, double T_M, std::int64_t delta) {
  if (!(lambda > 0.0)) throw InvalidParameter("lambda", lambda, "lambda > 0");
  if (!(T_M > 0.0)) throw InvalidParameter("T_M", T_M, "T_M > 0");
  const double d = static_cast<double>(delta);
  if (!(d > lambda)) throw InvalidParameter("delta", d, "delta > lambda");
  const double slots = d * T_M;
  if (!(slots >= 1.0)) throw InvalidParameter("delta", d, "delta * T_M >= 1");
  const double T = std::nearbyint(slots);  // default rounding mode: half to even
  return Discretization{GeoDParams::make(lambda / d, static_cast<std::int64_t>(T)), slots};
}

enum class LimitSystem {
  geo_d_aoi,
  geo_d_paoi,
  geo_geo_aoi,
};

struct ConvergenceRow {
  std::int64_t delta = 0;
  double p = 0.0;
  double T = 0.0;  ///< slots per period; delta/mu_b for the Geo-Geo study
  double exact_slots = 0.0;
  double scaled_discrete = 0.0;
  double continuous_ref = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

struct ConvergenceRequest {
  LimitSystem system = LimitSystem::geo_d_aoi;
  double lambda = 1.0;  ///< rate of the geometric/exponential queue (mu_a for Geo-Geo)
  double T_M = 1.0;     ///< Geo-D only
  double mu_b = 1.0;    ///< Geo-Geo only
  PaoiForm paoi_form = PaoiForm::published;
};

inline ConvergenceRow convergence_row(const ConvergenceRequest& req, std::int64_t delta) {
  ConvergenceRow row;
  row.delta = delta;
  const double d = static_cast<double>(delta);
  if (req.system == LimitSystem::geo_geo_aoi) {
    if (!(d > req.lambda)) throw InvalidParameter("delta", d, "delta > mu_a");
    if (!(d > req.mu_b)) throw InvalidParameter("delta", d, "delta > mu_b");
    row.p = req.lambda / d;
    row.T = d / req.mu_b;
    row.exact_slots = row.T;
    row.scaled_discrete = avg_aoi_geo_geo(row.p, req.mu_b / d) / d;
    row.continuous_ref = continuous_reference(req.lambda, req.mu_b).aoi;
  } else {
    const auto disc = discretize(req.lambda, req.T_M, delta);
    row.p = disc.params.p;
    row.T = static_cast<double>(disc.params.T);
    row.exact_slots = disc.exact_slots;
    const auto ref = continuous_reference(ContinuousParams::make(req.lambda, req.T_M));
    if (req.system == LimitSystem::geo_d_aoi) {
      row.scaled_discrete = avg_aoi_geo_d(disc.params) / d;
      row.continuous_ref = ref.aoi;
    } else {
      row.scaled_discrete = avg_paoi_geo_d(disc.params, req.paoi_form) / d;
      row.continuous_ref = *ref.paoi;
    }
  }
  row.abs_err = std::abs(row.scaled_discrete - row.continuous_ref);
  row.rel_err = row.abs_err / row.continuous_ref;
  return row;
}

/// One row per delta, in the given order. Deltas must be ascending.
inline std::vector<ConvergenceRow> convergence_table(const ConvergenceRequest& req,
                                                     const std::vector<std::int64_t>& deltas) {
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (deltas[i] <= deltas[i - 1])
      throw InvalidParameter("deltas", static_cast<double>(deltas[i]), "strictly ascending");
  std::vector<ConvergenceRow> rows;
  rows.reserve(deltas.size());
  for (auto delta : deltas) rows.push_back(convergence_row(req, delta));
  return rows;
}

inline const char* convergence_csv_header() {
  return "delta,p,T,scaled_discrete,continuous_ref,abs_err,rel_err";
}

inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  const auto old_precision = os.precision(17);
  os << convergence_csv_header() << '\n';
  for (const auto& r : rows)
    os << r.delta << ',' << r.p << ',' << r.T << ',' << r.scaled_discrete << ','
       << r.continuous_ref << ',' << r.abs_err << ',' << r.rel_err << '\n';
  os.precision(old_precision);
}

/// Kolmogorov distance between U/delta, U geometric on {1, 2, ...} with
/// success probability r/delta, and Exp(r). The discrete CDF is a step
/// function with jumps at j/delta; on [j/delta, (j+1)/delta) the gap is
/// e^{-r m} - q^j, so the supremum is attained at a jump or just before the
/// next one.
inline double geo_to_exp_distance(double r, std::int64_t delta) {
  if (!(r > 0.0)) throw InvalidParameter("r", r, "r > 0");
  const double d = static_cast<double>(delta);
  if (!(d > r)) throw InvalidParameter("delta", d, "delta > r");
  const double log_q = std::log1p(-r / d);
  const double step = r / d;
  double sup = 0.0;
  for (std::int64_t j = 0;; ++j) {
    const double jd = static_cast<double>(j);
    const double tail_geo = std::exp(jd * log_q);
    const double at_jump = std::exp(-step * jd) - tail_geo;
    const double before_next = std::exp(-step * (jd + 1.0)) - tail_geo;
    sup = std::max({sup, std::abs(at_jump), std::abs(before_next)});
    if (tail_geo < 1e-18) break;
  }
  return sup;
}

}  // namespace aoi
