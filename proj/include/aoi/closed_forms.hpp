#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "aoi/model.hpp"

namespace aoi {

/// Geo-D parameters: sensor A completes w.p. p per slot, sensor B every T slots.
struct GeoDParams {
  double p = 0.5;
  std::int64_t T = 1;

  static GeoDParams make(double p, std::int64_t T) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("p", p, "0 < p <= 1");
    if (T < 1) throw InvalidParameter("T", static_cast<double>(T), "T >= 1");
    return GeoDParams{p, T};
  }

  double q() const noexcept { return 1.0 - p; }
};

/// Continuous-time M-D parameters: exponential rate lambda, period T_M seconds.
struct ContinuousParams {
  double lambda = 1.0;
  double T_M = 1.0;

  static ContinuousParams make(double lambda, double T_M) {
    if (!(lambda > 0.0 && std::isfinite(lambda)))
      throw InvalidParameter("lambda", lambda, "lambda > 0");
    if (!(T_M > 0.0 && std::isfinite(T_M))) throw InvalidParameter("T_M", T_M, "T_M > 0");
    return ContinuousParams{lambda, T_M};
  }
};

/// Which closed form of the Geo-D average PAoI to evaluate.
enum class PaoiForm {
  published,  ///< the printed theorem expression
  exact,      ///< re-derived from the per-state enumeration; agrees with simulation
};

namespace detail {

// Powers of q = 1 - p as exp(n * log1p(-p)); 1 - q^n via expm1. Valid for
// 0 < p < 1 and any real n >= 0; trusted for p >= 1e-8.
struct QPowers {
  double log_q;
  double pow(double n) const { return std::exp(n * log_q); }
  double one_minus_pow(double n) const { return -std::expm1(n * log_q); }
};

inline QPowers q_powers(double p) { return QPowers{std::log1p(-p)}; }

inline bool geo_d_is_boundary(double p, double T) { return p == 1.0 || T == 1.0; }

}  // namespace detail

//---------------------------------------------------------------------------//
// Geo-D
//---------------------------------------------------------------------------//

/// Average AoI of the Geo-D system, real-valued T >= 1 allowed.
///
/// 2/p + (q^T/p)(-1 + 2/T - 3/(pT)) + (q^{2T}/p)(2 - 2/T + 3/(pT)), evaluated
/// as [pT(2 - u + 2u^2) + u(1-u)(2p - 3)] / (p^2 T) with u = q^T and 1 - u
/// taken from expm1 so the 3/(pT) terms cancel without loss as p -> 0.
inline double avg_aoi_geo_d(double p, double T) {
  validate_geo_d_analytic(p, T);
  if (detail::geo_d_is_boundary(p, T)) return 2.0;
  const auto qp = detail::q_powers(p);
  const double u = qp.pow(T);
  const double w = qp.one_minus_pow(T);
  const double num = p * T * (2.0 - u + 2.0 * u * u) + u * w * (2.0 * p - 3.0);
  return num / (p * p * T);
}

inline double avg_aoi_geo_d(const GeoDParams& params) {
  return avg_aoi_geo_d(params.p, static_cast<double>(params.T));
}

/// Expected valid updates per deterministic period, published form:
/// q^{2T-1} + q^{T-1}(T-1)p + Tp.
inline double expected_valid_geo_d_published(double p, double T) {
  validate_geo_d_analytic(p, T);
  if (p == 1.0) return T;  // every slot delivers one valid A update
  const auto qp = detail::q_powers(p);
  return qp.pow(2 * T - 1) + qp.pow(T - 1) * (T - 1) * p + T * p;
}

/// Expected valid updates per period from the exact enumeration:
/// Tp + q^{2T-1} + (T-1) p q^T.
inline double expected_valid_geo_d_exact(double p, double T) {
  validate_geo_d_analytic(p, T);
  if (p == 1.0) return T;
  const auto qp = detail::q_powers(p);
  return T * p + qp.pow(2 * T - 1) + (T - 1) * p * qp.pow(T);
}

/// Expected sum of AoI peaks per period, published numerator:
/// 2T + q^{2T-1}[2/p - (p/2 - 2)(T-1)] + q^{T-1}(2 - 2/p - p/2 - Tp/2 + T^2 p).
inline double expected_peak_sum_geo_d_published(double p, double T) {
  validate_geo_d_analytic(p, T);
  if (p == 1.0) return 2.0 * T;
  const auto qp = detail::q_powers(p);
  const double a = qp.pow(T - 1);
  const double b = qp.pow(2 * T - 1);
  // q^{2T-1}(2/p) + q^{T-1}(-2/p) = -(2/p) q^{T-1} (1 - q^T)
  return 2.0 * T - (2.0 / p) * a * qp.one_minus_pow(T) - b * (p / 2.0 - 2.0) * (T - 1) +
         a * (2.0 - p / 2.0 - T * p / 2.0 + T * T * p);
}

/// Expected sum of AoI peaks per period from the exact enumeration:
/// 2T + q^{2T-1}(2/p + 2(T-1)) + q^{T-1}(2 - 2/p + T(T-1)pq).
inline double expected_peak_sum_geo_d_exact(double p, double T) {
  validate_geo_d_analytic(p, T);
  if (p == 1.0) return 2.0 * T;
  const auto qp = detail::q_powers(p);
  const double a = qp.pow(T - 1);
  const double b = qp.pow(2 * T - 1);
  return 2.0 * T - (2.0 / p) * a * qp.one_minus_pow(T) + 2.0 * (T - 1) * b +
         a * (2.0 + T * (T - 1) * p * (1.0 - p));
}

/// Average PAoI of the Geo-D system: expected peak sum over expected valid count.
inline double avg_paoi_geo_d(double p, double T, PaoiForm form = PaoiForm::published) {
  validate_geo_d_analytic(p, T);
  if (detail::geo_d_is_boundary(p, T)) return 2.0;
  if (form == PaoiForm::published)
    return expected_peak_sum_geo_d_published(p, T) / expected_valid_geo_d_published(p, T);
  return expected_peak_sum_geo_d_exact(p, T) / expected_valid_geo_d_exact(p, T);
}

inline double avg_paoi_geo_d(const GeoDParams& params,
                             PaoiForm form = PaoiForm::published) {
  return avg_paoi_geo_d(params.p, static_cast<double>(params.T), form);
}

inline double avg_paoi_geo_d_exact(const GeoDParams& params) {
  return avg_paoi_geo_d(params, PaoiForm::exact);
}

/// P(K = k, N = n): product of two Binomial(T, p) masses.
inline double state_probability(StateKey key, const GeoDParams& params) {
  const auto T = params.T;
  if (key.k < 0 || key.n < 0 || key.k > T || key.n > T)
    throw InvalidParameter("state", key.k < 0 || key.k > T ? key.k : key.n, "0 <= k, n <= T");
  auto binom_pmf = [&](std::int64_t x) {
    double c = 1.0;
    for (std::int64_t i = 1; i <= x; ++i)
      c = c * static_cast<double>(T - x + i) / static_cast<double>(i);
    return c * std::pow(params.p, static_cast<double>(x)) *
           std::pow(params.q(), static_cast<double>(T - x));
  };
  return binom_pmf(key.k) * binom_pmf(key.n);
}

//---------------------------------------------------------------------------//
// Single queues
//---------------------------------------------------------------------------//

struct AgePair {
  double aoi;
  double paoi;
};

/// ZW/Geo/1 gives (2/mu, 2/mu); ZW/D/1 with period T gives ((3T+1)/2, 2T).
inline AgePair single_queue_metrics(const ServiceModel& model) {
  if (const auto* g = std::get_if<Geometric>(&model.law())) return {2.0 / g->p, 2.0 / g->p};
  if (const auto* d = std::get_if<Deterministic>(&model.law())) {
    const double T = static_cast<double>(d->T);
    return {(3.0 * T + 1.0) / 2.0, 2.0 * T};
  }
  throw InvalidParameter("model", model.rate(),
                         "Geometric or Deterministic (continuous single queue not supported)");
}

//---------------------------------------------------------------------------//
// Geo-Geo and D-D
//---------------------------------------------------------------------------//

namespace detail {
inline void check_rate(const char* name, double mu) {
  if (!(mu > 0.0 && mu <= 1.0)) throw InvalidParameter(name, mu, "0 < mu <= 1");
}
}  // namespace detail

/// Average AoI of two parallel ZW/Geo/1 queues.
inline double avg_aoi_geo_geo(double mu_a, double mu_b) {
  detail::check_rate("mu_a", mu_a);
  detail::check_rate("mu_b", mu_b);
  // Evaluate in a canonical order so the result is symmetric to the bit.
  const double a = std::min(mu_a, mu_b);
  const double b = std::max(mu_a, mu_b);
  const double num =
      a * a + b * b + 3.0 * a * b - 3.0 * a * a * b - 3.0 * a * b * b + 2.0 * a * a * b * b;
  const double s = a + b - a * b;
  return 2.0 * num / (s * s * s);
}

/// Average age of the stalest information: AoI + AoSI = 2/mu_a + 2/mu_b.
inline double avg_aosi_geo_geo(double mu_a, double mu_b) {
  const double aoi = avg_aoi_geo_geo(mu_a, mu_b);
  return 2.0 / mu_a + 2.0 / mu_b - aoi;
}

/// Two ZW/D/1 queues of equal period 1/mu, started one slot apart.
inline double avg_aoi_d_d(double mu) {
  detail::check_rate("mu", mu);
  return mu + 3.0 / (2.0 * mu) - 0.5;
}

//---------------------------------------------------------------------------//
// Continuous-time references
//---------------------------------------------------------------------------//

struct ContinuousResult {
  double aoi;
  std::optional<double> paoi;
};

/// M-D average AoI and PAoI, in seconds. The published forms are divided
/// through by e^{2 lambda T_M} so large arguments neither overflow nor cancel.
inline ContinuousResult continuous_reference(const ContinuousParams& params) {
  const double l = params.lambda;
  const double x = l * params.T_M;
  const double e1 = std::exp(-x);
  const double e2 = e1 * e1;
  const double aoi = (2.0 * x + (3.0 + 2.0 * x) * e2 - (3.0 + x) * e1) / (params.T_M * l * l);
  const double paoi_num = (2.0 + 2.0 * x) * e2 + (x * x - 2.0) * e1 + 2.0 * x;
  const double paoi_den = l * (e2 + x * e1 + x);
  return {aoi, paoi_num / paoi_den};
}

/// M-M average AoI 2(a^2 + 3ab + b^2)/(a + b)^3. No PAoI form is available.
inline ContinuousResult continuous_reference(double mu_a, double mu_b) {
  if (!(mu_a > 0.0)) throw InvalidParameter("mu_a", mu_a, "mu_a > 0");
  if (!(mu_b > 0.0)) throw InvalidParameter("mu_b", mu_b, "mu_b > 0");
  const double a = std::min(mu_a, mu_b);
  const double b = std::max(mu_a, mu_b);
  const double s = a + b;
  return {2.0 * (a * a + 3.0 * a * b + b * b) / (s * s * s), std::nullopt};
}

//---------------------------------------------------------------------------//
// Reduction ratios
//---------------------------------------------------------------------------//

enum class AgeMetric { aoi, paoi };
enum class Baseline { zw_geo, zw_d };

/// Relative improvement of Geo-D over a single queue of the same rate, with
/// p = mu and T = 1/mu (T need not be an integer here).
inline double reduction_ratio(AgeMetric which, Baseline baseline, double mu,
                              PaoiForm form = PaoiForm::published) {
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidParameter("mu", mu, "0 < mu < 1");
  const double T = 1.0 / mu;
  if (which == AgeMetric::paoi) {
    // Both single queues have PAoI 2/mu, so the ratio ignores the baseline.
    const double single = 2.0 / mu;
    return (single - avg_paoi_geo_d(mu, T, form)) / single;
  }
  const double single = baseline == Baseline::zw_geo ? 2.0 / mu : 1.5 / mu + 0.5;
  return (single - avg_aoi_geo_d(mu, T)) / single;
}

}  // namespace aoi
