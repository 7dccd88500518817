#pragma once

// Exact combinatorics for the Geo-D period states.
//
// Within one service period of sensor B (T slots), sensor A's completions
// form a Bernoulli process; conditioned on n completions their inter-
// completion gaps (x_1, ..., x_n), x_i >= 1, sum <= T, are uniform over the
// C(T, n) such tuples. Everything here enumerates those tuples and keeps all
// arithmetic in arbitrary-precision rationals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "aoi/closed_forms.hpp"
#include "aoi/model.hpp"

namespace aoi {

using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                             boost::multiprecision::et_off>;
using Rational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                               boost::multiprecision::et_off>;

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

//---------------------------------------------------------------------------//
// Exact helpers
//---------------------------------------------------------------------------//

inline BigInt binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt c = 1;
  for (std::int64_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

/// The exact value of a finite double as a rational.
inline Rational to_rational(double x) {
  if (!std::isfinite(x)) throw InvalidParameter("x", x, "finite");
  int exp = 0;
  const double mant = std::frexp(x, &exp);  // x = mant * 2^exp, |mant| in [0.5, 1)
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  BigInt num = scaled;
  BigInt den = 1;
  const int shift = exp - 53;
  if (shift >= 0) num <<= shift;
  else den <<= -shift;
  return Rational(num, den);
}

/// Correctly scaled conversion to double (both parts may exceed double range).
inline double to_double(const Rational& r) {
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  if (num == 0) return 0.0;
  const bool negative = num < 0;
  if (negative) num = -num;
  const auto nbits = static_cast<long>(boost::multiprecision::msb(num));
  const auto dbits = static_cast<long>(boost::multiprecision::msb(den));
  // Quotient with ~64 significant bits, then rescale.
  const long shift = 64 - (nbits - dbits);
  if (shift > 0) num <<= shift;
  else den <<= -shift;
  const BigInt quotient = num / den;
  const double value = std::ldexp(quotient.convert_to<double>(), static_cast<int>(-shift));
  return negative ? -value : value;
}

//---------------------------------------------------------------------------//
// Compositions
//---------------------------------------------------------------------------//

/// Gaps x_1..x_n (each >= 1) inside a horizon of T slots; the remainder
/// x_{n+1} = T - sum(x_i) is >= 0.
struct Composition {
  std::vector<int> parts;
  int horizon = 0;

  int remainder() const {
    int s = 0;
    for (int x : parts) s += x;
    return horizon - s;
  }
};

namespace detail {

inline void check_cap(const BigInt& count, std::uint64_t cap, const std::string& what) {
  if (count > BigInt(cap))
    throw ResourceLimit(what + " needs " + count.str() + " enumerations, cap is " +
                        std::to_string(cap));
}

template <class Fn>
void for_each_composition_impl(std::vector<int>& parts, int depth, int n, int left, Fn& fn) {
  if (depth == n) {
    fn(static_cast<const std::vector<int>&>(parts));
    return;
  }
  // Leave at least one slot for each remaining part.
  const int max_part = left - (n - depth - 1);
  for (int x = 1; x <= max_part; ++x) {
    parts[depth] = x;
    for_each_composition_impl(parts, depth + 1, n, left - x, fn);
  }
}

}  // namespace detail

/// Visits every composition of n parts within horizon T exactly once, in
/// lexicographic order. fn receives the parts (x_1..x_n).
template <class Fn>
void for_each_composition(int n, int T, Fn&& fn, std::uint64_t cap = kDefaultEnumerationCap) {
  if (T < 0 || n < 0 || n > T)
    throw InvalidParameter("n", n, "0 <= n <= T");
  detail::check_cap(binomial(T, n), cap, "composition enumeration");
  std::vector<int> parts(static_cast<std::size_t>(n));
  detail::for_each_composition_impl(parts, 0, n, T, fn);
}

inline std::vector<Composition> enumerate_compositions(
    int n, int T, std::uint64_t cap = kDefaultEnumerationCap) {
  std::vector<Composition> out;
  for_each_composition(
      n, T, [&](const std::vector<int>& parts) { out.push_back(Composition{parts, T}); }, cap);
  return out;
}

//---------------------------------------------------------------------------//
// Nested-sum identities
//---------------------------------------------------------------------------//

enum class SumKind {
  count,     ///< sum_{x_i..x_n} 1 = C(b_i + n - i, n - i + 1), for every prefix
  linear_i,  ///< sum x_i = C(T+1, n+1)
  square_i,  ///< sum x_i^2 = C(T+2, n+2) + C(T+1, n+2)
  cross_ij,  ///< sum x_i x_j = C(T+2, n+2), i != j
};

struct LemmaCheck {
  BigInt brute_force;
  BigInt closed_form;
  bool holds() const { return brute_force == closed_form; }
};

/// Brute-force nested sum paired with its binomial closed form. For `count`,
/// both sides are accumulated over every admissible prefix (x_1..x_{i-1}),
/// and the check fails if any single prefix disagrees.
inline LemmaCheck lemma1_oracle(SumKind kind, int i, int j, int n, int T,
                                std::uint64_t cap = kDefaultEnumerationCap) {
  if (n < 1 || n > T) throw InvalidParameter("n", n, "1 <= n <= T");
  if (i < 1 || i > n) throw InvalidParameter("i", i, "1 <= i <= n");
  if (kind == SumKind::cross_ij && (j < 1 || j > n || j == i))
    throw InvalidParameter("j", j, "1 <= j <= n, j != i");

  LemmaCheck out;
  const auto ii = static_cast<std::size_t>(i - 1);
  const auto jj = static_cast<std::size_t>(j - 1);

  if (kind == SumKind::count) {
    // Group the full enumeration by prefix; each group's size is the
    // brute-force inner sum for that prefix.
    std::vector<int> last_prefix;
    BigInt group = 0;
    bool all_equal = true;
    auto flush = [&]() {
      if (group == 0) return;
      int prefix_sum = 0;
      for (int x : last_prefix) prefix_sum += x;
      const int b_i = T - (n - i) - prefix_sum;
      const BigInt closed = binomial(b_i + n - i, n - i + 1);
      out.brute_force += group;
      out.closed_form += closed;
      if (closed != group) all_equal = false;
      group = 0;
    };
    for_each_composition(
        n, T,
        [&](const std::vector<int>& parts) {
          std::vector<int> prefix(parts.begin(), parts.begin() + (i - 1));
          if (prefix != last_prefix) {
            flush();
            last_prefix = std::move(prefix);
          }
          group += 1;
        },
        cap);
    flush();
    if (!all_equal) out.closed_form += 1;  // force a visible mismatch
    return out;
  }

  for_each_composition(
      n, T,
      [&](const std::vector<int>& parts) {
        const BigInt xi = parts[ii];
        switch (kind) {
          case SumKind::linear_i: out.brute_force += xi; break;
          case SumKind::square_i: out.brute_force += xi * xi; break;
          case SumKind::cross_ij: out.brute_force += xi * parts[jj]; break;
          case SumKind::count: break;
        }
      },
      cap);
  switch (kind) {
    case SumKind::linear_i: out.closed_form = binomial(T + 1, n + 1); break;
    case SumKind::square_i: out.closed_form = binomial(T + 2, n + 2) + binomial(T + 1, n + 2); break;
    case SumKind::cross_ij: out.closed_form = binomial(T + 2, n + 2); break;
    case SumKind::count: break;
  }
  return out;
}

struct LemmaSuiteResult {
  std::uint64_t checks = 0;
  std::uint64_t failures = 0;
  std::vector<std::string> failure_messages;
};

/// Every (kind, i, j, n, T) with 1 <= n <= T <= max_T.
inline LemmaSuiteResult verify_lemma_suite(int max_T, std::uint64_t cap = kDefaultEnumerationCap) {
  LemmaSuiteResult result;
  auto record = [&](const LemmaCheck& c, const std::string& label) {
    ++result.checks;
    if (!c.holds()) {
      ++result.failures;
      result.failure_messages.push_back(label + ": brute " + c.brute_force.str() +
                                        " != closed " + c.closed_form.str());
    }
  };
  for (int T = 1; T <= max_T; ++T) {
    for (int n = 1; n <= T; ++n) {
      for (int i = 1; i <= n; ++i) {
        const std::string at = "(i=" + std::to_string(i) + ", n=" + std::to_string(n) +
                               ", T=" + std::to_string(T) + ")";
        record(lemma1_oracle(SumKind::count, i, 0, n, T, cap), "count " + at);
        record(lemma1_oracle(SumKind::linear_i, i, 0, n, T, cap), "linear " + at);
        const LemmaCheck square = lemma1_oracle(SumKind::square_i, i, 0, n, T, cap);
        record(square, "square " + at);
        // Same identity after Pascal's rule: C(T+1, n+1) + 2 C(T+1, n+2).
        record(LemmaCheck{square.brute_force,
                          binomial(T + 1, n + 1) + 2 * binomial(T + 1, n + 2)},
               "square (Pascal form) " + at);
        for (int j = 1; j <= n; ++j) {
          if (j == i) continue;
          record(lemma1_oracle(SumKind::cross_ij, i, j, n, T, cap),
                 "cross j=" + std::to_string(j) + " " + at);
        }
      }
    }
  }
  return result;
}

//---------------------------------------------------------------------------//
// Per-state expectations
//---------------------------------------------------------------------------//

/// Conditional expectations for one period in state (k, n): e_a is the sum of
/// AoI peaks preceding valid resets, e_v the number of valid updates, and e_q
/// the sum over the period's T slots of the AoI held during each slot.
struct StateExpectations {
  StateKey key;
  Rational e_a;
  Rational e_v;
  Rational e_q;
};

namespace detail {

struct PeriodTotals {
  std::int64_t area = 0;
  std::int64_t peaks = 0;
  std::int64_t valid = 0;
};

// One period, slots 1..T; sensor B delivers at slot T (generated at slot 0)
// and delivered at slot 0 an update generated at -T. `prev` holds A's
// completion slots in -T+1..0, `cur` those in 1..T. An update delivered at a
// completion was generated at the previous completion; before the window
// that time is <= -T, which can never beat B's, so -T stands in for it.
//
// A simultaneous pair with equal generation times resets the AoI to the same
// value whichever one the coin keeps, so both coin branches contribute
// identical totals and the 1/2 weights collapse.
inline PeriodTotals simulate_period(const std::vector<int>& prev, const std::vector<int>& cur,
                                    int T) {
  PeriodTotals totals;
  auto generation_of = [&](std::size_t idx_in_all) -> int {
    if (idx_in_all == 0) return -T;
    const std::size_t pi = idx_in_all - 1;
    return pi < prev.size() ? prev[pi] : cur[pi - prev.size()];
  };
  int freshest = -T;  // B's update delivered at slot 0
  for (std::size_t idx = 0; idx < prev.size(); ++idx)
    freshest = std::max(freshest, generation_of(idx));

  int aoi = 0 - freshest + 1;  // held during slot 1
  std::size_t next_cur = 0;
  for (int t = 1; t <= T; ++t) {
    totals.area += aoi;
    bool any_valid = false;
    int best_gen = 0;
    auto offer = [&](int g) {
      if (t - g < aoi && (!any_valid || g > best_gen)) {
        best_gen = g;
        any_valid = true;
      }
    };
    if (next_cur < cur.size() && cur[next_cur] == t) {
      offer(generation_of(prev.size() + next_cur));
      ++next_cur;
    }
    if (t == T) offer(0);
    if (!any_valid) {
      aoi += 1;
      continue;
    }
    totals.peaks += aoi;
    totals.valid += 1;
    aoi = t - best_gen + 1;
  }
  return totals;
}

inline std::vector<int> completion_slots(const std::vector<int>& gaps, int offset) {
  std::vector<int> slots;
  slots.reserve(gaps.size());
  int pos = offset;
  for (int x : gaps) {
    pos += x;
    slots.push_back(pos);
  }
  return slots;
}

}  // namespace detail

/// Exact E[A], E[V], E[Q] for state (k, n) by enumerating every equiprobable
/// pair of previous/current compositions and replaying the period slot by
/// slot. The two periods are taken as independent (product of uniform laws).
inline StateExpectations oracle_state_expectations(StateKey key, int T,
                                                   std::uint64_t cap = kDefaultEnumerationCap) {
  if (T < 1) throw InvalidParameter("T", T, "T >= 1");
  if (key.k < 0 || key.k > T || key.n < 0 || key.n > T)
    throw InvalidParameter("state", key.k, "0 <= k, n <= T");
  const BigInt pairs = binomial(T, key.k) * binomial(T, key.n);
  detail::check_cap(pairs, cap, "state (" + std::to_string(key.k) + "," +
                                    std::to_string(key.n) + ") enumeration");

  std::int64_t area = 0, peaks = 0, valid = 0, count = 0;
  for_each_composition(key.k, T, [&](const std::vector<int>& y) {
    const auto prev = detail::completion_slots(y, -T);
    for_each_composition(key.n, T, [&](const std::vector<int>& x) {
      const auto totals = detail::simulate_period(prev, detail::completion_slots(x, 0), T);
      area += totals.area;
      peaks += totals.peaks;
      valid += totals.valid;
      ++count;
    });
  });
  const BigInt w = count;
  return StateExpectations{key, Rational(BigInt(peaks), w), Rational(BigInt(valid), w),
                           Rational(BigInt(area), w)};
}

//---------------------------------------------------------------------------//
// Printed per-state expressions
//---------------------------------------------------------------------------//

enum class TableVariant {
  table_I,        ///< the summary table
  proof_section,  ///< the expressions derived state by state in the proof
};

enum class StateFamily { s00, s01, s0n, sk0, sk1, skn };

inline StateFamily family_of(StateKey key) {
  if (key.k == 0) {
    if (key.n == 0) return StateFamily::s00;
    if (key.n == 1) return StateFamily::s01;
    return StateFamily::s0n;
  }
  if (key.n == 0) return StateFamily::sk0;
  if (key.n == 1) return StateFamily::sk1;
  return StateFamily::skn;
}

inline const char* family_name(StateFamily f) {
  switch (f) {
    case StateFamily::s00: return "(0,0)";
    case StateFamily::s01: return "(0,1)";
    case StateFamily::s0n: return "(0,n>=2)";
    case StateFamily::sk0: return "(k>=1,0)";
    case StateFamily::sk1: return "(k>=1,1)";
    case StateFamily::skn: return "(k>=1,n>=2)";
  }
  return "?";
}

/// Evaluates the printed expressions for state (k, n) in exact arithmetic.
/// The expressions assume T >= 2.
inline StateExpectations table_expectations(StateKey key, int T, TableVariant variant) {
  if (T < 2)
    throw DomainError("per-state expressions are stated for T >= 2, got T = " +
                      std::to_string(T));
  if (key.k < 0 || key.k > T || key.n < 0 || key.n > T)
    throw DomainError("state (" + std::to_string(key.k) + "," + std::to_string(key.n) +
                      ") outside 0 <= k, n <= " + std::to_string(T));

  const Rational t = T;
  const Rational k = key.k;
  const Rational n = key.n;
  StateExpectations e{key, 0, 0, 0};
  const bool table = variant == TableVariant::table_I;

  switch (family_of(key)) {
    case StateFamily::s00:
    case StateFamily::s01:
      e.e_a = 2 * t;
      e.e_v = 1;
      e.e_q = t * (3 * t + 1) / 2;
      break;
    case StateFamily::s0n:
      e.e_a = t + 2 * (n - 1) * (t + 1) / (n + 1);
      e.e_v = n - 1;
      e.e_q = table ? (t + 1) * (-2 + 5 * t + n * (2 + 4 * t)) / ((n + 1) * (n + 2))
                    : (-n * n + n * (8 * t * t + 13 * t + 2) + 10 * t * t + 8 * t - 4) /
                          (2 * (n + 1) * (n + 2));
      break;
    case StateFamily::sk0:
      e.e_a = (k * (t - 1) + 3 * t + 1) / (k + 1);
      e.e_v = 1;
      e.e_q = table ? t * (3 + 5 * t + k * (t - 1)) / (2 * (k + 1))
                    : t * ((k + 5) * t + 4) / (2 * (k + 1));
      break;
    case StateFamily::sk1:
      e.e_v = 2 - 1 / t;
      if (table) {
        e.e_a = (3 * t - 1) * (3 * t + 1 + k * (t - 1)) / (2 * t * (k + 1));
        e.e_q = ((4 + k) * t * t - (k - 3) * t + 1) / (2 * (k + 1));
      } else {
        // Sub-case components: A's lone update before B's (weight (T-1)/T),
        // or simultaneous with it (weight 1/T).
        const Rational a1_sub1 = (k * t - k + 5 * t - 3) / (2 * k + 2);
        const Rational a2_sub1 =
            (t - 1) / 2 + (t - 1) / t * (t - k * (t + 1) / (t * (k + 1)));
        const Rational a1_sub2 = 2 - k * (t + 1) / (t * (k + 1));
        e.e_a = (t - 1) / t * (a1_sub1 + a2_sub1) + a1_sub2 / t;
        e.e_q = (2 * k * k * t + k * t + k + 6 * t * t + 7 * t + 3) / (4 * k + 4);
      }
      break;
    case StateFamily::skn:
      e.e_a = (k * ((2 * n - 1) * t - 3) + n * (5 * t + 3) + 2 * t) / ((k + 1) * (n + 1));
      e.e_v = n;
      if (table) {
        e.e_q = (t + 1) * (k * (2 * n * t + t - 6) + n * (5 * t + 3) + 7 * t) /
                ((k + 1) * (n + 1) * (n + 2));
      } else {
        // The printed total is illegible; sum the printed per-trapezoid parts.
        const Rational q1 = (t + 1) * (n * (-k + 2 * t + 1) + (k + 5) * t + 4) /
                            ((k + 1) * (n + 1) * (n + 2));
        const Rational q2 = (t + 1) * (k * (-n + 2 * t + 2) + (n + 4) * t + 4) /
                            ((k + 1) * (n + 1) * (n + 2));
        const Rational q_mid = (t + 1) * (t + 2) / ((n + 1) * (n + 2));
        const Rational q_last =
            (2 * t * (2 * t + 3) - n * n - 3 * n * (t + 2)) / (2 * (n + 1) * (n + 2));
        e.e_q = q1 + q2 + (n - 2) * q_mid + q_last;
      }
      break;
  }
  return e;
}

//---------------------------------------------------------------------------//
// State summation
//---------------------------------------------------------------------------//

enum class ExpectationSource { oracle, table_I, proof_section };

struct Reconstruction {
  double avg_aoi = 0.0;
  double avg_paoi = 0.0;
  double expected_valid = 0.0;      ///< sum P(k,n) E[V|k,n]
  double expected_peak_sum = 0.0;   ///< sum P(k,n) E[A|k,n]
};

/// Exact state probability with p taken as the exact rational value of the double.
inline Rational state_probability_exact(StateKey key, const Rational& p, int T) {
  const Rational q = 1 - p;
  auto pw = [](const Rational& base, int e) {
    Rational r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
  };
  return Rational(binomial(T, key.k) * binomial(T, key.n)) * pw(p, key.k + key.n) *
         pw(q, 2 * T - key.k - key.n);
}

/// Average AoI = sum P E[Q] / T and average PAoI = sum P E[A] / sum P E[V],
/// summed exactly over every state.
inline Reconstruction reconstruct_theorem1(const GeoDParams& params, ExpectationSource source,
                                           std::uint64_t cap = kDefaultEnumerationCap) {
  const int T = static_cast<int>(params.T);
  const Rational p = to_rational(params.p);
  Rational sum_q = 0, sum_a = 0, sum_v = 0;
  for (int k = 0; k <= T; ++k) {
    for (int n = 0; n <= T; ++n) {
      const StateKey key{k, n};
      const StateExpectations e =
          source == ExpectationSource::oracle
              ? oracle_state_expectations(key, T, cap)
              : table_expectations(key, T,
                                   source == ExpectationSource::table_I
                                       ? TableVariant::table_I
                                       : TableVariant::proof_section);
      const Rational prob = state_probability_exact(key, p, T);
      sum_q += prob * e.e_q;
      sum_a += prob * e.e_a;
      sum_v += prob * e.e_v;
    }
  }
  Reconstruction r;
  r.avg_aoi = to_double(sum_q / T);
  r.avg_paoi = to_double(sum_a / sum_v);
  r.expected_valid = to_double(sum_v);
  r.expected_peak_sum = to_double(sum_a);
  return r;
}

//---------------------------------------------------------------------------//
// Adjudication of the printed expressions against the oracle
//---------------------------------------------------------------------------//

struct ColumnMatch {
  bool a = false;
  bool v = false;
  bool q = false;
};

struct AdjudicationRecord {
  int T = 0;
  StateKey key;
  StateExpectations oracle;
  StateExpectations table_I;
  StateExpectations proof_section;
  ColumnMatch table_matches;
  ColumnMatch proof_matches;
};

struct FamilyVerdict {
  StateFamily family;
  ColumnMatch table_all;   ///< every state of the family matched
  ColumnMatch proof_all;
  int states = 0;
};

struct AdjudicationReport {
  int max_T = 0;
  std::vector<AdjudicationRecord> records;
  std::vector<FamilyVerdict> verdicts;
  std::vector<std::string> skipped;  ///< states over the enumeration cap
};

/// Compares both printed variants with the oracle for every state, 2 <= T <= max_T.
inline AdjudicationReport adjudicate_tables(int max_T, std::uint64_t cap = kDefaultEnumerationCap) {
  AdjudicationReport report;
  report.max_T = max_T;
  constexpr std::array families{StateFamily::s00, StateFamily::s01, StateFamily::s0n,
                                StateFamily::sk0, StateFamily::sk1, StateFamily::skn};
  for (auto f : families) {
    FamilyVerdict v{f, {true, true, true}, {true, true, true}, 0};
    report.verdicts.push_back(v);
  }
  auto compare = [](const StateExpectations& x, const StateExpectations& y) {
    return ColumnMatch{x.e_a == y.e_a, x.e_v == y.e_v, x.e_q == y.e_q};
  };
  for (int T = 2; T <= max_T; ++T) {
    for (int k = 0; k <= T; ++k) {
      for (int n = 0; n <= T; ++n) {
        const StateKey key{k, n};
        AdjudicationRecord rec;
        rec.T = T;
        rec.key = key;
        try {
          rec.oracle = oracle_state_expectations(key, T, cap);
        } catch (const ResourceLimit& e) {
          report.skipped.push_back("T=" + std::to_string(T) + " (" + std::to_string(k) + "," +
                                   std::to_string(n) + "): " + e.what());
          continue;
        }
        rec.table_I = table_expectations(key, T, TableVariant::table_I);
        rec.proof_section = table_expectations(key, T, TableVariant::proof_section);
        rec.table_matches = compare(rec.table_I, rec.oracle);
        rec.proof_matches = compare(rec.proof_section, rec.oracle);

        auto& verdict = report.verdicts[static_cast<std::size_t>(family_of(key))];
        ++verdict.states;
        verdict.table_all.a = verdict.table_all.a && rec.table_matches.a;
        verdict.table_all.v = verdict.table_all.v && rec.table_matches.v;
        verdict.table_all.q = verdict.table_all.q && rec.table_matches.q;
        verdict.proof_all.a = verdict.proof_all.a && rec.proof_matches.a;
        verdict.proof_all.v = verdict.proof_all.v && rec.proof_matches.v;
        verdict.proof_all.q = verdict.proof_all.q && rec.proof_matches.q;
        report.records.push_back(std::move(rec));
      }
    }
  }
  return report;
}

}  // namespace aoi
