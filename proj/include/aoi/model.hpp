#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

namespace aoi {

//---------------------------------------------------------------------------//
// Errors
//---------------------------------------------------------------------------//

/// A parameter outside its allowed range.
class InvalidParameter : public std::invalid_argument {
 public:
  InvalidParameter(std::string name, double value, std::string allowed)
      : std::invalid_argument(describe(name, value, allowed)),
        name_(std::move(name)),
        value_(value),
        allowed_(std::move(allowed)) {}

  const std::string& name() const noexcept { return name_; }
  double value() const noexcept { return value_; }
  const std::string& allowed() const noexcept { return allowed_; }

 private:
  static std::string describe(const std::string& name, double value,
                              const std::string& allowed) {
    std::ostringstream os;
    os << "invalid parameter " << name << " = " << value << " (allowed: "
       << allowed << ")";
    return os.str();
  }

  std::string name_;
  double value_;
  std::string allowed_;
};

/// Input lies outside the stated range of a published per-state expression.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An exhaustive enumeration would exceed its configured cap.
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Service models
//---------------------------------------------------------------------------//

/// Geometric service on {1,2,...}: completes in each slot with probability p.
struct Geometric {
  double p;
};

/// Deterministic service of exactly T slots.
struct Deterministic {
  std::int64_t T;
};

/// Exponential service with rate lambda per second. Analytic reference only.
struct Exponential {
  double lambda;
};

class ServiceModel {
 public:
  using Law = std::variant<Geometric, Deterministic, Exponential>;

  static ServiceModel geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("p", p, "0 < p <= 1");
    return ServiceModel(Geometric{p});
  }
  static ServiceModel deterministic(std::int64_t T) {
    if (T < 1) throw InvalidParameter("T", static_cast<double>(T), "T >= 1");
    return ServiceModel(Deterministic{T});
  }
  static ServiceModel exponential(double lambda) {
    if (!(lambda > 0.0 && std::isfinite(lambda)))
      throw InvalidParameter("lambda", lambda, "lambda > 0");
    return ServiceModel(Exponential{lambda});
  }

  const Law& law() const noexcept { return law_; }

  bool is_geometric() const noexcept {
    return std::holds_alternative<Geometric>(law_);
  }
  bool is_deterministic() const noexcept {
    return std::holds_alternative<Deterministic>(law_);
  }
  bool is_discrete() const noexcept { return !std::holds_alternative<Exponential>(law_); }

  /// Completion probability per slot, 1/T, or lambda.
  double rate() const noexcept {
    return std::visit(
        [](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Geometric>) return m.p;
          else if constexpr (std::is_same_v<M, Deterministic>)
            return 1.0 / static_cast<double>(m.T);
          else return m.lambda;
        },
        law_);
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&os](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Geometric>) os << "Geometric(" << m.p << ")";
          else if constexpr (std::is_same_v<M, Deterministic>)
            os << "Deterministic(" << m.T << ")";
          else os << "Exponential(" << m.lambda << ")";
        },
        law_);
    return os.str();
  }

  friend bool operator==(const ServiceModel& a, const ServiceModel& b) {
    return a.law_.index() == b.law_.index() && a.rate() == b.rate();
  }

 private:
  explicit ServiceModel(Law law) : law_(law) {}
  Law law_;
};

//---------------------------------------------------------------------------//
// Systems
//---------------------------------------------------------------------------//

/// One zero-wait queue on its own (the degenerate single-sensor system).
struct SingleQueueSpec {
  ServiceModel queue;
};

/// Two parallel zero-wait queues. queue_b starts its first service
/// dd_offset_slots after queue_a when both are deterministic.
struct DualQueueSpec {
  ServiceModel queue_a;
  ServiceModel queue_b;
  std::int64_t dd_offset_slots = 1;
};

using SystemSpec = std::variant<SingleQueueSpec, DualQueueSpec>;

inline void validate(const SingleQueueSpec& spec) {
  if (!spec.queue.is_discrete())
    throw InvalidParameter("queue", spec.queue.rate(),
                           "discrete service model (Geometric or Deterministic)");
}

/// Enforces the simulation invariants: both queues discrete and a D-D offset
/// below queue_b's period (T = 1 is accepted; the offset is then reduced mod 1).
inline void validate(const DualQueueSpec& spec) {
  if (!spec.queue_a.is_discrete())
    throw InvalidParameter("queue_a", spec.queue_a.rate(), "discrete service model");
  if (!spec.queue_b.is_discrete())
    throw InvalidParameter("queue_b", spec.queue_b.rate(), "discrete service model");
  if (spec.dd_offset_slots < 0)
    throw InvalidParameter("dd_offset_slots", static_cast<double>(spec.dd_offset_slots),
                           ">= 0");
  if (spec.queue_a.is_deterministic() && spec.queue_b.is_deterministic()) {
    const auto Tb = std::get<Deterministic>(spec.queue_b.law()).T;
    if (Tb > 1 && spec.dd_offset_slots >= Tb)
      throw InvalidParameter("dd_offset_slots", static_cast<double>(spec.dd_offset_slots),
                             "< T of queue_b");
  }
}

inline void validate(const SystemSpec& spec) {
  std::visit([](const auto& s) { validate(s); }, spec);
}

/// Analytic Geo-D paths outside the constant-2 boundary need 0 < p < 1.
inline void validate_geo_d_analytic(double p, double T) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("p", p, "0 < p <= 1");
  if (!(T >= 1.0) || !std::isfinite(T)) throw InvalidParameter("T", T, "T >= 1");
}

//---------------------------------------------------------------------------//
// Simulation configuration and results
//---------------------------------------------------------------------------//

enum class SeedMode {
  per_round,  ///< each round gets derive_round_seed(master, round)
  fixed,      ///< every round reuses round 0's seed (degenerate replication)
};

struct SimConfig {
  std::int64_t periods_per_round = 5000;
  std::int64_t rounds = 10;
  std::uint64_t master_seed = 42;
  std::int64_t warmup_periods = 10;
  SeedMode seed_mode = SeedMode::per_round;
};

inline void validate(const SimConfig& config) {
  if (config.periods_per_round < 1)
    throw InvalidParameter("periods_per_round",
                           static_cast<double>(config.periods_per_round), ">= 1");
  if (config.rounds < 1)
    throw InvalidParameter("rounds", static_cast<double>(config.rounds), ">= 1");
  if (config.warmup_periods < 0 || config.warmup_periods >= config.periods_per_round)
    throw InvalidParameter("warmup_periods", static_cast<double>(config.warmup_periods),
                           "0 <= warmup_periods < periods_per_round");
}

/// A period state: sensor-A completions in the previous (k) and current (n)
/// service period of the deterministic sensor.
struct StateKey {
  int k = 0;
  int n = 0;

  friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

struct AoiMetrics {
  double avg_aoi = 0.0;
  double avg_paoi = 0.0;
  double valid_updates_per_period = 0.0;
  double obsolete_ratio = 0.0;
  std::map<StateKey, double> state_frequency;
  std::optional<double> stderr_aoi;
  std::optional<double> stderr_paoi;
  std::optional<double> stderr_valid;
};

//---------------------------------------------------------------------------//
// Seeds
//---------------------------------------------------------------------------//

/// SplitMix64 output function. A bijection on 64-bit words.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Seed of round `round_index`: mix(master + (round_index + 1) * gamma).
/// gamma is odd, so the argument is injective in the round index modulo
/// 2^64 and the mix is a bijection; distinct rounds get distinct seeds.
constexpr std::uint64_t derive_round_seed(std::uint64_t master_seed,
                                          std::uint64_t round_index) noexcept {
  return splitmix64_mix(master_seed + (round_index + 1) * kGoldenGamma);
}

/// Per-stream seed inside a round: sensor A = 0, sensor B = 1, monitor = 2.
constexpr std::uint64_t derive_stream_seed(std::uint64_t round_seed,
                                           std::uint64_t stream_id) noexcept {
  return splitmix64_mix(round_seed ^ ((stream_id + 1) * 0xD1B54A32D192ED03ULL));
}

}  // namespace aoi
