#pragma once

#include "fluidhit/bounds.hpp"
#include "fluidhit/chain_model.hpp"
#include "fluidhit/rng.hpp"
#include "fluidhit/simulator.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fluidhit {

class ExampleError : public std::runtime_error {
  public:
    enum class Kind { BadName, Domain, SizeTooLarge, MismatchedN };

    ExampleError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

/// tstage(T): deterministic countdown T -> T-1 -> ... -> 0 (T = 1 is the classical
/// collector). countdown_trap(N, T): state i exits with probability 1 - 1/N^2 or
/// falls into a countdown of length N^2 (T-1). slow_exit(T): one transient state
/// leaving with probability 1/T.
enum class ExampleKind { Tstage, CountdownTrap, SlowExit };

inline constexpr std::uint64_t kMaxTrapLength = 10'000'000;

struct KnownValues {
    double nu = 0.0;
    std::size_t k = 0;
    /// W at the default start state.
    double w_start = 0.0;
    double max_w = 0.0;
};

struct NamedExample {
    std::string name; // canonical, e.g. "tstage:3"
    ExampleKind kind = ExampleKind::Tstage;
    double t = 1.0;
    /// The countdown trap is built for one N only.
    std::optional<std::uint64_t> pinned_n;
    AbsorbingChain chain;
    std::size_t start_state = 1;
    KnownValues known;

    InitialDistribution default_alpha() const;
    /// All chains in the start state; throws MismatchedN for a pinned chain and another N.
    OccupancyState default_occupancy(std::uint64_t n) const;
    /// Closed-form exact values and lower bounds for population n.
    std::vector<BoundEntry> references(std::uint64_t n) const;
};

NamedExample gen_tstage(std::uint64_t t);
NamedExample gen_classical();
/// Throws SizeTooLarge when N^2 (T-1) > 1e7.
NamedExample gen_countdown_trap(std::uint64_t n, std::uint64_t t);
NamedExample gen_slow_exit(double t);

/// "classical", "tstage:T", "fig3a:N,T", "fig3b:T".
NamedExample parse_example_name(std::string_view name);
/// True when the string names an example rather than a file.
bool is_example_name(std::string_view name);

/// Erlang(T, 1) distribution function, evaluated without cancellation on both tails.
double erlang_m0(std::uint64_t t_stages, double t);

/// Completion time of N copies of an algorithm whose single-copy expected
/// completion is at most T: T N ln N + 2 N T + 1.
double scenario_bound(double t, std::uint64_t n);

/// Seeded random valid chain with `transient` transient states, for tests.
AbsorbingChain random_chain(std::size_t transient, Rng &rng, double density = 0.5);

} // namespace fluidhit
