#pragma once

#include "fluidhit/chain_model.hpp"
#include "fluidhit/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fluidhit {

class SimulationError : public std::runtime_error {
  public:
    enum class Kind { Domain, MaxStepsExceeded };

    SimulationError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

/// Step cap reached before every chain was absorbed.
class MaxStepsExceeded : public SimulationError {
  public:
    MaxStepsExceeded(std::vector<std::uint64_t> counts, std::uint64_t steps);

    const std::vector<std::uint64_t> &counts() const noexcept { return counts_; }
    std::uint64_t steps() const noexcept { return steps_; }

  private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t steps_;
};

/// Number of chains in each state 0..S.
struct OccupancyState {
    std::vector<std::uint64_t> counts;
    std::uint64_t n = 0;

    static OccupancyState from_counts(std::vector<std::uint64_t> counts);
    /// All n chains in chain state x.
    static OccupancyState all_in(std::size_t states, std::size_t x, std::uint64_t n);
    /// Largest-remainder rounding of n * (mass0, alpha).
    static OccupancyState from_distribution(const InitialDistribution &alpha, std::uint64_t n);

    bool absorbed() const noexcept { return !counts.empty() && counts[0] == n; }
};

/// Cumulative transition rows of P for sampling a destination state.
class TransitionTable {
  public:
    explicit TransitionTable(const AbsorbingChain &chain);

    std::size_t next(std::size_t x, Rng &rng) const;
    std::size_t states() const noexcept { return row_ptr_.size() - 1; }

  private:
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> targets_;
    std::vector<double> cumulative_;
};

/// One scheduler step without acceleration: pick a chain uniformly, move it by
/// its row of P.
void step(const TransitionTable &table, OccupancyState &state, Rng &rng);
OccupancyState step(const AbsorbingChain &chain, const OccupancyState &state, Rng &rng);

enum class OccupancyBackend { Auto, Dense, Sparse };

inline constexpr std::uint64_t kDefaultMaxSteps = 1'000'000'000;
/// Above this many transient states the automatic backend keeps only occupied states.
inline constexpr std::size_t kSparseBackendThreshold = 65536;

struct SimulationOptions {
    /// Skip runs of already-absorbed selections with one geometric draw.
    bool geometric_skip = true;
    std::uint64_t max_steps = kDefaultMaxSteps;
    OccupancyBackend backend = OccupancyBackend::Auto;
    /// Worker threads; 0 = hardware concurrency capped by FLUIDHIT_THREADS.
    unsigned threads = 0;
};

/// T_N: first step at which every chain is in state 0.
std::uint64_t run_to_absorption(const AbsorbingChain &chain, const OccupancyState &initial, Rng &rng,
                                const SimulationOptions &options = {});
std::uint64_t run_to_absorption(const TransitionTable &table, const OccupancyState &initial, Rng &rng,
                                const SimulationOptions &options = {});

struct SimulationResult {
    std::vector<std::uint64_t> samples; // in replication order, failures excluded
    double mean = 0.0;
    std::optional<double> stderr_mean; // absent with fewer than two samples
    std::optional<std::pair<double, double>> ci95;
    std::uint64_t runs = 0;
    std::uint64_t seed = 0;
    std::uint64_t failures = 0;
    bool geometric_skip = true;
};

/// Replication r uses Rng(seed, r); results do not depend on the thread count.
SimulationResult estimate_hitting_time(const AbsorbingChain &chain, const OccupancyState &initial, std::uint64_t runs,
                                       std::uint64_t seed, const SimulationOptions &options = {});

/// Mean, standard error and normal 95% interval of a sample.
void summarize(SimulationResult &result);

struct TrajectorySample {
    std::vector<double> rescaled_times;
    std::vector<double> m0_fractions;
};

/// counts[0]/N after floor(tN) steps for each t of a nondecreasing grid.
TrajectorySample simulate_trajectory(const AbsorbingChain &chain, const OccupancyState &initial,
                                     std::span<const double> rescaled_grid, Rng &rng,
                                     const SimulationOptions &options = {});

/// Absorption step of one tagged chain inside an N-chain system: it moves only
/// when selected (probability 1/N per step).
std::vector<std::uint64_t> marginal_absorption_samples(const AbsorbingChain &chain, const InitialDistribution &alpha,
                                                       std::uint64_t n, std::uint64_t runs, Rng &rng);

/// Threads used for replications: hardware concurrency, capped by FLUIDHIT_THREADS.
unsigned default_thread_count();

} // namespace fluidhit
