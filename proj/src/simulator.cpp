#include "fluidhit/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

namespace fluidhit {

MaxStepsExceeded::MaxStepsExceeded(std::vector<std::uint64_t> counts, std::uint64_t steps)
    : SimulationError(Kind::MaxStepsExceeded, "step cap of " + std::to_string(steps) +
                                                  " reached before absorption (" +
                                                  std::to_string(counts.empty() ? 0 : counts[0]) + " absorbed)"),
      counts_(std::move(counts)), steps_(steps) {}

OccupancyState OccupancyState::from_counts(std::vector<std::uint64_t> counts) {
    if (counts.size() < 2) {
        throw SimulationError(SimulationError::Kind::Domain, "occupancy needs state 0 and a transient state");
    }
    OccupancyState s;
    s.n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (s.n == 0) {
        throw SimulationError(SimulationError::Kind::Domain, "occupancy has no chains");
    }
    s.counts = std::move(counts);
    return s;
}

OccupancyState OccupancyState::all_in(std::size_t states, std::size_t x, std::uint64_t n) {
    if (x >= states) {
        throw SimulationError(SimulationError::Kind::Domain, "state " + std::to_string(x) + " out of range");
    }
    std::vector<std::uint64_t> counts(states, 0);
    counts[x] = n;
    return from_counts(std::move(counts));
}

OccupancyState OccupancyState::from_distribution(const InitialDistribution &alpha, std::uint64_t n) {
    std::vector<double> p(alpha.alpha.size() + 1);
    p[0] = alpha.mass0;
    std::copy(alpha.alpha.begin(), alpha.alpha.end(), p.begin() + 1);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    std::vector<std::uint64_t> counts(p.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double exact = static_cast<double>(n) * p[i] / total;
        counts[i] = static_cast<std::uint64_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n && r < remainders.size(); ++r, ++assigned) {
        ++counts[remainders[r].second];
    }
    return from_counts(std::move(counts));
}

TransitionTable::TransitionTable(const AbsorbingChain &chain) {
    const auto &p = chain.transitions();
    row_ptr_.assign(p.rows() + 1, 0);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const auto cols = p.row_cols(i);
        const auto vals = p.row_values(i);
        double cum = 0.0;
        const std::size_t start = cumulative_.size();
        for (std::size_t k = 0; k < cols.size(); ++k) {
            cum += vals[k];
            targets_.push_back(cols[k]);
            cumulative_.push_back(cum);
        }
        for (std::size_t k = start; k < cumulative_.size(); ++k) {
            cumulative_[k] /= cum;
        }
        row_ptr_[i + 1] = cumulative_.size();
    }
}

std::size_t TransitionTable::next(std::size_t x, Rng &rng) const {
    const std::size_t begin = row_ptr_[x];
    const std::size_t end = row_ptr_[x + 1];
    if (end - begin == 1) {
        return targets_[begin];
    }
    const double u = rng.uniform();
    const auto first = cumulative_.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = cumulative_.begin() + static_cast<std::ptrdiff_t>(end);
    const auto it = std::upper_bound(first, last, u);
    const auto k = std::min(static_cast<std::size_t>(it - cumulative_.begin()), end - 1);
    return targets_[k];
}

void step(const TransitionTable &table, OccupancyState &state, Rng &rng) {
    std::uint64_t r = rng.below(state.n);
    std::size_t x = 0;
    while (r >= state.counts[x]) {
        r -= state.counts[x];
        ++x;
    }
    if (x == 0) {
        return;
    }
    const std::size_t y = table.next(x, rng);
    --state.counts[x];
    ++state.counts[y];
}

OccupancyState step(const AbsorbingChain &chain, const OccupancyState &state, Rng &rng) {
    OccupancyState out = state;
    step(TransitionTable(chain), out, rng);
    return out;
}

namespace {

class Fenwick {
  public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0), top_(n == 0 ? 0 : std::bit_floor(n)) {}

    void add(std::size_t i, std::int64_t delta) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) {
            tree_[i] += delta;
        }
    }

    /// Index i with prefix(i) <= k < prefix(i + 1).
    std::size_t find(std::uint64_t k) const {
        std::size_t pos = 0;
        auto rem = static_cast<std::int64_t>(k);
        for (std::size_t step = top_; step != 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= rem) {
                pos = next;
                rem -= tree_[next];
            }
        }
        return pos;
    }

  private:
    std::vector<std::int64_t> tree_;
    std::size_t top_;
};

/// Fenwick tree over all transient states.
class DenseIndex {
  public:
    DenseIndex(const OccupancyState &init) : fenwick_(init.counts.size() - 1), counts_(init.counts) {
        for (std::size_t x = 1; x < counts_.size(); ++x) {
            if (counts_[x] > 0) {
                fenwick_.add(x - 1, static_cast<std::int64_t>(counts_[x]));
            }
        }
    }

    std::size_t select(std::uint64_t k) const { return fenwick_.find(k) + 1; }

    void add(std::size_t x, std::int64_t delta) {
        fenwick_.add(x - 1, delta);
        counts_[x] = static_cast<std::uint64_t>(static_cast<std::int64_t>(counts_[x]) + delta);
    }

    std::vector<std::uint64_t> transient_counts() const { return counts_; }

  private:
    Fenwick fenwick_;
    std::vector<std::uint64_t> counts_; // index 0 unused
};

/// Fenwick tree over slots of occupied states only; memory O(min(N, S)).
class SparseIndex {
  public:
    SparseIndex(const OccupancyState &init)
        : states_(init.counts.size()),
          capacity_(static_cast<std::size_t>(std::min<std::uint64_t>(init.n, init.counts.size() - 1))),
          fenwick_(capacity_), slot_state_(capacity_, 0), slot_count_(capacity_, 0) {
        for (std::size_t s = capacity_; s-- > 0;) {
            free_.push_back(s);
        }
        for (std::size_t x = 1; x < init.counts.size(); ++x) {
            if (init.counts[x] > 0) {
                add(x, static_cast<std::int64_t>(init.counts[x]));
            }
        }
    }

    std::size_t select(std::uint64_t k) const { return slot_state_[fenwick_.find(k)]; }

    void add(std::size_t x, std::int64_t delta) {
        auto it = slot_of_.find(x);
        std::size_t slot = 0;
        if (it == slot_of_.end()) {
            slot = free_.back();
            free_.pop_back();
            slot_of_.emplace(x, slot);
            slot_state_[slot] = x;
        } else {
            slot = it->second;
        }
        fenwick_.add(slot, delta);
        slot_count_[slot] = static_cast<std::uint64_t>(static_cast<std::int64_t>(slot_count_[slot]) + delta);
        if (slot_count_[slot] == 0) {
            slot_of_.erase(x);
            free_.push_back(slot);
        }
    }

    std::vector<std::uint64_t> transient_counts() const {
        std::vector<std::uint64_t> counts(states_, 0);
        for (const auto &[x, slot] : slot_of_) {
            counts[x] = slot_count_[slot];
        }
        return counts;
    }

  private:
    std::size_t states_;
    std::size_t capacity_;
    Fenwick fenwick_;
    std::vector<std::size_t> slot_state_;
    std::vector<std::uint64_t> slot_count_;
    std::vector<std::size_t> free_;
    std::unordered_map<std::size_t, std::size_t> slot_of_;
};

/// Occupancy process seen at the steps where an unabsorbed chain is selected;
/// the steps in between select absorbed chains and change nothing.
template <class Index> class Process {
  public:
    Process(const TransitionTable &table, const OccupancyState &init, const SimulationOptions &options)
        : table_(table), index_(init), n_(init.n), absorbed_(init.counts[0]), options_(options) {}

    bool done() const noexcept { return absorbed_ == n_; }
    std::uint64_t steps() const noexcept { return steps_; }
    std::uint64_t absorbed() const noexcept { return absorbed_; }
    std::uint64_t n() const noexcept { return n_; }

    /// Step index of the next selection of an unabsorbed chain.
    std::uint64_t next_event_step(Rng &rng) {
        if (!pending_) {
            draw(rng);
        }
        return pending_step_;
    }

    void apply_event(Rng &rng) {
        next_event_step(rng);
        pending_ = false;
        steps_ = pending_step_;
        const std::size_t x = index_.select(pending_rank_);
        const std::size_t y = table_.next(x, rng);
        if (y == x) {
            return;
        }
        index_.add(x, -1);
        if (y == 0) {
            ++absorbed_;
        } else {
            index_.add(y, +1);
        }
    }

    std::vector<std::uint64_t> counts() const {
        auto c = index_.transient_counts();
        c[0] = absorbed_;
        return c;
    }

  private:
    void draw(Rng &rng) {
        const std::uint64_t active = n_ - absorbed_;
        std::uint64_t at = steps_;
        if (options_.geometric_skip) {
            const std::uint64_t gap = rng.geometric(static_cast<double>(active) / static_cast<double>(n_));
            at = gap > UINT64_MAX - at ? UINT64_MAX : at + gap;
            pending_rank_ = rng.below(active);
        } else {
            for (;;) {
                ++at;
                const std::uint64_t r = rng.below(n_);
                if (r >= absorbed_) {
                    pending_rank_ = r - absorbed_;
                    break;
                }
                if (at > options_.max_steps) {
                    break;
                }
            }
        }
        if (at > options_.max_steps) {
            throw MaxStepsExceeded(counts(), options_.max_steps);
        }
        pending_step_ = at;
        pending_ = true;
    }

    const TransitionTable &table_;
    Index index_;
    std::uint64_t n_;
    std::uint64_t absorbed_;
    std::uint64_t steps_ = 0;
    SimulationOptions options_;
    bool pending_ = false;
    std::uint64_t pending_step_ = 0;
    std::uint64_t pending_rank_ = 0;
};

void check_initial(const TransitionTable &table, const OccupancyState &initial) {
    if (initial.counts.size() != table.states()) {
        throw SimulationError(SimulationError::Kind::Domain,
                              "occupancy has " + std::to_string(initial.counts.size()) + " states, chain has " +
                                  std::to_string(table.states()));
    }
    if (initial.n == 0 ||
        std::accumulate(initial.counts.begin(), initial.counts.end(), std::uint64_t{0}) != initial.n) {
        throw SimulationError(SimulationError::Kind::Domain, "occupancy counts do not sum to N");
    }
}

bool use_sparse(const OccupancyState &initial, OccupancyBackend backend) {
    switch (backend) {
    case OccupancyBackend::Dense:
        return false;
    case OccupancyBackend::Sparse:
        return true;
    case OccupancyBackend::Auto:
        break;
    }
    return initial.counts.size() - 1 > kSparseBackendThreshold;
}

template <class Index>
std::uint64_t run_with(const TransitionTable &table, const OccupancyState &initial, Rng &rng,
                       const SimulationOptions &options) {
    Process<Index> process(table, initial, options);
    while (!process.done()) {
        process.apply_event(rng);
    }
    return process.steps();
}

template <class Index>
TrajectorySample trajectory_with(const TransitionTable &table, const OccupancyState &initial,
                                 std::span<const double> grid, Rng &rng, const SimulationOptions &options) {
    Process<Index> process(table, initial, options);
    TrajectorySample out;
    const double nd = static_cast<double>(initial.n);
    for (double t : grid) {
        const auto target = static_cast<std::uint64_t>(std::floor(t * nd));
        while (!process.done() && process.next_event_step(rng) <= target) {
            process.apply_event(rng);
        }
        out.rescaled_times.push_back(t);
        out.m0_fractions.push_back(static_cast<double>(process.absorbed()) / nd);
    }
    return out;
}

} // namespace

std::uint64_t run_to_absorption(const TransitionTable &table, const OccupancyState &initial, Rng &rng,
                                const SimulationOptions &options) {
    check_initial(table, initial);
    if (use_sparse(initial, options.backend)) {
        return run_with<SparseIndex>(table, initial, rng, options);
    }
    return run_with<DenseIndex>(table, initial, rng, options);
}

std::uint64_t run_to_absorption(const AbsorbingChain &chain, const OccupancyState &initial, Rng &rng,
                                const SimulationOptions &options) {
    return run_to_absorption(TransitionTable(chain), initial, rng, options);
}

unsigned default_thread_count() {
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("FLUIDHIT_THREADS")) {
        char *end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) {
            threads = std::min(threads, static_cast<unsigned>(cap));
        }
    }
    return threads;
}

void summarize(SimulationResult &result) {
    const auto &s = result.samples;
    result.stderr_mean.reset();
    result.ci95.reset();
    if (s.empty()) {
        result.mean = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    const double m = static_cast<double>(s.size());
    double mean = 0.0;
    for (auto v : s) {
        mean += static_cast<double>(v);
    }
    mean /= m;
    result.mean = mean;
    if (s.size() < 2) {
        return;
    }
    double ss = 0.0;
    for (auto v : s) {
        const double d = static_cast<double>(v) - mean;
        ss += d * d;
    }
    const double se = std::sqrt(ss / (m - 1.0) / m);
    result.stderr_mean = se;
    result.ci95 = std::make_pair(mean - 1.959963984540054 * se, mean + 1.959963984540054 * se);
}

SimulationResult estimate_hitting_time(const AbsorbingChain &chain, const OccupancyState &initial, std::uint64_t runs,
                                       std::uint64_t seed, const SimulationOptions &options) {
    if (runs == 0) {
        throw SimulationError(SimulationError::Kind::Domain, "runs must be at least 1");
    }
    const TransitionTable table(chain);
    check_initial(table, initial);
    std::vector<std::uint64_t> values(runs, 0);
    std::vector<char> failed(runs, 0);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::uint64_t r = next.fetch_add(1);
            if (r >= runs) {
                return;
            }
            Rng rng(seed, r);
            try {
                values[r] = run_to_absorption(table, initial, rng, options);
            } catch (const MaxStepsExceeded &) {
                failed[r] = 1;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next.store(runs);
                return;
            }
        }
    };

    unsigned threads = options.threads != 0 ? options.threads : default_thread_count();
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, runs));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto &th : pool) {
            th.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    SimulationResult result;
    result.runs = runs;
    result.seed = seed;
    result.geometric_skip = options.geometric_skip;
    for (std::uint64_t r = 0; r < runs; ++r) {
        if (failed[r]) {
            ++result.failures;
        } else {
            result.samples.push_back(values[r]);
        }
    }
    summarize(result);
    return result;
}

TrajectorySample simulate_trajectory(const AbsorbingChain &chain, const OccupancyState &initial,
                                     std::span<const double> rescaled_grid, Rng &rng,
                                     const SimulationOptions &options) {
    const TransitionTable table(chain);
    check_initial(table, initial);
    for (std::size_t i = 0; i < rescaled_grid.size(); ++i) {
        if (!(rescaled_grid[i] >= 0.0) || (i > 0 && rescaled_grid[i] < rescaled_grid[i - 1])) {
            throw SimulationError(SimulationError::Kind::Domain, "trajectory grid must be nonnegative and nondecreasing");
        }
    }
    if (use_sparse(initial, options.backend)) {
        return trajectory_with<SparseIndex>(table, initial, rescaled_grid, rng, options);
    }
    return trajectory_with<DenseIndex>(table, initial, rescaled_grid, rng, options);
}

std::vector<std::uint64_t> marginal_absorption_samples(const AbsorbingChain &chain, const InitialDistribution &alpha,
                                                       std::uint64_t n, std::uint64_t runs, Rng &rng) {
    if (n == 0) {
        throw SimulationError(SimulationError::Kind::Domain, "N must be at least 1");
    }
    if (alpha.alpha.size() != chain.transient_count()) {
        throw SimulationError(SimulationError::Kind::Domain, "initial distribution does not match the chain");
    }
    const TransitionTable table(chain);
    std::vector<double> cdf(alpha.alpha.size() + 1);
    cdf[0] = alpha.mass0;
    for (std::size_t i = 0; i < alpha.alpha.size(); ++i) {
        cdf[i + 1] = cdf[i] + alpha.alpha[i];
    }
    const double total = cdf.back();
    const double select = 1.0 / static_cast<double>(n);
    std::vector<std::uint64_t> out;
    out.reserve(runs);
    for (std::uint64_t r = 0; r < runs; ++r) {
        const double u = rng.uniform() * total;
        auto x = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        x = std::min(x, cdf.size() - 1);
        std::uint64_t steps = 0;
        while (x != 0) {
            steps += rng.geometric(select);
            x = table.next(x, rng);
        }
        out.push_back(steps);
    }
    return out;
}

} // namespace fluidhit
