#include "fluidhit/named_examples.hpp"

#include <charconv>
#include <cmath>
#include <numeric>

namespace fluidhit {

namespace {

std::uint64_t parse_uint(std::string_view text, std::string_view what) {
    std::uint64_t value = 0;
    const auto *begin = text.data();
    const auto *end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ExampleError(ExampleError::Kind::BadName,
                           "expected an integer for " + std::string(what) + ", got '" + std::string(text) + "'");
    }
    return value;
}

double parse_real(std::string_view text, std::string_view what) {
    double value = 0.0;
    const auto *begin = text.data();
    const auto *end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ExampleError(ExampleError::Kind::BadName,
                           "expected a number for " + std::string(what) + ", got '" + std::string(text) + "'");
    }
    return value;
}

std::string format_real(double t) {
    if (t == std::floor(t) && t < 1e15) {
        return std::to_string(static_cast<long long>(t));
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t);
    return std::string(buf, ptr);
}

} // namespace

InitialDistribution NamedExample::default_alpha() const {
    return InitialDistribution::point(chain.transient_count(), start_state);
}

OccupancyState NamedExample::default_occupancy(std::uint64_t n) const {
    if (pinned_n && *pinned_n != n) {
        throw ExampleError(ExampleError::Kind::MismatchedN, name + " is built for N = " + std::to_string(*pinned_n) +
                                                                " and cannot be simulated with N = " +
                                                                std::to_string(n));
    }
    return OccupancyState::all_in(chain.size(), start_state, n);
}

std::vector<BoundEntry> NamedExample::references(std::uint64_t n) const {
    std::vector<BoundEntry> out;
    const double nd = static_cast<double>(n);
    switch (kind) {
    case ExampleKind::Tstage:
        if (t == 1.0) {
            out.push_back({"exact", EntryRole::Exact, nd * harmonic_number(n), "coupon collector closed form",
                           "N*H_N"});
        }
        if (n >= 3) {
            out.push_back({"coupon_bound", EntryRole::Asymptotic, coupon_bound(static_cast<std::uint64_t>(t), n),
                           "collecting T copies of each coupon; O(1) omitted",
                           "N*ln(N) + (T-1)*N*ln(ln(N)) + (T+2)*N"});
        }
        break;
    case ExampleKind::CountdownTrap:
        if (!pinned_n || *pinned_n == n) {
            out.push_back({"trap_lower_bound", EntryRole::Lower,
                           tightness_reference(TightnessKind::CountdownTrap, n, t).value,
                           "at least one chain falls into the long countdown", "N^3*(T-1)*(1-(1-1/N^2)^N)"});
        }
        break;
    case ExampleKind::SlowExit:
        out.push_back({"exact", EntryRole::Exact, tightness_reference(TightnessKind::SlowExit, n, t).value,
                       "independent geometric exits under the scheduler", "N*T*H_N"});
        break;
    }
    return out;
}

NamedExample gen_tstage(std::uint64_t t) {
    if (t < 1) {
        throw ExampleError(ExampleError::Kind::Domain, "tstage needs T >= 1");
    }
    if (t > kMaxTrapLength) {
        throw ExampleError(ExampleError::Kind::SizeTooLarge, "tstage limited to T <= 1e7");
    }
    std::vector<SparseRow> rows;
    rows.reserve(t + 1);
    rows.push_back({0, {0}, {1.0}});
    for (std::size_t x = 1; x <= t; ++x) {
        rows.push_back({x, {x - 1}, {1.0}});
    }
    NamedExample ex;
    ex.name = t == 1 ? "classical" : "tstage:" + std::to_string(t);
    ex.kind = ExampleKind::Tstage;
    ex.t = static_cast<double>(t);
    ex.chain = validate_chain(t + 1, rows);
    ex.start_state = t;
    ex.known = {1.0, static_cast<std::size_t>(t - 1), static_cast<double>(t), static_cast<double>(t)};
    return ex;
}

NamedExample gen_classical() { return gen_tstage(1); }

NamedExample gen_countdown_trap(std::uint64_t n, std::uint64_t t) {
    if (n < 1 || t < 2) {
        throw ExampleError(ExampleError::Kind::Domain, "countdown trap needs N >= 1 and T >= 2");
    }
    if (n > kMaxTrapLength || n * n > kMaxTrapLength / (t - 1)) {
        throw ExampleError(ExampleError::Kind::SizeTooLarge,
                           "countdown length N^2 (T-1) exceeds 1e7 for N = " + std::to_string(n) +
                               ", T = " + std::to_string(t));
    }
    const std::uint64_t length = n * n * (t - 1);
    const std::size_t trap = static_cast<std::size_t>(length) + 1;
    const double fall = 1.0 / static_cast<double>(n * n);
    std::vector<SparseRow> rows;
    rows.reserve(trap + 1);
    rows.push_back({0, {0}, {1.0}});
    for (std::size_t x = 1; x <= length; ++x) {
        rows.push_back({x, {x - 1}, {1.0}});
    }
    if (n == 1) {
        rows.push_back({trap, {static_cast<std::size_t>(length)}, {1.0}});
    } else {
        rows.push_back({trap, {0, static_cast<std::size_t>(length)}, {1.0 - fall, fall}});
    }
    NamedExample ex;
    ex.name = "fig3a:" + std::to_string(n) + "," + std::to_string(t);
    ex.kind = ExampleKind::CountdownTrap;
    ex.t = static_cast<double>(t);
    ex.pinned_n = n;
    ex.chain = validate_chain(trap + 1, rows);
    ex.start_state = trap;
    // every state has exit rate 1 and the transient graph is a path
    ex.known = {1.0, trap - 1, static_cast<double>(t), static_cast<double>(length)};
    return ex;
}

NamedExample gen_slow_exit(double t) {
    if (!(t >= 1.0) || !std::isfinite(t)) {
        throw ExampleError(ExampleError::Kind::Domain, "slow exit needs a finite T >= 1");
    }
    const double exit = 1.0 / t;
    std::vector<SparseRow> rows{{0, {0}, {1.0}}};
    if (t == 1.0) {
        rows.push_back({1, {0}, {1.0}});
    } else {
        rows.push_back({1, {0, 1}, {exit, 1.0 - exit}});
    }
    NamedExample ex;
    ex.name = "fig3b:" + format_real(t);
    ex.kind = ExampleKind::SlowExit;
    ex.t = t;
    ex.chain = validate_chain(2, rows);
    ex.start_state = 1;
    ex.known = {exit, 0, t, t};
    return ex;
}

bool is_example_name(std::string_view name) {
    return name == "classical" || name.starts_with("tstage:") || name.starts_with("fig3a:") ||
           name.starts_with("fig3b:") || name.starts_with("trap:") || name.starts_with("slowexit:");
}

NamedExample parse_example_name(std::string_view name) {
    if (name == "classical") {
        return gen_classical();
    }
    const auto colon = name.find(':');
    if (colon == std::string_view::npos) {
        throw ExampleError(ExampleError::Kind::BadName, "unknown example '" + std::string(name) + "'");
    }
    const auto head = name.substr(0, colon);
    const auto args = name.substr(colon + 1);
    if (head == "tstage") {
        return gen_tstage(parse_uint(args, "T"));
    }
    if (head == "fig3a" || head == "trap") {
        const auto comma = args.find(',');
        if (comma == std::string_view::npos) {
            throw ExampleError(ExampleError::Kind::BadName, "expected '" + std::string(head) + ":N,T'");
        }
        return gen_countdown_trap(parse_uint(args.substr(0, comma), "N"), parse_uint(args.substr(comma + 1), "T"));
    }
    if (head == "fig3b" || head == "slowexit") {
        return gen_slow_exit(parse_real(args, "T"));
    }
    throw ExampleError(ExampleError::Kind::BadName, "unknown example '" + std::string(name) + "'");
}

double erlang_m0(std::uint64_t t_stages, double t) {
    if (t_stages < 1 || !(t >= 0.0)) {
        throw ExampleError(ExampleError::Kind::Domain, "Erlang distribution needs T >= 1 and t >= 0");
    }
    if (t == 0.0) {
        return 0.0;
    }
    const double log_t = std::log(t);
    const auto term = [&](std::uint64_t k) {
        return std::exp(-t + static_cast<double>(k) * log_t - std::lgamma(static_cast<double>(k) + 1.0));
    };
    if (t < static_cast<double>(t_stages)) {
        // upper Poisson tail P(Poisson(t) >= T), terms decrease from k = T on
        double sum = 0.0;
        for (std::uint64_t k = t_stages;; ++k) {
            const double x = term(k);
            sum += x;
            if (x <= 1e-17 * sum || x == 0.0) {
                break;
            }
        }
        return std::min(1.0, sum);
    }
    double head = 0.0;
    for (std::uint64_t k = 0; k < t_stages; ++k) {
        head += term(k);
    }
    return std::max(0.0, 1.0 - head);
}

double scenario_bound(double t, std::uint64_t n) { return uniform_hitting_bound(t, n); }

AbsorbingChain random_chain(std::size_t transient, Rng &rng, double density) {
    if (transient < 1) {
        throw ExampleError(ExampleError::Kind::Domain, "random chain needs a transient state");
    }
    const std::size_t states = transient + 1;
    std::vector<SparseRow> rows{{0, {0}, {1.0}}};
    for (std::size_t i = 1; i < states; ++i) {
        std::vector<double> weight(states, 0.0);
        // a step towards 0 keeps every state transient
        weight[i - 1] = 0.05 + rng.uniform();
        for (std::size_t j = 0; j < states; ++j) {
            if (j != i - 1 && rng.uniform() < density) {
                weight[j] = rng.uniform();
            }
        }
        const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
        SparseRow row{i, {}, {}};
        double assigned = 0.0;
        std::size_t last = 0;
        for (std::size_t j = 0; j < states; ++j) {
            if (weight[j] > 0.0) {
                row.cols.push_back(j);
                row.probs.push_back(weight[j] / total);
                assigned += weight[j] / total;
                last = row.probs.size() - 1;
            }
        }
        row.probs[last] += 1.0 - assigned;
        rows.push_back(std::move(row));
    }
    return validate_chain(states, rows);
}

} // namespace fluidhit
