#include "fluidhit/bounds.hpp"
#include "fluidhit/fluid.hpp"
#include "fluidhit/named_examples.hpp"
#include "fluidhit/phase_type.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace fluidhit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PhaseType discrete_of(const NamedExample &ex, std::uint64_t n) {
    return PhaseType::discrete(ex.default_alpha(), decompose(ex.chain), n);
}

/// Smallest k with alpha (I + Q/N)^k 1 <= 2/N by dense powers in Eigen.
std::uint64_t scan_threshold(const NamedExample &ex, std::uint64_t n) {
    const auto sub = decompose(ex.chain);
    const Eigen::MatrixXd m =
        Eigen::MatrixXd::Identity(sub.size(), sub.size()) + support::to_eigen(sub.q) / static_cast<double>(n);
    Eigen::RowVectorXd v = support::to_eigen(ex.default_alpha().alpha).transpose();
    std::uint64_t k = 0;
    while (v.sum() > 2.0 / static_cast<double>(n)) {
        v = v * m;
        ++k;
    }
    return k;
}

} // namespace

TEST_CASE("continuous survival") {
    const auto classical = PhaseType::continuous(gen_classical().default_alpha(), decompose(gen_classical().chain));
    CHECK_THAT(continuous_survival(classical, std::log(4.0)), WithinAbs(0.25, 1e-14));
    CHECK_THAT(continuous_survival(classical, 0.0), WithinAbs(1.0, 1e-15));
    const auto t2 = gen_tstage(2);
    const auto pt2 = PhaseType::continuous(t2.default_alpha(), decompose(t2.chain));
    CHECK_THAT(continuous_survival(pt2, 1.0), WithinAbs(0.7357589, 1e-7));
    const auto part = PhaseType::continuous(InitialDistribution::from_alpha({0.3}, 0.7), decompose(gen_classical().chain));
    CHECK_THAT(continuous_survival(part, 0.0), WithinAbs(0.3, 1e-15));
}

TEST_CASE("discrete survival") {
    const auto c = gen_classical();
    CHECK_THAT(discrete_survival(discrete_of(c, 2), 1), WithinAbs(0.5, 1e-15));
    CHECK_THAT(discrete_survival(discrete_of(c, 4), 8), WithinAbs(0.1001129150390625, 1e-15));
    CHECK_THAT(discrete_survival(discrete_of(c, 7), 0), WithinAbs(1.0, 1e-15));

    const auto curve = discrete_survival_curve(discrete_of(gen_tstage(3), 5), 40);
    for (std::size_t k = 1; k < curve.size(); ++k) {
        CHECK(curve[k] <= curve[k - 1]);
        CHECK(curve[k] >= 0.0);
    }

    SubGenerator fast;
    fast.q = num::SparseMatrix::from_triplets(1, 1, {{0, 0, -3.0}});
    fast.exit = {3.0};
    fast.stay = {0.0};
    try {
        PhaseType::discrete(InitialDistribution::point(1, 1), fast, 2);
        FAIL("expected ScaleTooSmall");
    } catch (const PhaseTypeError &e) {
        CHECK(e.kind() == PhaseTypeError::Kind::ScaleTooSmall);
    }
}

TEST_CASE("discrete survival sequence agrees with dense powers") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const auto chain = random_chain(4 + seed % 40, rng, 0.05);
        const auto sub = decompose(chain);
        const auto alpha = InitialDistribution::point(sub.size(), 1 + seed % sub.size());
        const auto pt = PhaseType::discrete(alpha, sub, 13);
        const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sub.size(), sub.size()) + support::to_eigen(sub.q) / 13.0;
        Eigen::RowVectorXd v = support::to_eigen(alpha.alpha).transpose();
        DiscreteSurvivalSequence seq(pt);
        for (int k = 0; k < 200; ++k) {
            CHECK(seq.index() == static_cast<std::uint64_t>(k));
            CHECK_THAT(seq.value(), WithinAbs(v.sum(), 1e-12));
            v = v * m;
            seq.advance();
        }
    }
}

TEST_CASE("discrete survival converges to the continuous one") {
    const auto ex = gen_tstage(3);
    const auto sub = decompose(ex.chain);
    const auto cont = PhaseType::continuous(ex.default_alpha(), sub);
    double prev = 1.0;
    for (std::uint64_t n : {10, 100, 1000}) {
        const auto disc = PhaseType::discrete(ex.default_alpha(), sub, n);
        double worst = 0.0;
        for (double t = 0.0; t <= 10.0; t += 0.25) {
            const auto k = static_cast<std::uint64_t>(std::floor(t * static_cast<double>(n)));
            worst = std::max(worst, std::abs(discrete_survival(disc, k) - continuous_survival(cont, t)));
        }
        CHECK(worst < prev);
        prev = worst;
    }
    CHECK(prev < 1e-2);
}

TEST_CASE("x_threshold examples and scan agreement") {
    CHECK(x_threshold(discrete_of(gen_classical(), 2)) == 0);
    CHECK(x_threshold(discrete_of(gen_classical(), 100)) == 390);
    CHECK(x_threshold(discrete_of(gen_slow_exit(2.0), 100)) == 781);
    for (std::uint64_t n : {10, 100, 1000}) {
        for (const auto &ex : {gen_classical(), gen_tstage(3), gen_slow_exit(4.0)}) {
            CHECK(x_threshold(discrete_of(ex, n)) == scan_threshold(ex, n));
        }
    }
    const auto trap = gen_countdown_trap(4, 2);
    CHECK(x_threshold(discrete_of(trap, 4)) == scan_threshold(trap, 4));
}

TEST_CASE("x_threshold lies below N (t_N + mean jumps)") {
    for (std::uint64_t n : {10, 100, 1000}) {
        for (const auto &ex : {gen_classical(), gen_tstage(2), gen_tstage(5), gen_slow_exit(3.0)}) {
            const auto sub = decompose(ex.chain);
            const auto alpha = ex.default_alpha();
            const auto terms = fluid_crossing_bound_terms(sub, alpha, n);
            const double rhs = static_cast<double>(n) * (terms.crossing_time + terms.mean_jumps);
            CHECK(static_cast<double>(x_threshold(PhaseType::discrete(alpha, sub, n))) <= rhs);
        }
    }
}

TEST_CASE("spectral parameters") {
    const auto t3 = gen_tstage(3);
    auto sp = spectral_params(decompose(t3.chain), t3.default_alpha());
    CHECK(sp.nu == 1.0);
    CHECK(sp.k == 2);

    const auto slow = gen_slow_exit(4.0);
    sp = spectral_params(decompose(slow.chain), slow.default_alpha());
    CHECK(sp.nu == 0.25);
    CHECK(sp.k == 0);

    SubGenerator diag;
    diag.q = num::SparseMatrix::from_triplets(2, 2, {{0, 0, -1.0}, {1, 1, -2.0}});
    diag.exit = {1.0, 2.0};
    diag.stay = {0.0, 0.0};
    const auto alpha = InitialDistribution::from_alpha({1.0, 0.0});
    sp = spectral_params(diag, alpha, {.estimate_gamma = true});
    CHECK_THAT(sp.nu, WithinAbs(1.0, 1e-14));
    CHECK(sp.k == 0);
    REQUIRE(sp.gamma);
    CHECK_THAT(*sp.gamma, WithinRel(1.0, 0.05));

    sp = spectral_params(decompose(t3.chain), t3.default_alpha(), {.k_override = 0, .nu_override = 2.0});
    CHECK(sp.k == 0);
    CHECK(sp.nu == 2.0);
    CHECK(sp.k_source == ParamSource::UserSupplied);
    CHECK(sp.nu_source == ParamSource::UserSupplied);
}

TEST_CASE("gamma fit on a known tail and a degenerate one") {
    // survival of the T = 2 countdown is e^{-t}(1 + t): k = 1, prefactor gamma/nu -> 1
    const auto t2 = gen_tstage(2);
    const double g = fit_gamma(decompose(t2.chain), t2.default_alpha(), 1.0, 1);
    CHECK_THAT(g, WithinRel(1.0, 0.1));

    // alpha on the fast state only: the tail misses the dominant eigenvalue -1
    SubGenerator diag;
    diag.q = num::SparseMatrix::from_triplets(2, 2, {{0, 0, -1.0}, {1, 1, -2.0}});
    diag.exit = {1.0, 2.0};
    diag.stay = {0.0, 0.0};
    try {
        fit_gamma(diag, InitialDistribution::from_alpha({0.0, 1.0}), 1.0, 0);
        FAIL("expected DegenerateTail");
    } catch (const PhaseTypeError &e) {
        CHECK(e.kind() == PhaseTypeError::Kind::DegenerateTail);
    }
}

TEST_CASE("tail band for a non-derogatory dominant eigenvalue") {
    for (std::uint64_t stages : {1, 2, 4}) {
        const auto ex = gen_tstage(stages);
        const auto sub = decompose(ex.chain);
        const auto pt = PhaseType::continuous(ex.default_alpha(), sub);
        const auto lo_t = crossing_time(ex.default_alpha(), sub, 1e-3).time;
        const auto hi_t = crossing_time(ex.default_alpha(), sub, 1e-10).time;
        double lo = 1e300;
        double hi = 0.0;
        for (double t = lo_t; t <= hi_t; t += (hi_t - lo_t) / 40.0) {
            const double r = continuous_survival(pt, t) * std::exp(t) / std::pow(t, static_cast<double>(stages - 1));
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        CHECK(lo > 0.0);
        CHECK(hi / lo < 3.0);
    }
}

TEST_CASE("stochastic order replay") {
    CHECK(stochastic_order_check(-1.0, 10, std::vector<double>{0.0, 0.5, 1.0, 5.0}));
    CHECK(stochastic_order_check(-1.0, 1, std::vector<double>{0.0}));
    std::vector<double> grid;
    for (int i = 0; i <= 10000; ++i) {
        grid.push_back(i * 1e-3);
    }
    CHECK(stochastic_order_check(-2.0, 100, grid));
    CHECK(stochastic_order_check(-0.5, 10, grid));

    // the form (1+q/N)^{ceil(tN)} <= exp(q(t + 1/N)) fails already at t = 0
    const double q = -1.0;
    const double n = 10.0;
    const double lhs = std::pow(1.0 + q / n, std::ceil(0.0 * n));
    const double rhs = std::exp(q * (0.0 + 1.0 / n));
    CHECK(lhs > rhs);
}

TEST_CASE("sampler examples") {
    Rng rng(5);
    const auto one = discrete_of(gen_classical(), 1);
    const auto two = discrete_of(gen_tstage(2), 1);
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_absorption_step(one, rng) == 1);
        CHECK(sample_absorption_step(two, rng) == 2);
    }
    const auto four = discrete_of(gen_classical(), 4);
    const DiscretePhaseSampler sampler(four);
    double sum = 0.0;
    const int runs = 100000;
    for (int i = 0; i < runs; ++i) {
        sum += static_cast<double>(sampler(rng));
    }
    CHECK_THAT(sum / runs, WithinRel(4.0, 0.03));
}

TEST_CASE("sampler survival at deciles") {
    Rng rng(17);
    Rng chain_rng(4);
    const auto chain = random_chain(6, chain_rng);
    const auto pt = PhaseType::discrete(InitialDistribution::from_alpha({0.2, 0.1, 0.1, 0.2, 0.1, 0.2}, 0.1),
                                        decompose(chain), 9);
    const DiscretePhaseSampler sampler(pt);
    const int runs = 40000;
    std::vector<std::uint64_t> samples(runs);
    for (auto &s : samples) {
        s = sampler(rng);
    }
    const auto curve = discrete_survival_curve(pt, 2000);
    for (int d = 1; d <= 9; ++d) {
        std::uint64_t k = 0;
        while (curve[k] > 1.0 - 0.1 * d) {
            ++k;
        }
        double above = 0.0;
        for (auto s : samples) {
            above += s > k ? 1.0 : 0.0;
        }
        const double p = discrete_survival(pt, k);
        const double se = std::sqrt(p * (1.0 - p) / runs);
        CHECK(std::abs(above / runs - p) <= 3.0 * se + 1e-12);
    }
}
