#include "fluidhit/bounds.hpp"
#include "fluidhit/fluid.hpp"
#include "fluidhit/named_examples.hpp"
#include "fluidhit/phase_type.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace fluidhit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("countdown chains") {
    const auto one = gen_tstage(1);
    CHECK(one.name == "classical");
    CHECK(one.chain.size() == 2);
    CHECK(one.chain.probability(1, 0) == 1.0);

    const auto t3 = gen_tstage(3);
    CHECK(t3.chain.size() == 4);
    CHECK(t3.start_state == 3);
    CHECK(t3.known.nu == 1.0);
    CHECK(t3.known.k == 2);
    const auto w = expected_hitting_times(decompose(t3.chain));
    CHECK_THAT(w[2], WithinAbs(3.0, 1e-13));

    const auto t2 = gen_tstage(2);
    CHECK_THAT(fluid_m0(t2.default_alpha(), decompose(t2.chain), 1.0), WithinAbs(1.0 - 2.0 * std::exp(-1.0), 1e-14));
    CHECK_THROWS_AS(gen_tstage(0), ExampleError);
}

TEST_CASE("countdown trap chain") {
    const auto trap = gen_countdown_trap(3, 2);
    CHECK(trap.chain.size() == 11);
    CHECK(trap.pinned_n == 3u);
    const std::size_t i = trap.start_state;
    CHECK(i == 10);
    CHECK_THAT(trap.chain.probability(i, 0), WithinAbs(1.0 - 1.0 / 9.0, 1e-15));
    CHECK_THAT(trap.chain.probability(i, 9), WithinAbs(1.0 / 9.0, 1e-15));
    CHECK_THAT(expected_hitting_times(decompose(trap.chain))[i - 1], WithinRel(2.0, 1e-12));

    const auto small = gen_countdown_trap(1, 2);
    CHECK(small.chain.size() == 3);

    CHECK_THROWS_AS(trap.default_occupancy(4), ExampleError);
    CHECK(trap.default_occupancy(3).counts[i] == 3);
    CHECK_THROWS_AS(gen_countdown_trap(3, 1), ExampleError);
    try {
        gen_countdown_trap(10000, 2);
        FAIL("expected SizeTooLarge");
    } catch (const ExampleError &e) {
        CHECK(e.kind() == ExampleError::Kind::SizeTooLarge);
    }

    const auto refs = gen_countdown_trap(10, 2).references(10);
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].role == EntryRole::Lower);
    CHECK_THAT(refs[0].value, WithinAbs(95.62, 5e-3));
}

TEST_CASE("slow exit chain") {
    const auto one = gen_slow_exit(1.0);
    CHECK(one.chain.probability(1, 0) == 1.0);
    const auto five = gen_slow_exit(5.0);
    const auto sp = spectral_params(decompose(five.chain), five.default_alpha());
    CHECK(sp.nu == 0.2);
    CHECK(sp.k == 0);
    const auto refs = gen_slow_exit(2.0).references(2);
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].role == EntryRole::Exact);
    CHECK_THAT(refs[0].value, WithinAbs(6.0, 1e-13));
    for (double t : {1.0, 2.5, 7.0}) {
        for (std::uint64_t n : {1, 5, 40}) {
            CHECK(gen_slow_exit(t).references(n)[0].value >= static_cast<double>(n) * t);
        }
    }
    CHECK_THROWS_AS(gen_slow_exit(0.5), ExampleError);
}

TEST_CASE("example names") {
    CHECK(parse_example_name("classical").name == "classical");
    CHECK(parse_example_name("tstage:4").chain.size() == 5);
    CHECK(parse_example_name("tstage:1").name == "classical");
    CHECK(parse_example_name("fig3a:3,2").name == "fig3a:3,2");
    CHECK(parse_example_name("trap:3,2").name == "fig3a:3,2");
    CHECK(parse_example_name("fig3b:2.5").t == 2.5);
    CHECK(parse_example_name("slowexit:3").name == parse_example_name("fig3b:3").name);
    CHECK(is_example_name("fig3b:2"));
    CHECK_FALSE(is_example_name("chain.json"));
    for (const char *bad : {"tstage:", "tstage:x", "fig3a:3", "fig3a:3,2,1", "fig3b:-1", "classical:2", "nope"}) {
        CHECK_THROWS_AS(parse_example_name(bad), ExampleError);
    }
}

TEST_CASE("Erlang distribution function") {
    CHECK_THAT(erlang_m0(1, std::log(2.0)), WithinAbs(0.5, 1e-15));
    CHECK_THAT(erlang_m0(2, 1.0), WithinAbs(0.26424111765711533, 1e-15));
    CHECK(erlang_m0(3, 0.0) == 0.0);
    CHECK_THAT(erlang_m0(3, 50.0), WithinAbs(1.0 - std::exp(-50.0) * (1.0 + 50.0 + 1250.0), 1e-16));
    // small-t head keeps relative precision
    CHECK_THAT(erlang_m0(5, 1e-3), WithinRel(std::pow(1e-3, 5) / 120.0, 1e-2));
    for (std::uint64_t t = 1; t <= 6; ++t) {
        const auto ex = gen_tstage(t);
        const auto sub = decompose(ex.chain);
        for (int i = 0; i < 50; ++i) {
            const double x = i == 0 ? 0.0 : std::pow(10.0, -3.0 + 4.4771 * i / 49.0);
            CHECK_THAT(fluid_m0(ex.default_alpha(), sub, x), WithinAbs(erlang_m0(t, x), 1e-8));
        }
    }
}

TEST_CASE("random chains are valid and seeded") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng a(seed);
        Rng b(seed);
        const auto ca = random_chain(1 + seed % 10, a);
        const auto cb = random_chain(1 + seed % 10, b);
        CHECK(ca.transitions().to_dense().data() == cb.transitions().to_dense().data());
    }
}
