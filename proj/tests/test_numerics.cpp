#include "fluidhit/numerics.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace fluidhit::num;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DenseMatrix stage_q(std::size_t t) {
    DenseMatrix q(t, t);
    for (std::size_t i = 0; i < t; ++i) {
        q(i, i) = -1.0;
        if (i > 0) {
            q(i, i - 1) = 1.0;
        }
    }
    return q;
}

double residual(const DenseMatrix &a, const std::vector<double> &x, const std::vector<double> &b) {
    const auto ax = multiply(a, x);
    double r = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        r = std::max(r, std::abs(ax[i] - b[i]));
    }
    return r;
}

std::vector<double> sorted_real(std::vector<std::complex<double>> v) {
    std::vector<double> out;
    for (const auto &z : v) {
        out.push_back(z.real());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("solve_linear on small systems") {
    const std::vector<double> b{3.0, -1.5, 2.25};
    const auto x = solve_linear(DenseMatrix::identity(3), b);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(x[i] == b[i]);
    }

    DenseMatrix neg = stage_q(3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            neg(i, j) = -neg(i, j);
        }
    }
    const auto w = solve_linear(neg, std::vector<double>(3, 1.0));
    CHECK_THAT(w[0], WithinAbs(1.0, 1e-14));
    CHECK_THAT(w[1], WithinAbs(2.0, 1e-14));
    CHECK_THAT(w[2], WithinAbs(3.0, 1e-14));

    const auto singular = DenseMatrix::from_rows({{2.0, 0.0}, {0.0, 0.0}});
    try {
        solve_linear(singular, std::vector<double>{1.0, 1.0});
        FAIL("expected SingularMatrix");
    } catch (const NumericsError &e) {
        CHECK(e.kind() == NumericsError::Kind::SingularMatrix);
    }
}

TEST_CASE("solve_linear residual against Eigen on random systems") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rep % 30;
        DenseMatrix a(n, n);
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            b[i] = normal(gen);
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) = normal(gen);
            }
        }
        const auto x = solve_linear(a, b);
        double bnorm = 0.0;
        for (double v : b) {
            bnorm = std::max(bnorm, std::abs(v));
        }
        CHECK(residual(a, x, b) <= 1e-10 * (1.0 + bnorm));
        const Eigen::VectorXd oracle = support::to_eigen(a).partialPivLu().solve(support::to_eigen(b));
        CHECK((support::to_eigen(x) - oracle).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + oracle.lpNorm<Eigen::Infinity>()));
    }
}

TEST_CASE("block triangular solver matches dense LU") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto sub = support::random_sub(3 + seed % 12, seed, 0.3);
        DenseMatrix d = sub.q.to_dense();
        for (std::size_t i = 0; i < d.rows(); ++i) {
            for (double &v : d.row(i)) {
                v = -v;
            }
        }
        const SparseMatrix a = SparseMatrix::from_dense(d);
        const BlockTriangularSolver solver(a);
        const std::vector<double> ones(a.rows(), 1.0);
        const auto x = solver.solve(ones);
        const Eigen::MatrixXd inv = support::to_eigen(d).inverse();
        const Eigen::VectorXd oracle = inv.rowwise().sum();
        CHECK((support::to_eigen(x) - oracle).lpNorm<Eigen::Infinity>() <= 1e-9 * oracle.lpNorm<Eigen::Infinity>());
        const auto diag = solver.inverse_diagonal();
        for (std::size_t i = 0; i < diag.size(); ++i) {
            CHECK_THAT(diag[i], WithinRel(inv(i, i), 1e-9));
        }
    }
}

TEST_CASE("strongly connected components are reverse topological") {
    // 0 <-> 1 -> 2, 3 isolated, 2 -> 3
    const auto a = SparseMatrix::from_triplets(4, 4, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
    const auto comps = strongly_connected_components(a);
    REQUIRE(comps.size() == 3);
    std::vector<std::size_t> position(4);
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (auto v : comps[c]) {
            position[v] = c;
        }
    }
    CHECK(position[0] == position[1]);
    CHECK(position[3] < position[2]);
    CHECK(position[2] < position[1]);
}

TEST_CASE("expm_action closed forms") {
    const auto scalar = SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0}});
    CHECK_THAT(expm_action(scalar, std::vector<double>{1.0}, std::log(2.0))[0], WithinRel(0.5, 1e-13));

    // stage chain T = 2, start in the second stage (local index 1)
    const auto q2 = SparseMatrix::from_dense(stage_q(2));
    for (double t : {0.1, 1.0, 3.0, 10.0}) {
        const auto v = expm_action(q2, std::vector<double>{0.0, 1.0}, t);
        CHECK_THAT(v[0] + v[1], WithinRel(std::exp(-t) * (1.0 + t), 1e-12));
    }

    const auto sub = support::random_sub(6, 3);
    std::vector<double> v{0.1, 0.2, 0.3, 0.0, 0.25, 0.15};
    const auto same = expm_action(sub.q, v, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(same[i] == v[i]);
    }

    try {
        expm_action(scalar, std::vector<double>{1.0}, 1.0, 1e-16);
        FAIL("expected NonConvergent");
    } catch (const NumericsError &e) {
        CHECK(e.kind() == NumericsError::Kind::NonConvergent);
    }
}

TEST_CASE("expm_action against a Taylor oracle on random generators") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t n = 2 + seed % 9;
        const auto sub = support::random_sub(n, seed);
        std::vector<double> v(n, 1.0 / static_cast<double>(n));
        const Eigen::MatrixXd q = support::to_eigen(sub.q);
        for (double t : {0.3, 2.0, 15.0}) {
            const auto got = expm_action(sub.q, v, t);
            const Eigen::RowVectorXd oracle = support::to_eigen(v).transpose() * support::expm(q * t);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(got[i] >= 0.0);
                CHECK_THAT(got[i], WithinAbs(oracle(static_cast<Eigen::Index>(i)), 1e-11));
            }
        }
    }
}

TEST_CASE("expm_action semigroup and monotone survival") {
    const double tol = kDefaultExpmTolerance;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const std::size_t n = 1 + seed % 10;
        const auto sub = support::random_sub(n, 100 + seed);
        std::vector<double> v(n, 0.0);
        v[seed % n] = 1.0;
        const double t1 = 0.1 * static_cast<double>(seed);
        const double t2 = 1.7;
        const auto direct = expm_action(sub.q, v, t1 + t2, tol);
        const auto composed = expm_action(sub.q, expm_action(sub.q, v, t1, tol), t2, tol);
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diff = std::max(diff, std::abs(direct[i] - composed[i]));
        }
        CHECK(diff <= 10.0 * tol);

        UniformizedSurvival survival(sub.q, v);
        double prev = survival(0.0);
        CHECK_THAT(prev, WithinAbs(1.0, 1e-15));
        for (double t = 0.25; t < 20.0; t += 0.25) {
            const double s = survival(t);
            CHECK(s <= prev * (1.0 + 1e-12));
            const auto full = expm_action(sub.q, v, t);
            CHECK_THAT(s, WithinAbs(std::accumulate(full.begin(), full.end(), 0.0), 1e-13));
            prev = s;
        }
    }
}

TEST_CASE("expm_action at large uniformized time") {
    // Lambda * t well above 700 exercises the log-space Poisson weights
    const auto q = SparseMatrix::from_dense(stage_q(3));
    const double t = 900.0;
    const auto v = expm_action(q, std::vector<double>{0.0, 0.0, 1.0}, t);
    const double expected = std::exp(-t) * (1.0 + t + t * t / 2.0);
    CHECK_THAT(v[0] + v[1] + v[2], WithinRel(expected, 1e-9));
}

TEST_CASE("eigen_spectrum examples") {
    const auto stage = eigen_spectrum(stage_q(3));
    REQUIRE(stage.eigenvalues.size() == 1);
    CHECK(stage.eigenvalues[0].multiplicity == 3);
    CHECK_THAT(stage.eigenvalues[0].value.real(), WithinAbs(-1.0, 1e-12));

    const auto diag = eigen_spectrum(DenseMatrix::from_rows({{-1.0, 0.0}, {0.0, -2.0}}));
    REQUIRE(diag.eigenvalues.size() == 2);
    CHECK_THAT(diag.dominant.value.real(), WithinAbs(-1.0, 1e-14));

    const auto sym = eigen_spectrum(DenseMatrix::from_rows({{-2.0, 1.0}, {1.0, -3.0}}));
    REQUIRE(sym.eigenvalues.size() == 2);
    // roots of l^2 + 5 l + 5
    CHECK_THAT(sym.eigenvalues[0].value.real(), WithinAbs((-5.0 + std::sqrt(5.0)) / 2.0, 1e-12));
    CHECK_THAT(sym.eigenvalues[1].value.real(), WithinAbs((-5.0 - std::sqrt(5.0)) / 2.0, 1e-12));

    try {
        eigen_spectrum(DenseMatrix(kMaxDenseDimension + 1, kMaxDenseDimension + 1));
        FAIL("expected DimensionTooLarge");
    } catch (const NumericsError &e) {
        CHECK(e.kind() == NumericsError::Kind::DimensionTooLarge);
    }
}

TEST_CASE("eigenvalues agree with Eigen and are permutation invariant") {
    std::mt19937_64 gen(11);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t n = 2 + seed % 25;
        const auto sub = support::random_sub(n, 500 + seed, 0.6);
        const DenseMatrix q = sub.q.to_dense();
        const auto ours = eigenvalues(q);
        REQUIRE(ours.size() == n);

        Eigen::EigenSolver<Eigen::MatrixXd> es(support::to_eigen(q), false);
        std::vector<std::complex<double>> oracle(es.eigenvalues().data(), es.eigenvalues().data() + n);
        // match each oracle eigenvalue to a distinct computed one
        std::vector<bool> used(n, false);
        for (const auto &z : oracle) {
            double best = 1e300;
            std::size_t at = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!used[i] && std::abs(ours[i] - z) < best) {
                    best = std::abs(ours[i] - z);
                    at = i;
                }
            }
            used[at] = true;
            CHECK(best <= 1e-8 * (1.0 + q.norm_inf()));
        }

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        DenseMatrix pq(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                pq(i, j) = q(perm[i], perm[j]);
            }
        }
        const auto a = eigen_spectrum(q);
        const auto b = eigen_spectrum(pq);
        CHECK_THAT(a.dominant.value.real(), WithinAbs(b.dominant.value.real(), 1e-9));
        CHECK(a.dominant.multiplicity == b.dominant.multiplicity);
        std::size_t total = 0;
        for (const auto &e : b.eigenvalues) {
            total += e.multiplicity;
        }
        CHECK(total == n);
    }
}

TEST_CASE("complex pairs from a rotation block") {
    const auto rot = DenseMatrix::from_rows({{-1.0, 2.0, 0.0}, {-2.0, -1.0, 0.0}, {0.0, 0.0, -3.0}});
    const auto spec = eigen_spectrum(rot);
    REQUIRE(spec.eigenvalues.size() == 3);
    CHECK_THAT(spec.dominant.value.real(), WithinAbs(-1.0, 1e-12));
    CHECK_THAT(std::abs(spec.dominant.value.imag()), WithinAbs(2.0, 1e-12));
}

TEST_CASE("block_eigenvalues match the dense spectrum") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto sub = support::random_sub(3 + seed % 15, 900 + seed, 0.25);
        const auto blocks = sorted_real(block_eigenvalues(sub.q));
        const auto dense = sorted_real(eigenvalues(sub.q.to_dense()));
        REQUIRE(blocks.size() == dense.size());
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            CHECK_THAT(blocks[i], WithinAbs(dense[i], 1e-8));
        }
    }
}

TEST_CASE("dominant_eigen against eigen_spectrum") {
    const auto scalar = SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0}});
    CHECK_THAT(dominant_eigen(scalar), WithinAbs(-1.0, 1e-14));
    CHECK_THAT(dominant_eigen(SparseMatrix::from_dense(stage_q(5))), WithinAbs(-1.0, 1e-14));
    const auto slow = SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0 / 7.0}});
    CHECK_THAT(dominant_eigen(slow), WithinAbs(-1.0 / 7.0, 1e-15));

    const double tol = 1e-12;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const auto sub = support::random_sub(2 + seed % 20, 1300 + seed, 0.5);
        const double got = dominant_eigen(sub.q, {tol, 2'000'000});
        Eigen::EigenSolver<Eigen::MatrixXd> es(support::to_eigen(sub.q), false);
        double best = -1e300;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            best = std::max(best, es.eigenvalues()(i).real());
        }
        CHECK_THAT(got, WithinAbs(best, 10.0 * tol * (1.0 + sub.q.norm_inf()) + 1e-10));
        CHECK_THAT(got, WithinAbs(eigen_spectrum(sub.q.to_dense()).dominant.value.real(), 1e-9));
    }
}

TEST_CASE("dominant_eigen reports slow convergence") {
    const auto q = SparseMatrix::from_dense(DenseMatrix::from_rows({{-1.0, 0.9}, {0.05, -1.0}}));
    try {
        dominant_eigen(q, {1e-15, 3});
        FAIL("expected SlowConvergence");
    } catch (const SlowConvergence &e) {
        CHECK(e.iterations() == 3);
        CHECK(std::isfinite(e.estimate()));
    }
}
