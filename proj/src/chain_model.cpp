#include "fluidhit/chain_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace fluidhit {

AbsorbingChain make_chain(num::SparseMatrix p, Representation representation);

namespace {

constexpr double kDistributionTolerance = 1e-9;

std::string entry_name(std::size_t i, std::size_t j) {
    return "P[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

double clamp_probability(double p, std::size_t i, std::size_t j) {
    if (!std::isfinite(p)) {
        throw ChainError(ChainError::Kind::NotStochastic, entry_name(i, j) + " is not finite", i);
    }
    if (p < 0.0) {
        if (p < -kStochasticTolerance) {
            throw ChainError(ChainError::Kind::NotStochastic,
                             entry_name(i, j) + " = " + std::to_string(p) + " is negative", i);
        }
        return 0.0;
    }
    if (p > 1.0) {
        if (p > 1.0 + kStochasticTolerance) {
            throw ChainError(ChainError::Kind::NotStochastic,
                             entry_name(i, j) + " = " + std::to_string(p) + " exceeds 1", i);
        }
        return 1.0;
    }
    return p;
}

/// Shared checks once the input is in triplet form (one entry per (i, j)).
AbsorbingChain build_validated(std::size_t states, std::vector<num::Triplet> entries, Representation representation) {
    std::vector<double> row_sum(states, 0.0);
    for (auto &e : entries) {
        e.value = clamp_probability(e.value, e.row, e.col);
        row_sum[e.row] += e.value;
    }
    for (std::size_t i = 0; i < states; ++i) {
        if (std::abs(row_sum[i] - 1.0) > kStochasticTolerance) {
            throw ChainError(ChainError::Kind::NotStochastic,
                             "row " + std::to_string(i) + " sums to " + std::to_string(row_sum[i]) + ", not 1", i);
        }
    }
    double p00 = 0.0;
    for (const auto &e : entries) {
        if (e.row == 0 && e.col == 0) {
            p00 = e.value;
        }
    }
    if (std::abs(p00 - 1.0) > kStochasticTolerance) {
        throw ChainError(ChainError::Kind::NotAbsorbing, "state 0 is not absorbing: P[0][0] = " + std::to_string(p00), 0);
    }
    std::erase_if(entries, [](const num::Triplet &e) { return e.row == 0 || e.value == 0.0; });
    entries.push_back({0, 0, 1.0});

    num::SparseMatrix p = num::SparseMatrix::from_triplets(states, states, std::move(entries));

    // reverse BFS from 0 over positive transitions
    std::vector<std::vector<std::size_t>> incoming(states);
    for (std::size_t i = 1; i < states; ++i) {
        for (std::size_t j : p.row_cols(i)) {
            if (j != i) {
                incoming[j].push_back(i);
            }
        }
    }
    std::vector<char> reaches(states, 0);
    std::deque<std::size_t> frontier{0};
    reaches[0] = 1;
    while (!frontier.empty()) {
        const std::size_t j = frontier.front();
        frontier.pop_front();
        for (std::size_t i : incoming[j]) {
            if (!reaches[i]) {
                reaches[i] = 1;
                frontier.push_back(i);
            }
        }
    }
    for (std::size_t i = 1; i < states; ++i) {
        if (!reaches[i]) {
            throw ChainError(ChainError::Kind::NotTransient,
                             "state " + std::to_string(i) + " cannot reach the absorbing state 0", i);
        }
    }
    return make_chain(std::move(p), representation);
}

} // namespace

AbsorbingChain make_chain(num::SparseMatrix p, Representation representation) {
    AbsorbingChain chain;
    chain.p_ = std::move(p);
    chain.representation_ = representation;
    return chain;
}

AbsorbingChain validate_chain(const num::DenseMatrix &p) {
    if (!p.square()) {
        throw ChainError(ChainError::Kind::Shape, "transition matrix is " + std::to_string(p.rows()) + "x" +
                                                      std::to_string(p.cols()) + ", not square");
    }
    if (p.rows() < 2) {
        throw ChainError(ChainError::Kind::Shape, "a chain needs state 0 and at least one transient state");
    }
    std::vector<num::Triplet> entries;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            if (p(i, j) != 0.0) {
                entries.push_back({i, j, p(i, j)});
            }
        }
    }
    return build_validated(p.rows(), std::move(entries), Representation::Dense);
}

AbsorbingChain validate_chain(std::size_t states, const std::vector<SparseRow> &rows) {
    if (states < 2) {
        throw ChainError(ChainError::Kind::Shape, "a chain needs state 0 and at least one transient state");
    }
    std::vector<char> seen(states, 0);
    std::vector<num::Triplet> entries;
    for (const auto &row : rows) {
        if (row.row >= states) {
            throw ChainError(ChainError::Kind::Shape, "row index " + std::to_string(row.row) + " out of range", row.row);
        }
        if (seen[row.row]) {
            throw ChainError(ChainError::Kind::Shape, "row " + std::to_string(row.row) + " given twice", row.row);
        }
        seen[row.row] = 1;
        if (row.cols.size() != row.probs.size()) {
            throw ChainError(ChainError::Kind::Shape, "row " + std::to_string(row.row) + " has " +
                                                          std::to_string(row.cols.size()) + " columns but " +
                                                          std::to_string(row.probs.size()) + " probabilities",
                             row.row);
        }
        std::vector<std::size_t> cols = row.cols;
        std::sort(cols.begin(), cols.end());
        if (std::adjacent_find(cols.begin(), cols.end()) != cols.end()) {
            throw ChainError(ChainError::Kind::Shape, "row " + std::to_string(row.row) + " repeats a column", row.row);
        }
        for (std::size_t k = 0; k < row.cols.size(); ++k) {
            if (row.cols[k] >= states) {
                throw ChainError(ChainError::Kind::Shape,
                                 "column " + std::to_string(row.cols[k]) + " out of range in row " +
                                     std::to_string(row.row),
                                 row.row);
            }
            entries.push_back({row.row, row.cols[k], row.probs[k]});
        }
    }
    return build_validated(states, std::move(entries), Representation::SparseRows);
}

SubGenerator decompose(const AbsorbingChain &chain) {
    const auto &p = chain.transitions();
    const std::size_t s = chain.transient_count();
    SubGenerator sub;
    sub.exit.assign(s, 0.0);
    sub.stay.assign(s, 0.0);
    std::vector<num::Triplet> entries;
    entries.reserve(p.nnz() + s);
    for (std::size_t i = 1; i <= s; ++i) {
        const auto cols = p.row_cols(i);
        const auto vals = p.row_values(i);
        double leave = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == 0) {
                sub.exit[i - 1] = vals[k];
                leave += vals[k];
            } else if (cols[k] == i) {
                sub.stay[i - 1] = vals[k];
            } else {
                entries.push_back({i - 1, cols[k] - 1, vals[k]});
                leave += vals[k];
            }
        }
        // -Q_ii as the outflow, so Q 1 = -exit holds without cancellation
        entries.push_back({i - 1, i - 1, -leave});
    }
    sub.q = num::SparseMatrix::from_triplets(s, s, std::move(entries));
    return sub;
}

num::SparseMatrix reassemble(const SubGenerator &sub) {
    const std::size_t s = sub.size();
    std::vector<num::Triplet> entries{{0, 0, 1.0}};
    for (std::size_t i = 0; i < s; ++i) {
        entries.push_back({i + 1, 0, sub.exit[i]});
        entries.push_back({i + 1, i + 1, sub.stay[i]});
        const auto cols = sub.q.row_cols(i);
        const auto vals = sub.q.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] != i) {
                entries.push_back({i + 1, cols[k] + 1, vals[k]});
            }
        }
    }
    return num::SparseMatrix::from_triplets(s + 1, s + 1, std::move(entries));
}

JumpMatrix jump_matrix(const SubGenerator &sub) {
    std::vector<num::Triplet> entries;
    entries.reserve(sub.q.nnz());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        const double rate = -sub.q.diagonal(i);
        const auto cols = sub.q.row_cols(i);
        const auto vals = sub.q.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] != i) {
                entries.push_back({i, cols[k], vals[k] / rate});
            }
        }
    }
    return {num::SparseMatrix::from_triplets(sub.size(), sub.size(), std::move(entries))};
}

InitialDistribution InitialDistribution::from_alpha(std::vector<double> alpha, std::optional<double> mass0) {
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (!std::isfinite(alpha[i]) || alpha[i] < 0.0) {
            throw ChainError(ChainError::Kind::BadDistribution,
                             "alpha entry for state " + std::to_string(i + 1) + " is negative or not finite", i + 1);
        }
        total += alpha[i];
    }
    InitialDistribution d;
    d.alpha = std::move(alpha);
    d.mass0 = mass0.value_or(std::max(0.0, 1.0 - total));
    if (!std::isfinite(d.mass0) || d.mass0 < 0.0) {
        throw ChainError(ChainError::Kind::BadDistribution, "mass at state 0 is negative or not finite", 0);
    }
    if (std::abs(d.mass0 + total - 1.0) > kDistributionTolerance) {
        throw ChainError(ChainError::Kind::BadDistribution,
                         "initial distribution sums to " + std::to_string(d.mass0 + total) + ", not 1");
    }
    return d;
}

InitialDistribution InitialDistribution::from_occupancy(const std::vector<std::uint64_t> &counts) {
    if (counts.size() < 2) {
        throw ChainError(ChainError::Kind::Shape, "occupancy needs state 0 and at least one transient state");
    }
    const std::uint64_t n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (n == 0) {
        throw ChainError(ChainError::Kind::BadDistribution, "occupancy has no chains");
    }
    InitialDistribution d;
    d.alpha.resize(counts.size() - 1);
    for (std::size_t i = 1; i < counts.size(); ++i) {
        d.alpha[i - 1] = static_cast<double>(counts[i]) / static_cast<double>(n);
    }
    d.mass0 = static_cast<double>(counts[0]) / static_cast<double>(n);
    return d;
}

InitialDistribution InitialDistribution::point(std::size_t transient, std::size_t x) {
    if (x == 0 || x > transient) {
        throw ChainError(ChainError::Kind::BadDistribution, "state " + std::to_string(x) + " is not transient", x);
    }
    InitialDistribution d;
    d.alpha.assign(transient, 0.0);
    d.alpha[x - 1] = 1.0;
    return d;
}

InitialDistribution InitialDistribution::uniform(std::size_t transient) {
    InitialDistribution d;
    d.alpha.assign(transient, 1.0 / static_cast<double>(transient));
    return d;
}

double InitialDistribution::transient_mass() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }

namespace {

num::SparseMatrix negated(const num::SparseMatrix &a) {
    std::vector<num::Triplet> entries;
    entries.reserve(a.nnz());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            entries.push_back({i, cols[k], -vals[k]});
        }
    }
    return num::SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(entries));
}

num::BlockTriangularSolver make_solver(const num::SparseMatrix &a) {
    try {
        return num::BlockTriangularSolver(a);
    } catch (const num::NumericsError &e) {
        if (e.kind() == num::NumericsError::Kind::SingularMatrix) {
            throw ChainError(ChainError::Kind::SingularSystem, std::string("hitting-time system is singular: ") + e.what());
        }
        throw;
    }
}

} // namespace

std::vector<double> expected_hitting_times(const SubGenerator &sub) {
    const auto solver = make_solver(negated(sub.q));
    const std::vector<double> ones(sub.size(), 1.0);
    return solver.solve(ones);
}

ResolventQuantities resolvent_quantities(const SubGenerator &sub, const JumpMatrix &jm,
                                         const InitialDistribution &alpha) {
    if (alpha.alpha.size() != sub.size() || jm.r.rows() != sub.size()) {
        throw ChainError(ChainError::Kind::Shape, "initial distribution or jump matrix does not match the chain size");
    }
    ResolventQuantities out;
    const auto neg_q = make_solver(negated(sub.q));
    const std::vector<double> ones(sub.size(), 1.0);
    // (-Q^{-1})_{jk} = P_j(visit k) (-Q^{-1})_{kk}, so the maximum sits on the diagonal
    const auto diag = neg_q.inverse_diagonal();
    out.max_neg_q_inverse = *std::max_element(diag.begin(), diag.end());
    const auto w = neg_q.solve(ones);
    out.max_hitting_time = *std::max_element(w.begin(), w.end());

    std::vector<num::Triplet> entries;
    entries.reserve(jm.r.nnz() + sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        entries.push_back({i, i, 1.0});
        const auto cols = jm.r.row_cols(i);
        const auto vals = jm.r.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            entries.push_back({i, cols[k], -vals[k]});
        }
    }
    const auto jumps = make_solver(num::SparseMatrix::from_triplets(sub.size(), sub.size(), std::move(entries)));
    const auto y = jumps.solve(ones);
    out.mean_jumps = std::inner_product(alpha.alpha.begin(), alpha.alpha.end(), y.begin(), 0.0);
    return out;
}

} // namespace fluidhit
