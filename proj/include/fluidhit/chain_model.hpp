#pragma once

#include "fluidhit/numerics.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidhit {

class ChainError : public std::runtime_error {
  public:
    enum class Kind { Shape, NotStochastic, NotAbsorbing, NotTransient, BadDistribution, SingularSystem };

    ChainError(Kind kind, const std::string &what, std::optional<std::size_t> state = std::nullopt)
        : std::runtime_error(what), kind_(kind), state_(state) {}

    Kind kind() const noexcept { return kind_; }
    /// Offending row or state, when the error is tied to one.
    std::optional<std::size_t> state() const noexcept { return state_; }

  private:
    Kind kind_;
    std::optional<std::size_t> state_;
};

inline constexpr double kStochasticTolerance = 1e-12;

enum class Representation { Dense, SparseRows };

struct SparseRow {
    std::size_t row = 0;
    std::vector<std::size_t> cols;
    std::vector<double> probs;
};

/// Validated transition matrix over states 0..S with state 0 absorbing and
/// every other state transient. Always stored as CSR; the tag records how it
/// was supplied.
class AbsorbingChain {
  public:
    std::size_t size() const noexcept { return p_.rows(); }
    std::size_t transient_count() const noexcept { return p_.rows() - 1; }
    Representation representation() const noexcept { return representation_; }
    const num::SparseMatrix &transitions() const noexcept { return p_; }
    double probability(std::size_t i, std::size_t j) const { return p_.coeff(i, j); }

  private:
    friend AbsorbingChain make_chain(num::SparseMatrix p, Representation representation);
    num::SparseMatrix p_;
    Representation representation_ = Representation::Dense;
};

/// Checks shape, entries in [0,1], row sums, P[0][0] = 1 and reachability of 0.
/// Entries within 1e-12 outside [0,1] are clamped; anything further is an error.
AbsorbingChain validate_chain(const num::DenseMatrix &p);
AbsorbingChain validate_chain(std::size_t states, const std::vector<SparseRow> &rows);

/// Transient block of P - I and the exit vector. Local index i stands for chain
/// state i + 1.
struct SubGenerator {
    num::SparseMatrix q;
    std::vector<double> exit;
    /// Self-loop probabilities P[i][i] of the transient states, kept so the
    /// original matrix can be rebuilt bit for bit.
    std::vector<double> stay;

    std::size_t size() const noexcept { return q.rows(); }
};

SubGenerator decompose(const AbsorbingChain &chain);
/// Inverse of decompose: the full (S+1)x(S+1) transition matrix.
num::SparseMatrix reassemble(const SubGenerator &sub);

struct JumpMatrix {
    num::SparseMatrix r;
};

JumpMatrix jump_matrix(const SubGenerator &sub);

/// Transient part of the initial law; mass0 is what starts in state 0.
struct InitialDistribution {
    std::vector<double> alpha;
    double mass0 = 0.0;

    static InitialDistribution from_alpha(std::vector<double> alpha, std::optional<double> mass0 = std::nullopt);
    /// alpha = counts / N over states 1..S, mass0 = counts[0] / N.
    static InitialDistribution from_occupancy(const std::vector<std::uint64_t> &counts);
    /// Point mass on chain state x >= 1 among `transient` states.
    static InitialDistribution point(std::size_t transient, std::size_t x);
    static InitialDistribution uniform(std::size_t transient);

    double transient_mass() const;
};

/// W = (-Q)^{-1} 1, the expected hitting time of 0 from each transient state.
std::vector<double> expected_hitting_times(const SubGenerator &sub);

struct ResolventQuantities {
    double max_neg_q_inverse = 0.0; // max_{j,k} (-Q^{-1})_{jk}
    double mean_jumps = 0.0;        // alpha (I - R)^{-1} 1
    double max_hitting_time = 0.0;  // max_x W(x) = ||(-Q)^{-1}||_inf
};

ResolventQuantities resolvent_quantities(const SubGenerator &sub, const JumpMatrix &jm,
                                         const InitialDistribution &alpha);

} // namespace fluidhit
