#pragma once

#include "fluidhit/chain_model.hpp"
#include "fluidhit/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidhit {

class PhaseTypeError : public std::runtime_error {
  public:
    enum class Kind { ScaleTooSmall, Domain, DegenerateTail, WrongKind };

    PhaseTypeError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

enum class PhaseKind { Continuous, Discrete };

/// Absorption-time law of (alpha, Q): continuous with generator Q, or discrete
/// with transition matrix I + Q/N.
class PhaseType {
  public:
    static PhaseType continuous(InitialDistribution alpha, SubGenerator sub);
    /// Throws ScaleTooSmall if N < max(-Q_ii).
    static PhaseType discrete(InitialDistribution alpha, SubGenerator sub, std::uint64_t n);

    PhaseKind kind() const noexcept { return kind_; }
    std::uint64_t scale() const noexcept { return n_; }
    const InitialDistribution &alpha() const noexcept { return alpha_; }
    const SubGenerator &sub() const noexcept { return sub_; }
    /// I + Q/N; empty for the continuous kind.
    const num::SparseMatrix &step_matrix() const noexcept { return step_; }

  private:
    PhaseType(InitialDistribution alpha, SubGenerator sub);

    InitialDistribution alpha_;
    SubGenerator sub_;
    PhaseKind kind_ = PhaseKind::Continuous;
    std::uint64_t n_ = 0;
    num::SparseMatrix step_;
};

/// P(X > t) = alpha exp(tQ) 1.
double continuous_survival(const PhaseType &pt, double t, double tol = num::kDefaultExpmTolerance);

/// P(T > k) = alpha (I + Q/N)^k 1.
double discrete_survival(const PhaseType &pt, std::uint64_t k);

/// s(0), ..., s(kmax).
std::vector<double> discrete_survival_curve(const PhaseType &pt, std::uint64_t kmax);

/// The sequence alpha (I + Q/N)^k 1 for k = 0, 1, ... Sparse products while the
/// support of the row vector is small, dense ones afterwards.
class DiscreteSurvivalSequence {
  public:
    explicit DiscreteSurvivalSequence(const PhaseType &pt);

    std::uint64_t index() const noexcept { return k_; }
    double value() const noexcept { return mass_; }
    void advance();

  private:
    void refresh_mass();

    const num::SparseMatrix *m_;
    std::vector<double> v_;
    std::vector<double> next_;
    std::vector<std::size_t> active_;
    std::vector<std::size_t> next_active_;
    std::vector<char> marked_;
    bool dense_ = false;
    std::uint64_t k_ = 0;
    double mass_ = 0.0;
};

/// Smallest k with discrete_survival(k) <= 2/N. Repeated squaring with binary
/// lifting for small chains, a monotone scan otherwise.
std::uint64_t x_threshold(const PhaseType &pt);

enum class ParamSource { Computed, UserSupplied };

struct SpectralOptions {
    /// Default 1e-7 * ||Q||_inf.
    std::optional<double> cluster_tol;
    bool estimate_gamma = false;
    std::optional<std::size_t> k_override;
    std::optional<double> nu_override;
};

struct SpectralParams {
    double nu = 0.0;
    std::size_t k = 0;
    std::optional<double> gamma;
    ParamSource nu_source = ParamSource::Computed;
    ParamSource k_source = ParamSource::Computed;
    double cluster_tol = 0.0;
    /// Why gamma is absent when it was requested.
    std::string gamma_note;
};

SpectralParams spectral_params(const SubGenerator &sub, const InitialDistribution &alpha,
                               const SpectralOptions &options = {});

/// Least-squares fit of survival(t) ~ (gamma/nu) t^k exp(-nu t) over 5 log-spaced
/// t with survival in [1e-8, 1e-4]. Throws DegenerateTail when the fit residual
/// shows the tail is not of that form (alpha misses the dominant eigenspace).
double fit_gamma(const SubGenerator &sub, const InitialDistribution &alpha, double nu, std::size_t k);

/// Checks on the grid that N^{-1} Geom(-qii/N) is stochastically below
/// Exp(-qii) + 1/N: P(G >= ceil(tN)) = (1+qii/N)^{max(ceil(tN)-1, 0)} against
/// min(1, exp(qii (t - 1/N))).
bool stochastic_order_check(double qii, std::uint64_t n, std::span<const double> t_grid);

/// Samples T from the discrete phase-type law by holding times and embedded jumps.
class DiscretePhaseSampler {
  public:
    explicit DiscretePhaseSampler(const PhaseType &pt);

    std::uint64_t operator()(Rng &rng) const;

  private:
    std::size_t pick(std::span<const double> cumulative, double u) const;

    std::vector<double> start_cdf_;   // over 0 (already absorbed), 1..S
    std::vector<double> leave_prob_;  // -Q_ii / N
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> targets_; // chain states, 0 = absorbed
    std::vector<double> cumulative_;
};

std::uint64_t sample_absorption_step(const PhaseType &pt, Rng &rng);

} // namespace fluidhit
