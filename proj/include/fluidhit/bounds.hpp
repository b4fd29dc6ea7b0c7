#pragma once

#include "fluidhit/chain_model.hpp"
#include "fluidhit/phase_type.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fluidhit {

class BoundsError : public std::runtime_error {
  public:
    enum class Kind { Domain, GammaMissing };

    BoundsError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

struct FluidBoundTerms {
    double crossing_time = 0.0; // t_N, first t with alpha exp(Qt) 1 <= 1/N
    double mean_jumps = 0.0;
    double max_hitting_time = 0.0;
    double max_neg_q_inverse = 0.0;
    double value = 0.0; // N (t_N + mean_jumps + 2 max_hitting_time)
};

/// Upper bound on E[T_N] from the fluid crossing time t_N. The slack term uses
/// max_x W(x), the largest row sum of (-Q)^{-1}.
FluidBoundTerms fluid_crossing_bound_terms(const SubGenerator &sub, const InitialDistribution &alpha,
                                           std::uint64_t n);
double fluid_crossing_bound(const SubGenerator &sub, const InitialDistribution &alpha, std::uint64_t n);

/// (1/nu) N ln N + (k/nu) N ln ln N; leading terms only, needs N >= 3.
double spectral_leading_terms(const SpectralParams &sp, std::uint64_t n);

/// (1/nu)(ln(gamma N / nu) + k ln ln N - k ln nu), needs gamma and N >= 3.
double crossing_time_asymptotic(const SpectralParams &sp, std::uint64_t n);

/// N sum_i W(x_i) over the chains of an occupancy vector (counts over 0..S).
double hitting_sum_bound(std::span<const double> w, std::span<const std::uint64_t> counts);
/// Same bound written with alpha: N^2 alpha.W.
double hitting_sum_bound(std::span<const double> w, const InitialDistribution &alpha, std::uint64_t n);
/// T N^2.
double hitting_sum_cap(double t, std::uint64_t n);

/// T N ln N + 2 N T + 1, valid when T >= sup_x W(x).
double uniform_hitting_bound(double t, std::uint64_t n);

/// N ln N + (T-1) N ln ln N + (T+2) N, for T copies of each of N coupons.
double coupon_bound(std::uint64_t t, std::uint64_t n);

/// Exact sum for n <= 1e6, ln n + Euler gamma + 1/(2n) above.
double harmonic_number(std::uint64_t n);

enum class TightnessKind { CountdownTrap, SlowExit };

struct TightnessReference {
    double value = 0.0;
    bool exact = false;
};

/// CountdownTrap(N, T): lower bound N^3 (T-1)(1 - (1 - 1/N^2)^N).
/// SlowExit(N, T): exact E[T_N] = N T H_N.
TightnessReference tightness_reference(TightnessKind kind, std::uint64_t n, double t);

enum class EntryRole { Upper, Lower, Exact, Asymptotic };

std::string_view role_name(EntryRole role);

struct BoundEntry {
    std::string name;
    EntryRole role = EntryRole::Upper;
    double value = 0.0;
    std::string provenance;
    std::string formula;
};

struct ReportOptions {
    SpectralOptions spectral;
    /// Cap T for the uniform bound; max_x W(x) when absent.
    std::optional<double> uniform_cap;
    /// Reference values (exact or lower bounds, or extra asymptotics) supplied by
    /// the caller, e.g. closed forms of named examples.
    std::vector<BoundEntry> references;
    double tol = num::kDefaultExpmTolerance;
};

struct BoundReport {
    std::string chain_id;
    std::uint64_t n = 0;
    std::size_t transient_states = 0;
    double alpha_mass0 = 0.0;
    std::vector<BoundEntry> entries;
    std::map<std::string, double> quantities;
    /// Entry-level failures and remarks, keyed by entry name.
    std::map<std::string, std::string> notes;
    /// Every lower/exact value <= every certified upper bound.
    bool consistent = true;

    const BoundEntry *find(std::string_view name) const;
    std::optional<double> value(std::string_view name) const;
};

BoundReport assemble_report(const std::string &chain_id, const AbsorbingChain &chain,
                            const InitialDistribution &alpha, std::uint64_t n, const ReportOptions &options = {});

} // namespace fluidhit
