#include "fluidhit/bounds.hpp"

#include "fluidhit/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fluidhit {

namespace {

constexpr double kEulerGamma = 0.57721566490153286;
constexpr std::uint64_t kHarmonicDirectLimit = 1'000'000;
constexpr double kConsistencySlack = 1e-12;
constexpr std::size_t kThresholdReportLimit = 256;

void require_n(std::uint64_t n, std::uint64_t min, const char *what) {
    if (n < min) {
        throw BoundsError(BoundsError::Kind::Domain,
                          std::string(what) + " needs N >= " + std::to_string(min) + ", got " + std::to_string(n));
    }
}

} // namespace

FluidBoundTerms fluid_crossing_bound_terms(const SubGenerator &sub, const InitialDistribution &alpha,
                                           std::uint64_t n) {
    require_n(n, 1, "fluid crossing bound");
    FluidBoundTerms terms;
    if (n > 1) {
        terms.crossing_time = crossing_time(alpha, sub, 1.0 / static_cast<double>(n)).time;
    }
    const auto rq = resolvent_quantities(sub, jump_matrix(sub), alpha);
    terms.mean_jumps = rq.mean_jumps;
    terms.max_hitting_time = rq.max_hitting_time;
    terms.max_neg_q_inverse = rq.max_neg_q_inverse;
    terms.value = static_cast<double>(n) * (terms.crossing_time + terms.mean_jumps + 2.0 * terms.max_hitting_time);
    return terms;
}

double fluid_crossing_bound(const SubGenerator &sub, const InitialDistribution &alpha, std::uint64_t n) {
    return fluid_crossing_bound_terms(sub, alpha, n).value;
}

double spectral_leading_terms(const SpectralParams &sp, std::uint64_t n) {
    require_n(n, 3, "spectral leading terms");
    if (!(sp.nu > 0.0)) {
        throw BoundsError(BoundsError::Kind::Domain, "spectral leading terms need nu > 0");
    }
    const double nd = static_cast<double>(n);
    return nd * std::log(nd) / sp.nu + static_cast<double>(sp.k) * nd * std::log(std::log(nd)) / sp.nu;
}

double crossing_time_asymptotic(const SpectralParams &sp, std::uint64_t n) {
    require_n(n, 3, "crossing-time asymptotic");
    if (!sp.gamma) {
        throw BoundsError(BoundsError::Kind::GammaMissing,
                          "crossing-time asymptotic needs the tail prefactor gamma (enable its estimate)");
    }
    if (!(sp.nu > 0.0) || !(*sp.gamma > 0.0)) {
        throw BoundsError(BoundsError::Kind::Domain, "crossing-time asymptotic needs nu > 0 and gamma > 0");
    }
    const double nd = static_cast<double>(n);
    const double k = static_cast<double>(sp.k);
    return (std::log(*sp.gamma * nd / sp.nu) + k * std::log(std::log(nd)) - k * std::log(sp.nu)) / sp.nu;
}

double hitting_sum_bound(std::span<const double> w, std::span<const std::uint64_t> counts) {
    if (counts.size() != w.size() + 1) {
        throw BoundsError(BoundsError::Kind::Domain, "occupancy must have one count per state 0..S");
    }
    const std::uint64_t n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    double sum = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) {
        sum += static_cast<double>(counts[x + 1]) * w[x];
    }
    return static_cast<double>(n) * sum;
}

double hitting_sum_bound(std::span<const double> w, const InitialDistribution &alpha, std::uint64_t n) {
    if (alpha.alpha.size() != w.size()) {
        throw BoundsError(BoundsError::Kind::Domain, "initial distribution does not match W");
    }
    const double nd = static_cast<double>(n);
    return nd * nd * std::inner_product(w.begin(), w.end(), alpha.alpha.begin(), 0.0);
}

double hitting_sum_cap(double t, std::uint64_t n) {
    const double nd = static_cast<double>(n);
    return t * nd * nd;
}

double uniform_hitting_bound(double t, std::uint64_t n) {
    require_n(n, 1, "uniform hitting bound");
    if (!(t > 0.0)) {
        throw BoundsError(BoundsError::Kind::Domain, "uniform hitting bound needs T > 0");
    }
    const double nd = static_cast<double>(n);
    return t * nd * std::log(nd) + 2.0 * nd * t + 1.0;
}

double coupon_bound(std::uint64_t t, std::uint64_t n) {
    require_n(n, 3, "coupon bound");
    if (t < 1) {
        throw BoundsError(BoundsError::Kind::Domain, "coupon bound needs T >= 1");
    }
    const double nd = static_cast<double>(n);
    const double td = static_cast<double>(t);
    return nd * std::log(nd) + (td - 1.0) * nd * std::log(std::log(nd)) + (td + 2.0) * nd;
}

double harmonic_number(std::uint64_t n) {
    if (n <= kHarmonicDirectLimit) {
        // smallest terms first
        double h = 0.0;
        for (std::uint64_t i = n; i >= 1; --i) {
            h += 1.0 / static_cast<double>(i);
        }
        return h;
    }
    const double nd = static_cast<double>(n);
    return std::log(nd) + kEulerGamma + 0.5 / nd;
}

TightnessReference tightness_reference(TightnessKind kind, std::uint64_t n, double t) {
    require_n(n, 1, "tightness reference");
    const double nd = static_cast<double>(n);
    switch (kind) {
    case TightnessKind::CountdownTrap: {
        if (!(t >= 2.0)) {
            throw BoundsError(BoundsError::Kind::Domain, "countdown trap needs T >= 2");
        }
        // 1 - (1 - 1/N^2)^N without cancellation
        const double hit = -std::expm1(nd * std::log1p(-1.0 / (nd * nd)));
        return {nd * nd * nd * (t - 1.0) * hit, false};
    }
    case TightnessKind::SlowExit:
        if (!(t >= 1.0)) {
            throw BoundsError(BoundsError::Kind::Domain, "slow exit needs T >= 1");
        }
        return {nd * t * harmonic_number(n), true};
    }
    throw BoundsError(BoundsError::Kind::Domain, "unknown tightness example");
}

std::string_view role_name(EntryRole role) {
    switch (role) {
    case EntryRole::Upper:
        return "upper";
    case EntryRole::Lower:
        return "lower";
    case EntryRole::Exact:
        return "exact";
    case EntryRole::Asymptotic:
        return "asymptotic";
    }
    return "unknown";
}

const BoundEntry *BoundReport::find(std::string_view name) const {
    for (const auto &e : entries) {
        if (e.name == name) {
            return &e;
        }
    }
    return nullptr;
}

std::optional<double> BoundReport::value(std::string_view name) const {
    if (const auto *e = find(name)) {
        return e->value;
    }
    return std::nullopt;
}

BoundReport assemble_report(const std::string &chain_id, const AbsorbingChain &chain,
                            const InitialDistribution &alpha, std::uint64_t n, const ReportOptions &options) {
    require_n(n, 1, "report");
    BoundReport report;
    report.chain_id = chain_id;
    report.n = n;
    report.transient_states = chain.transient_count();
    report.alpha_mass0 = alpha.mass0;
    const SubGenerator sub = decompose(chain);

    const auto w = expected_hitting_times(sub);
    const double max_w = *std::max_element(w.begin(), w.end());
    report.quantities["max_W"] = max_w;
    report.quantities["min_W"] = *std::min_element(w.begin(), w.end());
    report.quantities["alpha_dot_W"] = std::inner_product(w.begin(), w.end(), alpha.alpha.begin(), 0.0);

    try {
        const auto terms = fluid_crossing_bound_terms(sub, alpha, n);
        report.quantities["t_N"] = terms.crossing_time;
        report.quantities["mean_jumps"] = terms.mean_jumps;
        report.quantities["max_neg_Q_inverse"] = terms.max_neg_q_inverse;
        report.entries.push_back({"fluid_crossing_bound", EntryRole::Upper, terms.value,
                                  "fluid crossing time t_N with the jump-count and resolvent slack",
                                  "N*(t_N + alpha(I-R)^-1 1 + 2*max_x W(x))"});
    } catch (const std::exception &e) {
        report.notes["fluid_crossing_bound"] = e.what();
    }

    if (n <= 1 || sub.size() <= kThresholdReportLimit) {
        try {
            const auto pt = PhaseType::discrete(alpha, sub, n);
            report.quantities["x_N"] = static_cast<double>(x_threshold(pt));
        } catch (const std::exception &e) {
            report.notes["x_N"] = e.what();
        }
    }

    std::optional<SpectralParams> sp;
    try {
        sp = spectral_params(sub, alpha, options.spectral);
        report.quantities["nu"] = sp->nu;
        report.quantities["k"] = static_cast<double>(sp->k);
        if (sp->gamma) {
            report.quantities["gamma"] = *sp->gamma;
        } else if (options.spectral.estimate_gamma) {
            report.notes["gamma"] = sp->gamma_note;
        }
    } catch (const std::exception &e) {
        report.notes["spectral_leading_terms"] = e.what();
    }
    if (sp) {
        try {
            report.entries.push_back({"spectral_leading_terms", EntryRole::Asymptotic, spectral_leading_terms(*sp, n),
                                      "leading terms of the spectral expansion; O(N) remainder omitted",
                                      "(1/nu)*N*ln(N) + (k/nu)*N*ln(ln(N))"});
        } catch (const std::exception &e) {
            report.notes["spectral_leading_terms"] = e.what();
        }
        try {
            report.entries.push_back({"crossing_time_asymptotic", EntryRole::Asymptotic,
                                      crossing_time_asymptotic(*sp, n),
                                      "tail asymptotic of t_N from the fitted prefactor gamma",
                                      "(1/nu)*(ln(gamma*N/nu) + k*ln(ln(N)) - k*ln(nu))"});
        } catch (const std::exception &e) {
            report.notes["crossing_time_asymptotic"] = e.what();
        }
    }

    report.entries.push_back({"hitting_sum_bound", EntryRole::Upper, hitting_sum_bound(w, alpha, n),
                              "sum of per-chain hitting times, each slowed by the scheduler factor N",
                              "N*sum_i W(X_i(0))"});
    report.entries.push_back({"hitting_sum_cap", EntryRole::Upper, hitting_sum_cap(max_w, n),
                              "hitting-sum bound with every W(X_i(0)) replaced by max_x W(x)", "T*N^2, T = max_x W(x)"});

    const double cap = options.uniform_cap.value_or(max_w);
    if (options.uniform_cap && *options.uniform_cap < max_w) {
        report.notes["uniform_hitting_bound"] = "supplied T is below max_x W(x); bound not applicable";
    } else {
        report.entries.push_back({"uniform_hitting_bound", EntryRole::Upper, uniform_hitting_bound(cap, n),
                                  options.uniform_cap ? "uniform bound with supplied T >= sup_x W(x)"
                                                      : "uniform bound with T = max_x W(x)",
                                  "T*N*ln(N) + 2*N*T + 1"});
    }
    report.quantities["uniform_T"] = cap;

    for (const auto &ref : options.references) {
        report.entries.push_back(ref);
    }

    double min_upper = std::numeric_limits<double>::infinity();
    for (const auto &e : report.entries) {
        if (e.role == EntryRole::Upper) {
            min_upper = std::min(min_upper, e.value);
        }
    }
    for (const auto &e : report.entries) {
        if ((e.role == EntryRole::Lower || e.role == EntryRole::Exact) &&
            e.value > min_upper * (1.0 + kConsistencySlack)) {
            report.consistent = false;
            report.notes["consistency"] = e.name + " = " + std::to_string(e.value) +
                                          " exceeds the smallest upper bound " + std::to_string(min_upper);
        }
    }
    return report;
}

} // namespace fluidhit
