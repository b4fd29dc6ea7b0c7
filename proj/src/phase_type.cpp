#include "fluidhit/phase_type.hpp"

#include "fluidhit/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fluidhit {

namespace {

constexpr std::size_t kLiftingMaxStates = 256;
constexpr int kMaxDoublings = 62;
constexpr double kGammaResidualLimit = 0.25;
constexpr double kOrderSlack = 1e-12;

void require_discrete(const PhaseType &pt) {
    if (pt.kind() != PhaseKind::Discrete) {
        throw PhaseTypeError(PhaseTypeError::Kind::WrongKind, "operation needs a discrete phase-type law");
    }
}

double row_vector_mass(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

PhaseType::PhaseType(InitialDistribution alpha, SubGenerator sub) : alpha_(std::move(alpha)), sub_(std::move(sub)) {
    if (alpha_.alpha.size() != sub_.size()) {
        throw PhaseTypeError(PhaseTypeError::Kind::Domain, "initial distribution does not match the sub-generator");
    }
}

PhaseType PhaseType::continuous(InitialDistribution alpha, SubGenerator sub) {
    return PhaseType(std::move(alpha), std::move(sub));
}

PhaseType PhaseType::discrete(InitialDistribution alpha, SubGenerator sub, std::uint64_t n) {
    PhaseType pt(std::move(alpha), std::move(sub));
    double max_exit = 0.0;
    for (std::size_t i = 0; i < pt.sub_.size(); ++i) {
        max_exit = std::max(max_exit, -pt.sub_.q.diagonal(i));
    }
    if (n == 0 || static_cast<double>(n) < max_exit) {
        throw PhaseTypeError(PhaseTypeError::Kind::ScaleTooSmall,
                             "scale N = " + std::to_string(n) + " is below max(-Q_ii) = " + std::to_string(max_exit));
    }
    pt.kind_ = PhaseKind::Discrete;
    pt.n_ = n;
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<num::Triplet> entries;
    entries.reserve(pt.sub_.q.nnz());
    for (std::size_t i = 0; i < pt.sub_.size(); ++i) {
        const auto cols = pt.sub_.q.row_cols(i);
        const auto vals = pt.sub_.q.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const double value = cols[k] == i ? std::max(0.0, 1.0 + vals[k] * inv) : vals[k] * inv;
            entries.push_back({i, cols[k], value});
        }
    }
    pt.step_ = num::SparseMatrix::from_triplets(pt.sub_.size(), pt.sub_.size(), std::move(entries));
    return pt;
}

double continuous_survival(const PhaseType &pt, double t, double tol) {
    if (!(t >= 0.0)) {
        throw PhaseTypeError(PhaseTypeError::Kind::Domain, "survival needs t >= 0");
    }
    const auto v = num::expm_action(pt.sub().q, pt.alpha().alpha, t, tol);
    return std::clamp(row_vector_mass(v), 0.0, 1.0);
}

DiscreteSurvivalSequence::DiscreteSurvivalSequence(const PhaseType &pt)
    : m_(&pt.step_matrix()), v_(pt.alpha().alpha), next_(v_.size(), 0.0), marked_(v_.size(), 0) {
    require_discrete(pt);
    for (std::size_t i = 0; i < v_.size(); ++i) {
        if (v_[i] != 0.0) {
            active_.push_back(i);
        }
    }
    dense_ = active_.size() * 8 > v_.size();
    refresh_mass();
}

void DiscreteSurvivalSequence::refresh_mass() {
    if (dense_) {
        mass_ = row_vector_mass(v_);
        return;
    }
    mass_ = 0.0;
    for (std::size_t i : active_) {
        mass_ += v_[i];
    }
}

void DiscreteSurvivalSequence::advance() {
    ++k_;
    if (dense_) {
        m_->left_multiply_into(v_, next_);
        v_.swap(next_);
        refresh_mass();
        return;
    }
    next_active_.clear();
    for (std::size_t i : active_) {
        const double vi = v_[i];
        const auto cols = m_->row_cols(i);
        const auto vals = m_->row_values(i);
        for (std::size_t e = 0; e < cols.size(); ++e) {
            const std::size_t j = cols[e];
            if (!marked_[j]) {
                marked_[j] = 1;
                next_active_.push_back(j);
            }
            next_[j] += vi * vals[e];
        }
    }
    for (std::size_t i : active_) {
        v_[i] = 0.0;
    }
    for (std::size_t j : next_active_) {
        marked_[j] = 0;
    }
    v_.swap(next_);
    active_.swap(next_active_);
    if (active_.size() * 8 > v_.size()) {
        dense_ = true;
        std::fill(next_.begin(), next_.end(), 0.0);
    }
    refresh_mass();
}

double discrete_survival(const PhaseType &pt, std::uint64_t k) {
    DiscreteSurvivalSequence seq(pt);
    while (seq.index() < k) {
        seq.advance();
    }
    return std::clamp(seq.value(), 0.0, 1.0);
}

std::vector<double> discrete_survival_curve(const PhaseType &pt, std::uint64_t kmax) {
    DiscreteSurvivalSequence seq(pt);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(kmax) + 1);
    out.push_back(std::clamp(seq.value(), 0.0, 1.0));
    while (seq.index() < kmax) {
        seq.advance();
        out.push_back(std::clamp(seq.value(), 0.0, 1.0));
    }
    return out;
}

namespace {

std::vector<double> row_times(std::span<const double> v, const num::DenseMatrix &a) {
    std::vector<double> out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        if (v[i] == 0.0) {
            continue;
        }
        const auto row = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out[j] += v[i] * row[j];
        }
    }
    return out;
}

std::uint64_t threshold_by_lifting(const PhaseType &pt, double level) {
    std::vector<num::DenseMatrix> powers{pt.step_matrix().to_dense()};
    const auto &alpha = pt.alpha().alpha;
    // find the first J with s(2^J) <= level
    int j = 0;
    while (row_vector_mass(row_times(alpha, powers.back())) > level) {
        if (++j > kMaxDoublings) {
            throw PhaseTypeError(PhaseTypeError::Kind::Domain, "survival does not fall below 2/N");
        }
        powers.push_back(num::multiply(powers.back(), powers.back()));
    }
    if (j == 0) {
        return 1;
    }
    // largest k with s(k) > level, starting from k = 2^{J-1}
    std::vector<double> v = row_times(alpha, powers[static_cast<std::size_t>(j - 1)]);
    std::uint64_t k = std::uint64_t{1} << (j - 1);
    for (int b = j - 2; b >= 0; --b) {
        auto w = row_times(v, powers[static_cast<std::size_t>(b)]);
        if (row_vector_mass(w) > level) {
            v = std::move(w);
            k += std::uint64_t{1} << b;
        }
    }
    return k + 1;
}

} // namespace

std::uint64_t x_threshold(const PhaseType &pt) {
    require_discrete(pt);
    const double level = 2.0 / static_cast<double>(pt.scale());
    DiscreteSurvivalSequence seq(pt);
    if (seq.value() <= level) {
        return 0;
    }
    if (pt.sub().size() <= kLiftingMaxStates) {
        return threshold_by_lifting(pt, level);
    }
    while (seq.value() > level) {
        seq.advance();
    }
    return seq.index();
}

double fit_gamma(const SubGenerator &sub, const InitialDistribution &alpha, double nu, std::size_t k) {
    if (!(nu > 0.0)) {
        throw PhaseTypeError(PhaseTypeError::Kind::Domain, "gamma fit needs nu > 0");
    }
    num::UniformizedSurvival survival(sub.q, alpha.alpha);
    CrossingOptions opts;
    opts.nu = nu;
    const Crossing upper = crossing_time(survival, 1e-4, opts);
    if (upper.already_below) {
        throw PhaseTypeError(PhaseTypeError::Kind::DegenerateTail, "survival starts below 1e-4; no tail to fit");
    }
    const Crossing lower = crossing_time(survival, 1e-8, opts);
    const double t_a = upper.time;
    const double t_b = lower.time;
    constexpr int kPoints = 5;
    std::vector<double> y(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        const double t = t_a * std::pow(t_b / t_a, static_cast<double>(i) / (kPoints - 1));
        const double s = survival(t);
        if (!(s > 0.0)) {
            throw PhaseTypeError(PhaseTypeError::Kind::DegenerateTail, "survival vanished inside the fit window");
        }
        y[static_cast<std::size_t>(i)] = std::log(s) + nu * t - static_cast<double>(k) * std::log(t);
    }
    const double c = std::accumulate(y.begin(), y.end(), 0.0) / kPoints;
    double residual = 0.0;
    for (double yi : y) {
        residual = std::max(residual, std::abs(yi - c));
    }
    if (residual > kGammaResidualLimit) {
        throw PhaseTypeError(PhaseTypeError::Kind::DegenerateTail,
                             "tail is not of the form t^k exp(-nu t) (log residual " + std::to_string(residual) + ")");
    }
    return nu * std::exp(c);
}

SpectralParams spectral_params(const SubGenerator &sub, const InitialDistribution &alpha,
                               const SpectralOptions &options) {
    SpectralParams sp;
    sp.cluster_tol = options.cluster_tol.value_or(1e-7 * std::max(sub.q.norm_inf(), 1e-300));
    const bool need_spectrum = !options.nu_override || !options.k_override;
    double dominant = 0.0;
    std::size_t cluster = 1;
    if (need_spectrum) {
        const auto values = num::block_eigenvalues(sub.q);
        dominant = -std::numeric_limits<double>::infinity();
        for (const auto &v : values) {
            dominant = std::max(dominant, v.real());
        }
        cluster = 0;
        for (const auto &v : values) {
            if (std::abs(v - std::complex<double>(dominant, 0.0)) <= sp.cluster_tol) {
                ++cluster;
            }
        }
    }
    if (options.nu_override) {
        if (!(*options.nu_override > 0.0)) {
            throw PhaseTypeError(PhaseTypeError::Kind::Domain, "nu override must be positive");
        }
        sp.nu = *options.nu_override;
        sp.nu_source = ParamSource::UserSupplied;
    } else {
        sp.nu = -dominant;
    }
    if (options.k_override) {
        sp.k = *options.k_override;
        sp.k_source = ParamSource::UserSupplied;
    } else {
        sp.k = cluster - 1;
    }
    if (options.estimate_gamma) {
        try {
            sp.gamma = fit_gamma(sub, alpha, sp.nu, sp.k);
        } catch (const PhaseTypeError &e) {
            sp.gamma_note = e.what();
        } catch (const FluidError &e) {
            sp.gamma_note = e.what();
        }
    }
    return sp;
}

bool stochastic_order_check(double qii, std::uint64_t n, std::span<const double> t_grid) {
    if (!(qii < 0.0) || static_cast<double>(n) < -qii) {
        throw PhaseTypeError(PhaseTypeError::Kind::Domain, "stochastic order check needs qii < 0 and N >= -qii");
    }
    const double nd = static_cast<double>(n);
    const double stay = 1.0 + qii / nd;
    for (double t : t_grid) {
        if (!(t >= 0.0)) {
            throw PhaseTypeError(PhaseTypeError::Kind::Domain, "grid points must be nonnegative");
        }
        const double steps = std::max(std::ceil(t * nd) - 1.0, 0.0);
        const double lhs = steps == 0.0 ? 1.0 : std::pow(stay, steps);
        const double rhs = std::min(1.0, std::exp(qii * (t - 1.0 / nd)));
        if (lhs > rhs * (1.0 + kOrderSlack)) {
            return false;
        }
    }
    return true;
}

DiscretePhaseSampler::DiscretePhaseSampler(const PhaseType &pt) {
    require_discrete(pt);
    const auto &sub = pt.sub();
    const std::size_t s = sub.size();
    const double nd = static_cast<double>(pt.scale());
    start_cdf_.resize(s + 1);
    double acc = pt.alpha().mass0;
    start_cdf_[0] = acc;
    for (std::size_t i = 0; i < s; ++i) {
        acc += pt.alpha().alpha[i];
        start_cdf_[i + 1] = acc;
    }
    for (double &c : start_cdf_) {
        c /= acc;
    }
    leave_prob_.resize(s);
    row_ptr_.assign(s + 1, 0);
    for (std::size_t i = 0; i < s; ++i) {
        const double rate = -sub.q.diagonal(i);
        leave_prob_[i] = std::min(1.0, rate / nd);
        double cum = 0.0;
        if (sub.exit[i] > 0.0) {
            cum += sub.exit[i];
            targets_.push_back(0);
            cumulative_.push_back(cum);
        }
        const auto cols = sub.q.row_cols(i);
        const auto vals = sub.q.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] != i && vals[k] > 0.0) {
                cum += vals[k];
                targets_.push_back(cols[k] + 1);
                cumulative_.push_back(cum);
            }
        }
        for (std::size_t k = row_ptr_[i]; k < cumulative_.size(); ++k) {
            cumulative_[k] /= cum;
        }
        row_ptr_[i + 1] = cumulative_.size();
    }
}

std::size_t DiscretePhaseSampler::pick(std::span<const double> cumulative, double u) const {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, cumulative.size() - 1);
}

std::uint64_t DiscretePhaseSampler::operator()(Rng &rng) const {
    std::size_t state = pick(start_cdf_, rng.uniform());
    std::uint64_t steps = 0;
    while (state != 0) {
        const std::size_t i = state - 1;
        steps += rng.geometric(leave_prob_[i]);
        const std::span<const double> row(cumulative_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
        state = targets_[row_ptr_[i] + pick(row, rng.uniform())];
    }
    return steps;
}

std::uint64_t sample_absorption_step(const PhaseType &pt, Rng &rng) { return DiscretePhaseSampler(pt)(rng); }

} // namespace fluidhit
