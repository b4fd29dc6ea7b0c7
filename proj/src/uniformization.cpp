#include "fluidhit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fluidhit::num {

namespace {

constexpr double kRateMargin = 1.05;
constexpr double kLogSpaceThreshold = 700.0;
constexpr double kAbsoluteFloor = 1e-300;

/// Poisson(lambda) weights w_0, w_1, ... generated by recurrence; in log space
/// when exp(-lambda) would underflow.
class PoissonStream {
  public:
    explicit PoissonStream(double lambda) : lambda_(lambda), log_space_(lambda > kLogSpaceThreshold) {
        if (log_space_) {
            log_weight_ = -lambda;
            log_lambda_ = std::log(lambda);
            weight_ = std::exp(log_weight_);
        } else {
            weight_ = std::exp(-lambda);
        }
    }

    double weight() const noexcept { return weight_; }
    std::size_t index() const noexcept { return n_; }

    void advance() {
        ++n_;
        if (log_space_) {
            log_weight_ += log_lambda_ - std::log(static_cast<double>(n_));
            weight_ = std::exp(log_weight_);
        } else {
            weight_ *= lambda_ / static_cast<double>(n_);
        }
    }

    /// Upper bound on sum_{m > n} w_m; only meaningful once the ratio
    /// lambda / (n + 2) is below one.
    bool tail_bound_available() const noexcept { return static_cast<double>(n_) + 2.0 > lambda_; }

    double tail_bound() const noexcept {
        const double next = weight_ * lambda_ / (static_cast<double>(n_) + 1.0);
        const double ratio = lambda_ / (static_cast<double>(n_) + 2.0);
        return next / (1.0 - ratio);
    }

    std::size_t term_cap() const noexcept {
        return static_cast<std::size_t>(lambda_ + 60.0 * std::sqrt(lambda_) + 400.0);
    }

  private:
    double lambda_;
    bool log_space_;
    double weight_ = 0.0;
    double log_weight_ = 0.0;
    double log_lambda_ = 0.0;
    std::size_t n_ = 0;
};

void check_tolerance(double tol) {
    if (!(tol >= 1e-15)) {
        throw NumericsError(NumericsError::Kind::NonConvergent,
                            "uniformization tolerance below 1e-15 is not attainable in double precision");
    }
}

void check_vector(const SparseMatrix &q, std::span<const double> v) {
    if (v.size() != q.rows()) {
        throw NumericsError(NumericsError::Kind::Shape, "vector length " + std::to_string(v.size()) +
                                                            " does not match generator size " + std::to_string(q.rows()));
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0) || !std::isfinite(v[i])) {
            throw NumericsError(NumericsError::Kind::Shape,
                                "uniformization needs a nonnegative vector; entry " + std::to_string(i) + " is " +
                                    std::to_string(v[i]));
        }
    }
}

} // namespace

Uniformized uniformize(const SparseMatrix &q) {
    if (q.rows() != q.cols()) {
        throw NumericsError(NumericsError::Kind::Shape, "sub-generator must be square");
    }
    double max_exit = 0.0;
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const auto cols = q.row_cols(i);
        const auto vals = q.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i) {
                if (vals[k] > 0.0) {
                    throw NumericsError(NumericsError::Kind::Shape,
                                        "positive diagonal entry in sub-generator row " + std::to_string(i));
                }
                max_exit = std::max(max_exit, -vals[k]);
            } else if (vals[k] < 0.0) {
                throw NumericsError(NumericsError::Kind::Shape, "negative off-diagonal entry in sub-generator row " +
                                                                    std::to_string(i));
            }
        }
    }
    Uniformized out;
    out.rate = max_exit > 0.0 ? kRateMargin * max_exit : 1.0;
    std::vector<Triplet> entries;
    entries.reserve(q.nnz() + q.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        entries.push_back({i, i, 1.0});
        const auto cols = q.row_cols(i);
        const auto vals = q.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            entries.push_back({i, cols[k], vals[k] / out.rate});
        }
    }
    out.transition = SparseMatrix::from_triplets(q.rows(), q.cols(), std::move(entries));
    return out;
}

std::vector<double> expm_action(const SparseMatrix &q, std::span<const double> v, double t, double tol) {
    check_tolerance(tol);
    check_vector(q, v);
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw NumericsError(NumericsError::Kind::Shape, "time must be finite and nonnegative");
    }
    std::vector<double> result(v.begin(), v.end());
    if (t == 0.0) {
        return result;
    }
    const Uniformized uni = uniformize(q);
    PoissonStream poisson(uni.rate * t);
    std::vector<double> current(v.begin(), v.end());
    std::vector<double> next(v.size());
    std::fill(result.begin(), result.end(), 0.0);
    double accumulated = 0.0;
    for (;;) {
        const double w = poisson.weight();
        const double mass = std::accumulate(current.begin(), current.end(), 0.0);
        if (w > 0.0) {
            for (std::size_t i = 0; i < current.size(); ++i) {
                result[i] += w * current[i];
            }
            accumulated += w * mass;
        }
        if (mass == 0.0) {
            break;
        }
        if (poisson.tail_bound_available()) {
            const double remaining = poisson.tail_bound() * mass;
            if (remaining <= tol * accumulated || remaining < kAbsoluteFloor) {
                break;
            }
        }
        if (poisson.index() > poisson.term_cap()) {
            throw NumericsError(NumericsError::Kind::NonConvergent, "uniformization series did not reach tolerance");
        }
        uni.transition.left_multiply_into(current, next);
        current.swap(next);
        poisson.advance();
    }
    return result;
}

UniformizedSurvival::UniformizedSurvival(const SparseMatrix &q, std::vector<double> v, double tol)
    : uni_(uniformize(q)), current_(std::move(v)), scratch_(current_.size()), tol_(tol) {
    check_tolerance(tol);
    check_vector(q, current_);
}

double UniformizedSurvival::mass(std::size_t n) {
    while (masses_.size() <= n) {
        masses_.push_back(std::accumulate(current_.begin(), current_.end(), 0.0));
        uni_.transition.left_multiply_into(current_, scratch_);
        current_.swap(scratch_);
    }
    return masses_[n];
}

double UniformizedSurvival::operator()(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw NumericsError(NumericsError::Kind::Shape, "time must be finite and nonnegative");
    }
    if (t == 0.0) {
        return mass(0);
    }
    PoissonStream poisson(uni_.rate * t);
    double accumulated = 0.0;
    for (;;) {
        const double m = mass(poisson.index());
        accumulated += poisson.weight() * m;
        if (m == 0.0) {
            break;
        }
        if (poisson.tail_bound_available()) {
            const double remaining = poisson.tail_bound() * m;
            if (remaining <= tol_ * accumulated || remaining < kAbsoluteFloor) {
                break;
            }
        }
        if (poisson.index() > poisson.term_cap()) {
            throw NumericsError(NumericsError::Kind::NonConvergent, "uniformization series did not reach tolerance");
        }
        poisson.advance();
    }
    return accumulated;
}

} // namespace fluidhit::num
