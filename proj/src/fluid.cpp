#include "fluidhit/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fluidhit {

namespace {

void check_alpha(const InitialDistribution &alpha, const SubGenerator &sub) {
    if (alpha.alpha.size() != sub.size()) {
        throw FluidError(FluidError::Kind::Domain, "initial distribution has " + std::to_string(alpha.alpha.size()) +
                                                       " entries for " + std::to_string(sub.size()) +
                                                       " transient states");
    }
}

constexpr int kMaxBisections = 200;

} // namespace

double fluid_m0(const InitialDistribution &alpha, const SubGenerator &sub, double t, double tol) {
    check_alpha(alpha, sub);
    const auto v = num::expm_action(sub.q, alpha.alpha, t, tol);
    const double survival = std::accumulate(v.begin(), v.end(), 0.0);
    return std::clamp(1.0 - survival, 0.0, 1.0);
}

Crossing crossing_time(num::UniformizedSurvival &survival, double epsilon, const CrossingOptions &options) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw FluidError(FluidError::Kind::Domain, "crossing level must lie in (0, 1)");
    }
    if (survival(0.0) <= epsilon) {
        return {0.0, true};
    }
    double lo = 0.0;
    double hi = 1.0;
    if (options.nu && *options.nu > 0.0 && std::isfinite(1.0 / *options.nu)) {
        hi = 1.0 / *options.nu;
    }
    while (survival(hi) > epsilon) {
        lo = hi;
        hi *= 2.0;
        if (hi > options.max_time) {
            throw FluidError(FluidError::Kind::BracketFailed,
                             "survival still above " + std::to_string(epsilon) + " at t = " +
                                 std::to_string(options.max_time));
        }
    }
    for (int it = 0; it < kMaxBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (survival(mid) > epsilon) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {hi, false};
}

Crossing crossing_time(const InitialDistribution &alpha, const SubGenerator &sub, double epsilon,
                       const CrossingOptions &options) {
    check_alpha(alpha, sub);
    num::UniformizedSurvival survival(sub.q, alpha.alpha, options.tol);
    return crossing_time(survival, epsilon, options);
}

FluidTrajectory fluid_trajectory(const InitialDistribution &alpha, const SubGenerator &sub,
                                 std::span<const double> time_grid, double tol) {
    check_alpha(alpha, sub);
    for (std::size_t i = 0; i < time_grid.size(); ++i) {
        if (!(time_grid[i] >= 0.0) || (i > 0 && time_grid[i] < time_grid[i - 1])) {
            throw FluidError(FluidError::Kind::Domain, "time grid must be nonnegative and nondecreasing");
        }
    }
    FluidTrajectory out;
    out.time_grid.assign(time_grid.begin(), time_grid.end());
    if (time_grid.empty()) {
        return out;
    }
    num::UniformizedSurvival survival(sub.q, alpha.alpha, tol);
    double previous = alpha.transient_mass();
    for (double t : time_grid) {
        // enforce monotonicity against last-bit rounding between grid points
        const double s = std::min(previous, std::max(0.0, survival(t)));
        previous = s;
        out.transient_mass.push_back(s);
        out.m0_values.push_back(1.0 - s);
    }
    return out;
}

} // namespace fluidhit
