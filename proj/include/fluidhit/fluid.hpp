#pragma once

#include "fluidhit/chain_model.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidhit {

class FluidError : public std::runtime_error {
  public:
    enum class Kind { Domain, BracketFailed };

    FluidError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

/// m0(t) = 1 - alpha exp(Qt) 1, the absorbed fraction of the fluid limit.
double fluid_m0(const InitialDistribution &alpha, const SubGenerator &sub, double t,
                double tol = num::kDefaultExpmTolerance);

struct Crossing {
    double time = 0.0;
    /// Survival was already <= epsilon at t = 0; time is then 0.
    bool already_below = false;
};

struct CrossingOptions {
    /// Decay-rate estimate; the bracket search starts at 1/nu when given.
    std::optional<double> nu;
    double tol = num::kDefaultExpmTolerance;
    double max_time = 1e6;
};

/// First t with alpha exp(Qt) 1 <= epsilon (doubling bracket, then bisection).
Crossing crossing_time(const InitialDistribution &alpha, const SubGenerator &sub, double epsilon,
                       const CrossingOptions &options = {});

/// Same search on an existing survival evaluator, for repeated crossings of one curve.
Crossing crossing_time(num::UniformizedSurvival &survival, double epsilon, const CrossingOptions &options = {});

struct FluidTrajectory {
    std::vector<double> time_grid;
    std::vector<double> m0_values;
    std::vector<double> transient_mass;
};

/// Grid must be nondecreasing and nonnegative.
FluidTrajectory fluid_trajectory(const InitialDistribution &alpha, const SubGenerator &sub,
                                 std::span<const double> time_grid, double tol = num::kDefaultExpmTolerance);

} // namespace fluidhit
