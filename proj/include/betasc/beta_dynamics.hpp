#ifndef BETASC_BETA_DYNAMICS_HPP
#define BETASC_BETA_DYNAMICS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "step_density.hpp"

namespace betasc {

/// Default truncation for the Parry series: stop once beta^-N < 1e-14.
inline constexpr double kSeriesTolerance = 1e-14;

/// Orbit points this close to 0 (or to 1 from below) are taken to be exactly 0.
inline constexpr double kZeroSnap = 1e-13;

namespace detail {

inline void require_beta(double beta)
{
    if (!(beta > 1.0) || !std::isfinite(beta)) {
        throw ParameterError("beta must be a finite number > 1, got " + std::to_string(beta));
    }
}

/// beta*x mod 1 without argument checks.
inline double beta_step(double beta, double x) noexcept
{
    const double y = beta * x;
    return y - std::floor(y);
}

struct OrbitTrace {
    std::vector<double> points;  // T^n(1), n = 0..N
    bool terminated = false;     // an iterate snapped to 0
    double snapped = 0.0;        // distance of the snapped iterate from {0, 1}
    std::size_t snapped_index = 0;
};

inline OrbitTrace trace_orbit(double beta, double tol)
{
    require_beta(beta);
    if (!(tol > 0.0 && tol < 1.0)) {
        throw ParameterError("series tolerance must lie in (0,1)");
    }
    OrbitTrace tr;
    tr.points.push_back(1.0);
    double x = 1.0;
    double w = 1.0;
    for (std::size_t n = 1;; ++n) {
        x = beta_step(beta, x);
        w /= beta;
        const double gap = std::min(x, 1.0 - x);
        if (gap < kZeroSnap) {
            tr.terminated = true;
            tr.snapped = gap;
            tr.snapped_index = n;
            break;
        }
        tr.points.push_back(x);
        if (w < tol) {
            break;
        }
    }
    return tr;
}

} // namespace detail

/// T_beta(x) = beta*x mod 1, with values in [0,1). Integer beta*x maps to 0.
inline double beta_map(double beta, double x)
{
    detail::require_beta(beta);
    if (!(x >= 0.0 && x <= 1.0)) {
        throw DomainError("beta_map argument " + std::to_string(x) + " outside [0,1]");
    }
    return detail::beta_step(beta, x);
}

/// [1, T(1), T^2(1), ...] up to the first N with beta^-N < tol, or up to the
/// last nonzero iterate when the orbit hits 0.
inline std::vector<double> orbit_of_one(double beta, double tol = kSeriesTolerance)
{
    return detail::trace_orbit(beta, tol).points;
}

/// Truncated Parry series data for T_beta.
struct ParryData {
    double beta = 2.0;
    std::vector<double> orbit;    // T^n(1), orbit[0] = 1
    double normalizer = 1.0;      // sum T^n(1) / beta^n
    double first_moment = 0.5;    // sum T^n(1)^2 / (2 beta^n)
    double expected_value = 0.5;  // first_moment / normalizer
    double truncation_bound = 0.0;
    bool terminated = false;      // orbit reached 0, series is finite
};

inline ParryData parry_data(double beta, double tol = kSeriesTolerance)
{
    detail::OrbitTrace tr = detail::trace_orbit(beta, tol);
    ParryData d;
    d.beta = beta;
    d.terminated = tr.terminated;
    double w = 1.0;
    double s0 = 0.0;
    double s1 = 0.0;
    for (double x : tr.points) {
        s0 += w * x;
        s1 += 0.5 * w * x * x;
        w /= beta;
    }
    d.normalizer = s0;
    d.first_moment = s1;
    d.expected_value = s1 / s0;
    if (!tr.terminated) {
        // tail sum_{n>N} beta^-n with terms T^n(1) <= 1
        const double N = static_cast<double>(tr.points.size() - 1);
        d.truncation_bound = std::pow(beta, -N) / (beta - 1.0);
    } else if (tr.snapped > 0.0) {
        // tail if the snapped iterate was really at most `snapped` away from 0:
        // terms stay below snapped*beta^-n for J steps, then below the geometric tail
        const double n = static_cast<double>(tr.snapped_index);
        const double J = std::ceil(std::log(1.0 / tr.snapped) / std::log(beta));
        d.truncation_bound = tr.snapped * std::pow(beta, -n) * J + std::pow(beta, -(n + J - 1.0)) / (beta - 1.0);
    }
    d.orbit = std::move(tr.points);
    return d;
}

/// Normalized Parry density: sum beta^-n 1_[0, T^n(1)) on the sorted orbit points.
inline StepDensity parry_density(double beta, double tol = kSeriesTolerance)
{
    const std::vector<double> orbit = orbit_of_one(beta, tol);
    std::vector<double> weights(orbit.size());
    double w = 1.0;
    for (double& v : weights) {
        v = w;
        w /= beta;
    }
    StepDensity h = StepDensity::from_partition(orbit, [&](double, double right) {
        double s = 0.0;
        for (std::size_t n = 0; n < orbit.size(); ++n) {
            if (orbit[n] >= right) {
                s += weights[n];
            }
        }
        return s;
    });
    return normalize(h);
}

/// (1/N) sum_{n<N} T^n(x0): the Birkhoff average of the identity.
inline double birkhoff_average(double beta, double x0, std::uint64_t n_iters)
{
    detail::require_beta(beta);
    if (!(x0 >= 0.0 && x0 <= 1.0)) {
        throw DomainError("starting point outside [0,1]");
    }
    if (n_iters == 0) {
        throw ParameterError("Birkhoff average needs at least one iterate");
    }
    double x = x0;
    double s = 0.0;
    for (std::uint64_t n = 0; n < n_iters; ++n) {
        s += x;
        x = detail::beta_step(beta, x);
    }
    return s / static_cast<double>(n_iters);
}

} // namespace betasc

#endif // BETASC_BETA_DYNAMICS_HPP
