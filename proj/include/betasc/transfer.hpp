#ifndef BETASC_TRANSFER_HPP
#define BETASC_TRANSFER_HPP

#include <cmath>
#include <cstddef>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "beta_dynamics.hpp"
#include "errors.hpp"
#include "psi_analysis.hpp"
#include "step_density.hpp"

namespace betasc {

/// Expectations at or below this make the slope rule meaningless.
inline constexpr double kMinExpectation = 1e-6;

struct PushforwardRecord {
    double beta_used = 2.0;
    std::size_t input_jump_count = 0;
    std::size_t output_jump_count = 0;
    double integral_drift = 0.0;  // |I(out) - I(in)| before normalization
};

struct PushforwardResult {
    StepDensity density;
    PushforwardRecord record;
};

/// Transfer operator of T_beta applied to a step density.
///
/// The image is again a step function whose breakpoints are among
/// {T_beta(x_i)} together with 0 and 1 (1 in the input maps to the branch
/// switch beta - floor(beta)). Each output height is evaluated exactly at the
/// midpoint of its step:
///   P f(x) = (1/beta) sum_k f((x + k)/beta),
/// with k = 0..floor(beta) left of beta - floor(beta) and k = 0..floor(beta)-1 right of it.
inline PushforwardResult pushforward(double beta, const StepDensity& f)
{
    detail::require_beta(beta);
    const double whole = std::floor(beta);
    const double frac = beta - whole;
    const auto branches = static_cast<int>(whole);

    std::vector<double> points;
    points.reserve(f.jump_count() + 2);
    for (double x : f.jumps()) {
        points.push_back(detail::beta_step(beta, x));
    }

    StepDensity out = StepDensity::from_partition(std::move(points), [&](double a, double b) {
        const double mid = 0.5 * (a + b);
        const int n = mid < frac ? branches + 1 : branches;
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            s += f(std::min((mid + k) / beta, 1.0));
        }
        return s / beta;
    });

    PushforwardRecord rec;
    rec.beta_used = beta;
    rec.input_jump_count = f.jump_count();
    rec.output_jump_count = out.jump_count();
    rec.integral_drift = std::abs(integral(out) - integral(f));
    return {std::move(out), rec};
}

/// Slope 2 + eps*F(1/E_f - 2) that the self-consistent operator applies to f.
inline double slope_of(const SelfConsistency& sc, const StepDensity& f, double e_min = kMinExpectation)
{
    const double e = expectation(f);
    if (!(e > e_min)) {
        throw DegenerateDensityError("density expectation " + std::to_string(e) + " at or below " +
                                     std::to_string(e_min));
    }
    const double beta = sc.slope(e);
    if (!(beta > 1.0) || !std::isfinite(beta)) {
        throw SlopeRangeError("computed slope " + std::to_string(beta) + " is not > 1");
    }
    return beta;
}

/// One step of the self-consistent operator: push f forward under its own
/// slope, then renormalize by the numerical integral.
inline PushforwardResult self_consistent_step(const SelfConsistency& sc, const StepDensity& f,
                                              double e_min = kMinExpectation)
{
    PushforwardResult r = pushforward(slope_of(sc, f, e_min), f);
    r.density = normalize(r.density);
    return r;
}

struct IterateResult {
    StepDensity final_density;
    std::vector<PushforwardRecord> trail;
    std::exception_ptr error;  // set when a step failed; final_density is the last good one

    bool ok() const noexcept { return !error; }

    void rethrow_if_failed() const
    {
        if (error) {
            std::rethrow_exception(error);
        }
    }
};

/// Applies self_consistent_step `steps` times. `observe(t, f_t, record_t)` is
/// called after each step t = 1..steps.
template <typename Observer>
IterateResult iterate(const SelfConsistency& sc, StepDensity f0, int steps, Observer&& observe)
{
    if (steps < 0) {
        throw ParameterError("step count must be >= 0");
    }
    IterateResult res{std::move(f0), {}, nullptr};
    res.trail.reserve(static_cast<std::size_t>(steps));
    for (int t = 1; t <= steps; ++t) {
        try {
            PushforwardResult r = self_consistent_step(sc, res.final_density);
            res.final_density = std::move(r.density);
            res.trail.push_back(r.record);
        } catch (const Error&) {
            res.error = std::current_exception();
            break;
        }
        observe(t, res.final_density, res.trail.back());
    }
    return res;
}

inline IterateResult iterate(const SelfConsistency& sc, StepDensity f0, int steps)
{
    return iterate(sc, std::move(f0), steps, [](int, const StepDensity&, const PushforwardRecord&) {});
}

} // namespace betasc

#endif // BETASC_TRANSFER_HPP
