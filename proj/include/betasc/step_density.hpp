#ifndef BETASC_STEP_DENSITY_HPP
#define BETASC_STEP_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace betasc {

/// Breakpoints closer than this are merged; adjacent heights closer than this are fused.
inline constexpr double kMergeTolerance = 1e-13;

/// Right-continuous step function on [0,1].
///
/// `jumps` holds the N >= 2 breakpoints, starting at exactly 0 and ending at
/// exactly 1, strictly increasing. `heights` holds the N-1 values; heights[i]
/// is the value on [jumps[i], jumps[i+1]), and the last step also covers x = 1.
/// Heights may be signed; see StepDensity for the nonnegative case.
class StepFunction {
public:
    StepFunction(std::vector<double> jumps, std::vector<double> heights)
        : jumps_(std::move(jumps)), heights_(std::move(heights))
    {
        if (jumps_.size() < 2) {
            throw ParameterError("step function needs at least two breakpoints");
        }
        if (heights_.size() + 1 != jumps_.size()) {
            throw ParameterError("step function needs exactly one height per step");
        }
        if (jumps_.front() != 0.0 || jumps_.back() != 1.0) {
            throw ParameterError("step function breakpoints must start at 0 and end at 1");
        }
        for (std::size_t i = 0; i + 1 < jumps_.size(); ++i) {
            if (!(jumps_[i] < jumps_[i + 1])) {
                throw ParameterError("step function breakpoints must be strictly increasing");
            }
        }
        for (double h : heights_) {
            if (!std::isfinite(h)) {
                throw ParameterError("step function heights must be finite");
            }
        }
    }

    /// The constant function `value` on a single step.
    static StepFunction constant(double value) { return StepFunction({0.0, 1.0}, {value}); }

    std::span<const double> jumps() const noexcept { return jumps_; }
    std::span<const double> heights() const noexcept { return heights_; }

    /// Number of breakpoints N, endpoints included.
    std::size_t jump_count() const noexcept { return jumps_.size(); }
    std::size_t step_count() const noexcept { return heights_.size(); }

    /// Index i of the step containing x, i.e. jumps[i] <= x < jumps[i+1] (last step at x = 1).
    std::size_t step_index(double x) const
    {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw DomainError("evaluation point " + std::to_string(x) + " outside [0,1]");
        }
        auto it = std::upper_bound(jumps_.begin(), jumps_.end(), x);
        auto i = static_cast<std::size_t>(it - jumps_.begin()) - 1;
        return std::min(i, heights_.size() - 1);
    }

    double operator()(double x) const { return heights_[step_index(x)]; }

    friend bool operator==(const StepFunction&, const StepFunction&) = default;

protected:
    struct trusted_t {};
    StepFunction(trusted_t, std::vector<double> jumps, std::vector<double> heights) noexcept
        : jumps_(std::move(jumps)), heights_(std::move(heights))
    {
    }

    std::vector<double> jumps_;
    std::vector<double> heights_;
};

/// Piecewise-constant probability density on [0,1].
///
/// Adds to StepFunction: heights are nonnegative and adjacent breakpoints are
/// more than kMergeTolerance apart. Normalization is not enforced here; use
/// normalize() for that.
class StepDensity : public StepFunction {
public:
    StepDensity(std::vector<double> jumps, std::vector<double> heights)
        : StepFunction(std::move(jumps), std::move(heights))
    {
        check_density();
    }

    explicit StepDensity(StepFunction f) : StepFunction(std::move(f)) { check_density(); }

    static StepDensity uniform() { return StepDensity({0.0, 1.0}, {1.0}); }

    /// Builds a density from sorted candidate breakpoints, merging points closer
    /// than kMergeTolerance and fusing neighbouring steps whose heights agree to
    /// within kMergeTolerance. `height_at(a, b)` supplies the value on [a, b).
    template <typename HeightFn>
    static StepDensity from_partition(std::vector<double> points, HeightFn&& height_at);

private:
    friend StepDensity normalize(const StepDensity& f);

    StepDensity(trusted_t t, std::vector<double> jumps, std::vector<double> heights) noexcept
        : StepFunction(t, std::move(jumps), std::move(heights))
    {
    }

    void check_density() const
    {
        for (double h : heights_) {
            if (h < 0.0) {
                throw ParameterError("density heights must be nonnegative");
            }
        }
        for (std::size_t i = 0; i + 1 < jumps_.size(); ++i) {
            if (jumps_[i + 1] - jumps_[i] <= kMergeTolerance) {
                throw ParameterError("density breakpoints closer than the merge tolerance");
            }
        }
    }
};

namespace detail {

/// Sorts `points`, clamps to [0,1], forces 0 and 1 in, and drops any point within
/// kMergeTolerance of the last kept one. The endpoint 1 always survives.
inline std::vector<double> merge_points(std::vector<double> points)
{
    points.push_back(0.0);
    points.push_back(1.0);
    for (double& p : points) {
        p = std::clamp(p, 0.0, 1.0);
    }
    std::sort(points.begin(), points.end());
    std::vector<double> out;
    out.reserve(points.size());
    out.push_back(0.0);
    for (double p : points) {
        if (p - out.back() > kMergeTolerance) {
            out.push_back(p);
        }
    }
    if (out.back() != 1.0) {
        if (out.size() > 1 && 1.0 - out.back() <= kMergeTolerance) {
            out.back() = 1.0;
        } else {
            out.push_back(1.0);
        }
    }
    return out;
}

/// Union of two breakpoint sets, exact duplicates removed.
inline std::vector<double> union_points(std::span<const double> a, std::span<const double> b)
{
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline double inner_variation(std::span<const double> heights)
{
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < heights.size(); ++i) {
        v += std::abs(heights[i + 1] - heights[i]);
    }
    return v;
}

} // namespace detail

template <typename HeightFn>
StepDensity StepDensity::from_partition(std::vector<double> points, HeightFn&& height_at)
{
    std::vector<double> pts = detail::merge_points(std::move(points));
    std::vector<double> jumps;
    std::vector<double> heights;
    jumps.reserve(pts.size());
    heights.reserve(pts.size());
    jumps.push_back(0.0);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double h = height_at(pts[i], pts[i + 1]);
        if (h < 0.0) {
            // only rounding noise can produce this
            h = 0.0;
        }
        if (!heights.empty() && std::abs(h - heights.back()) <= kMergeTolerance) {
            // fuse, keeping mass
            double left = jumps.back() - jumps[jumps.size() - 2];
            double right = pts[i + 1] - pts[i];
            heights.back() = (heights.back() * left + h * right) / (left + right);
            jumps.back() = pts[i + 1];
        } else {
            heights.push_back(h);
            jumps.push_back(pts[i + 1]);
        }
    }
    return StepDensity(trusted_t{}, std::move(jumps), std::move(heights));
}

/// Value at x, right-continuous, with f(1) taken from the last step.
inline double evaluate(const StepFunction& f, double x) { return f(x); }

/// Exact integral: sum of height times step width.
inline double integral(const StepFunction& f)
{
    auto x = f.jumps();
    auto y = f.heights();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += y[i] * (x[i + 1] - x[i]);
    }
    return s;
}

/// First moment: sum of (y_i / 2)(x_{i+1}^2 - x_i^2). Not rescaled by the integral.
inline double expectation(const StepFunction& f)
{
    auto x = f.jumps();
    auto y = f.heights();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += 0.5 * y[i] * (x[i + 1] * x[i + 1] - x[i] * x[i]);
    }
    return s;
}

/// Sum of absolute height differences across the interior breakpoints.
/// The boundary values are not counted.
inline double total_variation(const StepFunction& f) { return detail::inner_variation(f.heights()); }

/// Divides every height by the integral. A density whose integral is already
/// 1 to within a few ulps is returned unchanged, so normalize is idempotent.
inline StepDensity normalize(const StepDensity& f)
{
    const double mass = integral(f);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw DegenerateDensityError("cannot normalize a density with integral " + std::to_string(mass));
    }
    if (std::abs(mass - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
        return f;
    }
    std::vector<double> heights(f.heights().begin(), f.heights().end());
    for (double& h : heights) {
        h /= mass;
    }
    return StepDensity(StepDensity::trusted_t{}, std::vector<double>(f.jumps().begin(), f.jumps().end()),
                       std::move(heights));
}

/// a*f + b*g on the union of both partitions.
inline StepFunction linear_combination(double a, const StepFunction& f, double b, const StepFunction& g)
{
    std::vector<double> jumps = detail::union_points(f.jumps(), g.jumps());
    std::vector<double> heights(jumps.size() - 1);
    std::size_t i = 0;
    std::size_t j = 0;
    auto fh = f.heights();
    auto gh = g.heights();
    auto fx = f.jumps();
    auto gx = g.jumps();
    for (std::size_t k = 0; k + 1 < jumps.size(); ++k) {
        // advance to the steps containing [jumps[k], jumps[k+1])
        while (fx[i + 1] <= jumps[k]) {
            ++i;
        }
        while (gx[j + 1] <= jumps[k]) {
            ++j;
        }
        heights[k] = a * fh[i] + b * gh[j];
    }
    return StepFunction(std::move(jumps), std::move(heights));
}

/// The signed step function f - g on the merged partition.
inline StepFunction difference(const StepFunction& f, const StepFunction& g)
{
    return linear_combination(1.0, f, -1.0, g);
}

/// Integral of |f - g|, exact on the merged partition.
inline double l1_distance(const StepFunction& f, const StepFunction& g)
{
    StepFunction d = difference(f, g);
    auto x = d.jumps();
    auto y = d.heights();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += std::abs(y[i]) * (x[i + 1] - x[i]);
    }
    return s;
}

/// total_variation of f - g on the merged partition.
inline double variation_distance(const StepFunction& f, const StepFunction& g)
{
    return total_variation(difference(f, g));
}

/// Random normalized density with `inner_jumps` interior breakpoints.
///
/// Breakpoints and raw heights are i.i.d. uniform on (0,1); heights are then
/// divided by their weighted sum so the integral is one. Draws that land within
/// the merge tolerance of an endpoint or of another breakpoint are redrawn.
template <typename Engine>
StepDensity random_density(int inner_jumps, Engine& rng)
{
    if (inner_jumps < 1) {
        throw ParameterError("random_density needs at least one inner jump");
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto open_unit = [&] {
        double v = unif(rng);
        while (v == 0.0) {
            v = unif(rng);
        }
        return v;
    };

    const auto m = static_cast<std::size_t>(inner_jumps);
    std::vector<double> inner(m);
    for (double& v : inner) {
        v = open_unit();
    }
    for (;;) {
        std::sort(inner.begin(), inner.end());
        bool clean = true;
        for (std::size_t i = 0; i < m; ++i) {
            double prev = i == 0 ? 0.0 : inner[i - 1];
            if (inner[i] - prev <= kMergeTolerance || (i + 1 == m && 1.0 - inner[i] <= kMergeTolerance)) {
                inner[i] = open_unit();
                clean = false;
            }
        }
        if (clean) {
            break;
        }
    }

    std::vector<double> jumps;
    jumps.reserve(m + 2);
    jumps.push_back(0.0);
    jumps.insert(jumps.end(), inner.begin(), inner.end());
    jumps.push_back(1.0);

    std::vector<double> raw(m + 1);
    double weighted = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = open_unit();
        weighted += raw[i] * (jumps[i + 1] - jumps[i]);
    }
    for (double& h : raw) {
        h /= weighted;
    }
    return StepDensity(std::move(jumps), std::move(raw));
}

inline StepDensity random_density(int inner_jumps, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return random_density(inner_jumps, rng);
}

} // namespace betasc

#endif // BETASC_STEP_DENSITY_HPP
