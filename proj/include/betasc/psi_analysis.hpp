#ifndef BETASC_PSI_ANALYSIS_HPP
#define BETASC_PSI_ANALYSIS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "beta_dynamics.hpp"
#include "errors.hpp"
#include "parallel.hpp"

namespace betasc {

/// The coupling function F, with F(0) = 0: either F(x) = x or F(x) = x^(2k).
class CouplingFunction {
public:
    enum class Kind { identity, even_power };

    static CouplingFunction identity() { return CouplingFunction(Kind::identity, 1); }

    static CouplingFunction even_power(int k)
    {
        if (k < 1) {
            throw ParameterError("even power index k must be >= 1");
        }
        return CouplingFunction(Kind::even_power, k);
    }

    Kind kind() const noexcept { return kind_; }
    /// k in x^(2k); 1 for the identity.
    int power_index() const noexcept { return k_; }

    double operator()(double x) const noexcept
    {
        if (kind_ == Kind::identity) {
            return x;
        }
        const double x2 = x * x;
        double r = 1.0;
        for (int i = 0; i < k_; ++i) {
            r *= x2;
        }
        return r;
    }

    std::string name() const
    {
        return kind_ == Kind::identity ? std::string("identity") : "x^" + std::to_string(2 * k_);
    }

    friend bool operator==(const CouplingFunction&, const CouplingFunction&) = default;

private:
    CouplingFunction(Kind kind, int k) : kind_(kind), k_(k) {}

    Kind kind_;
    int k_;
};

/// Coupling strength and F: the slope rule beta(f) = 2 + eps*F(1/E_f - 2).
struct SelfConsistency {
    double epsilon = 0.0;
    CouplingFunction f = CouplingFunction::identity();

    SelfConsistency() = default;
    SelfConsistency(double eps, CouplingFunction fn) : epsilon(eps), f(fn)
    {
        if (!(eps >= 0.0) || !std::isfinite(eps)) {
            throw ParameterError("coupling strength must be finite and >= 0");
        }
    }

    /// Slope associated with a measure of expectation E.
    double slope(double expectation) const { return 2.0 + epsilon * f(1.0 / expectation - 2.0); }
};

inline double apply_F(const SelfConsistency& sc, double x) { return sc.f(x); }

enum class PsiMethod { parry_series, ergodic_average };

struct PsiSample {
    double beta = 0.0;
    double psi = 0.0;
    PsiMethod method = PsiMethod::parry_series;
    std::uint64_t n_iters = 0;  // ergodic only
    double x0 = 0.0;            // ergodic only
};

/// psi^eps(beta) = 2 + eps*F(1/E_mu_beta - 2) from the Parry series.
inline PsiSample psi(const SelfConsistency& sc, double beta, double tol = kSeriesTolerance)
{
    const ParryData d = parry_data(beta, tol);
    return {beta, sc.slope(d.expected_value), PsiMethod::parry_series, 0, 0.0};
}

/// Ergodic-average estimate 2 + eps*F(N / sum_{n<N} T^n(x0) - 2).
inline PsiSample psi_ergodic(const SelfConsistency& sc, double beta, std::uint64_t n_iters, double x0)
{
    const double mean = birkhoff_average(beta, x0, n_iters);
    if (!(mean > 0.0)) {
        throw EstimationError("orbit sum vanished for beta = " + std::to_string(beta));
    }
    return {beta, sc.slope(mean), PsiMethod::ergodic_average, n_iters, x0};
}

/// As above with x0 drawn uniformly from (0,1) using `seed`.
inline PsiSample psi_ergodic_seeded(const SelfConsistency& sc, double beta, std::uint64_t n_iters,
                                    std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double x0 = unif(rng);
    while (x0 == 0.0) {
        x0 = unif(rng);
    }
    return psi_ergodic(sc, beta, n_iters, x0);
}

/// Closed grid lo, lo+step, ..., with hi appended if the step does not land on it.
inline std::vector<double> closed_grid(double lo, double hi, double step)
{
    if (!(step > 0.0) || !(lo <= hi)) {
        throw ParameterError("grid needs lo <= hi and step > 0");
    }
    if (lo == hi) {
        return {lo};
    }
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> g;
    g.reserve(n + 2);
    for (std::size_t i = 0; i <= n; ++i) {
        g.push_back(lo + static_cast<double>(i) * step);
    }
    if (hi - g.back() > 1e-9 * step) {
        g.push_back(hi);
    } else {
        g.back() = hi;
    }
    return g;
}

/// How psi_curve samples each grid point.
struct CurveMethod {
    PsiMethod method = PsiMethod::parry_series;
    double tol = kSeriesTolerance;   // Parry series
    std::uint64_t n_iters = 1000000; // ergodic
    std::uint64_t seed = 0;          // ergodic: x0 for point i comes from derive_seed(seed, i)
};

inline std::vector<PsiSample> psi_curve(const SelfConsistency& sc, double beta_lo, double beta_hi, double grid_step,
                                        const CurveMethod& how = {}, unsigned threads = 1)
{
    if (!(beta_lo > 1.0) || !(beta_lo < beta_hi)) {
        throw ParameterError("psi curve needs 1 < beta_lo < beta_hi");
    }
    const std::vector<double> grid = closed_grid(beta_lo, beta_hi, grid_step);
    std::vector<PsiSample> out(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        out[i] = how.method == PsiMethod::parry_series
                     ? psi(sc, grid[i], how.tol)
                     : psi_ergodic_seeded(sc, grid[i], how.n_iters, derive_seed(how.seed, i));
    });
    return out;
}

struct FixedPoint {
    double beta = 0.0;
    double residual = 0.0;     // psi(beta) - beta at the returned point
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double slope_bound = 0.0;  // |g(hi) - g(lo)| / (hi - lo) over the final bracket
};

struct FixedPointScan {
    std::vector<FixedPoint> roots;     // ascending
    bool lebesgue_in_range = false;    // beta = 2 lies in [lo, hi]; never searched for
    double scan_step = 0.0;
    double bracket_width = 0.0;        // largest final bracket width used

    std::vector<double> betas() const
    {
        std::vector<double> b;
        b.reserve(roots.size());
        for (const auto& r : roots) {
            b.push_back(r.beta);
        }
        return b;
    }
};

/// Sign changes of g(beta) = psi(beta) - beta on a scan grid, each refined by bisection.
///
/// Crossings narrower than the scan step, or tangential ones, are not seen.
/// The Lebesgue fixed point beta = 2 is only flagged, not searched for.
inline FixedPointScan find_fixed_points(const SelfConsistency& sc, double beta_lo, double beta_hi, double scan_step,
                                        double bisect_tol, double tol = kSeriesTolerance, unsigned threads = 1)
{
    if (!(beta_lo > 1.0) || !(beta_lo < beta_hi)) {
        throw ParameterError("fixed point scan needs 1 < beta_lo < beta_hi");
    }
    if (!(bisect_tol > 0.0)) {
        throw ParameterError("bisection tolerance must be > 0");
    }
    auto g = [&](double b) { return psi(sc, b, tol).psi - b; };

    const std::vector<double> grid = closed_grid(beta_lo, beta_hi, scan_step);
    std::vector<double> values(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) { values[i] = g(grid[i]); });

    FixedPointScan scan;
    scan.scan_step = scan_step;
    scan.lebesgue_in_range = beta_lo <= 2.0 && 2.0 <= beta_hi;

    struct Bracket {
        double lo, hi, glo, ghi;
    };
    std::vector<Bracket> brackets;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (values[i] == 0.0) {
            if (grid[i] != 2.0) {
                scan.roots.push_back({grid[i], 0.0, grid[i], grid[i], 0.0});
            }
            continue;
        }
        if (i + 1 < grid.size() && values[i + 1] != 0.0 && (values[i] < 0.0) != (values[i + 1] < 0.0)) {
            brackets.push_back({grid[i], grid[i + 1], values[i], values[i + 1]});
        }
    }

    std::vector<FixedPoint> refined(brackets.size());
    parallel_for(brackets.size(), threads, [&](std::size_t j) {
        Bracket b = brackets[j];
        while (b.hi - b.lo > bisect_tol) {
            const double mid = 0.5 * (b.lo + b.hi);
            if (mid <= b.lo || mid >= b.hi) {
                break;
            }
            const double gm = g(mid);
            if (gm == 0.0) {
                b = {mid, mid, 0.0, 0.0};
                break;
            }
            if ((gm < 0.0) == (b.glo < 0.0)) {
                b.lo = mid;
                b.glo = gm;
            } else {
                b.hi = mid;
                b.ghi = gm;
            }
        }
        const double root = 0.5 * (b.lo + b.hi);
        const double width = b.hi - b.lo;
        refined[j] = {root, g(root), b.lo, b.hi, width > 0.0 ? std::abs(b.ghi - b.glo) / width : 0.0};
    });
    for (const auto& r : refined) {
        scan.bracket_width = std::max(scan.bracket_width, r.bracket_hi - r.bracket_lo);
        scan.roots.push_back(r);
    }
    std::sort(scan.roots.begin(), scan.roots.end(),
              [](const FixedPoint& a, const FixedPoint& b) { return a.beta < b.beta; });
    return scan;
}

/// Root beta_k > 2 of beta^k (beta - 2) = 1.
///
/// The excess beta_k - 2 (about 2^-k) is carried separately at full relative
/// precision. `beta` is the double nearest above the root, so that the orbit of
/// 1 under the stored beta lands just right of 0 rather than just left of 1.
struct BetaK {
    int k = 1;
    double excess = 0.0;
    double beta = 2.0;

    /// beta_k^k (beta_k - 2) - 1 evaluated from the excess.
    double residual() const { return residual_at(k, excess); }

    static double residual_at(int k, double eta)
    {
        return std::ldexp(std::exp(k * std::log1p(0.5 * eta)), k) * eta - 1.0;
    }
};

/// Bisection for beta_k on beta in [2, 3], run on the excess beta - 2 in [0, 1]
/// until its bracket is narrower than tol relative to the excess.
inline BetaK solve_beta_k(int k, double tol = 1e-15)
{
    if (k < 1) {
        throw ParameterError("beta_k needs k >= 1");
    }
    if (!(tol > 0.0)) {
        throw ParameterError("beta_k tolerance must be > 0");
    }
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > tol * lo || lo == 0.0) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (BetaK::residual_at(k, mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    BetaK r;
    r.k = k;
    r.excess = BetaK::residual_at(k, lo) == 0.0 ? lo : hi;
    double beta = 2.0 + r.excess;
    while (BetaK::residual_at(k, beta - 2.0) < 0.0) {
        beta = std::nextafter(beta, 3.0);
    }
    while (beta > 2.0 && BetaK::residual_at(k, std::nextafter(beta, 2.0) - 2.0) >= 0.0) {
        beta = std::nextafter(beta, 2.0);
    }
    r.beta = beta;
    return r;
}

/// Closed-form Parry integrals at beta_k and the coefficient c_k with
/// |E_beta_k - 1/2| = c_k (beta_k - 2).
struct BetaKMoments {
    int k = 1;
    double beta = 2.0;
    double normalizer = 1.0;
    double first_moment = 0.5;
    double c = 0.0;
};

inline BetaKMoments beta_k_moments(int k)
{
    const BetaK bk = solve_beta_k(k);
    const double b = bk.beta;
    const double eta = b - 2.0;
    const double geometric = (std::pow(b, k) - 1.0) / (b - 1.0);
    BetaKMoments m;
    m.k = k;
    m.beta = b;
    m.normalizer = 1.0 + k * eta / b;
    m.first_moment = 0.5 * (1.0 + geometric * eta * eta / b);
    m.c = std::abs((geometric * eta - k) / (2.0 * b + 2.0 * k * eta));
    return m;
}

/// Threshold eps_2*(beta_bar) = (beta_bar - 2) / F(1/E_beta_bar - 2); any larger
/// coupling puts psi above the diagonal at beta_bar.
inline double epsilon_star_2(const CouplingFunction& f, double beta_bar, double tol = kSeriesTolerance)
{
    if (!(beta_bar > 2.0)) {
        throw ParameterError("threshold needs beta_bar > 2");
    }
    const ParryData d = parry_data(beta_bar, tol);
    const double denom = f(1.0 / d.expected_value - 2.0);
    if (!(denom > 0.0)) {
        throw ThresholdUndefinedError("F(1/E - 2) vanishes at beta = " + std::to_string(beta_bar));
    }
    return (beta_bar - 2.0) / denom;
}

} // namespace betasc

#endif // BETASC_PSI_ANALYSIS_HPP
