#ifndef BETASC_EXPERIMENTS_HPP
#define BETASC_EXPERIMENTS_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "psi_analysis.hpp"
#include "step_density.hpp"
#include "transfer.hpp"

namespace betasc {

/// K1 groups of K2 random densities; group k has m(k) ~ U{1..M} inner jumps.
struct PoolSpec {
    int k1 = 10;
    int max_inner_jumps = 10;
    int k2 = 10;
    std::uint64_t seed = 0;
    /// When set, every density is blended toward the uniform one until its
    /// total variation is below this bound.
    std::optional<double> near_uniform;

    std::size_t size() const { return static_cast<std::size_t>(k1) * static_cast<std::size_t>(k2); }
};

/// Smallest move toward the uniform density that brings var(f) under `bound`.
inline StepDensity blend_toward_uniform(const StepDensity& f, double bound)
{
    if (!(bound > 0.0)) {
        throw ParameterError("variation bound must be > 0");
    }
    const double v = total_variation(f);
    if (v < bound) {
        return f;
    }
    // var(1 + s(f - 1)) = s var(f); keep strictly under the bound
    const double s = bound / v * (1.0 - 1e-6);
    std::vector<double> heights(f.heights().begin(), f.heights().end());
    for (double& h : heights) {
        h = 1.0 + s * (h - 1.0);
    }
    return normalize(StepDensity(std::vector<double>(f.jumps().begin(), f.jumps().end()), std::move(heights)));
}

inline std::vector<StepDensity> generate_pool(const PoolSpec& spec)
{
    if (spec.k1 < 1 || spec.k2 < 1 || spec.max_inner_jumps < 1) {
        throw ParameterError("pool needs k1, k2, max_inner_jumps >= 1");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> jumps(1, spec.max_inner_jumps);
    std::vector<StepDensity> pool;
    pool.reserve(spec.size());
    for (int g = 0; g < spec.k1; ++g) {
        const int m = jumps(rng);
        for (int j = 0; j < spec.k2; ++j) {
            StepDensity f = random_density(m, static_cast<std::uint64_t>(rng()));
            if (spec.near_uniform) {
                f = blend_toward_uniform(f, *spec.near_uniform);
            }
            pool.push_back(std::move(f));
        }
    }
    return pool;
}

/// Pool means at one time step.
struct TrajectoryStats {
    int t = 0;
    double mean_beta = 0.0;
    double mean_var = 0.0;
    std::optional<double> mean_var_to_ref;
    std::optional<double> mean_l1_to_ref;
};

/// Evolves every pool member `steps` times and averages, for t = 0..steps,
/// the slope computed from f_t, var(f_t) and, given `ref`, var(f_t - ref) and
/// the L1 distance to ref. Members run in parallel; the means are summed in
/// pool order so the result does not depend on `threads`.
inline std::vector<TrajectoryStats> run_ensemble(const SelfConsistency& sc, const std::vector<StepDensity>& pool,
                                                 int steps, const std::optional<StepDensity>& ref = std::nullopt,
                                                 unsigned threads = 1)
{
    if (pool.empty()) {
        throw ParameterError("ensemble needs a nonempty pool");
    }
    if (steps < 1) {
        throw ParameterError("ensemble needs steps >= 1");
    }
    const auto T = static_cast<std::size_t>(steps) + 1;
    struct Row {
        double beta, var, var_ref, l1_ref;
    };
    std::vector<std::vector<Row>> rows(pool.size());
    std::vector<std::exception_ptr> errors(pool.size());

    parallel_for(pool.size(), threads, [&](std::size_t i) {
        std::vector<Row>& out = rows[i];
        out.reserve(T);
        auto record = [&](const StepDensity& f) {
            Row r{slope_of(sc, f), total_variation(f), 0.0, 0.0};
            if (ref) {
                r.var_ref = variation_distance(f, *ref);
                r.l1_ref = l1_distance(f, *ref);
            }
            out.push_back(r);
        };
        try {
            record(pool[i]);
            IterateResult res = iterate(sc, pool[i], steps,
                                        [&](int, const StepDensity& f, const PushforwardRecord&) { record(f); });
            res.rethrow_if_failed();
        } catch (const Error&) {
            errors[i] = std::current_exception();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const Error& e) {
                throw EnsembleError(i, e.what());
            }
        }
    }

    const double n = static_cast<double>(pool.size());
    std::vector<TrajectoryStats> stats(T);
    for (std::size_t t = 0; t < T; ++t) {
        double b = 0.0, v = 0.0, vr = 0.0, l1 = 0.0;
        for (const auto& member : rows) {
            b += member[t].beta;
            v += member[t].var;
            vr += member[t].var_ref;
            l1 += member[t].l1_ref;
        }
        stats[t].t = static_cast<int>(t);
        stats[t].mean_beta = b / n;
        stats[t].mean_var = v / n;
        if (ref) {
            stats[t].mean_var_to_ref = vr / n;
            stats[t].mean_l1_to_ref = l1 / n;
        }
    }
    return stats;
}

/// Long iterate of f0, used as a stand-in for the invariant density.
inline StepDensity reference_density(const SelfConsistency& sc, const StepDensity& f0, int t_long)
{
    if (t_long < 1) {
        throw ParameterError("reference run needs t_long >= 1");
    }
    IterateResult res = iterate(sc, f0, t_long);
    res.rethrow_if_failed();
    return res.final_density;
}

struct ConvergenceVerdict {
    bool converged = false;
    double var_min = 0.0, var_max = 0.0;
    double beta_min = 0.0, beta_max = 0.0;

    double var_range() const { return var_max - var_min; }
    double beta_range() const { return beta_max - beta_min; }
};

/// Converged iff mean_var and mean_beta each stay within tol of their window
/// midrange over t0..t1, i.e. each range is below 2*tol.
inline ConvergenceVerdict detect_convergence(const std::vector<TrajectoryStats>& stats, int t0, int t1, double tol)
{
    if (stats.empty() || !(t0 < t1) || t0 < stats.front().t || t1 > stats.back().t) {
        throw RangeError("convergence window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                         "] outside the available statistics");
    }
    ConvergenceVerdict v;
    bool first = true;
    for (const auto& s : stats) {
        if (s.t < t0 || s.t > t1) {
            continue;
        }
        if (first) {
            v.var_min = v.var_max = s.mean_var;
            v.beta_min = v.beta_max = s.mean_beta;
            first = false;
        }
        v.var_min = std::min(v.var_min, s.mean_var);
        v.var_max = std::max(v.var_max, s.mean_var);
        v.beta_min = std::min(v.beta_min, s.mean_beta);
        v.beta_max = std::max(v.beta_max, s.mean_beta);
    }
    v.converged = v.var_range() < 2.0 * tol && v.beta_range() < 2.0 * tol;
    return v;
}

struct SweepRow {
    double epsilon = 0.0;
    ConvergenceVerdict window;
    std::optional<std::string> failure;
};

struct SweepSpec {
    double eps_lo = 0.0;
    double eps_hi = 1.0;
    double eps_step = 1e-3;
    int steps = 200;
    int t0 = 150;
    int t1 = 200;
    double tol = 1e-4;
};

/// One ensemble per coupling value on the closed grid eps_lo..eps_hi. Row j
/// draws its pool from derive_seed(pool.seed, j). A failing row is marked and
/// the sweep carries on.
inline std::vector<SweepRow> epsilon_sweep(const CouplingFunction& f, const SweepSpec& sweep, const PoolSpec& pool,
                                           unsigned threads = 1)
{
    if (!(sweep.eps_lo >= 0.0)) {
        throw ParameterError("sweep needs eps_lo >= 0");
    }
    if (!(sweep.t0 < sweep.t1) || sweep.t1 > sweep.steps || sweep.t0 < 0) {
        throw ParameterError("sweep window must satisfy 0 <= t0 < t1 <= steps");
    }
    const std::vector<double> grid = closed_grid(sweep.eps_lo, sweep.eps_hi, sweep.eps_step);
    std::vector<SweepRow> rows(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t j) {
        SweepRow& row = rows[j];
        row.epsilon = grid[j];
        try {
            PoolSpec ps = pool;
            ps.seed = derive_seed(pool.seed, j);
            const auto stats = run_ensemble(SelfConsistency(grid[j], f), generate_pool(ps), sweep.steps);
            row.window = detect_convergence(stats, sweep.t0, sweep.t1, sweep.tol);
        } catch (const Error& e) {
            row.failure = e.what();
        }
    });
    return rows;
}

} // namespace betasc

#endif // BETASC_EXPERIMENTS_HPP
