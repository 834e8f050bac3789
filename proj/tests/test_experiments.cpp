#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "betasc/experiments.hpp"

using Catch::Approx;
using namespace betasc;

namespace {

const SelfConsistency kId(double eps) { return SelfConsistency(eps, CouplingFunction::identity()); }

double stddev(const std::vector<double>& v)
{
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace

TEST_CASE("pool generation")
{
    const auto one = generate_pool(PoolSpec{1, 1, 1, 42, std::nullopt});
    REQUIRE(one.size() == 1);
    CHECK(one[0].jump_count() == 3);

    const PoolSpec spec{10, 10, 10, 3, std::nullopt};
    const auto a = generate_pool(spec);
    CHECK(a.size() == 100);
    CHECK(a == generate_pool(spec));
    for (std::size_t g = 0; g < 10; ++g) {
        const std::size_t m = a[g * 10].jump_count();
        CHECK(m >= 3);
        CHECK(m <= 12);
        for (std::size_t j = 1; j < 10; ++j) {
            CHECK(a[g * 10 + j].jump_count() == m);
        }
    }

    PoolSpec near = spec;
    near.near_uniform = 1e-4;
    for (const auto& f : generate_pool(near)) {
        CHECK(total_variation(f) < 1e-4);
        CHECK(std::abs(integral(f) - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(generate_pool(PoolSpec{0, 1, 1, 0, std::nullopt}), ParameterError);
    CHECK_THROWS_AS(blend_toward_uniform(StepDensity::uniform(), 0.0), ParameterError);
}

TEST_CASE("uniform pool gives constant statistics")
{
    const auto stats = run_ensemble(kId(0.3), {StepDensity::uniform(), StepDensity::uniform()}, 20,
                                    StepDensity::uniform());
    REQUIRE(stats.size() == 21);
    for (const auto& s : stats) {
        CHECK(s.mean_beta == 2.0);
        CHECK(s.mean_var == 0.0);
        CHECK(*s.mean_var_to_ref == 0.0);
        CHECK(*s.mean_l1_to_ref <= 1e-14);
    }
    CHECK_THROWS_AS(run_ensemble(kId(0.3), {}, 5), ParameterError);
    CHECK_THROWS_AS(run_ensemble(kId(0.3), {StepDensity::uniform()}, 0), ParameterError);
}

TEST_CASE("ensemble statistics are deterministic and thread independent")
{
    const auto pool = generate_pool(PoolSpec{4, 10, 5, 9, std::nullopt});
    const StepDensity ref = random_density(3, std::uint64_t{4});
    const auto a = run_ensemble(kId(0.2), pool, 30, ref, 1);
    const auto b = run_ensemble(kId(0.2), pool, 30, ref, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].mean_beta == b[t].mean_beta);
        CHECK(a[t].mean_var == b[t].mean_var);
        CHECK(*a[t].mean_var_to_ref == *b[t].mean_var_to_ref);
        CHECK(*a[t].mean_l1_to_ref == *b[t].mean_l1_to_ref);
        CHECK(a[t].mean_var >= 0.0);
        CHECK(*a[t].mean_l1_to_ref >= 0.0);
        CHECK(*a[t].mean_l1_to_ref <= 2.0);
    }
    double beta0 = 0.0;
    for (const auto& f : pool) {
        beta0 += slope_of(kId(0.2), f);
    }
    CHECK(a[0].mean_beta == Approx(beta0 / 20.0).epsilon(1e-14));
}

TEST_CASE("a failing member aborts the ensemble with its index")
{
    std::vector<StepDensity> pool{StepDensity::uniform(), StepDensity({0.0, 0.8, 1.0}, {0.0, 5.0})};
    try {
        run_ensemble(kId(10.0), pool, 3);
        FAIL("expected an ensemble error");
    } catch (const EnsembleError& e) {
        CHECK(e.index() == 1);
    }
}

TEST_CASE("weak coupling ensemble")
{
    const auto stats = run_ensemble(kId(0.1), generate_pool(PoolSpec{10, 10, 10, 1, std::nullopt}), 100);
    CHECK(stats.back().mean_var == Approx(0.9956).margin(0.05));
    CHECK(stats.back().mean_beta == Approx(2.0006).margin(2e-3));
}

TEST_CASE("x^4 coupling flattens the pool")
{
    const auto stats = run_ensemble(SelfConsistency(1.0, CouplingFunction::even_power(2)),
                                    generate_pool(PoolSpec{10, 10, 10, 1, std::nullopt}), 100);
    for (const auto& s : stats) {
        if (s.t >= 45) {
            CHECK(s.mean_var <= 1e-4);
        }
    }
}

TEST_CASE("reference densities")
{
    const StepDensity f0 = random_density(8, std::uint64_t{21});
    CHECK(l1_distance(reference_density(kId(0.0), f0, 200), StepDensity::uniform()) < 1e-10);
    CHECK(reference_density(kId(0.4), StepDensity::uniform(), 50) == StepDensity::uniform());
    const StepDensity star = reference_density(kId(0.2), f0, 5000);
    CHECK(slope_of(kId(0.2), star) == Approx(2.0181).margin(2e-3));
    CHECK_THROWS_AS(reference_density(kId(0.2), f0, 0), ParameterError);
}

TEST_CASE("convergence detection")
{
    std::vector<TrajectoryStats> flat(11);
    for (int t = 0; t <= 10; ++t) {
        flat[static_cast<std::size_t>(t)] = {t, 2.01, 0.5, std::nullopt, std::nullopt};
    }
    const ConvergenceVerdict v = detect_convergence(flat, 2, 10, 1e-4);
    CHECK(v.converged);
    CHECK(v.var_range() == 0.0);
    CHECK(v.beta_range() == 0.0);

    flat[5].mean_var = 0.5 + 1.9e-4;
    CHECK(detect_convergence(flat, 2, 10, 1e-4).converged);
    CHECK_FALSE(detect_convergence(flat, 6, 10, 1e-4).var_range() > 0.0);
    flat[5].mean_var = 0.5 + 2.1e-4;
    CHECK_FALSE(detect_convergence(flat, 2, 10, 1e-4).converged);
    flat[5].mean_var = 0.5;
    flat[7].mean_beta = 2.01 - 3e-4;
    const ConvergenceVerdict w = detect_convergence(flat, 0, 10, 1e-4);
    CHECK_FALSE(w.converged);
    CHECK(w.beta_range() == Approx(3e-4).margin(1e-15));

    CHECK_THROWS_AS(detect_convergence(flat, 5, 11, 1e-4), RangeError);
    CHECK_THROWS_AS(detect_convergence(flat, 5, 5, 1e-4), RangeError);
    CHECK_THROWS_AS(detect_convergence({}, 0, 1, 1e-4), RangeError);

    const auto pool = generate_pool(PoolSpec{10, 10, 10, 1, std::nullopt});
    CHECK(detect_convergence(run_ensemble(kId(0.2), pool, 200), 150, 200, 1e-4).converged);
    CHECK_FALSE(detect_convergence(run_ensemble(SelfConsistency(2.5, CouplingFunction::even_power(1)), pool, 100),
                                   50, 100, 1e-4)
                    .converged);
}

TEST_CASE("epsilon sweep")
{
    SweepSpec sw;
    sw.eps_lo = 0.0;
    sw.eps_hi = 0.2;
    sw.eps_step = 0.1;
    const PoolSpec pool{5, 10, 4, 13, std::nullopt};
    const auto rows = epsilon_sweep(CouplingFunction::identity(), sw, pool, 1);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].epsilon == 0.0);
    CHECK_FALSE(rows[0].failure);
    CHECK(rows[0].window.converged);
    CHECK(rows[0].window.beta_min == 2.0);
    CHECK(rows[0].window.beta_max == 2.0);

    const auto threaded = epsilon_sweep(CouplingFunction::identity(), sw, pool, 3);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        CHECK(rows[j].window.var_min == threaded[j].window.var_min);
        CHECK(rows[j].window.beta_max == threaded[j].window.beta_max);
    }

    // every row draws its own pool
    SweepSpec single = sw;
    single.eps_lo = single.eps_hi = 0.1;
    const auto alone = epsilon_sweep(CouplingFunction::identity(), single, pool, 1);
    CHECK(alone[0].window.var_min != rows[1].window.var_min);

    SweepSpec bad = sw;
    bad.t1 = 300;
    CHECK_THROWS_AS(epsilon_sweep(CouplingFunction::identity(), bad, pool), ParameterError);
}

TEST_CASE("sweep rows record failures and continue")
{
    SweepSpec sw;
    sw.eps_lo = 0.0;
    sw.eps_hi = 40.0;
    sw.eps_step = 40.0;
    sw.steps = 20;
    sw.t0 = 10;
    sw.t1 = 20;
    const auto rows = epsilon_sweep(CouplingFunction::identity(), sw, PoolSpec{3, 10, 3, 2, std::nullopt});
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].failure);
    CHECK(rows[1].failure);
}

TEST_CASE("larger pools give steadier means")
{
    std::vector<double> small, large;
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        small.push_back(run_ensemble(kId(0.2), generate_pool(PoolSpec{10, 10, 10, seed, std::nullopt}), 100)
                            .back()
                            .mean_beta);
        large.push_back(run_ensemble(kId(0.2), generate_pool(PoolSpec{10, 10, 20, seed, std::nullopt}), 100)
                            .back()
                            .mean_beta);
    }
    CHECK(stddev(large) < stddev(small));
}
