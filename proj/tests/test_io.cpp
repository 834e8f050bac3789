#include <catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "betasc/io.hpp"

using namespace betasc;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

} // namespace

TEST_CASE("format_double round-trips")
{
    for (double v : {0.1, 1.0 / 3.0, 2.0181, 1e-300, -7.25, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_optional(std::nullopt).empty());
    CHECK(to_string(PsiMethod::parry_series) == "parry");
    CHECK(to_string(PsiMethod::ergodic_average) == "ergodic");
}

TEST_CASE("density JSON round-trips bit-exactly")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const StepDensity f = random_density(17, seed);
        const std::string text = nlohmann::json(f).dump();
        CHECK(density_from_json(nlohmann::json::parse(text)) == f);
    }
    const auto j = nlohmann::json(StepDensity::uniform());
    CHECK(j.at("jumps") == nlohmann::json::array({0.0, 1.0}));
    CHECK(j.at("heights") == nlohmann::json::array({1.0}));
    CHECK_THROWS_AS(density_from_json(nlohmann::json::parse(R"({"jumps":[0,1],"heights":[-1]})")), ParameterError);
    CHECK_THROWS(density_from_json(nlohmann::json::parse(R"({"jumps":[0,1]})")));
}

TEST_CASE("Parry and fixed-point JSON")
{
    const nlohmann::json p = parry_data(2.0);
    CHECK(p.at("expected_value") == 0.5);
    CHECK(p.at("orbit").size() == 1);

    FixedPointScan scan;
    scan.roots.push_back({2.5, 1e-13, 2.4, 2.6, 0.3});
    scan.lebesgue_in_range = true;
    const nlohmann::json s = scan;
    CHECK(s.at("roots") == nlohmann::json::array({2.5}));
    CHECK(s.at("details")[0].at("bracket")[1] == 2.6);
    CHECK(s.at("lebesgue_fixed_point") == true);
}

TEST_CASE("CSV writers")
{
    std::ostringstream a;
    write_psi_curve_csv(a, {PsiSample{2.5, 2.1, PsiMethod::parry_series, 0, 0.0},
                            PsiSample{2.6, 2.2, PsiMethod::ergodic_average, 1000, 0.4}});
    CHECK(a.str() == "beta,psi,method,n_iters\n2.5,2.1000000000000001,parry,\n"
                     "2.6000000000000001,2.2000000000000002,ergodic,1000\n");

    std::ostringstream b;
    write_trace_csv(b, {TraceRow{1, 2.5, 3, 0.4, 0.45, 0.0}});
    CHECK(first_line(b.str()) == "t,beta_used,jump_count,total_variation,expectation,integral_drift");

    std::ostringstream c;
    write_stats_csv(c, {TrajectoryStats{0, 2.0, 0.0, std::nullopt, std::nullopt}, TrajectoryStats{1, 2.0, 0.0, 0.5, 0.25}});
    CHECK(c.str() == "t,mean_beta,mean_var,mean_var_to_ref,mean_l1_to_ref\n0,2,0,,\n1,2,0,0.5,0.25\n");

    std::ostringstream d;
    SweepRow ok{0.0, ConvergenceVerdict{true, 0.0, 0.0, 2.0, 2.0}, std::nullopt};
    SweepRow bad{0.5, {}, std::string("slope out of range")};
    write_sweep_csv(d, {ok, bad});
    CHECK(d.str() == "epsilon,window_var_min,window_var_max,window_beta_min,window_beta_max,converged\n"
                     "0,0,0,2,2,true\n0.5,,,,,false\n");
}
