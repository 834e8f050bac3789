#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "betasc");
    std::ostringstream out, err;
    const int code = betasc::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const char* base = std::getenv("BETASC_TMPDIR");
    fs::path dir = fs::path(base ? base : fs::temp_directory_path().string()) / "cli_scratch";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> v;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) {
        v.push_back(l);
    }
    return v;
}

} // namespace

TEST_CASE("parry subcommand")
{
    const Run r = run({"parry", "--beta", "2"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("parry").at("expected_value") == 0.5);

    CHECK(run({"parry", "--beta", "0.9"}).code == 2);
    CHECK(run({"parry"}).code == 2);
    CHECK(run({"parry", "--beta", "2.5", "--beta-k", "3"}).code == 2);
    CHECK(run({"parry", "--beta", "abc"}).code == 2);

    const Run k5 = run({"parry", "--beta-k", "5", "--density"});
    REQUIRE(k5.code == 0);
    const auto jk = nlohmann::json::parse(k5.out);
    CHECK(std::abs(jk.at("beta_k").at("normalizer_diff").get<double>()) <= 1e-9);
    CHECK(std::abs(jk.at("beta_k").at("first_moment_diff").get<double>()) <= 1e-9);
    CHECK(jk.at("density").at("jumps").size() == 7);
}

TEST_CASE("help lists flags and units")
{
    const Run top = run({"--help"});
    CHECK(top.code == 0);
    CHECK(top.out.find("--threads") != std::string::npos);
    const Run sub = run({"psi-curve", "--help"});
    CHECK(sub.code == 0);
    CHECK(sub.out.find("dimensionless") != std::string::npos);
    CHECK(sub.out.find("iterations") != std::string::npos);
    CHECK(run({"stability", "--help"}).out.find("steps") != std::string::npos);
}

TEST_CASE("invalid input exits 2 before computing")
{
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"iterate", "--bogus"}).code == 2);
    CHECK(run({"psi-curve", "--lo", "2.5", "--hi", "2.1"}).code == 2);
    CHECK(run({"psi-curve", "--eps", "-1"}).code == 2);
    CHECK(run({"fixed-points", "--f", "cubic"}).code == 2);
    CHECK(run({"eps-sweep", "--t0", "150", "--t1", "250", "--steps", "200"}).code == 2);
    CHECK(run({"stability", "--k1", "0"}).code == 2);
    CHECK(run({"--threads", "0", "parry", "--beta", "2"}).code == 2);
    CHECK(run({"iterate", "--init", "file", "--init-file", scratch("missing.json").string()}).code == 2);
}

TEST_CASE("computation errors exit 1")
{
    const fs::path f = scratch("heavy.json");
    std::ofstream(f) << R"({"jumps":[0,0.8,1],"heights":[0,5]})";
    const Run r = run({"iterate", "--eps", "10", "--init", "file", "--init-file", f.string(), "--steps", "3"});
    CHECK(r.code == 1);
    CHECK(r.err.find("slope") != std::string::npos);
    CHECK(run({"fixed-points", "--eps", "1", "--lo", "2.1", "--hi", "2.2", "--eps-star-at", "3"}).code == 1);
}

TEST_CASE("psi-curve and fixed-points")
{
    const Run flat = run({"psi-curve", "--eps", "0", "--lo", "2", "--hi", "3", "--step", "0.1"});
    REQUIRE(flat.code == 0);
    const auto rows = lines(flat.out);
    CHECK(rows.front() == "beta,psi,method,n_iters");
    CHECK(rows.size() == 12);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].find(",2,parry,") != std::string::npos);
    }

    const Run a = run({"--seed", "4", "psi-curve", "--eps", "0.2", "--lo", "2.1", "--hi", "2.9", "--step", "0.4",
                       "--ergodic", "--n", "1000000"});
    const Run b = run({"psi-curve", "--eps", "0.2", "--lo", "2.1", "--hi", "2.9", "--step", "0.4"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto ea = lines(a.out), eb = lines(b.out);
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 1; i < ea.size(); ++i) {
        const double pa = std::stod(ea[i].substr(ea[i].find(',') + 1));
        const double pb = std::stod(eb[i].substr(eb[i].find(',') + 1));
        CHECK(std::abs(pa - pb) <= 5e-3);
    }
    CHECK(run({"psi-curve", "--parry", "--ergodic"}).code == 2);

    const Run none = run({"fixed-points", "--eps", "0", "--lo", "2", "--hi", "3", "--scan", "1e-3"});
    REQUIRE(none.code == 0);
    const auto jn = nlohmann::json::parse(none.out);
    CHECK(jn.at("roots").empty());
    CHECK(jn.at("lebesgue_fixed_point") == true);

    const Run strong = run({"fixed-points", "--f", "even-power", "--power-k", "1", "--eps", "200", "--lo", "2.01",
                            "--hi", "3.5", "--scan", "1e-3", "--eps-star-at", "2.5"});
    REQUIRE(strong.code == 0);
    const auto js = nlohmann::json::parse(strong.out);
    CHECK(js.at("f") == "x^2");
    CHECK(js.at("epsilon_star_2").at("certified") == true);
    CHECK_FALSE(js.at("roots").empty());
}

TEST_CASE("config file precedence")
{
    const fs::path cfg = scratch("run.cfg");
    std::ofstream(cfg) << "# iterate settings\neps = 0.5\nsteps = 4\ninit = random\nseed = 9\n";
    const Run from_file = run({"iterate", "--config", cfg.string()});
    REQUIRE(from_file.code == 0);
    CHECK(lines(from_file.out).size() == 5);

    const Run flag_wins = run({"iterate", "--config", cfg.string(), "--steps", "2"});
    REQUIRE(flag_wins.code == 0);
    CHECK(lines(flag_wins.out).size() == 3);

    const Run plain = run({"iterate", "--eps", "0.5", "--steps", "4", "--seed", "9"});
    CHECK(plain.out == from_file.out);
    const Run defaults = run({"iterate", "--steps", "4", "--seed", "9"});
    CHECK(defaults.out != from_file.out);

    const fs::path broken = scratch("broken.cfg");
    std::ofstream(broken) << "eps 0.5\n";
    CHECK(run({"iterate", "--config", broken.string()}).code == 2);
    CHECK(run({"iterate", "--config", scratch("absent.cfg").string()}).code == 2);
    const fs::path unknown = scratch("unknown.cfg");
    std::ofstream(unknown) << "colour = blue\n";
    CHECK(run({"iterate", "--config", unknown.string()}).code == 2);
}

TEST_CASE("iterate, stability and eps-sweep outputs")
{
    const fs::path out = scratch("trace.csv");
    const fs::path fin = scratch("final.json");
    const Run it = run({"--out", out.string(), "iterate", "--init", "uniform", "--eps", "0.3", "--steps", "10",
                        "--final-density", fin.string()});
    REQUIRE(it.code == 0);
    CHECK(it.out.empty());
    std::ifstream trace(out);
    std::stringstream buf;
    buf << trace.rdbuf();
    const auto rows = lines(buf.str());
    REQUIRE(rows.size() == 11);
    CHECK(rows[0] == "t,beta_used,jump_count,total_variation,expectation,integral_drift");
    CHECK(rows[10].rfind("10,2,2,0,0.5,", 0) == 0);
    std::ifstream fj(fin);
    CHECK(betasc::density_from_json(nlohmann::json::parse(fj)) == betasc::StepDensity::uniform());

    const std::vector<std::string> stab{"--seed", "3", "stability", "--eps", "0.2", "--steps", "5", "--k1", "3",
                                        "--k2", "2", "--ref-steps", "20"};
    const Run s1 = run(stab);
    REQUIRE(s1.code == 0);
    auto s1_rows = lines(s1.out);
    CHECK(s1_rows.size() == 7);
    CHECK(s1_rows[0] == "t,mean_beta,mean_var,mean_var_to_ref,mean_l1_to_ref");
    CHECK(s1.err.find("trajectories") != std::string::npos);
    auto threaded = stab;
    threaded.insert(threaded.begin(), {"--threads", "3"});
    CHECK(run(threaded).out == s1.out);
    const Run noref = run({"stability", "--steps", "2", "--k1", "1", "--k2", "1"});
    CHECK(lines(noref.out)[1].find(",,") != std::string::npos);

    const Run sw = run({"eps-sweep", "--eps-lo", "0", "--eps-hi", "0", "--steps", "200", "--k1", "2", "--k2", "2"});
    REQUIRE(sw.code == 0);
    const auto sr = lines(sw.out);
    REQUIRE(sr.size() == 2);
    CHECK(sr[1].rfind("0,", 0) == 0);
    CHECK(sr[1].substr(sr[1].size() - 4) == "true");

    const Run bk = run({"beta-k", "--k-max", "20"});
    REQUIRE(bk.code == 0);
    CHECK(lines(bk.out).size() == 21);
}
