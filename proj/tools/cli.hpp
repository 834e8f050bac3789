#ifndef BETASC_TOOLS_CLI_HPP
#define BETASC_TOOLS_CLI_HPP

// Command-line front end. Kept in a header so the test suite can drive it
// in-process; tools/betasc_main.cpp is the thin executable wrapper.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "betasc/betasc.hpp"

namespace betasc::cli {

enum ExitCode : int { kOk = 0, kComputationError = 1, kValidationError = 2 };

/// Raised for parameter combinations rejected before any computation runs.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a flat `key = value` file; '#' starts a comment.
inline std::map<std::string, std::string> read_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file " + path);
    }
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        if (key.rfind("--", 0) == 0) {
            key.erase(0, 2);
        }
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

/// Splices config entries in as `--key=value` right after the subcommand name,
/// so flags given on the command line (which come later) win.
inline std::vector<std::string> expand_config(std::vector<std::string> args, const std::vector<std::string>& subcommands)
{
    std::optional<std::string> config;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!config) {
        return args;
    }
    auto sub = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
        return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
    });
    if (sub == args.end()) {
        throw ValidationError("--config needs a subcommand");
    }
    std::vector<std::string> injected;
    for (const auto& [k, v] : read_config(*config)) {
        injected.push_back("--" + k + "=" + v);
    }
    args.insert(sub + 1, injected.begin(), injected.end());
    return args;
}

struct GlobalOptions {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out = "-";
};

struct CouplingOptions {
    std::string f = "identity";
    int power_k = 1;
    double eps = 0.0;

    void add(CLI::App* app, bool with_eps = true)
    {
        app->add_option("--f", f, "coupling function F: identity (F(x)=x) or even-power (F(x)=x^(2k))")
            ->check(CLI::IsMember({"identity", "even-power"}))
            ->capture_default_str();
        app->add_option("--power-k", power_k, "k in F(x)=x^(2k) for --f even-power (integer >= 1)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        if (with_eps) {
            app->add_option("--eps", eps, "coupling strength epsilon (dimensionless, >= 0)")
                ->check(CLI::NonNegativeNumber)
                ->capture_default_str();
        }
    }

    CouplingFunction function() const
    {
        return f == "identity" ? CouplingFunction::identity() : CouplingFunction::even_power(power_k);
    }

    SelfConsistency self_consistency() const { return SelfConsistency(eps, function()); }
};

inline void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw ValidationError(what);
    }
}

/// Output sink: a file when --out is given, otherwise the supplied stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback)
    {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) {
                throw Error("cannot open output file " + path);
            }
            os_ = file_.get();
        }
    }

    std::ostream& operator*() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

inline StepDensity read_density_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open density file " + path);
    }
    try {
        return density_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    } catch (const ParameterError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Runs the CLI on `argv`-style arguments (args[0] is the program name).
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Self-consistent beta-map laboratory: Parry densities, the psi map and transfer-operator runs."};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    std::string config_path;
    app.add_option("--seed", g.seed, "master random seed (integer)")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (integer >= 1); output does not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--out", g.out, "output file; '-' writes to standard output")->capture_default_str();
    app.add_option("--config", config_path, "flat key = value file; keys are long flag names, flags override it");

    // parry
    auto* parry = app.add_subcommand("parry", "Parry series data (orbit of 1, normalizer, moments) as JSON");
    std::optional<double> parry_beta;
    std::optional<int> parry_k;
    double parry_tol = kSeriesTolerance;
    bool parry_density_flag = false;
    auto* pb = parry->add_option("--beta", parry_beta, "slope beta (dimensionless, > 1)");
    auto* pk = parry->add_option("--beta-k", parry_k, "use beta_k, the root of beta^k (beta - 2) = 1 (integer k >= 1)");
    pb->excludes(pk);
    parry->add_option("--tol", parry_tol, "series truncation: stop once beta^-N < tol")->capture_default_str();
    parry->add_flag("--density", parry_density_flag, "also emit the normalized Parry step density");

    // beta-k
    auto* betak = app.add_subcommand("beta-k", "beta_k sequence with closed-form and series moments as CSV");
    int bk_k = 0;
    int bk_kmax = 20;
    betak->add_option("--k", bk_k, "single index k (integer >= 1); overrides --k-max");
    betak->add_option("--k-max", bk_kmax, "tabulate k = 1..k-max (integer >= 1)")->capture_default_str();

    // psi-curve
    auto* curve = app.add_subcommand("psi-curve", "samples of psi^eps(beta) on a grid as CSV");
    CouplingOptions curve_c;
    curve_c.add(curve);
    double curve_lo = 2.0, curve_hi = 3.0, curve_step = 1e-3, curve_tol = kSeriesTolerance;
    bool use_parry = false, use_ergodic = false;
    std::uint64_t curve_n = 1000000;
    curve->add_option("--lo", curve_lo, "smallest beta on the grid (dimensionless, > 1)")->capture_default_str();
    curve->add_option("--hi", curve_hi, "largest beta on the grid (dimensionless)")->capture_default_str();
    curve->add_option("--step", curve_step, "grid spacing Delta in beta (> 0)")->capture_default_str();
    auto* fp = curve->add_flag("--parry", use_parry, "exact Parry series (default)");
    auto* fe = curve->add_flag("--ergodic", use_ergodic, "ergodic average from a uniform random x0 per grid point");
    fp->excludes(fe);
    curve->add_option("--n", curve_n, "ergodic orbit length N (iterations, >= 1)")->capture_default_str();
    curve->add_option("--tol", curve_tol, "Parry series truncation tolerance")->capture_default_str();

    // fixed-points
    auto* fixed = app.add_subcommand("fixed-points", "nontrivial fixed points of psi^eps as JSON");
    CouplingOptions fixed_c;
    fixed_c.add(fixed);
    double fixed_lo = 2.001, fixed_hi = 2.999, fixed_scan = 1e-4, fixed_bisect = 1e-12, fixed_tol = kSeriesTolerance;
    std::optional<double> eps_star_at;
    fixed->add_option("--lo", fixed_lo, "scan start beta (dimensionless, > 1)")->capture_default_str();
    fixed->add_option("--hi", fixed_hi, "scan end beta (dimensionless)")->capture_default_str();
    fixed->add_option("--scan", fixed_scan, "scan grid spacing in beta (> 0)")->capture_default_str();
    fixed->add_option("--bisect-tol", fixed_bisect, "final bracket width in beta (> 0)")->capture_default_str();
    fixed->add_option("--tol", fixed_tol, "Parry series truncation tolerance")->capture_default_str();
    fixed->add_option("--eps-star-at", eps_star_at,
                      "also report the strong-coupling threshold eps_2* at this beta_bar (> 2, non-integer) and "
                      "certify psi at 1.01 eps_2*");

    // iterate
    auto* iter = app.add_subcommand("iterate", "one self-consistent trajectory; trace CSV");
    CouplingOptions iter_c;
    iter_c.add(iter);
    int iter_steps = 100;
    std::string iter_init = "random";
    int iter_inner = 10;
    double iter_init_beta = 2.5;
    std::string iter_init_file;
    std::string iter_final;
    iter->add_option("--steps", iter_steps, "number of operator applications (integer >= 0)")->capture_default_str();
    iter->add_option("--init", iter_init, "initial density: uniform, random, parry or file")
        ->check(CLI::IsMember({"uniform", "random", "parry", "file"}))
        ->capture_default_str();
    iter->add_option("--inner-jumps", iter_inner, "inner jumps of the random initial density (integer >= 1)")
        ->capture_default_str();
    iter->add_option("--init-beta", iter_init_beta, "slope of the Parry initial density (> 1)")->capture_default_str();
    iter->add_option("--init-file", iter_init_file, "JSON density file for --init file");
    iter->add_option("--final-density", iter_final, "write the final density as JSON to this file");

    // stability
    auto* stab = app.add_subcommand("stability", "pool statistics over time (mean slope, variation, distances)");
    CouplingOptions stab_c;
    stab_c.add(stab);
    int stab_steps = 100, stab_k1 = 10, stab_k2 = 10, stab_m = 10, stab_ref_steps = 0, stab_ref_inner = 10;
    std::optional<double> stab_near;
    stab->add_option("--steps", stab_steps, "trajectory length T (steps, >= 1)")->capture_default_str();
    stab->add_option("--k1", stab_k1, "number of jump-count groups K1 (>= 1)")->capture_default_str();
    stab->add_option("--k2", stab_k2, "densities per group K2 (>= 1)")->capture_default_str();
    stab->add_option("--max-jumps", stab_m, "largest inner jump count M (>= 1)")->capture_default_str();
    stab->add_option("--near-uniform", stab_near, "blend the pool toward uniform until var < this bound (> 0)");
    stab->add_option("--ref-steps", stab_ref_steps,
                     "length T-bar of the reference run; 0 disables reference distances (steps)")
        ->capture_default_str();
    stab->add_option("--ref-inner-jumps", stab_ref_inner, "inner jumps of the reference run's initial density")
        ->capture_default_str();

    // eps-sweep
    auto* sweep = app.add_subcommand("eps-sweep", "convergence verdict per coupling strength as CSV");
    CouplingOptions sweep_c;
    sweep_c.add(sweep, false);
    SweepSpec sw;
    int sweep_k1 = 10, sweep_k2 = 10, sweep_m = 10;
    sweep->add_option("--eps-lo", sw.eps_lo, "first epsilon (>= 0)")->capture_default_str();
    sweep->add_option("--eps-hi", sw.eps_hi, "last epsilon")->capture_default_str();
    sweep->add_option("--eps-step", sw.eps_step, "epsilon grid spacing (> 0)")->capture_default_str();
    sweep->add_option("--steps", sw.steps, "trajectory length (steps)")->capture_default_str();
    sweep->add_option("--t0", sw.t0, "window start T0 (step index)")->capture_default_str();
    sweep->add_option("--t1", sw.t1, "window end T1 (step index, <= steps)")->capture_default_str();
    sweep->add_option("--tol", sw.tol, "convergence tolerance (> 0)")->capture_default_str();
    sweep->add_option("--k1", sweep_k1, "number of jump-count groups K1 (>= 1)")->capture_default_str();
    sweep->add_option("--k2", sweep_k2, "densities per group K2 (>= 1)")->capture_default_str();
    sweep->add_option("--max-jumps", sweep_m, "largest inner jump count M (>= 1)")->capture_default_str();

    std::vector<std::string> names;
    for (const auto* s : app.get_subcommands({})) {
        names.push_back(s->get_name());
    }

    try {
        args = expand_config(std::move(args), names);
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidationError;
    }

    // Validate everything first, then compute.
    std::function<void()> compute;
    try {
        if (*parry) {
            require(parry_beta || parry_k, "parry needs --beta or --beta-k");
            if (parry_beta) {
                require(*parry_beta > 1.0, "--beta must be > 1");
            } else {
                require(*parry_k >= 1, "--beta-k must be >= 1");
            }
            require(parry_tol > 0.0 && parry_tol < 1.0, "--tol must lie in (0,1)");
            compute = [&] {
                nlohmann::json j;
                double beta = 0.0;
                if (parry_k) {
                    const BetaKMoments m = beta_k_moments(*parry_k);
                    beta = m.beta;
                    j["beta_k"] = {{"k", m.k},
                                   {"excess", solve_beta_k(*parry_k).excess},
                                   {"closed_normalizer", m.normalizer},
                                   {"closed_first_moment", m.first_moment},
                                   {"c", m.c}};
                } else {
                    beta = *parry_beta;
                }
                const ParryData d = parry_data(beta, parry_tol);
                j["parry"] = d;
                if (parry_k) {
                    j["beta_k"]["normalizer_diff"] = d.normalizer - j["beta_k"]["closed_normalizer"].get<double>();
                    j["beta_k"]["first_moment_diff"] =
                        d.first_moment - j["beta_k"]["closed_first_moment"].get<double>();
                }
                if (parry_density_flag) {
                    j["density"] = parry_density(beta, parry_tol);
                }
                Sink s(g.out, out);
                *s << j.dump(2) << '\n';
            };
        } else if (*betak) {
            require(bk_k >= 1 || bk_kmax >= 1, "beta-k needs k >= 1");
            compute = [&] {
                const int lo = bk_k >= 1 ? bk_k : 1;
                const int hi = bk_k >= 1 ? bk_k : bk_kmax;
                Sink s(g.out, out);
                *s << "k,beta,excess,residual,normalizer_series,normalizer_closed,first_moment_series,"
                      "first_moment_closed,c\n";
                for (int k = lo; k <= hi; ++k) {
                    const BetaK bk = solve_beta_k(k);
                    const BetaKMoments m = beta_k_moments(k);
                    const ParryData d = parry_data(m.beta);
                    *s << k << ',' << format_double(m.beta) << ',' << format_double(bk.excess) << ','
                       << format_double(bk.residual()) << ',' << format_double(d.normalizer) << ','
                       << format_double(m.normalizer) << ',' << format_double(d.first_moment) << ','
                       << format_double(m.first_moment) << ',' << format_double(m.c) << '\n';
                }
            };
        } else if (*curve) {
            require(curve_lo > 1.0, "--lo must be > 1");
            require(curve_lo < curve_hi, "--lo must be < --hi");
            require(curve_step > 0.0, "--step must be > 0");
            require(curve_n >= 1, "--n must be >= 1");
            require(curve_tol > 0.0 && curve_tol < 1.0, "--tol must lie in (0,1)");
            compute = [&] {
                CurveMethod how;
                how.method = use_ergodic ? PsiMethod::ergodic_average : PsiMethod::parry_series;
                how.tol = curve_tol;
                how.n_iters = curve_n;
                how.seed = g.seed;
                err << "psi-curve: " << closed_grid(curve_lo, curve_hi, curve_step).size() << " grid points\n";
                const auto samples =
                    psi_curve(curve_c.self_consistency(), curve_lo, curve_hi, curve_step, how, g.threads);
                Sink s(g.out, out);
                write_psi_curve_csv(*s, samples);
            };
        } else if (*fixed) {
            require(fixed_lo > 1.0, "--lo must be > 1");
            require(fixed_lo < fixed_hi, "--lo must be < --hi");
            require(fixed_scan > 0.0, "--scan must be > 0");
            require(fixed_bisect > 0.0, "--bisect-tol must be > 0");
            require(fixed_tol > 0.0 && fixed_tol < 1.0, "--tol must lie in (0,1)");
            if (eps_star_at) {
                require(*eps_star_at > 2.0, "--eps-star-at must be > 2");
            }
            compute = [&] {
                const SelfConsistency sc = fixed_c.self_consistency();
                const FixedPointScan scan =
                    find_fixed_points(sc, fixed_lo, fixed_hi, fixed_scan, fixed_bisect, fixed_tol, g.threads);
                nlohmann::json j = scan;
                j["epsilon"] = sc.epsilon;
                j["f"] = sc.f.name();
                if (eps_star_at) {
                    const double es = epsilon_star_2(sc.f, *eps_star_at, fixed_tol);
                    const double p = psi(SelfConsistency(1.01 * es, sc.f), *eps_star_at, fixed_tol).psi;
                    j["epsilon_star_2"] = {{"beta_bar", *eps_star_at},
                                           {"value", es},
                                           {"psi_at_1_01", p},
                                           {"certified", p > *eps_star_at}};
                }
                Sink s(g.out, out);
                *s << j.dump(2) << '\n';
            };
        } else if (*iter) {
            require(iter_steps >= 0, "--steps must be >= 0");
            require(iter_inner >= 1, "--inner-jumps must be >= 1");
            require(iter_init_beta > 1.0, "--init-beta must be > 1");
            std::optional<StepDensity> f0;
            if (iter_init == "file") {
                require(!iter_init_file.empty(), "--init file needs --init-file");
                f0 = read_density_file(iter_init_file);
            }
            compute = [&, f0]() mutable {
                if (!f0) {
                    if (iter_init == "uniform") {
                        f0 = StepDensity::uniform();
                    } else if (iter_init == "parry") {
                        f0 = parry_density(iter_init_beta);
                    } else {
                        f0 = random_density(iter_inner, g.seed);
                    }
                }
                const SelfConsistency sc = iter_c.self_consistency();
                std::vector<TraceRow> rows;
                IterateResult res =
                    iterate(sc, *f0, iter_steps, [&](int t, const StepDensity& f, const PushforwardRecord& r) {
                        rows.push_back({t, r.beta_used, f.jump_count(), total_variation(f), expectation(f),
                                        r.integral_drift});
                    });
                {
                    Sink s(g.out, out);
                    write_trace_csv(*s, rows);
                }
                if (!iter_final.empty()) {
                    std::ofstream fo(iter_final);
                    if (!fo) {
                        throw Error("cannot open " + iter_final);
                    }
                    fo << nlohmann::json(res.final_density).dump() << '\n';
                }
                res.rethrow_if_failed();
            };
        } else if (*stab) {
            require(stab_steps >= 1, "--steps must be >= 1");
            require(stab_k1 >= 1 && stab_k2 >= 1 && stab_m >= 1, "--k1, --k2, --max-jumps must be >= 1");
            require(stab_ref_steps >= 0, "--ref-steps must be >= 0");
            require(stab_ref_inner >= 1, "--ref-inner-jumps must be >= 1");
            if (stab_near) {
                require(*stab_near > 0.0, "--near-uniform must be > 0");
            }
            compute = [&] {
                const SelfConsistency sc = stab_c.self_consistency();
                PoolSpec ps{stab_k1, stab_m, stab_k2, g.seed, stab_near};
                std::optional<StepDensity> ref;
                if (stab_ref_steps > 0) {
                    err << "stability: reference run of " << stab_ref_steps << " steps\n";
                    ref = reference_density(sc, random_density(stab_ref_inner, derive_seed(g.seed, 0xFEED)),
                                            stab_ref_steps);
                }
                err << "stability: " << ps.size() << " trajectories of " << stab_steps << " steps\n";
                const auto stats = run_ensemble(sc, generate_pool(ps), stab_steps, ref, g.threads);
                Sink s(g.out, out);
                write_stats_csv(*s, stats);
            };
        } else if (*sweep) {
            require(sw.eps_lo >= 0.0 && sw.eps_lo <= sw.eps_hi, "need 0 <= --eps-lo <= --eps-hi");
            require(sw.eps_step > 0.0, "--eps-step must be > 0");
            require(sw.steps >= 1, "--steps must be >= 1");
            require(sw.t0 >= 0 && sw.t0 < sw.t1 && sw.t1 <= sw.steps, "need 0 <= --t0 < --t1 <= --steps");
            require(sw.tol > 0.0, "--tol must be > 0");
            require(sweep_k1 >= 1 && sweep_k2 >= 1 && sweep_m >= 1, "--k1, --k2, --max-jumps must be >= 1");
            compute = [&] {
                PoolSpec ps{sweep_k1, sweep_m, sweep_k2, g.seed, std::nullopt};
                err << "eps-sweep: " << closed_grid(sw.eps_lo, sw.eps_hi, sw.eps_step).size() << " rows\n";
                const auto rows = epsilon_sweep(sweep_c.function(), sw, ps, g.threads);
                Sink s(g.out, out);
                write_sweep_csv(*s, rows);
            };
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return kValidationError;
    }

    try {
        compute();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kComputationError;
    }
    return kOk;
}

} // namespace betasc::cli

#endif // BETASC_TOOLS_CLI_HPP
