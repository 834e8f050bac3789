#ifndef BETASC_IO_HPP
#define BETASC_IO_HPP

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beta_dynamics.hpp"
#include "experiments.hpp"
#include "psi_analysis.hpp"
#include "step_density.hpp"
#include "transfer.hpp"

namespace betasc {

/// %.17g: enough digits for every double to read back bit-exact.
inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string to_string(PsiMethod m) { return m == PsiMethod::parry_series ? "parry" : "ergodic"; }

// ---- JSON -----------------------------------------------------------------

inline void to_json(nlohmann::json& j, const StepDensity& f)
{
    j = nlohmann::json{{"jumps", std::vector<double>(f.jumps().begin(), f.jumps().end())},
                       {"heights", std::vector<double>(f.heights().begin(), f.heights().end())}};
}

inline StepDensity density_from_json(const nlohmann::json& j)
{
    return StepDensity(j.at("jumps").get<std::vector<double>>(), j.at("heights").get<std::vector<double>>());
}

inline void to_json(nlohmann::json& j, const ParryData& d)
{
    j = nlohmann::json{{"beta", d.beta},
                       {"orbit", d.orbit},
                       {"normalizer", d.normalizer},
                       {"first_moment", d.first_moment},
                       {"expected_value", d.expected_value},
                       {"truncation_bound", d.truncation_bound},
                       {"terminated", d.terminated}};
}

inline void to_json(nlohmann::json& j, const FixedPoint& r)
{
    j = nlohmann::json{{"beta", r.beta},
                       {"residual", r.residual},
                       {"bracket", {r.bracket_lo, r.bracket_hi}},
                       {"slope_bound", r.slope_bound}};
}

inline void to_json(nlohmann::json& j, const FixedPointScan& s)
{
    j = nlohmann::json{{"roots", s.betas()},
                       {"details", s.roots},
                       {"lebesgue_fixed_point", s.lebesgue_in_range},
                       {"scan_step", s.scan_step},
                       {"max_bracket_width", s.bracket_width}};
}

// ---- CSV ------------------------------------------------------------------

inline void write_psi_curve_csv(std::ostream& os, const std::vector<PsiSample>& samples)
{
    os << "beta,psi,method,n_iters\n";
    for (const auto& s : samples) {
        os << format_double(s.beta) << ',' << format_double(s.psi) << ',' << to_string(s.method) << ',';
        if (s.method == PsiMethod::ergodic_average) {
            os << s.n_iters;
        }
        os << '\n';
    }
}

/// One row of an iterate trace: the step that produced f_t.
struct TraceRow {
    int t = 0;
    double beta_used = 0.0;
    std::size_t jump_count = 0;
    double total_variation = 0.0;
    double expectation = 0.0;
    double integral_drift = 0.0;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows)
{
    os << "t,beta_used,jump_count,total_variation,expectation,integral_drift\n";
    for (const auto& r : rows) {
        os << r.t << ',' << format_double(r.beta_used) << ',' << r.jump_count << ','
           << format_double(r.total_variation) << ',' << format_double(r.expectation) << ','
           << format_double(r.integral_drift) << '\n';
    }
}

inline void write_stats_csv(std::ostream& os, const std::vector<TrajectoryStats>& stats)
{
    os << "t,mean_beta,mean_var,mean_var_to_ref,mean_l1_to_ref\n";
    for (const auto& s : stats) {
        os << s.t << ',' << format_double(s.mean_beta) << ',' << format_double(s.mean_var) << ','
           << format_optional(s.mean_var_to_ref) << ',' << format_optional(s.mean_l1_to_ref) << '\n';
    }
}

/// Failed rows leave the window cells empty and `converged` false.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "epsilon,window_var_min,window_var_max,window_beta_min,window_beta_max,converged\n";
    for (const auto& r : rows) {
        os << format_double(r.epsilon) << ',';
        if (r.failure) {
            os << ",,,,false\n";
            continue;
        }
        os << format_double(r.window.var_min) << ',' << format_double(r.window.var_max) << ','
           << format_double(r.window.beta_min) << ',' << format_double(r.window.beta_max) << ','
           << (r.window.converged ? "true" : "false") << '\n';
    }
}

} // namespace betasc

#endif // BETASC_IO_HPP
