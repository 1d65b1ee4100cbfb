/*
   Copyright 2026 The snls Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// snls: command-line driver for simulations and convergence studies.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "snls/config.hpp"
#include "snls/experiments.hpp"
#include "snls/io.hpp"
#include "snls/selftest.hpp"

namespace {

using namespace snls;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

constexpr double kSpatialMinSlope = 1.5;
constexpr double kTemporalMinSlope = 0.4;
constexpr double kIncrementSlopeLow = 0.8;
constexpr double kIncrementSlopeHigh = 1.2;

struct Overrides {
    std::string config;
    std::optional<std::string> alpha, lambda, n_modes, tau, steps, seed, out, replicas,
        test_function, axis;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--alpha", o.alpha, "damping alpha > 0");
    sub->add_option("--lambda", o.lambda, "nonlinearity sign: -1, 0 or 1");
    sub->add_option("--n-modes", o.n_modes, "Galerkin modes N");
    sub->add_option("--tau", o.tau, "time step (alpha*tau <= 1)");
    sub->add_option("--steps", o.steps, "number of (averaged) steps");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--replicas", o.replicas, "Monte Carlo replicas");
    sub->add_option("--test-function", o.test_function,
                    "exp_neg_mass, inv_mass or sin_mode1");
}

RunConfig build_config(StudyKind kind, const Overrides& o) {
    RunConfig cfg = default_config(kind);
    if (!o.config.empty()) {
        cfg = load_config(o.config, cfg);
        const bool invariant_pair = (kind == StudyKind::invariant_error_spatial ||
                                     kind == StudyKind::invariant_error_temporal) &&
                                    (cfg.study.kind == StudyKind::invariant_error_spatial ||
                                     cfg.study.kind == StudyKind::invariant_error_temporal);
        if (cfg.study.kind != kind && !invariant_pair)
            throw ConfigError("configuration study.kind '" + std::string(name(cfg.study.kind)) +
                              "' does not match the subcommand");
    }
    auto set = [&](const char* key, const std::optional<std::string>& v) {
        if (v) apply_setting(cfg, key, *v);
    };
    if (o.axis) {
        if (*o.axis == "space") cfg.study.kind = StudyKind::invariant_error_spatial;
        else if (*o.axis == "time") cfg.study.kind = StudyKind::invariant_error_temporal;
        else throw ConfigError("--axis must be 'space' or 'time'");
        if (o.config.empty()) {
            const auto d = default_config(cfg.study.kind);
            cfg.study.resolutions = d.study.resolutions;
            cfg.study.reference = d.study.reference;
            cfg.study.step.tau = d.study.step.tau;
        }
    }
    set("model.alpha", o.alpha);
    set("model.lambda", o.lambda);
    set("model.n_modes", o.n_modes);
    set("step.tau", o.tau);
    set("study.n_steps", o.steps);
    set("seed", o.seed);
    set("io.out", o.out);
    set("study.n_replicas", o.replicas);
    set("study.test_function", o.test_function);
    cfg.study.validate();
    return cfg;
}

json rate_details(const RateStudyReport& rep, double min_slope) {
    json pts = json::array();
    for (const auto& p : rep.points)
        pts.push_back({{"resolution", p.resolution}, {"error", p.error}, {"stderr", p.stderr_},
                       {"retained", p.retained}});
    json d = {{"points", pts},
              {"fit_ok", rep.fit_ok},
              {"streams_consistent", rep.streams_consistent},
              {"min_slope", min_slope},
              {"total_iterations", rep.total_iterations}};
    if (rep.fit_ok) d["fit"] = fit_json(rep.fit);
    else d["fit_error"] = rep.fit_error;
    return d;
}

Verdict rate_verdict(const RateStudyReport& rep, double min_slope) {
    return rep.fit_ok && rep.streams_consistent && rep.fit.slope >= min_slope ? Verdict::pass
                                                                              : Verdict::fail;
}

void report_rate(const RateStudyReport& rep, const char* axis) {
    for (const auto& p : rep.points)
        std::printf("  %s = %-12s error %.4e  stderr %.2e%s\n", axis,
                    format_double(p.resolution).c_str(), p.error, p.stderr_,
                    p.retained ? "" : "  (excluded)");
    if (rep.fit_ok)
        std::printf("  slope %.3f  95%% CI [%.3f, %.3f]  r^2 %.4f\n", rep.fit.slope,
                    rep.fit.ci_low, rep.fit.ci_high, rep.fit.r_squared);
    else
        std::printf("  no fit: %s\n", rep.fit_error.c_str());
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void write_rate(RunManifest& m, const std::filesystem::path& dir, const RunConfig& cfg,
                const RateStudyReport& rep, const std::string& stem) {
    if (cfg.io.csv) emit(m, dir, stem + ".csv", rate_csv(rep));
    if (cfg.io.json && rep.fit_ok) emit(m, dir, stem + "_fit.json", fit_json(rep.fit).dump(2) + "\n");
    for (const auto& w : rep.warnings) m.warnings.push_back(w);
}

Verdict run_simulate(const RunConfig& cfg, RunManifest& m, const std::filesystem::path& dir) {
    const auto path = dir / "trajectory.csv";
    const auto tmp = dir / "trajectory.csv.tmp";
    TrajectoryCsv csv(tmp);
    const auto sum = simulate(cfg.study, [&](const TrajectoryRow& r) { csv.add(r); });
    csv.close();
    std::filesystem::rename(tmp, path);
    m.outputs.push_back(path.string());
    m.details = {{"steps", sum.steps},
                 {"total_iterations", sum.total_iterations},
                 {"max_iterations", sum.max_iterations},
                 {"max_residual", sum.max_residual},
                 {"final_mass", mass(sum.final_state)}};
    std::printf("simulated %zu steps, mean fixed-point iterations %.2f (max %d)\n", sum.steps,
                sum.steps ? static_cast<double>(sum.total_iterations) / static_cast<double>(sum.steps) : 0.0,
                sum.max_iterations);
    return Verdict::not_applicable;
}

Verdict run_ergodicity(const RunConfig& cfg, RunManifest& m, const std::filesystem::path& dir) {
    const auto rep = ergodicity_study(cfg.study);
    if (cfg.io.csv) {
        emit(m, dir, "ergodicity.csv", ergodicity_csv(rep));
        emit(m, dir, "drift.csv", drift_csv(rep));
    }
    json ch = json::array();
    for (const auto& c : rep.channels) {
        std::printf("  %-18s", c.name.c_str());
        json per = json::array();
        for (const auto& s : c.per_ic) {
            std::printf("  %.6g +- %.2g", s.mean, s.stderr_);
            per.push_back({{"mean", s.mean}, {"stderr", s.stderr_}});
        }
        std::printf("  max z %.2f%s\n", c.max_z, c.in_verdict ? (c.agree ? "" : "  DISAGREE") : "  (reported)");
        ch.push_back({{"name", c.name}, {"per_ic", per}, {"max_z", c.max_z}, {"agree", c.agree},
                      {"in_verdict", c.in_verdict}});
    }
    json dr = json::array();
    for (const auto& d : rep.drift) {
        std::printf("  drift %-9s ic %zu: middle %.6g last %.6g (%.1f%%)\n", d.name.c_str(), d.ic,
                    d.middle, d.last, 100.0 * d.rel_change);
        dr.push_back({{"name", d.name}, {"ic", d.ic}, {"middle", d.middle}, {"last", d.last},
                      {"rel_change", d.rel_change}, {"pass", d.pass}});
    }
    m.details = {{"channels", ch},          {"drift", dr},
                 {"ergodic", rep.ergodic_pass}, {"no_drift", rep.drift_pass},
                 {"total_iterations", rep.total_iterations}, {"max_iterations", rep.max_iterations}};
    if (cfg.study.model.lambda == 0) {
        m.details["linear_mass_target"] = rep.linear_mass_target;
        m.details["linear_target_pass"] = rep.linear_target_pass;
        std::printf("  closed-form stationary mass %.6g: %s\n", rep.linear_mass_target,
                    rep.linear_target_pass ? "matched" : "MISMATCH");
    }
    return rep.ergodic_pass && rep.drift_pass && rep.linear_target_pass ? Verdict::pass : Verdict::fail;
}

Verdict run_spatial(const RunConfig& cfg, RunManifest& m, const std::filesystem::path& dir,
                    bool invariant) {
    const auto rep = spatial_order_study(cfg.study, invariant);
    report_rate(rep, "N");
    write_rate(m, dir, cfg, rep, "rate");
    m.details = rate_details(rep, kSpatialMinSlope);
    return rate_verdict(rep, kSpatialMinSlope);
}

Verdict run_temporal(const RunConfig& cfg, RunManifest& m, const std::filesystem::path& dir,
                     bool invariant) {
    const auto rep = temporal_order_study(cfg.study, invariant);
    report_rate(rep, "tau");
    write_rate(m, dir, cfg, rep, "rate");
    m.details = rate_details(rep, kTemporalMinSlope);
    Verdict v = rate_verdict(rep, kTemporalMinSlope);
    if (invariant) return v;

    const auto inc = increment_scaling_study(cfg.study);
    std::printf("  increment slope %.3f  95%% CI [%.3f, %.3f]\n", inc.fit.slope, inc.fit.ci_low,
                inc.fit.ci_high);
    if (cfg.io.csv) emit(m, dir, "increments.csv", rate_csv(inc));
    if (cfg.io.json) emit(m, dir, "increments_fit.json", fit_json(inc.fit).dump(2) + "\n");
    const bool inc_ok = inc.fit.slope >= kIncrementSlopeLow && inc.fit.slope <= kIncrementSlopeHigh;
    m.details["increment_fit"] = fit_json(inc.fit);
    m.details["increment_pass"] = inc_ok;
    if (!inc_ok) v = Verdict::fail;

    if (cfg.study.model.lambda == 0) {
        const auto noise = cfg.study.noise.build(static_cast<std::size_t>(cfg.study.model.n_modes));
        std::vector<double> b;
        for (double tau : cfg.study.resolutions)
            b.push_back(linear_moment_bias(cfg.study.model.alpha, noise, tau));
        const auto bf = fit_rate(cfg.study.resolutions, b);
        std::printf("  closed-form stationary mass bias slope %.3f\n", bf.slope);
        m.details["linear_bias_fit"] = fit_json(bf);
    }
    return v;
}

Verdict run_operator(const RunConfig& cfg, RunManifest& m, const std::filesystem::path& dir) {
    OperatorGrid grid;
    grid.alpha = cfg.study.model.alpha;
    const auto rep = operator_check(grid);
    if (cfg.io.csv) emit(m, dir, "operator.csv", operator_csv(rep));
    std::printf("  truncation: closed form error %.2e, constant %.4f, spread %.3f\n",
                rep.a_max_equality_error, rep.a_constant, rep.a_spread);
    std::printf("  S_tau^k vs S(t_k) in L(H2,L2): constants");
    for (double c : rep.b_constants) std::printf(" %.4f", c);
    std::printf("  spread %.3f\n", rep.b_spread);
    std::printf("  S_tau^k vs S(t_k) in L(H1,H1): constant %.4f\n", rep.c_constant);
    m.details = {{"a_equality_error", rep.a_max_equality_error}, {"a_constant", rep.a_constant},
                 {"a_spread", rep.a_spread},                     {"b_constants", rep.b_constants},
                 {"b_spread", rep.b_spread},                     {"c_constant", rep.c_constant},
                 {"pass_a", rep.pass_a}, {"pass_b", rep.pass_b}, {"pass_c", rep.pass_c}};
    return rep.pass() ? Verdict::pass : Verdict::fail;
}

Verdict run_selftest(RunManifest& m) {
    json checks = json::array();
    bool ok = true;
    for (const auto& c : snls::run_selftest()) {
        std::printf("%s  %-40s %.3e (limit %.1e)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.value, c.tolerance);
        checks.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance},
                          {"pass", c.pass}});
        ok = ok && c.pass;
    }
    m.details = {{"checks", checks}};
    return ok ? Verdict::pass : Verdict::fail;
}

int dispatch(const std::string& command, StudyKind kind, const Overrides& o) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = build_config(kind, o);
    const std::filesystem::path dir = cfg.io.out;
    ensure_directory(dir);
    RunManifest m;
    m.command = command;
    m.config = cfg;
    int code = kExitOk;
    try {
        switch (cfg.study.kind) {
        case StudyKind::simulate: m.verdict = run_simulate(cfg, m, dir); break;
        case StudyKind::ergodicity: m.verdict = run_ergodicity(cfg, m, dir); break;
        case StudyKind::spatial_order: m.verdict = run_spatial(cfg, m, dir, false); break;
        case StudyKind::invariant_error_spatial: m.verdict = run_spatial(cfg, m, dir, true); break;
        case StudyKind::temporal_order: m.verdict = run_temporal(cfg, m, dir, false); break;
        case StudyKind::invariant_error_temporal: m.verdict = run_temporal(cfg, m, dir, true); break;
        case StudyKind::operator_check:
            m.verdict = command == "selftest" ? run_selftest(m) : run_operator(cfg, m, dir);
            break;
        }
        if (m.verdict == Verdict::fail) code = kExitFail;
    } catch (const StepFailure& e) {
        m.verdict = Verdict::fail;
        m.details["error"] = e.what();
        m.details["residual"] = e.residual();
        m.details["step"] = e.step_index();
        code = kExitNumerical;
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
    }
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(m, dir);
    std::printf("%s: %s (%s)\n", command.c_str(), verdict_name(m.verdict), dir.string().c_str());
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Damped stochastic NLS: spectral Galerkin / modified implicit Euler studies"};
    app.set_version_flag("--version", SNLS_VERSION);
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        StudyKind kind;
    };
    const Sub subs[] = {
        {"simulate", "one trajectory, observables to trajectory.csv", StudyKind::simulate},
        {"ergodicity", "time averages from several initial conditions", StudyKind::ergodicity},
        {"spatial-order", "weak error in N at fixed T", StudyKind::spatial_order},
        {"temporal-order", "weak error in tau at fixed T", StudyKind::temporal_order},
        {"invariant-error", "weak error of long-run time averages", StudyKind::invariant_error_temporal},
        {"operator-check", "exact operator-norm bounds", StudyKind::operator_check},
        {"selftest", "deterministic invariant suite", StudyKind::operator_check},
    };
    std::vector<Overrides> overrides(std::size(subs));
    std::vector<CLI::App*> apps;
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        auto* sub = app.add_subcommand(subs[i].name, subs[i].help);
        add_common(sub, overrides[i]);
        if (subs[i].kind == StudyKind::invariant_error_temporal)
            sub->add_option("--axis", overrides[i].axis, "space or time (default time)");
        apps.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    for (std::size_t i = 0; i < std::size(subs); ++i) {
        if (!apps[i]->parsed()) continue;
        try {
            return dispatch(subs[i].name, subs[i].kind, overrides[i]);
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "configuration error: %s\n", e.what());
            return kExitConfig;
        } catch (const UsageError& e) {
            std::fprintf(stderr, "usage error: %s\n", e.what());
            return kExitConfig;
        } catch (const IoError& e) {
            std::fprintf(stderr, "i/o error: %s\n", e.what());
            return kExitConfig;
        } catch (const std::filesystem::filesystem_error& e) {
            std::fprintf(stderr, "i/o error: %s\n", e.what());
            return kExitConfig;
        } catch (const StepFailure& e) {
            std::fprintf(stderr, "numerical failure: %s\n", e.what());
            return kExitNumerical;
        }
    }
    return kExitConfig;
}
