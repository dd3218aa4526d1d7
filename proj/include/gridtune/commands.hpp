#pragma once

// Command dispatch for the gridtune tool: analyze, optimize, delay, simulate
// and sweep. Each command writes <out>/<command>.csv, optionally an SVG plot,
// and a machine-readable run.json; failures write error.json instead.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gridtune/closedform.hpp"
#include "gridtune/config.hpp"
#include "gridtune/csv.hpp"
#include "gridtune/delay.hpp"
#include "gridtune/errors.hpp"
#include "gridtune/lyap.hpp"
#include "gridtune/netmodel.hpp"
#include "gridtune/sim.hpp"
#include "gridtune/spectral.hpp"
#include "gridtune/svg.hpp"
#include "gridtune/tuning.hpp"

namespace gridtune {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitComputation = 3;

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"analyze", "optimize", "delay", "simulate", "sweep"};
    return names;
}

struct CommandOptions {
    std::string out_dir = ".";
    bool plot = false;
    std::optional<std::uint64_t> seed;
    std::ostream* log = &std::cout;
};

struct SummaryItem {
    std::string key;
    std::variant<double, std::string, bool, std::size_t> value;
};

struct CommandOutput {
    std::vector<std::string> files;
    std::vector<SummaryItem> summary;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson json_number(double v) {
    if (std::isfinite(v)) return v;
    return csv::format_double(v);
}

inline ojson to_json(const SummaryItem& item) {
    return std::visit(
        [](const auto& v) -> ojson {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return json_number(v);
            else return v;
        },
        item.value);
}

inline std::string to_text(const SummaryItem& item) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return csv::format_double(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else if constexpr (std::is_same_v<T, std::size_t>) return std::to_string(v);
            else return v;
        },
        item.value);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << text;
}

struct Context {
    const RunConfig& cfg;
    const CommandOptions& opt;
    std::filesystem::path out;
    CommandOutput result;

    void emit(const std::string& name, const csv::Table& table) {
        table.write((out / name).string());
        result.files.push_back(name);
    }
    void emit_svg(const std::string& name, const svg::LinePlot& plot) {
        if (!opt.plot) return;
        write_text(out / name, svg::render(plot));
        result.files.push_back(name);
    }
    void add(std::string key, std::variant<double, std::string, bool, std::size_t> v) {
        result.summary.push_back({std::move(key), std::move(v)});
    }
};

inline std::vector<double> laplacian_eigenvalues(const RunConfig& cfg) {
    return eigendecompose(build_laplacian(cfg.network), cfg.analysis.tolerances.zero_eigenvalue).eigenvalues();
}

/// Equivalent controller for the state-space routes, which need a finite
/// positive delta. delta = 0 is the constant gain nu, delta = inf is droop.
inline ControllerConfig state_space_controller(const ControllerConfig& config, double delta_zero_substitute = 0.0) {
    if (const auto* c = std::get_if<IDroop>(&config)) {
        if (std::isinf(c->delta)) return Droop{c->r_r_inv};
        if (c->delta == 0.0) {
            if (delta_zero_substitute > 0.0) return IDroop{c->nu, delta_zero_substitute, c->r_r_inv};
            return Droop{c->nu};
        }
    }
    return config;
}

inline double rel_diff(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
    if (a == b) return 0.0;
    if (std::isinf(a) || std::isinf(b)) return std::numeric_limits<double>::infinity();
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) / scale;
}

inline const IDroop& require_idroop(const RunConfig& cfg, const char* command) {
    const auto* c = std::get_if<IDroop>(&cfg.controller);
    if (!c) throw ValidationError(std::vector<Violation>{{"controller.type", std::string(command) + " requires an idroop controller"}});
    return *c;
}

// ---------------------------------------------------------------------------

inline void run_analyze(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& tol = cfg.analysis.tolerances;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    const bool homogeneous = cfg.params.is_homogeneous();
    const bool unbounded =
        std::holds_alternative<VirtualInertia>(cfg.controller) && (cfg.params.k_w().array() > 0.0).any();
    const auto lambdas = laplacian_eigenvalues(cfg);
    const ControllerConfig numeric = state_space_controller(cfg.controller);
    const double r = droop_gain(cfg.controller);

    double closed = nan, modal = nan, full = nan, droop = nan;
    std::vector<double> closed_modes, modal_modes;
    if (unbounded) {
        closed = modal = full = inf;
    } else {
        full = h2_numeric(cfg.network, cfg.params, numeric, tol.hurwitz_margin, tol.zero_eigenvalue).squared_norm;
        if (homogeneous) {
            const auto cf = h2_closed_form(lambdas, cfg.params, cfg.controller);
            closed = cf.squared_norm;
            if (cf.per_mode) closed_modes = *cf.per_mode;
            const auto dec = eigendecompose(build_laplacian(cfg.network), tol.zero_eigenvalue);
            const auto md = h2_numeric_modal(modal_subsystems(dec, cfg.params, numeric), tol.hurwitz_margin);
            modal = md.squared_norm;
            modal_modes = *md.per_mode;
        }
    }
    if (homogeneous) {
        const UniformParams p = cfg.params.uniform_values();
        droop = h2_droop(lambdas.size(), p.m, p.d, r, p.k_p, p.k_w);
    } else {
        droop = h2_numeric(cfg.network, cfg.params, Droop{r}, tol.hurwitz_margin, tol.zero_eigenvalue).squared_norm;
    }
    const double diff = homogeneous ? std::max(rel_diff(closed, full), rel_diff(closed, modal)) : nan;
    const bool agree = homogeneous ? diff <= tol.agreement : true;

    csv::Table t({"controller", "n_buses", "homogeneous", "closed_form", "lyapunov_modal", "lyapunov_full",
                  "rel_diff", "agree", "h2_droop"});
    t.add_row({controller_name(cfg.controller), cfg.network.size(), homogeneous, closed, modal, full, diff, agree,
               droop});
    ctx.emit("analyze.csv", t);

    if (!closed_modes.empty() && closed_modes.size() == modal_modes.size()) {
        csv::Table m({"mode", "lambda", "closed_form", "lyapunov_modal"});
        for (std::size_t k = 0; k < lambdas.size(); ++k) m.add_row({k, lambdas[k], closed_modes[k], modal_modes[k]});
        ctx.emit("analyze_modes.csv", m);
        svg::LinePlot plot{"Per-mode squared H2 norm", "Laplacian eigenvalue", "squared H2 norm", false, {}};
        plot.series.push_back({"closed form", lambdas, closed_modes});
        plot.series.push_back({"Lyapunov (modal)", lambdas, modal_modes});
        ctx.emit_svg("analyze.svg", plot);
    }

    ctx.add("controller", controller_name(cfg.controller));
    ctx.add("n_buses", cfg.network.size());
    ctx.add("homogeneous", homogeneous);
    ctx.add("closed_form", closed);
    ctx.add("lyapunov_modal", modal);
    ctx.add("lyapunov_full", full);
    ctx.add("rel_diff", diff);
    ctx.add("agree", agree);
    ctx.add("h2_droop", droop);
}

inline void run_optimize(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const UniformParams p = cfg.params.uniform_values();
    const auto lambdas = laplacian_eigenvalues(cfg);
    const double r = droop_gain(cfg.controller);
    const TuningReport rep = tune(lambdas, p.m, p.d, r, p.k_p, p.k_w, cfg.analysis.tuning);
    const double improvement = rep.h2_droop - rep.h2_at_optimum;

    csv::Table t({"nu_star", "nu_capped", "interval_lower", "interval_upper", "interval_lower_closed",
                  "interval_empty", "regime", "threshold_gap", "h2_at_optimum", "delta_rec", "h2_at_delta_rec",
                  "h2_droop", "improvement"});
    t.add_row({rep.nu_star, rep.nu_capped, rep.interval.lower, rep.interval.upper, rep.interval.lower_closed,
               rep.interval.empty, to_string(rep.regime), rep.threshold_gap, rep.h2_at_optimum, rep.delta_rec,
               rep.h2_at_delta_rec, rep.h2_droop, improvement});
    ctx.emit("optimize.csv", t);

    svg::LinePlot plot{"Squared H2 norm at delta = 0 versus nu", "nu", "squared H2 norm", false, {}};
    const double top = std::max({2.0 * rep.nu_star, 2.0 * r, 1.0});
    std::vector<double> nus = linspace(0.0, top, 200), g, droop;
    for (double nu : nus) {
        g.push_back(g_of_nu(lambdas.size(), p.m, p.d, p.k_p, p.k_w, nu));
        droop.push_back(rep.h2_droop);
    }
    plot.series.push_back({"iDroop, delta = 0", nus, g});
    plot.series.push_back({"droop", nus, droop});
    ctx.emit_svg("optimize.svg", plot);

    ctx.add("nu_star", rep.nu_star);
    ctx.add("nu_capped", rep.nu_capped);
    ctx.add("interval_lower", rep.interval.lower);
    ctx.add("interval_upper", rep.interval.upper);
    ctx.add("regime", std::string(to_string(rep.regime)));
    ctx.add("threshold_gap", rep.threshold_gap);
    ctx.add("h2_at_optimum", rep.h2_at_optimum);
    ctx.add("h2_at_delta_rec", rep.h2_at_delta_rec);
    ctx.add("h2_droop", rep.h2_droop);
    ctx.add("improvement", improvement);
}

inline void run_delay(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const UniformParams p = cfg.params.uniform_values();
    const auto lambdas = laplacian_eigenvalues(cfg);
    const double lambda_n = *std::max_element(lambdas.begin(), lambdas.end());
    const auto& bis_opt = cfg.analysis.delay;
    const double d_used = p.d > 0.0 ? p.d : bis_opt.d_floor;

    csv::Table t({"method", "tau_rob", "crossover_frequency", "lower_bound", "effective_gain", "d_used",
                  "abs_diff_vs_closed", "agree"});
    std::optional<DelayReport> closed;
    if (constant_gain_regime(cfg.controller)) {
        closed = tau_rob_closed(lambda_n, p.m, p.d, cfg.controller);
        t.add_row({to_string(closed->method), closed->tau_rob, closed->crossover_frequency, closed->lower_bound,
                   closed->effective_gain, p.d, 0.0, true});
    }
    const DelayReport bis = tau_rob_bisection(lambdas, p.m, p.d, cfg.controller, bis_opt);
    double diff = std::numeric_limits<double>::quiet_NaN();
    bool agree = true;
    if (closed) {
        diff = closed->tau_rob == bis.tau_rob ? 0.0 : std::abs(closed->tau_rob - bis.tau_rob);
        agree = diff <= cfg.analysis.tolerances.delay_agreement;
    }
    t.add_row({to_string(bis.method), bis.tau_rob, bis.crossover_frequency, bis.lower_bound, bis.effective_gain,
               d_used, diff, agree});
    ctx.emit("delay.csv", t);

    const DelayReport& best = closed ? *closed : bis;
    if (std::isfinite(best.tau_rob)) {
        svg::LinePlot plot{"Nyquist locus of the slowest-margin mode", "Re L", "Im L", false, {}};
        std::vector<double> re, im;
        for (double w : logspace(1e-3, 1e3, 400)) {
            const Complex L = loop_transfer(lambda_n, p.m, d_used, cfg.controller, best.tau_rob, w);
            re.push_back(L.real());
            im.push_back(L.imag());
        }
        plot.series.push_back({"L(jw) at tau_rob", re, im});
        ctx.emit_svg("delay.svg", plot);
    }

    if (closed) {
        ctx.add("tau_rob_closed", closed->tau_rob);
        ctx.add("method_closed", std::string(to_string(closed->method)));
    }
    ctx.add("tau_rob_bisection", bis.tau_rob);
    ctx.add("crossover_frequency", bis.crossover_frequency);
    ctx.add("lower_bound", bis.lower_bound);
    ctx.add("abs_diff_vs_closed", diff);
    ctx.add("agree", agree);
}

inline void run_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& tol = cfg.analysis.tolerances;
    SimConfig sc = cfg.analysis.sim;
    if (ctx.opt.seed) sc.seed = *ctx.opt.seed;
    const ControllerConfig used = state_space_controller(cfg.controller, cfg.analysis.tuning.delta_rec);
    const StateSpaceModel model = assemble_state_space(cfg.network, cfg.params, used);
    const auto lambdas = laplacian_eigenvalues(cfg);

    double analytic;
    if (cfg.params.is_homogeneous()) analytic = h2_closed_form(lambdas, cfg.params, used).squared_norm;
    else analytic = h2_numeric_full(model, tol.hurwitz_margin, tol.zero_eigenvalue).squared_norm;

    const SimResult res = simulate_sde(model, sc);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double rel = res.diverged ? nan : (analytic == 0.0 ? std::abs(res.empirical_h2_squared)
                                                             : std::abs(res.empirical_h2_squared - analytic) / analytic);
    double z = nan;
    if (!res.diverged) {
        const double dev = res.empirical_h2_squared - analytic;
        z = res.std_error > 0.0 ? dev / res.std_error : (dev == 0.0 ? 0.0 : std::copysign(
                                                                                 std::numeric_limits<double>::infinity(), dev));
    }
    csv::Table t({"controller", "trajectories", "dt", "horizon", "burn_in", "seed", "empirical_h2", "std_error",
                  "analytic_h2", "rel_error", "z_score", "diverged"});
    t.add_row({controller_name(used), sc.n_trajectories, sc.dt, sc.horizon, sc.burn_in, std::to_string(sc.seed),
               res.empirical_h2_squared, res.std_error, analytic, rel, z, res.diverged});
    ctx.emit("simulate.csv", t);

    ctx.add("empirical_h2", res.empirical_h2_squared);
    ctx.add("std_error", res.std_error);
    ctx.add("analytic_h2", analytic);
    ctx.add("rel_error", rel);
    ctx.add("z_score", z);
    ctx.add("diverged", res.diverged);

    const auto& dl = cfg.analysis.delayed;
    if (dl.taus.empty() && dl.tau_factors.empty()) return;
    const UniformParams p = cfg.params.uniform_values();
    std::vector<double> taus = dl.taus;
    double tau_ref = nan;
    if (!dl.tau_factors.empty()) {
        const double lambda_n = *std::max_element(lambdas.begin(), lambdas.end());
        tau_ref = constant_gain_regime(cfg.controller)
                      ? tau_rob_closed(lambda_n, p.m, p.d, cfg.controller).tau_rob
                      : tau_rob_bisection(lambdas, p.m, p.d, cfg.controller, cfg.analysis.delay).tau_rob;
        if (!std::isfinite(tau_ref))
            throw DomainError("tau_factors need a finite delay robustness; use explicit taus instead");
        for (double f : dl.tau_factors) taus.push_back(f * tau_ref);
    }
    csv::Table d({"tau", "tau_factor", "diverged", "peak", "dt_used", "nyquist_stable", "agree"});
    std::size_t agreeing = 0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const double tau = taus[k];
        const double factor = k >= dl.taus.size() ? dl.tau_factors[k - dl.taus.size()] : nan;
        const DelaySimResult sr = simulate_delayed(lambdas, p.m, p.d, cfg.controller, tau, dl.options);
        bool nyquist;
        try {
            nyquist = is_stable_with_delay(lambdas, p.m, p.d, cfg.controller, tau, cfg.analysis.delay.winding);
        } catch (const MarginalStabilityError&) {
            nyquist = false;
        }
        const bool agree = nyquist == !sr.diverged;
        agreeing += agree ? 1 : 0;
        d.add_row({tau, factor, sr.diverged, sr.peak, sr.dt_used, nyquist, agree});
    }
    ctx.emit("simulate_delayed.csv", d);
    ctx.add("tau_reference", tau_ref);
    ctx.add("delayed_runs", taus.size());
    ctx.add("delayed_agreeing", agreeing);
}

inline void run_sweep(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (!cfg.analysis.sweep) throw ValidationError(std::vector<Violation>{{"analysis.sweep", "sweep command needs an analysis.sweep section"}});
    const SweepSpec& spec = *cfg.analysis.sweep;
    const IDroop& c = require_idroop(cfg, "sweep");
    const UniformParams p = cfg.params.uniform_values();
    SweepPoint fixed{laplacian_eigenvalues(cfg), p.m, p.d, c.r_r_inv, c.nu, c.delta, p.k_p, p.k_w};
    const auto rows = sweep(spec.axis, spec.values, fixed);

    const std::string axis = to_string(spec.axis);
    csv::Table t({axis, "h2_idroop", "h2_droop", "tau_rob_delta0", "tau_rob_lower_bound"});
    std::vector<double> xs, ys, ds;
    for (const auto& r : rows) {
        t.add_row({r.value, r.h2_idroop, r.h2_droop, r.tau_rob_delta0, r.tau_rob_lower_bound});
        xs.push_back(r.value);
        ys.push_back(r.h2_idroop);
        ds.push_back(r.h2_droop);
    }
    ctx.emit("sweep.csv", t);
    svg::LinePlot plot{"Squared H2 norm versus " + axis, axis, "squared H2 norm", spec.log_scale, {}};
    plot.series.push_back({"iDroop", xs, ys});
    plot.series.push_back({"droop", xs, ds});
    ctx.emit_svg("sweep.svg", plot);

    const auto best = std::min_element(rows.begin(), rows.end(),
                                       [](const SweepRow& a, const SweepRow& b) { return a.h2_idroop < b.h2_idroop; });
    ctx.add("axis", axis);
    ctx.add("points", rows.size());
    ctx.add("best_value", best->value);
    ctx.add("best_h2_idroop", best->h2_idroop);
    ctx.add("h2_droop", rows.front().h2_droop);
}

inline void print_summary(std::ostream& os, const std::string& command, const CommandOutput& out) {
    std::size_t width = 0;
    for (const auto& s : out.summary) width = std::max(width, s.key.size());
    os << command << "\n";
    for (const auto& s : out.summary) {
        os << "  " << s.key << std::string(width - s.key.size() + 2, ' ') << to_text(s) << "\n";
    }
    for (const auto& f : out.files) os << "  wrote " << f << "\n";
}

}  // namespace detail

/// Runs one command on a validated configuration. Throws on failure.
inline CommandOutput run_command(const std::string& command, const RunConfig& cfg, const CommandOptions& opt = {}) {
    detail::Context ctx{cfg, opt, std::filesystem::path(opt.out_dir), {}};
    std::filesystem::create_directories(ctx.out);
    std::filesystem::remove(ctx.out / "error.json");
    if (command == "analyze") detail::run_analyze(ctx);
    else if (command == "optimize") detail::run_optimize(ctx);
    else if (command == "delay") detail::run_delay(ctx);
    else if (command == "simulate") detail::run_simulate(ctx);
    else if (command == "sweep") detail::run_sweep(ctx);
    else throw ValidationError(std::vector<Violation>{{"command", "unknown command '" + command + "'"}});

    detail::ojson run;
    run["command"] = command;
    run["exit_code"] = kExitSuccess;
    run["controller"] = controller_name(cfg.controller);
    run["n_buses"] = cfg.network.size();
    if (command == "simulate") run["seed"] = opt.seed ? *opt.seed : cfg.analysis.sim.seed;
    run["files"] = ctx.result.files;
    detail::ojson summary = detail::ojson::object();
    for (const auto& s : ctx.result.summary) summary[s.key] = detail::to_json(s);
    run["summary"] = summary;
    detail::write_text(ctx.out / "run.json", run.dump(2) + "\n");
    ctx.result.files.push_back("run.json");
    if (opt.log) detail::print_summary(*opt.log, command, ctx.result);
    return ctx.result;
}

/// Maps an exception to its exit code: 2 for configuration problems, 3 for
/// computational failures.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const InputError*>(&e) || dynamic_cast<const ConstructionError*>(&e))
        return kExitValidation;
    return kExitComputation;
}

inline std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const InputError*>(&e)) return "InputError";
    if (dynamic_cast<const ConstructionError*>(&e)) return "ConstructionError";
    if (dynamic_cast<const MarginalStabilityError*>(&e)) return "MarginalStabilityError";
    if (dynamic_cast<const StabilityError*>(&e)) return "StabilityError";
    if (dynamic_cast<const UnboundedNoiseError*>(&e)) return "UnboundedNoiseError";
    if (dynamic_cast<const HomogeneityError*>(&e)) return "HomogeneityError";
    if (dynamic_cast<const UnboundedOptimumError*>(&e)) return "UnboundedOptimumError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    return "Error";
}

/// Loads the config file, runs the command and returns the process exit
/// code. Errors are reported on `err` and in <out>/error.json.
inline int run_cli(const std::string& command, const std::string& config_path, const CommandOptions& opt,
                   std::ostream& err = std::cerr) {
    try {
        const RunConfig cfg = load_config(config_path);
        run_command(command, cfg, opt);
        return kExitSuccess;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        detail::ojson rec;
        rec["command"] = command;
        rec["exit_code"] = code;
        rec["error"] = error_kind(e);
        rec["message"] = e.what();
        if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
            detail::ojson list = detail::ojson::array();
            for (const auto& x : v->violations()) list.push_back({{"field", x.field}, {"message", x.message}});
            rec["violations"] = list;
        }
        if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
            rec["line"] = p->line();
            rec["column"] = p->column();
        }
        if (const auto* s = dynamic_cast<const StabilityError*>(&e)) {
            rec["eigenvalue"] = {detail::json_number(s->eigenvalue().real()),
                                 detail::json_number(s->eigenvalue().imag())};
        }
        try {
            std::filesystem::create_directories(opt.out_dir);
            detail::write_text(std::filesystem::path(opt.out_dir) / "error.json", rec.dump(2) + "\n");
        } catch (const std::exception&) {
        }
        err << "error: " << error_kind(e) << ": " << e.what() << "\n";
        if (const auto* v = dynamic_cast<const ValidationError*>(&e))
            for (const auto& x : v->violations()) err << "  " << x.field << ": " << x.message << "\n";
        return code;
    }
}

}  // namespace gridtune
