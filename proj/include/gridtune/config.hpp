#pragma once

// Run configuration: a JSON document with sections network, params,
// controller and analysis. See docs/config.md for the schema.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gridtune/delay.hpp"
#include "gridtune/errors.hpp"
#include "gridtune/netmodel.hpp"
#include "gridtune/sim.hpp"
#include "gridtune/spectral.hpp"
#include "gridtune/lyap.hpp"
#include "gridtune/tuning.hpp"

namespace gridtune {

struct ToleranceOptions {
    double zero_eigenvalue = kDefaultZeroEigenvalueTol;
    double hurwitz_margin = kDefaultHurwitzMargin;
    double agreement = 1e-8;        // closed form vs Lyapunov, relative
    double delay_agreement = 1e-4;  // closed form vs bisection, seconds
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::delta;
    std::vector<double> values;
    bool log_scale = false;
};

struct DelayedSimSpec {
    std::vector<double> taus;
    std::vector<double> tau_factors;  // multiples of the closed-form tau_rob
    DelaySimOptions options;
};

struct AnalysisOptions {
    ToleranceOptions tolerances;
    TuningOptions tuning;
    BisectionOptions delay;
    std::optional<SweepSpec> sweep;
    SimConfig sim;
    DelayedSimSpec delayed;
};

struct RunConfig {
    NetworkTopology network;
    SystemParams params;
    ControllerConfig controller;
    AnalysisOptions analysis;
};

namespace detail {

using json = nlohmann::json;

class SchemaReader {
  public:
    std::vector<Violation> violations;

    void fail(const std::string& field, const std::string& msg) { violations.push_back({field, msg}); }

    bool object(const json& j, const std::string& path) {
        if (!j.is_object()) {
            fail(path, "must be an object");
            return false;
        }
        return true;
    }

    void keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key())) fail(join(path, it.key()), "unknown key");
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    /// Reads a finite number (or the string "inf" when allow_inf).
    std::optional<double> number(const json& j, const std::string& path, const char* key, bool required,
                                 bool allow_inf = false) {
        const std::string field = join(path, key);
        if (!j.contains(key)) {
            if (required) fail(field, "required field is missing");
            return std::nullopt;
        }
        const json& v = j.at(key);
        if (allow_inf && v.is_string() && v.get<std::string>() == "inf")
            return std::numeric_limits<double>::infinity();
        if (!v.is_number()) {
            fail(field, allow_inf ? "must be a number or \"inf\"" : "must be a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail(field, "must be finite");
            return std::nullopt;
        }
        return x;
    }

    void positive(const json& j, const std::string& path, const char* key, double& target) {
        if (auto v = number(j, path, key, false)) {
            if (*v > 0.0)
                target = *v;
            else
                fail(join(path, key), "must be positive");
        }
    }

    void nonnegative(const json& j, const std::string& path, const char* key, double& target) {
        if (auto v = number(j, path, key, false)) {
            if (*v >= 0.0)
                target = *v;
            else
                fail(join(path, key), "must be nonnegative");
        }
    }

    std::optional<std::uint64_t> unsigned_int(const json& j, const std::string& path, const char* key) {
        if (!j.contains(key)) return std::nullopt;
        const json& v = j.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            fail(join(path, key), "must be a nonnegative integer");
            return std::nullopt;
        }
        return v.get<std::uint64_t>();
    }

    std::vector<double> number_list(const json& j, const std::string& field) {
        std::vector<double> out;
        if (!j.is_array()) {
            fail(field, "must be an array of numbers");
            return out;
        }
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (!j[k].is_number() || !std::isfinite(j[k].get<double>())) {
                fail(field + "[" + std::to_string(k) + "]", "must be a finite number");
                continue;
            }
            out.push_back(j[k].get<double>());
        }
        return out;
    }
};

inline std::optional<NetworkTopology> read_network(SchemaReader& r, const json& root) {
    const std::string path = "network";
    if (!root.contains("network")) {
        r.fail(path, "required section is missing");
        return std::nullopt;
    }
    const json& j = root.at("network");
    if (!r.object(j, path)) return std::nullopt;
    r.keys(j, path, {"buses", "lines", "kind", "susceptance"});

    auto buses = r.unsigned_int(j, path, "buses");
    if (!buses) {
        if (!j.contains("buses")) r.fail("network.buses", "required field is missing");
        return std::nullopt;
    }
    if (*buses == 0 || *buses > kMaxBuses) {
        r.fail("network.buses", "must be between 1 and " + std::to_string(kMaxBuses));
        return std::nullopt;
    }
    const auto n = static_cast<std::size_t>(*buses);
    const std::size_t before = r.violations.size();

    if (j.contains("kind") && j.contains("lines")) {
        r.fail("network", "give either kind or lines, not both");
        return std::nullopt;
    }
    try {
        if (j.contains("kind")) {
            double b = 1.0;
            r.positive(j, path, "susceptance", b);
            if (!j.at("kind").is_string()) {
                r.fail("network.kind", "must be a string");
                return std::nullopt;
            }
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "path") return NetworkTopology::path(n, b);
            if (kind == "ring") return NetworkTopology::ring(n, b);
            if (kind == "complete") return NetworkTopology::complete(n, b);
            if (kind == "star") return NetworkTopology::star(n, b);
            r.fail("network.kind", "must be one of path, ring, complete, star");
            return std::nullopt;
        }
        if (j.contains("susceptance")) r.fail("network.susceptance", "only valid together with kind");
        std::vector<Line> lines;
        if (j.contains("lines")) {
            const json& ls = j.at("lines");
            if (!ls.is_array()) {
                r.fail("network.lines", "must be an array of [from, to, susceptance]");
                return std::nullopt;
            }
            for (std::size_t k = 0; k < ls.size(); ++k) {
                const std::string field = "network.lines[" + std::to_string(k) + "]";
                const json& l = ls[k];
                if (!l.is_array() || l.size() != 3 || !l[0].is_number_unsigned() || !l[1].is_number_unsigned() ||
                    !l[2].is_number()) {
                    r.fail(field, "must be [from, to, susceptance] with bus indices counted from 0");
                    continue;
                }
                lines.push_back({l[0].get<std::size_t>(), l[1].get<std::size_t>(), l[2].get<double>()});
            }
        }
        if (r.violations.size() != before) return std::nullopt;
        return NetworkTopology(n, std::move(lines));
    } catch (const ConstructionError& e) {
        r.fail("network.lines", e.what());
        return std::nullopt;
    }
}

/// Without a valid network the bus count is unknown; arrays are then only
/// checked entry by entry.
inline std::optional<SystemParams> read_params(SchemaReader& r, const json& root, std::optional<std::size_t> buses) {
    const std::string path = "params";
    if (!root.contains("params")) {
        r.fail(path, "required section is missing");
        return std::nullopt;
    }
    const json& j = root.at("params");
    if (!r.object(j, path)) return std::nullopt;
    r.keys(j, path, {"m", "d", "k_p", "k_w"});
    bool ok = true;
    auto read = [&](const char* key, bool strictly_positive) {
        const std::string field = "params." + std::string(key);
        std::size_t n = buses.value_or(1);
        if (!buses && j.contains(key) && j.at(key).is_array()) n = j.at(key).size();
        Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
        if (!j.contains(key)) {
            r.fail(field, "required field is missing");
            ok = false;
            return v;
        }
        const json& x = j.at(key);
        std::vector<double> values;
        if (x.is_number()) {
            values.assign(n, x.get<double>());
        } else if (x.is_array()) {
            values = r.number_list(x, field);
            if (values.size() != n) {
                r.fail(field, "must have one entry per bus (" + std::to_string(n) + ")");
                ok = false;
                return v;
            }
        } else {
            r.fail(field, "must be a number or an array of numbers");
            ok = false;
            return v;
        }
        for (std::size_t k = 0; k < n; ++k) {
            const double val = values[k];
            const bool good = std::isfinite(val) && (strictly_positive ? val > 0.0 : val >= 0.0);
            if (!good) {
                r.fail(field, strictly_positive ? "must be positive" : "must be nonnegative");
                ok = false;
                break;
            }
            v(static_cast<Eigen::Index>(k)) = val;
        }
        return v;
    };
    Vector m = read("m", true), d = read("d", true), kp = read("k_p", false), kw = read("k_w", false);
    if (!ok || !buses) return std::nullopt;
    return SystemParams(m, d, kp, kw);
}

inline std::optional<ControllerConfig> read_controller(SchemaReader& r, const json& root) {
    const std::string path = "controller";
    if (!root.contains("controller")) {
        r.fail(path, "required section is missing");
        return std::nullopt;
    }
    const json& j = root.at("controller");
    if (!r.object(j, path)) return std::nullopt;
    if (!j.contains("type") || !j.at("type").is_string()) {
        r.fail("controller.type", "required string: droop, virtual_inertia or idroop");
        return std::nullopt;
    }
    const auto type = j.at("type").get<std::string>();
    auto gain = [&]() -> std::optional<double> {
        auto v = r.number(j, path, "r_r_inv", true);
        if (v && !(*v > 0.0)) {
            r.fail("controller.r_r_inv", "must be positive");
            return std::nullopt;
        }
        return v;
    };
    auto nonneg = [&](const char* key, bool allow_inf) -> std::optional<double> {
        auto v = r.number(j, path, key, true, allow_inf);
        if (v && !(*v >= 0.0)) {
            r.fail("controller." + std::string(key), "must be nonnegative");
            return std::nullopt;
        }
        return v;
    };
    if (type == "droop") {
        r.keys(j, path, {"type", "r_r_inv"});
        auto g = gain();
        if (!g) return std::nullopt;
        return Droop{*g};
    }
    if (type == "virtual_inertia") {
        r.keys(j, path, {"type", "nu", "r_r_inv"});
        auto nu = nonneg("nu", false);
        auto g = gain();
        if (!nu || !g) return std::nullopt;
        return VirtualInertia{*nu, *g};
    }
    if (type == "idroop") {
        r.keys(j, path, {"type", "nu", "delta", "r_r_inv"});
        auto nu = nonneg("nu", false);
        auto delta = nonneg("delta", true);
        auto g = gain();
        if (!nu || !delta || !g) return std::nullopt;
        return IDroop{*nu, *delta, *g};
    }
    r.fail("controller.type", "must be droop, virtual_inertia or idroop");
    return std::nullopt;
}

inline AnalysisOptions read_analysis(SchemaReader& r, const json& root) {
    AnalysisOptions a;
    if (!root.contains("analysis")) return a;
    const json& j = root.at("analysis");
    if (!r.object(j, "analysis")) return a;
    r.keys(j, "analysis", {"tolerances", "tuning", "delay", "sweep", "sim", "delayed"});

    if (j.contains("tolerances") && r.object(j.at("tolerances"), "analysis.tolerances")) {
        const json& t = j.at("tolerances");
        const std::string p = "analysis.tolerances";
        r.keys(t, p, {"zero_eigenvalue", "hurwitz_margin", "agreement", "delay_agreement"});
        r.positive(t, p, "zero_eigenvalue", a.tolerances.zero_eigenvalue);
        r.nonnegative(t, p, "hurwitz_margin", a.tolerances.hurwitz_margin);
        r.positive(t, p, "agreement", a.tolerances.agreement);
        r.positive(t, p, "delay_agreement", a.tolerances.delay_agreement);
    }
    if (j.contains("tuning") && r.object(j.at("tuning"), "analysis.tuning")) {
        const json& t = j.at("tuning");
        const std::string p = "analysis.tuning";
        r.keys(t, p, {"delta_rec", "nu_max"});
        r.positive(t, p, "delta_rec", a.tuning.delta_rec);
        r.positive(t, p, "nu_max", a.tuning.nu_max);
    }
    if (j.contains("delay") && r.object(j.at("delay"), "analysis.delay")) {
        const json& t = j.at("delay");
        const std::string p = "analysis.delay";
        r.keys(t, p, {"tau_max", "tolerance", "d_floor", "points_per_decade", "max_phase_step"});
        r.positive(t, p, "tau_max", a.delay.tau_max);
        r.positive(t, p, "tolerance", a.delay.tolerance);
        r.positive(t, p, "d_floor", a.delay.d_floor);
        r.positive(t, p, "points_per_decade", a.delay.winding.points_per_decade);
        r.positive(t, p, "max_phase_step", a.delay.winding.max_phase_step);
    }
    if (j.contains("sweep") && r.object(j.at("sweep"), "analysis.sweep")) {
        const json& t = j.at("sweep");
        const std::string p = "analysis.sweep";
        r.keys(t, p, {"axis", "values", "scale", "start", "stop", "points"});
        SweepSpec spec;
        bool ok = true;
        if (!t.contains("axis") || !t.at("axis").is_string()) {
            r.fail("analysis.sweep.axis", "required string: nu, delta, k_p_over_k_w or lambda_n");
            ok = false;
        } else {
            const auto axis = t.at("axis").get<std::string>();
            if (axis == "nu") spec.axis = SweepAxis::nu;
            else if (axis == "delta") spec.axis = SweepAxis::delta;
            else if (axis == "k_p_over_k_w") spec.axis = SweepAxis::kp_over_kw;
            else if (axis == "lambda_n") spec.axis = SweepAxis::lambda_n;
            else {
                r.fail("analysis.sweep.axis", "must be nu, delta, k_p_over_k_w or lambda_n");
                ok = false;
            }
        }
        if (t.contains("values")) {
            if (t.contains("start") || t.contains("stop") || t.contains("points") || t.contains("scale"))
                r.fail("analysis.sweep", "give either values or start/stop/points, not both");
            spec.values = r.number_list(t.at("values"), "analysis.sweep.values");
        } else {
            auto start = r.number(t, p, "start", true);
            auto stop = r.number(t, p, "stop", true);
            auto points = r.unsigned_int(t, p, "points");
            if (!t.contains("points")) r.fail("analysis.sweep.points", "required field is missing");
            std::string scale = "linear";
            if (t.contains("scale")) {
                if (!t.at("scale").is_string() ||
                    (t.at("scale").get<std::string>() != "linear" && t.at("scale").get<std::string>() != "log"))
                    r.fail("analysis.sweep.scale", "must be linear or log");
                else
                    scale = t.at("scale").get<std::string>();
            }
            spec.log_scale = scale == "log";
            if (start && stop && points) {
                if (*points == 0) r.fail("analysis.sweep.points", "must be positive");
                else if (spec.log_scale && (!(*start > 0.0) || !(*stop > 0.0)))
                    r.fail("analysis.sweep", "log scale needs positive start and stop");
                else
                    spec.values = spec.log_scale ? logspace(*start, *stop, *points) : linspace(*start, *stop, *points);
            }
        }
        if (ok) a.sweep = spec;
    }
    if (j.contains("sim") && r.object(j.at("sim"), "analysis.sim")) {
        const json& t = j.at("sim");
        const std::string p = "analysis.sim";
        r.keys(t, p, {"dt", "horizon", "burn_in", "trajectories", "seed", "threads"});
        r.positive(t, p, "dt", a.sim.dt);
        r.positive(t, p, "horizon", a.sim.horizon);
        r.nonnegative(t, p, "burn_in", a.sim.burn_in);
        if (auto v = r.unsigned_int(t, p, "trajectories")) {
            if (*v == 0) r.fail("analysis.sim.trajectories", "must be positive");
            a.sim.n_trajectories = static_cast<std::size_t>(*v);
        }
        if (auto v = r.unsigned_int(t, p, "seed")) a.sim.seed = *v;
        if (auto v = r.unsigned_int(t, p, "threads")) a.sim.threads = static_cast<unsigned>(*v);
        if (!(a.sim.burn_in < a.sim.horizon)) r.fail("analysis.sim.burn_in", "must be smaller than horizon");
    }
    if (j.contains("delayed") && r.object(j.at("delayed"), "analysis.delayed")) {
        const json& t = j.at("delayed");
        const std::string p = "analysis.delayed";
        r.keys(t, p, {"taus", "tau_factors", "dt", "horizon"});
        if (t.contains("taus")) a.delayed.taus = r.number_list(t.at("taus"), "analysis.delayed.taus");
        if (t.contains("tau_factors"))
            a.delayed.tau_factors = r.number_list(t.at("tau_factors"), "analysis.delayed.tau_factors");
        for (double v : a.delayed.taus)
            if (v < 0.0) r.fail("analysis.delayed.taus", "delays must be nonnegative");
        for (double v : a.delayed.tau_factors)
            if (v < 0.0) r.fail("analysis.delayed.tau_factors", "factors must be nonnegative");
        r.positive(t, p, "dt", a.delayed.options.dt);
        r.positive(t, p, "horizon", a.delayed.options.horizon);
    }
    return a;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

/// Parses and validates a configuration document. Throws ParseError on
/// malformed JSON and ValidationError listing every schema violation.
inline RunConfig parse_config(const std::string& text) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte);
        throw ParseError("config parse error at line " + std::to_string(line) + ", column " +
                             std::to_string(col) + ": " + e.what(),
                         line, col);
    }
    detail::SchemaReader r;
    if (!root.is_object()) throw ValidationError(std::vector<Violation>{{"", "configuration must be a JSON object"}});
    r.keys(root, "", {"network", "params", "controller", "analysis"});

    auto network = detail::read_network(r, root);
    std::optional<SystemParams> params;
    if (network) params = detail::read_params(r, root, network->size());
    else if (root.contains("params")) (void)detail::read_params(r, root, std::nullopt);
    auto controller = detail::read_controller(r, root);
    auto analysis = detail::read_analysis(r, root);

    if (!r.violations.empty() || !network || !params || !controller) {
        if (r.violations.empty()) r.fail("", "incomplete configuration");
        throw ValidationError(std::move(r.violations));
    }
    return RunConfig{std::move(*network), std::move(*params), *controller, std::move(analysis)};
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

}  // namespace gridtune
