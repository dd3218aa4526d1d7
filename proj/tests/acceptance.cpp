// Acceptance gate: one PASS/FAIL line per criterion, each at its stated
// tolerance and runtime limit. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gridtune/gridtune.hpp"
#include "support.hpp"

using namespace gridtune;
namespace fs = std::filesystem;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& why) {
        if (!cond && ok) detail = why;
        ok = ok && cond;
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

struct Instance {
    NetworkTopology topo;
    std::vector<double> lambdas;
    double m, d, r, nu, delta, kp, kw;
};

Instance random_instance(testkit::Random& rng, std::size_t max_buses) {
    const auto n = rng.integer(1, max_buses);
    auto topo = testkit::random_topology(rng, n);
    auto lambdas = eigendecompose(build_laplacian(topo)).eigenvalues();
    Instance in{std::move(topo), std::move(lambdas), 0, 0, 0, 0, 0, 0, 0};
    in.m = rng.uniform(0.1, 10);
    in.d = rng.uniform(0.1, 10);
    in.r = rng.uniform(0.1, 10);
    in.nu = rng.uniform(0, 10);
    in.delta = 10.0 - rng.uniform(0, 10);  // (0, 10]
    in.kp = rng.uniform(0, 5);
    in.kw = rng.uniform(0, 5);
    return in;
}

int failures = 0;

void run(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limit_s) {
        out.require(false, fmt("runtime %.2f s exceeds %.0f s", secs, limit_s));
        out.ok = false;
    }
    if (!out.ok) ++failures;
    std::printf("criterion %2d: %s  %s (%.2f s)%s%s\n", id, out.ok ? "PASS" : "FAIL", title, secs,
                out.detail.empty() ? "" : "  ", out.detail.c_str());
    std::fflush(stdout);
}

// -- 1 ----------------------------------------------------------------------
Outcome closed_vs_lyapunov() {
    Outcome o;
    {
        const auto topo = NetworkTopology::path(2);
        const auto params = SystemParams::uniform(2, 1, 1, 1, 1);
        const std::vector<double> lambdas{0.0, 2.0};
        const double cf = h2_closed_form(lambdas, params, IDroop{2, 1, 1}).squared_norm;
        const double ly = h2_numeric_full(assemble_state_space(topo, params, IDroop{2, 1, 1})).squared_norm;
        o.require(std::abs(cf - 43.0 / 28.0) <= 1e-12 && std::abs(ly - 43.0 / 28.0) <= 1e-12,
                  "2-bus reference differs from 43/28");
    }
    testkit::Random rng(1001);
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
        const Instance in = random_instance(rng, 20);
        const auto params = SystemParams::uniform(in.topo.size(), in.m, in.d, in.kp, in.kw);
        const IDroop c{in.nu, in.delta, in.r};
        const double cf = h2_closed_form(in.lambdas, params, c).squared_norm;
        const double ly = h2_numeric_full(assemble_state_space(in.topo, params, c)).squared_norm;
        const double rel = cf == ly ? 0.0 : std::abs(cf - ly) / std::abs(cf);
        worst = std::max(worst, rel);
    }
    o.require(worst <= 1e-8, fmt("worst relative difference %.3g", worst));
    if (o.ok) o.detail = fmt("worst relative difference %.3g over 50 instances", worst);
    return o;
}

// -- 2 ----------------------------------------------------------------------
Outcome droop_formula() {
    Outcome o;
    const double ref = h2_numeric_full(assemble_state_space(NetworkTopology::path(2), SystemParams::uniform(2, 1, 1, 1, 1),
                                                            Droop{1.0}))
                           .squared_norm;
    o.require(std::abs(ref - 1.0) <= 1e-12 && h2_droop(2, 1, 1, 1, 1, 1) == 1.0, "2-bus droop reference is not 1");
    testkit::Random rng(1002);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const Instance in = random_instance(rng, 20);
        const auto params = SystemParams::uniform(in.topo.size(), in.m, in.d, in.kp, in.kw);
        const double cf = h2_droop(in.topo.size(), in.m, in.d, in.r, in.kp, in.kw);
        const double ly = h2_numeric_full(assemble_state_space(in.topo, params, Droop{in.r})).squared_norm;
        worst = std::max(worst, cf == ly ? 0.0 : std::abs(cf - ly) / std::abs(cf));
    }
    o.require(worst <= 1e-8, fmt("worst relative difference %.3g", worst));
    if (o.ok) o.detail = fmt("worst relative difference %.3g over 20 instances", worst);
    return o;
}

// -- 3 ----------------------------------------------------------------------
Outcome large_delta_limit() {
    Outcome o;
    testkit::Random rng(1003);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const Instance in = random_instance(rng, 20);
        if (in.kp == 0 && in.kw == 0) continue;
        const double f = f_of_delta(in.lambdas, in.m, in.d, in.r, in.nu, in.kp, in.kw, 1e9);
        const double droop = h2_droop(in.lambdas.size(), in.m, in.d, in.r, in.kp, in.kw);
        worst = std::max(worst, std::abs(f - droop) / droop);
    }
    o.require(worst <= 1e-6, fmt("worst relative difference %.3g", worst));
    if (o.ok) o.detail = fmt("worst relative difference %.3g over 20 instances", worst);
    return o;
}

// -- 4 ----------------------------------------------------------------------
Outcome monotonicity_in_delta() {
    Outcome o;
    testkit::Random rng(1004);
    int checked = 0;
    for (int k = 0; k < 50; ++k) {
        const Instance in = random_instance(rng, 20);
        const auto a = alpha_coefficients(in.m, in.d, in.r, in.nu, in.kp, in.kw);
        if (std::abs(a.alpha1) <= 1e-6) continue;
        for (int s = 0; s < 10; ++s) {
            const double delta = 100.0 - rng.uniform(0, 100);
            const double h = 1e-2 * delta;
            const double diff = f_of_delta(in.lambdas, a, delta + h) - f_of_delta(in.lambdas, a, delta);
            const bool agree = (diff > 0) == (a.alpha1 > 0) && diff != 0.0;
            o.require(agree, fmt("sign mismatch at delta=%.4g, alpha1=%.3g, diff=%.3g", delta, a.alpha1, diff));
            ++checked;
        }
    }
    if (o.ok) o.detail = fmt("%.0f finite differences agree with sign(alpha1)", checked);
    return o;
}

// -- 5 ----------------------------------------------------------------------
Outcome optimal_tuning() {
    Outcome o;
    testkit::Random rng(1005);
    // nu* beats the grid.
    for (int k = 0; k < 20; ++k) {
        const double m = rng.uniform(0.1, 10), d = rng.uniform(0.1, 10);
        const double kp = rng.uniform(0, 5), kw = rng.uniform(0.01, 5);
        const double star = optimal_nu(d, kp, kw);
        const double best = g_of_nu(4, m, d, kp, kw, star);
        for (double nu : linspace(0.0, std::max(10.0, 3.0 * star), 1000))
            o.require(best <= g_of_nu(4, m, d, kp, kw, nu) * (1.0 + 1e-15), fmt("grid beats nu* at nu=%.4g", nu));
    }
    // Strict improvement inside the interval.
    int instances = 0;
    while (instances < 20) {
        const Instance in = random_instance(rng, 10);
        if (in.kw < 0.01) continue;
        const Interval I = improvement_interval(in.d, in.r, in.kp, in.kw);
        if (I.empty) continue;
        ++instances;
        const double droop = h2_droop(in.lambdas.size(), in.m, in.d, in.r, in.kp, in.kw);
        for (int s = 0; s < 10; ++s) {
            const double nu = I.lower + (I.upper - I.lower) * rng.uniform(0.01, 0.99);
            for (int t = 0; t < 10; ++t) {
                const double delta = t == 0 ? 0.0 : rng.uniform(0, 10);
                const double v = h2_idroop(in.lambdas, in.m, in.d, in.r, nu, delta, in.kp, in.kw);
                o.require(v < droop, fmt("no improvement at nu=%.4g delta=%.4g", nu, delta));
            }
        }
    }
    // Degenerate threshold: the optimum coincides with droop.
    for (int k = 0; k < 10; ++k) {
        const double m = rng.uniform(0.1, 10), d = rng.uniform(0.1, 10), r = rng.uniform(0.1, 10);
        const double kw = rng.uniform(0.1, 5), kp = kw * std::sqrt(2 * r * d + r * r);
        const std::vector<double> lambdas{0.0, rng.uniform(0.1, 5), rng.uniform(5, 10)};
        o.require(classify_regime(d, r, kp, kw) == Regime::degenerate, "threshold instance not classified degenerate");
        const double star = optimal_nu(d, kp, kw);
        const double droop = h2_droop(3, m, d, r, kp, kw);
        for (double delta : {0.0, 0.5, 3.0, 10.0}) {
            const double v = h2_idroop(lambdas, m, d, r, star, delta, kp, kw);
            o.require(std::abs(v - droop) <= 1e-12 * std::max(1.0, droop),
                      fmt("degenerate instance differs by %.3g", std::abs(v - droop)));
        }
    }
    if (o.ok) o.detail = "grid, interval and degenerate checks hold";
    return o;
}

// -- 6 ----------------------------------------------------------------------
Outcome delay_closed_vs_bisection() {
    Outcome o;
    const auto ref1 = tau_rob_closed(0.0, 1.0, 0.0, IDroop{1.0, 0.0, 1.0});
    const auto bis1 = tau_rob_bisection(std::vector<double>{0.0}, 1.0, 0.0, IDroop{1.0, 0.0, 1.0});
    o.require(std::abs(ref1.tau_rob - std::numbers::pi / 2) <= 1e-12 &&
                  std::abs(bis1.tau_rob - std::numbers::pi / 2) <= 1e-4,
              "single-bus reference differs from pi/2");
    const auto ref2 = tau_rob_closed(2.0, 1.0, 1.0, IDroop{2.0, 0.0, 1.0});
    const auto bis2 = tau_rob_bisection(std::vector<double>{0.0, 2.0}, 1.0, 1.0, IDroop{2.0, 0.0, 1.0});
    o.require(std::abs(ref2.tau_rob - 0.8296) <= 1e-4 && std::abs(bis2.tau_rob - ref2.tau_rob) <= 1e-4,
              fmt("two-bus reference %.6f / %.6f", ref2.tau_rob, bis2.tau_rob));

    testkit::Random rng(1006);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const auto n = rng.integer(1, 5);
        const auto topo = testkit::random_topology(rng, n);
        const auto lambdas = eigendecompose(build_laplacian(topo)).eigenvalues();
        const double lambda_n = *std::max_element(lambdas.begin(), lambdas.end());
        const double m = rng.uniform(0.1, 10), d = rng.uniform(0.1, 10);
        const double a = rng.uniform(1.2 * d + 0.1, 1.2 * d + 10);
        const ControllerConfig c = k % 2 == 0 ? ControllerConfig{IDroop{a, 0.0, rng.uniform(0.1, 10)}}
                                              : ControllerConfig{IDroop{rng.uniform(0, 10), kInf, a}};
        const double closed = tau_rob_closed(lambda_n, m, d, c).tau_rob;
        const double bis = tau_rob_bisection(lambdas, m, d, c).tau_rob;
        worst = std::max(worst, std::abs(closed - bis));
    }
    o.require(worst <= 1e-4, fmt("worst |closed - bisection| = %.3g s", worst));
    for (int k = 0; k < 4; ++k) {
        const double d = rng.uniform(0.5, 5), a = d * rng.uniform(0.1, 1.0);
        const std::vector<double> lambdas{0.0, rng.uniform(0.1, 5)};
        const ControllerConfig c = k % 2 == 0 ? ControllerConfig{IDroop{a, 0.0, 1.0}} : ControllerConfig{Droop{a}};
        o.require(std::isinf(tau_rob_closed(lambdas[1], 1.0, d, c).tau_rob) &&
                      std::isinf(tau_rob_bisection(lambdas, 1.0, d, c).tau_rob),
                  "a <= d did not report infinity");
    }
    if (o.ok) o.detail = fmt("worst |closed - bisection| = %.3g s over 20 instances", worst);
    return o;
}

// -- 7 ----------------------------------------------------------------------
Outcome lower_bound_without_damping() {
    Outcome o;
    testkit::Random rng(1007);
    double tightest = kInf;
    for (int k = 0; k < 20; ++k) {
        const auto n = rng.integer(1, 4);
        const auto lambdas = eigendecompose(build_laplacian(testkit::random_topology(rng, n))).eigenvalues();
        const double lambda_n = *std::max_element(lambdas.begin(), lambdas.end());
        const double m = rng.uniform(0.1, 10), a = rng.uniform(0.1, 10);
        const ControllerConfig c = k % 2 == 0 ? ControllerConfig{IDroop{a, 0.0, 1.0}} : ControllerConfig{Droop{a}};
        const double bound = tau_rob_lower_bound(a, lambda_n, m);
        const double closed = tau_rob_closed(lambda_n, m, 0.0, c).tau_rob;
        const double bis = tau_rob_bisection(lambdas, m, 0.0, c).tau_rob;
        // With a single bus (lambda_n = 0) the bound is attained exactly.
        o.require(closed >= bound * (1 - 1e-12) && bis >= bound - 1e-6,
                  fmt("bound %.6g exceeds tau_rob %.6g / %.6g", bound, closed, bis));
        tightest = std::min(tightest, closed / bound);
    }
    if (o.ok) o.detail = fmt("smallest tau_rob / bound = %.4f", tightest);
    return o;
}

// -- 8 ----------------------------------------------------------------------
Outcome monte_carlo() {
    Outcome o;
    const SimConfig cfg{};  // defaults, fixed seed
    struct Case {
        const char* name;
        StateSpaceModel model;
        double analytic;
    };
    std::vector<Case> cases;
    cases.push_back({"droop n=1", assemble_state_space(NetworkTopology(1, {}), SystemParams::uniform(1, 1, 1, 1, 1), Droop{1}),
                     0.5});
    cases.push_back({"idroop 2-bus",
                     assemble_state_space(NetworkTopology::path(2), SystemParams::uniform(2, 1, 1, 1, 1), IDroop{2, 1, 1}),
                     43.0 / 28.0});
    cases.push_back({"zero noise",
                     assemble_state_space(NetworkTopology::path(2), SystemParams::uniform(2, 1, 1, 0, 0), IDroop{2, 1, 1}),
                     0.0});
    std::string report;
    for (const auto& c : cases) {
        const SimResult r = simulate_sde(c.model, cfg);
        o.require(!r.diverged, std::string(c.name) + " diverged");
        const double err = std::abs(r.empirical_h2_squared - c.analytic);
        const double rel = c.analytic == 0 ? err : err / c.analytic;
        o.require(err <= 3 * r.std_error && rel <= 0.05,
                  std::string(c.name) + fmt(": estimate %.6g vs %.6g", r.empirical_h2_squared, c.analytic));
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s%s %.5f (se %.2g, rel %.2g%%)", report.empty() ? "" : "; ", c.name,
                      r.empirical_h2_squared, r.std_error, 100 * rel);
        report += buf;
    }
    if (o.ok) o.detail = report;
    return o;
}

// -- 9 ----------------------------------------------------------------------
Outcome delayed_simulation() {
    Outcome o;
    struct Case {
        std::vector<double> lambdas;
        double m, d;
        ControllerConfig c;
    };
    const std::vector<Case> cases{
        {{0.0, 2.0}, 1.0, 1.0, IDroop{2.0, 0.0, 1.0}},
        {{0.0, 2.0}, 1.0, 1.0, IDroop{0.5, kInf, 2.0}},
        {{0.0, 1.0, 3.0}, 2.0, 0.5, IDroop{3.0, 0.0, 1.0}},
        {{0.0, 1.0, 3.0}, 2.0, 0.5, Droop{1.5}},
    };
    int runs = 0;
    for (const auto& k : cases) {
        const double lambda_n = *std::max_element(k.lambdas.begin(), k.lambdas.end());
        const double tau = tau_rob_closed(lambda_n, k.m, k.d, k.c).tau_rob;
        for (double f : {0.8, 1.2}) {
            const bool nyquist = is_stable_with_delay(k.lambdas, k.m, k.d, k.c, f * tau);
            const bool sim_stable = !simulate_delayed(k.lambdas, k.m, k.d, k.c, f * tau).diverged;
            o.require(nyquist == sim_stable && nyquist == (f < 1.0),
                      fmt("verdict mismatch at %.1f tau_rob (tau_rob = %.4g)", f, tau));
            ++runs;
        }
    }
    if (o.ok) o.detail = fmt("%.0f delayed runs agree with the winding-number verdict", runs);
    return o;
}

// -- 10 ---------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

Outcome cli_determinism(const std::string& cli, const std::string& configs) {
    Outcome o;
    const std::vector<std::pair<std::string, std::string>> runs{
        {"analyze", "two_bus_idroop.json"},       {"optimize", "optimize_lead.json"},
        {"delay", "delay_delta0.json"},           {"simulate", "sim_two_bus_idroop.json"},
        {"sweep", "sweep_delta.json"},            {"simulate", "sim_delayed_delta_inf.json"},
    };
    const fs::path base = fs::temp_directory_path() / "gridtune_acceptance";
    fs::remove_all(base);
    int compared = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const auto& [cmd, file] = runs[k];
        const std::string stem = std::to_string(k) + "_" + cmd;
        for (const char* tag : {"a", "b"}) {
            const fs::path out = base / (stem + "_" + tag);
            const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + configs + "/" + file + "\" --out \"" +
                                     out.string() + "\" --seed 7 > /dev/null";
            o.require(std::system(line.c_str()) == 0, cmd + " exited with an error");
        }
        for (const auto& e : fs::directory_iterator(base / (stem + "_a"))) {
            if (e.path().extension() != ".csv") continue;
            const fs::path other = base / (stem + "_b") / e.path().filename();
            o.require(fs::exists(other) && slurp(e.path()) == slurp(other), cmd + ": " + e.path().filename().string() +
                                                                                 " differs between runs");
            ++compared;
        }
    }
    if (o.ok) o.detail = fmt("%.0f CSV files byte-identical across two runs of each command", compared);
    return o;
}

}  // namespace

int main() {
    run(1, "closed-form H2 equals the Lyapunov solve", 5, closed_vs_lyapunov);
    run(2, "droop formula equals the Lyapunov solve", 2, droop_formula);
    run(3, "large-delta limit recovers droop", 1, large_delta_limit);
    run(4, "monotonicity in delta follows sign(alpha1)", 1, monotonicity_in_delta);
    run(5, "optimal nu and improvement interval", 2, optimal_tuning);
    run(6, "closed-form delay margin equals bisection", 30, delay_closed_vs_bisection);
    run(7, "lower bound on the delay margin at d = 0", 5, lower_bound_without_damping);
    run(8, "Monte Carlo agrees with the analytic norm", 60, monte_carlo);
    run(9, "delayed simulation agrees with the Nyquist verdict", 30, delayed_simulation);
    run(10, "CLI output is deterministic", 120, [] { return cli_determinism(GRIDTUNE_CLI, GRIDTUNE_CONFIGS); });
    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
