// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                  run all criteria
//   acceptance --criterion 7    run one (repeatable)
//   acceptance --out DIR        where experiment artifacts go

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdvlab/averaging.hpp"
#include "kdvlab/config.hpp"
#include "kdvlab/conservation.hpp"
#include "kdvlab/experiments.hpp"
#include "kdvlab/hill.hpp"
#include "kdvlab/kdv.hpp"

using namespace kdvlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

fs::path g_out;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "]";
}

Field random_field(std::uint64_t seed, std::size_t m, std::size_t active, double norm3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<ModePair> c(m);
    for (std::size_t k = 1; k <= active; ++k) {
        const double s = std::pow(static_cast<double>(k), -3.0);
        c[k - 1] = {s * n(rng), s * n(rng)};
    }
    Field u(std::move(c));
    return u * (norm3 / sobolev_norm(u, 3.0));
}

nlohmann::json run_config(const std::string& name, const std::string& yaml, std::size_t jobs = 1) {
    const auto out = g_out / name;
    fs::remove_all(out);
    return run_experiment(parse_config(yaml, name + ".yaml"), {out, jobs, true}).summary;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] < v[i - 1])) return false;
    }
    return true;
}

std::vector<double> doubles(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

// ---------------------------------------------------------------------------

Outcome free_discriminant() {
    const Field zero(4);
    double err = 0.0, wr = 0.0;
    const int n = 5100;
    for (int i = 0; i <= n; ++i) {
        const double lambda = -10.0 + 510.0 * i / n;
        const auto s = discriminant(zero, lambda);
        const double exact = lambda >= 0.0 ? 2.0 * std::cos(std::sqrt(lambda)) : 2.0 * std::cosh(std::sqrt(-lambda));
        err = std::max(err, std::abs(s.delta - exact));
        wr = std::max(wr, std::abs(s.wronskian() - 1.0));
    }
    return {err <= 1e-8 && wr <= 1e-9, "max|Delta - exact| = " + fmt(err) + ", max|W - 1| = " + fmt(wr)};
}

Outcome integrator_order() {
    // Two active modes keep h * (largest phase mismatch) small enough for the asymptotic regime.
    const Field u0 = random_field(17, 16, 2, 0.2);
    auto run = [&](double dt) {
        EvolveParams p;
        p.t_end = 1.0;
        p.dt = dt;
        return evolve(u0, p, {}, 1.0).samples.back().u;
    };
    double worst = 1e300;
    std::string detail;
    for (double h : {4e-4, 2e-4}) {
        const Field ref = run(h / 8);
        const double e1 = sobolev_norm(run(h) - ref, 0.0);
        const double e2 = sobolev_norm(run(h / 2) - ref, 0.0);
        const double order = std::log2(e1 / e2);
        worst = std::min(worst, order);
        detail += std::string(detail.empty() ? "" : "; ") + "h=" + fmt(h) + ": errors " + fmt(e1) + ", " + fmt(e2) +
                  ", order " + fmt(order);
    }
    return {worst >= 3.7, detail};
}

Outcome integrability() {
    const Field u0 = random_field(3, 32, 4, 0.2);
    EvolveParams p;
    p.t_end = 1.0;
    p.dt_cap = 2.5e-4;
    const auto traj = evolve(u0, p, {}, 0.1);
    double cons = 0.0, eig = 0.0, act = 0.0;
    const auto l0 = periodic_spectrum(u0, 2).lambda_sorted();
    const auto i0 = actions(u0, 3);
    for (const auto& s : traj.samples) {
        for (int n = 0; n <= 2; ++n) {
            const double a = conservation_functional(u0, n);
            cons = std::max(cons, std::abs(conservation_functional(s.u, n) - a) / std::abs(a));
        }
        const auto l = periodic_spectrum(s.u, 2).lambda_sorted();
        for (std::size_t i = 0; i < 5; ++i) eig = std::max(eig, std::abs(l[i] - l0[i]));
        const auto it = actions(s.u, 3);
        for (std::size_t j = 1; j <= 3; ++j) act = std::max(act, std::abs(it[j] - i0[j]) / i0[j]);
    }
    return {cons <= 1e-7 && eig < 1e-5 && act <= 1e-3,
            "J0-J2 rel " + fmt(cons) + ", eigenvalue drift " + fmt(eig) + ", action rel " + fmt(act)};
}

Outcome linearization() {
    const std::vector<double> amps{0.2, 0.1, 0.05, 0.025};
    std::vector<double> dev;
    for (double a : amps) {
        const double ratio = actions(a * Field::basis(1, 8), 1)[1] / (a * a / (4.0 * std::numbers::pi));
        dev.push_back(std::abs(ratio - 1.0));
    }
    double min_order = 1e300;
    for (std::size_t i = 1; i < dev.size(); ++i) min_order = std::min(min_order, std::log2(dev[i - 1] / dev[i]));
    return {min_order >= 1.0, "|ratio - 1| = " + fmt_list(dev) + ", min order " + fmt(min_order)};
}

Outcome gradients() {
    double fd = 0.0, orth = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Field u = random_field(100 + seed, 8, 4, 0.2);
        const Field wide = u.resized(16);
        const Field v = kdv_rhs(wide);
        for (int j = 1; j <= 3; ++j) {
            const Field g = action_gradient(u, j);
            const Field d = action_gradient(u, j, GradientMethod::finite_difference);
            fd = std::max(fd, sobolev_norm(g - d, 0.0) / sobolev_norm(d, 0.0));
            const Field gw = action_gradient(wide, j);
            orth = std::max(orth, std::abs(inner(gw, v)) / (sobolev_norm(gw, 0.0) * sobolev_norm(v, 0.0)));
        }
    }
    return {fd <= 1e-4 && orth <= 1e-6, "max FD rel error " + fmt(fd) + ", max normalized <grad I, V> " + fmt(orth)};
}

const char* kSmallField = R"(
initial:
  source: measure
  m_max: 16
  measure: {kind: eta_p, p: 3, m: 3}
  norm3: 0.1
)";

Outcome hamiltonian_null() {
    bool pass = true;
    std::string detail;
    for (const char* kind : {"derivative", "antiderivative"}) {
        // ||u||_3 = 1: at 0.1 the Hamiltonian drift sits within ~2x of the action resolution.
        const std::string head = std::string("schema_version: 1\nseed: 7\n") + R"(
initial:
  source: measure
  m_max: 16
  measure: {kind: eta_p, p: 3, m: 3}
  norm3: 1.0
)" + "perturbation: {kind: " + kind + "}\n";
        const auto avg = run_config(std::string("c06_average_") + kind, head + R"(experiment: average
average:
  k_max: 3
  averaging: {t_avg: 10, samples: 640, blocks: 8, dt: 2.5e-4}
)");
        double worst = 0.0;
        bool avg_ok = true;
        for (const auto& r : avg.at("rates")) {
            const double mean = r.at("mean").get<double>(), err = r.at("error").get<double>();
            // Per-sample evaluation noise bounds the noise of the mean.
            const double floor = r.at("resolution").get<double>();
            avg_ok = avg_ok && std::abs(mean) <= 2.0 * err + floor;
            worst = std::max(worst, std::abs(mean) / (2.0 * err + floor));
        }
        const auto thm = run_config(std::string("c06_theorem_i_") + kind, head + R"(experiment: theorem-i
integrator: {dt_cap: 2.5e-4, eps_dt_exponent: 0.5}
theorem_i:
  eps: [0.1, 0.01, 0.001]
  averaged: zero
)");
        const auto rho = doubles(thm.at("rho_observed"));
        const bool dec = thm.at("rho_decreasing").get<bool>();
        const bool resolved = thm.at("rho_resolved").get<bool>();
        pass = pass && avg_ok && dec && resolved;
        detail += std::string(detail.empty() ? "" : "; ") + kind + ": |<F>|/(2 err + floor) max " + fmt(worst) +
                  ", rho " + fmt_list(rho) + " vs resolution " + fmt(thm.at("action_resolution").get<double>());
    }
    return {pass, detail};
}

Outcome dissipative() {
    const std::string head = std::string("schema_version: 1\nseed: 7\n") + kSmallField +
                             "perturbation: {kind: double_antiderivative}\n";
    const std::string averaging = "  averaging: {t_avg: 10, samples: 640, blocks: 8, dt: 2.5e-4, fit_tolerance: 1.0e-9}\n";

    const auto avg = run_config("c07_average", head + "experiment: average\naverage:\n  k_max: 3\n" + averaging);
    double worst_rate = 0.0;
    for (const auto& r : avg.at("rates")) {
        const double pred = r.at("linear_prediction").get<double>();
        worst_rate = std::max(worst_rate, std::abs(r.at("mean").get<double>() - pred) / std::abs(pred));
    }

    const auto thm = run_config("c07_theorem_i", head + R"(experiment: theorem-i
integrator: {dt_cap: 2.5e-4, eps_dt_exponent: 0.5}
theorem_i:
  eps: [0.1, 0.01, 0.001]
  averaged: estimated
)" + averaging);
    // Averaged solution against I(0) exp(-2 (2 pi k)^-2 tau), relative to |I(0)|~_0.
    const auto i0 = doubles(thm.at("initial_actions"));
    const auto tau = doubles(thm.at("averaged").at("tau"));
    const auto& jt = thm.at("averaged").at("j");
    const double scale = action_norm(std::span<const double>(i0), 0.0);
    double closed = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        std::vector<double> diff(i0.size());
        for (std::size_t k = 0; k < i0.size(); ++k) {
            const double c = -2.0 * std::pow(kTwoPi * static_cast<double>(k + 1), -2.0);
            diff[k] = jt[i][k].get<double>() - i0[k] * std::exp(c * tau[i]);
        }
        closed = std::max(closed, action_norm(std::span<const double>(diff), 0.0) / scale);
    }
    // The linear field through the same solver.
    const auto lin = solve_averaged(i0, 1.0, AveragedField::linear(linear_rates(PerturbationSpec::make(
                                                 PerturbationKind::double_antiderivative), 3)),
                                    0.0, 1e6);
    double closed_lin = 0.0;
    for (std::size_t i = 0; i < lin.tau.size(); ++i) {
        for (std::size_t k = 0; k < i0.size(); ++k) {
            const double c = -2.0 * std::pow(kTwoPi * static_cast<double>(k + 1), -2.0);
            const double exact = i0[k] * std::exp(c * lin.tau[i]);
            closed_lin = std::max(closed_lin, std::abs(lin.j[i][k] - exact) / exact);
        }
    }
    const auto rho = doubles(thm.at("rho_observed"));
    std::vector<double> rho_rel;
    for (double r : rho) rho_rel.push_back(r / scale);
    const bool dec = thm.at("rho_decreasing").get<bool>();
    const bool resolved = thm.at("rho_resolved").get<bool>();
    return {worst_rate <= 0.05 && closed <= 1e-8 && closed_lin <= 1e-8 && dec && resolved,
            "<F> vs linear rel " + fmt(worst_rate) + ", J vs exponential " + fmt(closed) + " (linear field " +
                fmt(closed_lin) + "), rho/|I0| " + fmt_list(rho_rel) + " vs resolution " +
                fmt(thm.at("action_resolution").get<double>() / scale)};
}

Outcome equidistribution() {
    const auto thm = run_config("c08_theorem_ii", R"(schema_version: 1
experiment: theorem-ii
seed: 2024
initial:
  source: measure
  m_max: 16
  measure: {kind: gaussian_h, p: 3, m: 16, sigma_scale: 0.01, amplitude_cap: 0.25}
perturbation: {kind: double_antiderivative}
integrator: {dt_cap: 4.0e-3}
theorem_ii:
  eps: [0.1, 0.01, 0.001]
  members: 50
  angles: 3
  order: 2
  sample_stride: 1.0e-3
  threshold: 0.1
)");
    const auto moduli = doubles(thm.at("max_modulus"));
    const bool small = moduli.back() < 0.1;
    const bool dec = thm.at("moduli_decreasing").get<bool>();
    return {small && dec, "max |Weyl| over 0 < |s| <= 2 per eps " + fmt_list(moduli)};
}

Outcome quasi_invariance() {
    const std::string body = R"(schema_version: 1
experiment: quasi-invariance
seed: 31
initial:
  source: measure
  m_max: 16
  measure: {kind: eta_p, p: 3, m: 16}
integrator: {dt_cap: 1.0e-3}
quasi_invariance:
  eps: [0.1, 0.01, 0.001]
  m: 16
  p: 3
  max_ratio: 2.0
)";
    const auto d2 = run_config("c09_double_antiderivative", body + "perturbation: {kind: double_antiderivative}\n");
    std::vector<double> sup;
    for (const auto& c : d2.at("cells")) sup.push_back(c.at("sup_abs_rate").get<double>());
    const bool bounded = d2.at("bounded").get<bool>();
    bool ham_zero = true;
    for (const char* kind : {"derivative", "antiderivative"}) {
        const auto h = run_config(std::string("c09_") + kind, body + "perturbation: {kind: " + kind + "}\n");
        ham_zero = ham_zero && h.at("divergence_identically_zero").get<bool>();
    }
    return {bounded && ham_zero, "sup|rate| per eps " + fmt_list(sup) + ", ratio " + fmt(d2.at("sup_ratio").get<double>()) +
                                     ", Hamiltonian divergence identically 0: " + (ham_zero ? "yes" : "no")};
}

Outcome galerkin() {
    const auto g = run_config("c10_galerkin", R"(schema_version: 1
experiment: galerkin-convergence
seed: 5
initial:
  source: measure
  m_max: 64
  measure: {kind: eta_p, p: 3, m: 64, amplitude_cap: 0.25}
perturbation: {kind: double_antiderivative}
galerkin_convergence:
  eps: 0.01
  m: [8, 16, 32]
  tau_end: 0.1
  sample_stride: 0.005
  q: 3
)");
    const auto sups = doubles(g.at("sup_diff"));
    return {g.at("decreasing").get<bool>() && strictly_decreasing(sups), "sup ||u^m - u^2m||_3 " + fmt_list(sups)};
}

Outcome determinism() {
    const std::string measure = R"(
initial:
  source: measure
  m_max: 12
  measure: {kind: gaussian_h, p: 3, m: 8, sigma_scale: 0.01, amplitude_cap: 0.25}
perturbation: {kind: double_antiderivative}
)";
    const std::vector<std::pair<std::string, std::string>> configs{
        {"simulate", "experiment: simulate\nsimulate: {eps: 0.1, tau_end: 0.2, sample_stride: 0.01}\n"},
        {"spectrum", "experiment: spectrum\n"},
        {"average", "experiment: average\naverage: {k_max: 2, averaging: {t_avg: 0.5, samples: 32, blocks: 4}}\n"},
        {"theorem_i",
         "experiment: theorem-i\ntheorem_i: {eps: [0.5, 0.25], tau_end: 0.1, k_max: 2, sample_stride: 0.05, "
         "averaging: {t_avg: 0.5, samples: 32, blocks: 4}}\n"},
        {"theorem_ii",
         "experiment: theorem-ii\ntheorem_ii: {eps: [0.5, 0.25], members: 6, angles: 2, tau_end: 0.1, "
         "sample_stride: 0.004, resonance: true, resonance_stride: 0.05}\n"},
        {"quasi_invariance", "experiment: quasi-invariance\nquasi_invariance: {eps: [0.5, 0.25], m: 8, tau_end: 0.1}\n"},
        {"galerkin_convergence",
         "experiment: galerkin-convergence\nintegrator: {tail_tolerance: 1.0}\n"
         "galerkin_convergence: {eps: 0.1, m: [2, 4], tau_end: 0.05}\n"},
    };
    std::size_t checked = 0;
    std::string bad;
    for (const auto& [name, body] : configs) {
        const std::string yaml = "schema_version: 1\nseed: 9\n" + std::string(measure) + body;
        const auto config = parse_config(yaml, name + ".yaml");
        std::vector<std::map<std::string, std::string>> digests;
        for (std::size_t jobs : {1, 4, 1}) {
            const auto out = g_out / ("c11_" + name + "_" + std::to_string(digests.size()));
            fs::remove_all(out);
            run_experiment(config, {out, jobs, false});
            digests.push_back(directory_digests(out));
        }
        if (digests[0] != digests[1] || digests[0] != digests[2]) bad += " " + name;
        checked += digests[0].size();
    }
    return {bad.empty(), std::to_string(configs.size()) + " experiments x (jobs 1, 4, 1), " + std::to_string(checked) +
                             " files compared" + (bad.empty() ? "" : "; mismatch in" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::string out = (fs::temp_directory_path() / "kdvlab_acceptance").string();
    app.add_option("--criterion", only, "Criterion number (repeatable)");
    app.add_option("--out", out, "Directory for experiment artifacts");
    CLI11_PARSE(app, argc, argv);
    g_out = out;
    fs::create_directories(g_out);

    const std::vector<Criterion> criteria{
        {1, "free-operator discriminant", 10, free_discriminant},
        {2, "integrator order", 60, integrator_order},
        {3, "integrability suite", 300, integrability},
        {4, "linearization consistency", 120, linearization},
        {5, "gradient check", 300, gradients},
        {6, "Hamiltonian null-average", 900, hamiltonian_null},
        {7, "dissipative averaging", 1200, dissipative},
        {8, "equidistribution", 1800, equidistribution},
        {9, "quasi-invariance mechanism", 600, quasi_invariance},
        {10, "Galerkin convergence", 600, galerkin},
        {11, "determinism", 300, determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("%s criterion %2d: %s: %s (%.1f s of %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), secs, c.budget_s, in_time ? "" : " over budget");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
