#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "kdvlab/config.hpp"
#include "kdvlab/experiments.hpp"

using namespace kdvlab;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(schema_version: 1
experiment: spectrum
initial:
  source: zero
)";

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("kdvlab_test_lab_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    return dir;
}

std::vector<std::string> diagnostics_of(const std::string& yaml) {
    try {
        parse_config(yaml, "test.yaml");
    } catch (const ConfigInvalid& e) {
        return e.diagnostics();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& lines, const std::string& needle) {
    for (const auto& l : lines) {
        if (l.find(needle) != std::string::npos) return true;
    }
    return false;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const char* kEnsemble = R"(schema_version: 1
experiment: theorem-ii
seed: 11
initial:
  source: measure
  m_max: 12
  measure: {kind: gaussian_h, p: 3, m: 8, sigma_scale: 0.01, amplitude_cap: 0.25}
perturbation: {kind: double_antiderivative}
integrator: {dt_cap: 2e-3}
theorem_ii:
  eps: [0.5, 0.25]
  members: 5
  angles: 2
  tau_end: 0.2
  sample_stride: 0.004
  threshold: 1.0
)";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(KDVLAB_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal config is accepted and resolves defaults") {
    const auto c = parse_config(kMinimal);
    CHECK(c.experiment == ExperimentKind::spectrum);
    CHECK(c.spectrum.n_gaps == 4);
    CHECK(c.initial.m_max == 16);
    const auto j = to_json(c);
    CHECK(j.at("spectrum").at("n_gaps") == 4);
    CHECK(j.at("integrator").at("dt_cap") == 1e-3);
    CHECK_FALSE(j.contains("theorem_i"));
    const auto d = config_digest(c);
    CHECK(d.size() == 64);
    CHECK(d == config_digest(parse_config(kMinimal)));
}

TEST_CASE("alpha at or above 1/4 is rejected") {
    const auto diags = diagnostics_of(R"(schema_version: 1
experiment: theorem-ii
initial:
  source: measure
  measure: {kind: gaussian_h, amplitude_cap: 0.25}
theorem_ii:
  alpha: 0.3
)");
    REQUIRE(diags.size() == 1);
    CHECK(any_contains(diags, "test.yaml:7: theorem_ii.alpha"));
    CHECK(any_contains(diags, "alpha < 1/4"));
}

TEST_CASE("zeta0' below 1 is rejected") {
    const auto diags = diagnostics_of(R"(schema_version: 1
experiment: spectrum
initial:
  source: measure
  measure:
    kind: gaussian_h
    zeta0_prime: 0.5
)");
    REQUIRE(diags.size() == 1);
    CHECK(any_contains(diags, "test.yaml:7: initial.measure.zeta0_prime"));
    CHECK(any_contains(diags, "must exceed 1"));
}

TEST_CASE("angle experiments need an amplitude cap") {
    const auto diags = diagnostics_of(R"(schema_version: 1
experiment: theorem-ii
initial:
  source: measure
  measure: {kind: gaussian_h}
)");
    CHECK(any_contains(diags, "initial.measure.amplitude_cap"));
}

TEST_CASE("schema and key checks") {
    CHECK(any_contains(diagnostics_of("experiment: spectrum\n"), "schema_version: required"));
    CHECK(any_contains(diagnostics_of("schema_version: 2\nexperiment: spectrum\n"), "unsupported version 2"));
    CHECK(any_contains(diagnostics_of("schema_version: 1\nexperiment: spectrum\ncolour: red\n"),
                       "test.yaml:3: colour: unknown key"));
    CHECK(any_contains(diagnostics_of("schema_version: 1\nexperiment: spectrum\nspectrum: {n_gap: 3}\n"),
                       "spectrum.n_gap: unknown key"));
    CHECK(any_contains(diagnostics_of("schema_version: 1\nexperiment: nonsense\n"), "unknown experiment"));
    CHECK(any_contains(diagnostics_of("schema_version: 1\nexperiment: spectrum\nseed: -4\n"), "seed: must be nonnegative"));
    CHECK(any_contains(diagnostics_of("schema_version: 1\nexperiment: spectrum\nspectrum: {n_gaps: many}\n"),
                       "spectrum.n_gaps: expected an integer"));
    CHECK(any_contains(diagnostics_of("schema_version: 1\nexperiment: spectrum\ninitial: [1, 2\n"), "test.yaml:"));
}

TEST_CASE("digest follows the computation, not the output directory") {
    const auto a = parse_config(kMinimal);
    auto b = a;
    b.output = "elsewhere";
    CHECK(config_digest(a) == config_digest(b));
    b.seed = 99;
    CHECK(config_digest(a) != config_digest(b));
    auto c = a;
    c.spectrum.n_gaps = 5;
    CHECK(config_digest(a) != config_digest(c));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("sweep step scaling") {
    IntegratorConfig ig;
    ig.dt_cap = 1e-3;
    ig.eps_dt_exponent = 0.5;
    CHECK(sweep_params(ig, 0.1, 0.1).dt_cap == doctest::Approx(1e-3));
    CHECK(sweep_params(ig, 0.001, 0.1).dt_cap == doctest::Approx(1e-4));
    ig.eps_dt_exponent = 0.0;
    CHECK(sweep_params(ig, 0.001, 0.1).dt_cap == 1e-3);
}

TEST_CASE("spectrum on the zero field") {
    const auto out = scratch("spectrum");
    const auto result = run_experiment(parse_config(kMinimal), {out, 1, false});
    const auto j = read_json(out / "spectrum.json");
    CHECK(j.at("config_digest") == result.digest);
    CHECK(j.at("schema_version") == 1);
    REQUIRE(j.at("gaps").size() == 4);
    for (const auto& g : j.at("gaps")) {
        CHECK(g.at("gamma").get<double>() == 0.0);
        CHECK(g.at("action").get<double>() == 0.0);
    }
    const auto csv = read_text(out / "spectrum.csv");
    CHECK(csv.rfind("# schema_version=1 config_digest=" + result.digest + "\n", 0) == 0);
    const auto m = read_json(out / "manifest.json");
    CHECK(m.at("status") == "ok");
    CHECK(m.at("config_digest") == result.digest);
    CHECK(m.at("files") == nlohmann::json({"spectrum.csv", "spectrum.json"}));
}

TEST_CASE("mismatched digest is refused unless forced") {
    const auto out = scratch("refuse");
    auto c = parse_config(kMinimal);
    run_experiment(c, {out, 1, false});
    CHECK_NOTHROW(run_experiment(c, {out, 1, false}));
    c.seed = 3;
    CHECK_THROWS_AS(run_experiment(c, {out, 1, false}), IoError);
    CHECK_NOTHROW(run_experiment(c, {out, 1, true}));
    CHECK(read_json(out / "manifest.json").at("seed") == 3);
}

TEST_CASE("reports are byte-identical across runs and job counts") {
    const auto c = parse_config(kEnsemble);
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    const auto d = scratch("det_c");
    run_experiment(c, {a, 1, false});
    run_experiment(c, {b, 3, false});
    run_experiment(c, {d, 1, false});
    const auto da = directory_digests(a);
    CHECK(da.size() == 3);
    CHECK(da == directory_digests(b));
    CHECK(da == directory_digests(d));
    const auto j = read_json(a / "theorem_ii.json");
    CHECK(j.at("cells").size() == 2);
    CHECK(j.at("cells")[0].at("weyl").at("trajectories") == 5);
}

TEST_CASE("theorem-i end to end") {
    const std::string base = R"(schema_version: 1
experiment: theorem-i
seed: 5
initial:
  source: measure
  m_max: 16
  measure: {kind: eta_p, p: 3, m: 3}
  norm3: 0.1
perturbation: {kind: double_antiderivative}
integrator: {dt_cap: 1e-3}
theorem_i:
  eps: [0.01]
  averaged: linear
  tau_end: 0.2
  sample_stride: 0.05
)";
    const auto out = scratch("theorem_i");
    auto c = parse_config(base + "  rho: 1.0e-6\n");
    run_experiment(c, {out, 1, false});
    auto j = read_json(out / "theorem_i.json");
    REQUIRE(j.at("cells").size() == 1);
    const auto& cell = j.at("cells")[0];
    CHECK(cell.at("threshold") == 1e-6);
    CHECK(cell.at("pass") == true);
    CHECK(j.at("pass") == true);
    const double rho = cell.at("rho_observed").get<double>();
    CHECK(rho < 1e-6);
    CHECK(cell.at("tau").size() == 5);
    CHECK(cell.at("residuals").size() == 5);

    // The averaged solution starts at I(0) and decays like exp(-2 (2 pi k)^-2 tau).
    const auto& i0 = j.at("initial_actions");
    const auto& jt = j.at("averaged").at("j");
    const double tau_last = j.at("averaged").at("tau").back().get<double>();
    for (int k = 0; k < 3; ++k) {
        const double expected = i0[k].get<double>() * std::exp(-2.0 * std::pow(2.0 * M_PI * (k + 1), -2) * tau_last);
        CHECK(jt.back()[k].get<double>() == doctest::Approx(expected).epsilon(1e-8));
    }

    const auto strict = scratch("theorem_i_strict");
    std::ostringstream tight;
    tight << std::setprecision(17) << "  rho: " << rho / 10 << "\n";
    run_experiment(parse_config(base + tight.str()), {strict, 1, false});
    CHECK(read_json(strict / "theorem_i.json").at("pass") == false);
}

TEST_CASE("numerical failure leaves a marker") {
    const auto out = scratch("failure");
    const auto c = parse_config(R"(schema_version: 1
experiment: simulate
initial:
  source: modes
  m_max: 8
  modes: [[0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0.01, 0]]
integrator: {tail_tolerance: 1.0e-12}
simulate: {t_end: 0.01, sample_stride: 0.005}
)");
    CHECK_THROWS_AS(run_experiment(c, {out, 1, false}), NumericalFailure);
    CHECK(fs::exists(out / "FAILED"));
    const auto m = read_json(out / "manifest.json");
    CHECK(m.at("status") == "failed");
    CHECK(m.at("files") == nlohmann::json({"trajectory/manifest.json", "trajectory/trajectory.bin"}));
}

TEST_CASE("parallel_for runs every index and rethrows the lowest failure") {
    std::vector<int> hit(20, 0);
    parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
    CHECK(std::count(hit.begin(), hit.end(), 1) == 20);
    try {
        parallel_for(10, 3, [](std::size_t i) {
            if (i == 7 || i == 4) throw std::runtime_error("task " + std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "task 4");
    }
}

TEST_CASE("command-line exit codes") {
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    const auto good = dir / "good.yaml";
    const auto bad = dir / "bad.yaml";
    std::ofstream(good) << kMinimal;
    std::ofstream(bad) << "schema_version: 1\nexperiment: spectrum\nbogus: 1\n";
    const auto out = (dir / "out").string();
    CHECK(run_cli("validate --config " + good.string()) == 0);
    CHECK(run_cli("validate --config " + bad.string()) == 2);
    CHECK(run_cli("spectrum --config " + good.string() + " --out " + out) == 0);
    CHECK(run_cli("spectrum --config " + good.string() + " --out " + out + " --seed 4") == 4);
    CHECK(run_cli("spectrum --config " + good.string() + " --out " + out + " --seed 4 --force") == 0);
    CHECK(run_cli("simulate --config " + good.string() + " --out " + out) == 2);
    CHECK(run_cli("spectrum") == 2);
}
