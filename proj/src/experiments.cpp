#include "kdvlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kdvlab/averaging.hpp"
#include "kdvlab/conservation.hpp"
#include "kdvlab/hill.hpp"
#include "kdvlab/trajectory_io.hpp"

namespace kdvlab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFailedMarker = "FAILED";

// Writes report files stamped with schema_version and the config digest, and
// remembers their names for the manifest.
class Artifacts {
public:
    Artifacts(fs::path dir, std::string digest, std::uint64_t seed)
        : dir_(std::move(dir)), digest_(std::move(digest)), seed_(seed) {}

    void json(const std::string& name, nlohmann::json body) {
        body["schema_version"] = kSchemaVersion;
        body["config_digest"] = digest_;
        write(name, body.dump(2) + "\n");
    }

    template <typename Fill>
    void csv(const std::string& name, Fill fill) {
        std::ostringstream os;
        os << "# schema_version=" << kSchemaVersion << " config_digest=" << digest_ << '\n';
        fill(os);
        write(name, os.str());
    }

    void trajectory(const std::string& name, Trajectory traj) {
        traj.provenance = {seed_, digest_};
        try {
            write_trajectory(dir_ / name, traj);
        } catch (const std::exception& e) {
            throw IoError(e.what());
        }
        files_.insert(name + "/manifest.json");
        files_.insert(name + "/trajectory.bin");
    }

    std::vector<std::string> files() const { return {files_.begin(), files_.end()}; }

private:
    void write(const std::string& name, const std::string& text) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw IoError("cannot write " + (dir_ / name).string());
        files_.insert(name);
    }

    fs::path dir_;
    std::string digest_;
    std::uint64_t seed_;
    std::set<std::string> files_;
};

std::string cell_name(const std::string& stem, std::size_t i, const std::string& ext) {
    std::ostringstream os;
    os << stem << '_' << std::setw(2) << std::setfill('0') << i << ext;
    return os.str();
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

// True when values[order[i]] strictly decrease along decreasing eps.
bool decreasing_in_eps(const std::vector<double>& eps, const std::vector<double>& values) {
    std::vector<std::size_t> order(eps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (!(values[order[i]] < values[order[i - 1]])) return false;
    }
    return true;
}

EvolveParams cell_params(const ExperimentConfig& c, double eps, double eps_max, double tau_end) {
    EvolveParams p = sweep_params(c.integrator, eps, eps_max);
    p.eps = eps;
    p.tau_end = tau_end;
    return p;
}

std::vector<double> to_vector(const ActionVector& a) { return {a.entries().begin(), a.entries().end()}; }

nlohmann::json run_simulate(const ExperimentConfig& c, Artifacts& art) {
    const auto& s = c.simulate;
    EvolveParams p = evolve_params(c.integrator);
    p.eps = s.eps;
    p.t_end = s.tau_end > 0.0 ? 0.0 : s.t_end;
    p.tau_end = s.tau_end;
    const Field u0 = initial_field(c);
    Trajectory traj;
    try {
        traj = s.galerkin_m ? galerkin_evolve(u0, *s.galerkin_m, p, c.perturbation, s.sample_stride)
                            : evolve(u0, p, c.perturbation, s.sample_stride);
    } catch (const EvolveError& e) {
        art.trajectory("trajectory", e.partial());
        throw;
    }
    art.trajectory("trajectory", traj);
    nlohmann::json cons = nlohmann::json::array();
    for (int n = 0; n <= 2; ++n) {
        const double a = conservation_functional(traj.samples.front().u, n);
        const double b = conservation_functional(traj.samples.back().u, n);
        cons.push_back({{"n", n}, {"initial", a}, {"final", b}, {"relative_change", a != 0.0 ? (b - a) / std::abs(a) : 0.0}});
    }
    const bool slow = traj.slow_clock();
    nlohmann::json summary{{"experiment", "simulate"},
                           {"n_samples", traj.samples.size()},
                           {"dt_used", traj.dt_used},
                           {"clock", slow ? "tau" : "t"},
                           {"final_clock", traj.samples.back().clock(slow)},
                           {"sobolev_norm_3", {{"initial", sobolev_norm(traj.samples.front().u, 3.0)},
                                               {"final", sobolev_norm(traj.samples.back().u, 3.0)}}},
                           {"conservation", cons}};
    art.json("simulate.json", summary);
    return summary;
}

nlohmann::json run_spectrum(const ExperimentConfig& c, Artifacts& art) {
    const Field u = initial_field(c);
    const auto spec = periodic_spectrum(u, c.spectrum.n_gaps);
    HillOperator op(u);
    std::vector<double> acts;
    nlohmann::json gaps = nlohmann::json::array();
    for (int j = 1; j <= spec.n_gaps(); ++j) {
        const auto& g = spec.gaps[static_cast<std::size_t>(j - 1)];
        acts.push_back(gap_action(op, g));
        gaps.push_back({{"j", j}, {"lambda_lo", g.lo}, {"lambda_hi", g.hi}, {"gamma", g.gamma()}, {"open", g.open},
                        {"action", acts.back()}});
    }
    art.csv("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, spec, ActionVector(acts)); });
    nlohmann::json summary{{"experiment", "spectrum"}, {"lambda0", spec.lambda0}, {"gaps", gaps}};
    art.json("spectrum.json", summary);
    return summary;
}

bool has_linear_rates(PerturbationKind kind) {
    return kind == PerturbationKind::none || kind == PerturbationKind::double_antiderivative ||
           kind == PerturbationKind::derivative || kind == PerturbationKind::antiderivative;
}

nlohmann::json run_average(const ExperimentConfig& c, Artifacts& art) {
    const auto& a = c.average;
    const Field u = initial_field(c);
    const auto est = estimate_averaged_field(u, a.k_max, c.perturbation, a.averaging);
    const auto acts = to_vector(actions(u, a.k_max));
    // f commutes with translations, so F_k is translation invariant; its spread over
    // shifted copies of u is the evaluation noise of a single rate sample.
    constexpr int kShifts = 16;
    const auto f0 = action_rates(u, a.k_max, c.perturbation);
    std::vector<double> resolution(f0.size(), 0.0);
    for (int s = 0; s < kShifts; ++s) {
        const auto f = action_rates(translate(u, (s + 0.5) / kShifts), a.k_max, c.perturbation);
        for (std::size_t k = 0; k < f.size(); ++k) resolution[k] = std::max(resolution[k], std::abs(f[k] - f0[k]));
    }
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> predicted;
    if (has_linear_rates(c.perturbation.kind)) {
        const auto rates = linear_rates(c.perturbation, a.k_max);
        for (int k = 0; k < a.k_max; ++k) predicted.push_back(rates[static_cast<std::size_t>(k)] * acts[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < a.k_max; ++k) {
        const auto i = static_cast<std::size_t>(k);
        nlohmann::json row{{"k", k + 1}, {"action", acts[i]}, {"mean", est.mean[i]}, {"error", est.error[i]},
                           {"resolution", resolution[i]}};
        row["linear_prediction"] = predicted.empty() ? nlohmann::json(nullptr) : nlohmann::json(predicted[i]);
        rows.push_back(row);
    }
    art.csv("average.csv", [&](std::ostream& os) {
        os << "k,I,mean,error\n" << std::setprecision(17);
        for (int k = 0; k < a.k_max; ++k) {
            const auto i = static_cast<std::size_t>(k);
            os << k + 1 << ',' << acts[i] << ',' << est.mean[i] << ',' << est.error[i] << '\n';
        }
    });
    nlohmann::json summary{{"experiment", "average"}, {"rates", rows}};
    art.json("average.json", summary);
    return summary;
}

AveragedField make_averaged(const ExperimentConfig& c, const Field& u0) {
    const auto& t = c.theorem_i;
    if (t.averaged == "zero") return AveragedField::zero(t.k_max);
    if (t.averaged == "linear") return AveragedField::linear(linear_rates(c.perturbation, t.k_max));
    return AveragedField::estimated(u0, t.k_max, c.perturbation, t.averaging);
}

nlohmann::json run_theorem_i(const ExperimentConfig& c, const RunOptions& opt, Artifacts& art) {
    const auto& t = c.theorem_i;
    const Field u0 = initial_field(c);
    const auto i0 = to_vector(actions(u0, t.k_max));
    std::vector<double> j0 = i0;
    for (double& x : j0) x *= 1.0 + t.delta;

    AveragedSolveOptions so;
    so.n_out = std::max(1, static_cast<int>(std::lround(t.tau_end / t.sample_stride)));
    const auto field = make_averaged(c, u0);
    spdlog::info("theorem-i: solving averaged equation ({})", t.averaged);
    const auto solution = solve_averaged(j0, t.tau_end, field, t.p, t.ball_radius, so);

    // Actions are translation invariant, so their spread over shifted copies of u0
    // is the evaluation noise; I - J differences below twice that are not resolved.
    constexpr int kShifts = 16;
    std::vector<double> spread(i0.size(), 0.0);
    for (int s = 0; s < kShifts; ++s) {
        const auto a = to_vector(actions(translate(u0, (s + 0.5) / kShifts), t.k_max));
        for (std::size_t k = 0; k < a.size(); ++k) spread[k] = std::max(spread[k], std::abs(a[k] - i0[k]));
    }
    const double resolution = 2.0 * action_norm(std::span<const double>(spread), t.q);

    const double eps_max = max_of(t.eps);
    std::vector<ComparisonReport> reports(t.eps.size());
    std::vector<double> dt_used(t.eps.size());
    parallel_for(t.eps.size(), opt.jobs, [&](std::size_t i) {
        const double eps = t.eps[i];
        const auto traj = evolve(u0, cell_params(c, eps, eps_max, t.tau_end), c.perturbation, t.sample_stride);
        // A fresh evaluator per cell keeps its warm-started representative schedule-independent.
        const auto residual_field = make_averaged(c, u0);
        reports[i] = compare(traj, solution, t.q, t.k_max, t.rho, &residual_field);
        dt_used[i] = traj.dt_used;
        spdlog::info("theorem-i: eps={} rho={}", eps, reports[i].rho_observed);
    });

    nlohmann::json cells = nlohmann::json::array();
    std::vector<double> rho;
    bool pass = true;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        art.csv(cell_name("comparison", i, ".csv"), [&](std::ostream& os) { write_comparison_csv(os, reports[i]); });
        auto j = to_json(reports[i]);
        j["dt_used"] = dt_used[i];
        cells.push_back(j);
        rho.push_back(reports[i].rho_observed);
        pass = pass && reports[i].pass;
    }
    nlohmann::json summary{{"experiment", "theorem-i"},
                           {"initial_actions", i0},
                           {"averaged_kind", t.averaged},
                           {"averaged", {{"tau", solution.tau}, {"j", solution.j}, {"stop_time", solution.stop_time},
                                         {"evaluations", solution.evaluations}}},
                           {"cells", cells},
                           {"rho_observed", rho},
                           {"rho_decreasing", decreasing_in_eps(t.eps, rho)},
                           {"action_resolution", resolution},
                           {"rho_resolved", std::all_of(rho.begin(), rho.end(), [&](double r) { return r > resolution; })},
                           {"pass", pass}};
    art.json("theorem_i.json", summary);
    return summary;
}

nlohmann::json run_theorem_ii(const ExperimentConfig& c, const RunOptions& opt, Artifacts& art) {
    const auto& t = c.theorem_ii;
    const std::size_t n_eps = t.eps.size();
    const std::size_t members = t.members;
    const double eps_max = max_of(t.eps);

    std::vector<WeylAccumulator> acc(n_eps * members, WeylAccumulator(t.angles, t.order));
    std::vector<double> occupation(n_eps * members, 0.0);
    parallel_for(n_eps * members, opt.jobs, [&](std::size_t task) {
        const std::size_t cell = task / members;
        const std::size_t member = task % members;
        const double eps = t.eps[cell];
        const Field u0 = initial_field(c, member);
        auto& a = acc[task];
        a.begin_trajectory();
        const auto traj = evolve(u0, cell_params(c, eps, eps_max, t.tau_end), c.perturbation, t.sample_stride,
                                 [&](const Sample& s) {
                                     a.add(s.tau, s.t, s.u);
                                     return true;
                                 });
        a.end_trajectory();
        if (t.resonance) {
            Trajectory coarse = traj;
            coarse.samples.clear();
            const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(t.resonance_stride / t.sample_stride)));
            for (std::size_t i = 0; i < traj.samples.size(); i += every) coarse.samples.push_back(traj.samples[i]);
            occupation[task] = resonance_occupation(coarse, t.angles, t.order, t.alpha, eps, t.scales);
        }
        spdlog::debug("theorem-ii: eps={} member={} done", eps, member);
    });

    nlohmann::json cells = nlohmann::json::array();
    std::vector<double> moduli;
    std::vector<WeylReport> reports;
    bool pass = true;
    for (std::size_t cell = 0; cell < n_eps; ++cell) {
        WeylAccumulator merged(t.angles, t.order);
        double occ = 0.0;
        for (std::size_t m = 0; m < members; ++m) {
            merged.merge(acc[cell * members + m]);
            occ += occupation[cell * members + m];
        }
        reports.push_back(merged.report(t.eps[cell]));
        const double mm = reports.back().max_modulus();
        moduli.push_back(mm);
        const bool cell_pass = !t.threshold || mm < *t.threshold;
        pass = pass && cell_pass;
        nlohmann::json j{{"eps", t.eps[cell]}, {"weyl", to_json(reports.back())}, {"max_modulus", mm}, {"pass", cell_pass}};
        j["resonance_occupation"] = t.resonance ? nlohmann::json(occ / static_cast<double>(members)) : nlohmann::json(nullptr);
        cells.push_back(j);
        spdlog::info("theorem-ii: eps={} max|W|={}", t.eps[cell], mm);
    }
    art.csv("weyl.csv", [&](std::ostream& os) {
        os << "eps,s,re,im,modulus\n" << std::setprecision(17);
        for (const auto& r : reports) {
            for (const auto& [s, v] : r.statistics) {
                os << r.eps << ',';
                for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ";" : "") << s[i];
                os << ',' << v.real() << ',' << v.imag() << ',' << std::abs(v) << '\n';
            }
        }
    });
    nlohmann::json summary{{"experiment", "theorem-ii"},
                           {"members", members},
                           {"cells", cells},
                           {"max_modulus", moduli},
                           {"moduli_decreasing", decreasing_in_eps(t.eps, moduli)},
                           {"threshold", t.threshold ? nlohmann::json(*t.threshold) : nlohmann::json(nullptr)},
                           {"pass", pass}};
    art.json("theorem_ii.json", summary);
    return summary;
}

nlohmann::json run_quasi_invariance(const ExperimentConfig& c, const RunOptions& opt, Artifacts& art) {
    const auto& t = c.quasi_invariance;
    const Field u0 = initial_field(c);
    const double eps_max = max_of(t.eps);
    std::vector<QuasiInvarianceSeries> series(t.eps.size());
    parallel_for(t.eps.size(), opt.jobs, [&](std::size_t i) {
        const double eps = t.eps[i];
        const auto traj = galerkin_evolve(u0, t.m, cell_params(c, eps, eps_max, t.tau_end), c.perturbation, t.sample_stride);
        series[i] = quasi_invariance_rate(traj, t.m, t.p, eps, c.perturbation);
    });
    nlohmann::json cells = nlohmann::json::array();
    std::vector<double> sup;
    bool divergence_zero = true;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        art.csv(cell_name("quasi_invariance", i, ".csv"), [&](std::ostream& os) { write_quasi_invariance_csv(os, s); });
        auto sup_abs = [](const std::vector<double>& v) {
            double m = 0.0;
            for (double x : v) m = std::max(m, std::abs(x));
            return m;
        };
        sup.push_back(s.sup_abs_rate());
        for (double d : s.divergence) divergence_zero = divergence_zero && d == 0.0;
        cells.push_back({{"eps", t.eps[i]},
                         {"sup_abs_rate", s.sup_abs_rate()},
                         {"sup_abs_drift", sup_abs(s.drift)},
                         {"sup_abs_forcing", sup_abs(s.forcing)},
                         {"sup_abs_divergence", sup_abs(s.divergence)}});
    }
    const double hi = max_of(sup);
    const double lo = *std::min_element(sup.begin(), sup.end());
    const double ratio = lo > 0.0 ? hi / lo : (hi == 0.0 ? 1.0 : INFINITY);
    nlohmann::json summary{{"experiment", "quasi-invariance"},
                           {"m", t.m},
                           {"p", t.p},
                           {"cells", cells},
                           {"sup_ratio", ratio},
                           {"bounded", ratio <= t.max_ratio},
                           {"divergence_identically_zero", divergence_zero}};
    art.json("quasi_invariance.json", summary);
    return summary;
}

nlohmann::json run_galerkin_convergence(const ExperimentConfig& c, const RunOptions& opt, Artifacts& art) {
    const auto& t = c.galerkin_convergence;
    std::set<std::size_t> dims_set;
    for (auto m : t.m) {
        dims_set.insert(m);
        dims_set.insert(2 * m);
    }
    const std::vector<std::size_t> dims(dims_set.begin(), dims_set.end());
    const Field u0 = initial_field(c);
    EvolveParams p = evolve_params(c.integrator);
    p.eps = t.eps;
    p.tau_end = t.tau_end;
    std::vector<Trajectory> runs(dims.size());
    parallel_for(dims.size(), opt.jobs,
                 [&](std::size_t i) { runs[i] = galerkin_evolve(u0, dims[i], p, c.perturbation, t.sample_stride); });
    auto run_of = [&](std::size_t m) -> const Trajectory& {
        return runs[static_cast<std::size_t>(std::find(dims.begin(), dims.end(), m) - dims.begin())];
    };

    nlohmann::json pairs = nlohmann::json::array();
    std::vector<double> sups;
    std::vector<std::vector<double>> series;
    std::vector<double> tau;
    for (auto m : t.m) {
        const auto& a = run_of(m);
        const auto& b = run_of(2 * m);
        const std::size_t n = std::min(a.samples.size(), b.samples.size());
        std::vector<double> diff(n);
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diff[i] = sobolev_norm(a.samples[i].u.resized(2 * m) - b.samples[i].u.resized(2 * m), t.q);
            sup = std::max(sup, diff[i]);
        }
        if (tau.size() < n) {
            tau.clear();
            for (std::size_t i = 0; i < n; ++i) tau.push_back(b.samples[i].tau);
        }
        sups.push_back(sup);
        series.push_back(diff);
        pairs.push_back({{"m", m}, {"sup_diff", sup}, {"dt_m", a.dt_used}, {"dt_2m", b.dt_used}});
    }
    art.csv("galerkin_convergence.csv", [&](std::ostream& os) {
        os << "tau,m,diff\n" << std::setprecision(17);
        for (std::size_t k = 0; k < t.m.size(); ++k) {
            for (std::size_t i = 0; i < series[k].size(); ++i) os << tau[i] << ',' << t.m[k] << ',' << series[k][i] << '\n';
        }
    });
    bool decreasing = true;
    for (std::size_t k = 1; k < sups.size(); ++k) decreasing = decreasing && sups[k] < sups[k - 1];
    nlohmann::json summary{{"experiment", "galerkin-convergence"},
                           {"q", t.q},
                           {"pairs", pairs},
                           {"sup_diff", sups},
                           {"decreasing", decreasing}};
    art.json("galerkin_convergence.json", summary);
    return summary;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& c, const std::string& digest,
                    const std::vector<std::string>& files, const std::string& status, const std::string& error) {
    auto resolved = to_json(c);
    resolved.erase("output");
    nlohmann::json m{{"schema_version", kSchemaVersion},
                     {"config_digest", digest},
                     {"experiment", std::string(to_string(c.experiment))},
                     {"seed", c.seed},
                     {"config", resolved},
                     {"status", status},
                     {"files", files}};
    if (!error.empty()) m["error"] = error;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
}

void prepare_directory(const fs::path& dir, const std::string& digest, bool force) {
    const auto manifest = dir / "manifest.json";
    std::error_code ec;
    if (fs::exists(manifest, ec)) {
        std::string existing;
        try {
            std::ifstream in(manifest);
            existing = nlohmann::json::parse(in).at("config_digest").get<std::string>();
        } catch (const std::exception&) {
            existing = "<unreadable>";
        }
        if (existing != digest && !force) {
            throw IoError("output directory " + dir.string() + " holds results for config digest " + existing +
                          "; refusing to overwrite (use --force)");
        }
    }
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    fs::remove(dir / kFailedMarker, ec);
}

}  // namespace

Field initial_field(const ExperimentConfig& c, std::uint64_t member) {
    const auto& in = c.initial;
    Field u(in.m_max);
    if (in.source == "modes") {
        u = Field(in.modes).resized(in.m_max);
    } else if (in.source == "measure") {
        u = sample(in.measure, c.seed, in.index + member).field.resized(in.m_max);
    }
    if (in.norm3) {
        const double n = sobolev_norm(u, 3.0);
        if (!(n > 0.0)) throw NumericalFailure("initial field has zero norm; cannot rescale");
        u *= *in.norm3 / n;
    }
    return u;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(n, 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    validate(config);
    RunResult result;
    result.out = options.out.empty() ? fs::path(config.output) : options.out;
    result.digest = config_digest(config);
    prepare_directory(result.out, result.digest, options.force);
    spdlog::info("{}: digest {} -> {}", to_string(config.experiment), result.digest, result.out.string());

    Artifacts art(result.out, result.digest, config.seed);
    std::string failure;
    try {
        switch (config.experiment) {
            case ExperimentKind::simulate: result.summary = run_simulate(config, art); break;
            case ExperimentKind::spectrum: result.summary = run_spectrum(config, art); break;
            case ExperimentKind::average: result.summary = run_average(config, art); break;
            case ExperimentKind::theorem_i: result.summary = run_theorem_i(config, options, art); break;
            case ExperimentKind::theorem_ii: result.summary = run_theorem_ii(config, options, art); break;
            case ExperimentKind::quasi_invariance: result.summary = run_quasi_invariance(config, options, art); break;
            case ExperimentKind::galerkin_convergence:
                result.summary = run_galerkin_convergence(config, options, art);
                break;
        }
    } catch (const IoError&) {
        throw;
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const std::exception& e) {
        failure = e.what();
    }
    if (!failure.empty()) {
        spdlog::error("{}: numerical failure: {}", to_string(config.experiment), failure);
        {
            std::ofstream marker(result.out / kFailedMarker, std::ios::trunc);
            marker << failure << '\n';
        }
        write_manifest(result.out, config, result.digest, art.files(), "failed", failure);
        throw NumericalFailure(failure);
    }
    result.files = art.files();
    write_manifest(result.out, config, result.digest, result.files, "ok", "");
    return result;
}

std::map<std::string, std::string> directory_digests(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        out[fs::relative(entry.path(), dir).generic_string()] = sha256_hex(bytes.str());
    }
    return out;
}

void configure_logging() {
    auto logger = spdlog::get("kdvlab");
    if (!logger) logger = spdlog::stderr_color_mt("kdvlab");
    spdlog::set_default_logger(logger);
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("KDVLAB_LOG")) {
        const auto parsed = spdlog::level::from_str(env);
        // from_str maps unknown names to off; keep the default for those.
        if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
    }
    spdlog::set_level(level);
}

}  // namespace kdvlab
