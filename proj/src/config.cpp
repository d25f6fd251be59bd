#include "kdvlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "kdvlab/conservation.hpp"

namespace kdvlab {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        if (!out.empty()) out += '\n';
        out += l;
    }
    return out;
}

std::string dotted(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

template <typename T>
constexpr const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
}

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    std::vector<std::string> diagnostics;
    std::map<std::string, int> lines;

    void error(int line, const std::string& path, const std::string& msg) {
        std::string where = source_;
        if (line > 0) where += ":" + std::to_string(line);
        diagnostics.push_back(where + ": " + path + ": " + msg);
    }

    // Registers the keys of a mapping and flags the ones not in `allowed`.
    bool section(const YAML::Node& node, const std::string& path, std::initializer_list<std::string_view> allowed) {
        if (!node.IsMap()) {
            error(line_of(node), path, "expected a mapping");
            return false;
        }
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            const auto full = dotted(path, key);
            lines[full] = kv.first.Mark().line + 1;
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                error(lines[full], full, "unknown key");
            }
        }
        return true;
    }

    template <typename T>
    void get(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
        const YAML::Node n = parent[key];
        if (!n) return;
        const auto full = dotted(path, key);
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            // Read wide and range-check: yaml-cpp wraps negatives into unsigned types.
            try {
                const auto wide = n.as<long long>();
                if (std::is_unsigned_v<T> && wide < 0) {
                    error(line_of(n), full, "must be nonnegative");
                    return;
                }
                out = static_cast<T>(wide);
                return;
            } catch (const YAML::Exception&) {
                if constexpr (std::is_same_v<T, std::uint64_t>) {
                    try {
                        out = n.as<std::uint64_t>();
                        return;
                    } catch (const YAML::Exception&) {
                    }
                }
            }
            error(line_of(n), full, std::string("expected ") + type_name<T>());
        } else {
            try {
                out = n.as<T>();
            } catch (const YAML::Exception&) {
                error(line_of(n), full, std::string("expected ") + type_name<T>());
            }
        }
    }

    template <typename T>
    void get(const YAML::Node& parent, const std::string& path, const char* key, std::optional<T>& out) {
        const YAML::Node n = parent[key];
        if (!n) return;
        if (n.IsNull()) {
            out.reset();
            return;
        }
        T value{};
        get(parent, path, key, value);
        out = value;
    }

    static int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

private:
    std::string source_;
};

void read_averaging(Reader& r, const YAML::Node& node, const std::string& path, AveragingParams& a) {
    if (!node) return;
    if (!r.section(node, path, {"t_avg", "samples", "blocks", "dt", "check_resonance", "resonance_order",
                                "resonance_gap", "frequency_horizon", "fit_tolerance"})) {
        return;
    }
    r.get(node, path, "t_avg", a.t_avg);
    r.get(node, path, "samples", a.samples);
    r.get(node, path, "blocks", a.blocks);
    r.get(node, path, "dt", a.dt);
    r.get(node, path, "check_resonance", a.check_resonance);
    r.get(node, path, "resonance_order", a.resonance_order);
    r.get(node, path, "resonance_gap", a.resonance_gap);
    r.get(node, path, "frequency_horizon", a.frequency_horizon);
    r.get(node, path, "fit_tolerance", a.fit_tolerance);
}

void read_initial(Reader& r, const YAML::Node& node, InitialConfig& c) {
    if (!node) return;
    if (!r.section(node, "initial", {"source", "m_max", "modes", "measure", "index", "norm3"})) return;
    r.get(node, "initial", "source", c.source);
    r.get(node, "initial", "m_max", c.m_max);
    r.get(node, "initial", "index", c.index);
    r.get(node, "initial", "norm3", c.norm3);
    if (const YAML::Node modes = node["modes"]) {
        std::vector<std::vector<double>> rows;
        r.get(node, "initial", "modes", rows);
        for (const auto& row : rows) {
            if (row.size() != 2) {
                r.error(Reader::line_of(modes), "initial.modes", "each mode is a pair [u_k, u_-k]");
                break;
            }
            c.modes.push_back({row[0], row[1]});
        }
    }
    if (const YAML::Node m = node["measure"]) {
        const std::string path = "initial.measure";
        if (r.section(m, path, {"kind", "p", "m", "zeta0_prime", "sigma_scale", "amplitude_cap"})) {
            std::string kind = std::string(to_string(c.measure.kind));
            r.get(m, path, "kind", kind);
            try {
                c.measure.kind = measure_kind_from_string(kind);
            } catch (const std::exception&) {
                r.error(Reader::line_of(m["kind"]), path + ".kind", "unknown measure '" + kind + "'");
            }
            r.get(m, path, "p", c.measure.p);
            r.get(m, path, "m", c.measure.m);
            r.get(m, path, "zeta0_prime", c.measure.zeta0_prime);
            r.get(m, path, "sigma_scale", c.measure.sigma_scale);
            r.get(m, path, "amplitude_cap", c.measure.amplitude_cap);
        }
    }
}

void read_perturbation(Reader& r, const YAML::Node& node, PerturbationSpec& spec) {
    if (!node) return;
    if (!r.section(node, "perturbation", {"kind", "scale", "zeta0"})) return;
    std::string kind = std::string(to_string(spec.kind));
    double scale = 1.0;
    std::optional<double> zeta0;
    r.get(node, "perturbation", "kind", kind);
    r.get(node, "perturbation", "scale", scale);
    r.get(node, "perturbation", "zeta0", zeta0);
    try {
        spec = PerturbationSpec::make(perturbation_kind_from_string(kind), scale);
    } catch (const std::exception&) {
        r.error(Reader::line_of(node["kind"]), "perturbation.kind", "unknown perturbation '" + kind + "'");
        return;
    }
    if (zeta0) spec.zeta0 = *zeta0;
}

void read_integrator(Reader& r, const YAML::Node& node, IntegratorConfig& c) {
    if (!node) return;
    if (!r.section(node, "integrator", {"dt", "dt_cap", "cfl", "eps_dt_exponent", "tail_tolerance",
                                        "growth_factor", "max_halvings"})) {
        return;
    }
    r.get(node, "integrator", "dt", c.dt);
    r.get(node, "integrator", "dt_cap", c.dt_cap);
    r.get(node, "integrator", "cfl", c.cfl);
    r.get(node, "integrator", "eps_dt_exponent", c.eps_dt_exponent);
    r.get(node, "integrator", "tail_tolerance", c.tail_tolerance);
    r.get(node, "integrator", "growth_factor", c.growth_factor);
    r.get(node, "integrator", "max_halvings", c.max_halvings);
}

void read_sections(Reader& r, const YAML::Node& root, ExperimentConfig& c) {
    if (const YAML::Node n = root["simulate"]; n && r.section(n, "simulate", {"eps", "t_end", "tau_end",
                                                                            "sample_stride", "galerkin_m"})) {
        r.get(n, "simulate", "eps", c.simulate.eps);
        r.get(n, "simulate", "t_end", c.simulate.t_end);
        r.get(n, "simulate", "tau_end", c.simulate.tau_end);
        r.get(n, "simulate", "sample_stride", c.simulate.sample_stride);
        r.get(n, "simulate", "galerkin_m", c.simulate.galerkin_m);
    }
    if (const YAML::Node n = root["spectrum"]; n && r.section(n, "spectrum", {"n_gaps"})) {
        r.get(n, "spectrum", "n_gaps", c.spectrum.n_gaps);
    }
    if (const YAML::Node n = root["average"]; n && r.section(n, "average", {"k_max", "averaging"})) {
        r.get(n, "average", "k_max", c.average.k_max);
        read_averaging(r, n["averaging"], "average.averaging", c.average.averaging);
    }
    if (const YAML::Node n = root["theorem_i"];
        n && r.section(n, "theorem_i", {"eps", "tau_end", "k_max", "q", "rho", "p", "ball_radius", "averaged",
                                        "delta", "sample_stride", "averaging"})) {
        auto& t = c.theorem_i;
        r.get(n, "theorem_i", "eps", t.eps);
        r.get(n, "theorem_i", "tau_end", t.tau_end);
        r.get(n, "theorem_i", "k_max", t.k_max);
        r.get(n, "theorem_i", "q", t.q);
        r.get(n, "theorem_i", "rho", t.rho);
        r.get(n, "theorem_i", "p", t.p);
        r.get(n, "theorem_i", "ball_radius", t.ball_radius);
        r.get(n, "theorem_i", "averaged", t.averaged);
        r.get(n, "theorem_i", "delta", t.delta);
        r.get(n, "theorem_i", "sample_stride", t.sample_stride);
        read_averaging(r, n["averaging"], "theorem_i.averaging", t.averaging);
    }
    if (const YAML::Node n = root["theorem_ii"];
        n && r.section(n, "theorem_ii", {"eps", "members", "angles", "order", "tau_end", "sample_stride",
                                         "threshold", "alpha", "resonance", "resonance_stride", "action_scale",
                                         "frequency_scale", "frequency_horizon"})) {
        auto& t = c.theorem_ii;
        r.get(n, "theorem_ii", "eps", t.eps);
        r.get(n, "theorem_ii", "members", t.members);
        r.get(n, "theorem_ii", "angles", t.angles);
        r.get(n, "theorem_ii", "order", t.order);
        r.get(n, "theorem_ii", "tau_end", t.tau_end);
        r.get(n, "theorem_ii", "sample_stride", t.sample_stride);
        r.get(n, "theorem_ii", "threshold", t.threshold);
        r.get(n, "theorem_ii", "alpha", t.alpha);
        r.get(n, "theorem_ii", "resonance", t.resonance);
        r.get(n, "theorem_ii", "resonance_stride", t.resonance_stride);
        r.get(n, "theorem_ii", "action_scale", t.scales.action_scale);
        r.get(n, "theorem_ii", "frequency_scale", t.scales.frequency_scale);
        r.get(n, "theorem_ii", "frequency_horizon", t.scales.frequency_horizon);
    }
    if (const YAML::Node n = root["quasi_invariance"];
        n && r.section(n, "quasi_invariance", {"eps", "m", "p", "tau_end", "sample_stride", "max_ratio"})) {
        auto& t = c.quasi_invariance;
        r.get(n, "quasi_invariance", "eps", t.eps);
        r.get(n, "quasi_invariance", "m", t.m);
        r.get(n, "quasi_invariance", "p", t.p);
        r.get(n, "quasi_invariance", "tau_end", t.tau_end);
        r.get(n, "quasi_invariance", "sample_stride", t.sample_stride);
        r.get(n, "quasi_invariance", "max_ratio", t.max_ratio);
    }
    if (const YAML::Node n = root["galerkin_convergence"];
        n && r.section(n, "galerkin_convergence", {"eps", "m", "tau_end", "sample_stride", "q"})) {
        auto& t = c.galerkin_convergence;
        r.get(n, "galerkin_convergence", "eps", t.eps);
        r.get(n, "galerkin_convergence", "m", t.m);
        r.get(n, "galerkin_convergence", "tau_end", t.tau_end);
        r.get(n, "galerkin_convergence", "sample_stride", t.sample_stride);
        r.get(n, "galerkin_convergence", "q", t.q);
    }
}

// Collects cross-field problems, locating each at the line of its key (or the
// nearest parsed ancestor when the value is a default).
class Checker {
public:
    explicit Checker(const ExperimentConfig& c) : c_(c) {}

    void fail(const std::string& path, const std::string& msg) {
        int line = 0;
        for (std::string p = path; !p.empty();) {
            if (auto it = c_.lines.find(p); it != c_.lines.end()) {
                line = it->second;
                break;
            }
            const auto dot = p.rfind('.');
            p = dot == std::string::npos ? std::string() : p.substr(0, dot);
        }
        std::string where = c_.source_name.empty() ? "<config>" : c_.source_name;
        if (line > 0) where += ":" + std::to_string(line);
        out.push_back(where + ": " + path + ": " + msg);
    }
    void require(bool ok, const std::string& path, const std::string& msg) {
        if (!ok) fail(path, msg);
    }
    void positive(double v, const std::string& path) { require(v > 0.0 && std::isfinite(v), path, "must be > 0"); }
    void eps_list(const std::vector<double>& eps, const std::string& path) {
        require(!eps.empty(), path, "needs at least one value");
        for (double e : eps) require(e > 0.0 && e <= 1.0, path, "values must lie in (0, 1]");
    }
    void stride(double stride, double horizon, const std::string& path) {
        require(stride > 0.0 && stride <= horizon, path, "must lie in (0, horizon]");
    }
    void averaging(const AveragingParams& a, const std::string& path) {
        positive(a.t_avg, path + ".t_avg");
        require(a.samples >= 2, path + ".samples", "must be >= 2");
        require(a.blocks >= 2 && a.samples % std::max(a.blocks, 1) == 0, path + ".blocks",
                "must be >= 2 and divide samples");
        require(a.dt >= 0.0, path + ".dt", "must be >= 0");
        require(a.resonance_order >= 1, path + ".resonance_order", "must be >= 1");
        require(a.resonance_gap >= 0.0, path + ".resonance_gap", "must be >= 0");
        positive(a.frequency_horizon, path + ".frequency_horizon");
        positive(a.fit_tolerance, path + ".fit_tolerance");
    }

    std::vector<std::string> out;

private:
    const ExperimentConfig& c_;
};

}  // namespace

ConfigInvalid::ConfigInvalid(std::vector<std::string> diagnostics)
    : std::runtime_error(join_lines(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::spectrum: return "spectrum";
        case ExperimentKind::average: return "average";
        case ExperimentKind::theorem_i: return "theorem-i";
        case ExperimentKind::theorem_ii: return "theorem-ii";
        case ExperimentKind::quasi_invariance: return "quasi-invariance";
        case ExperimentKind::galerkin_convergence: return "galerkin-convergence";
    }
    return "?";
}

std::optional<ExperimentKind> experiment_kind_from_string(std::string_view name) {
    for (auto k : {ExperimentKind::simulate, ExperimentKind::spectrum, ExperimentKind::average,
                   ExperimentKind::theorem_i, ExperimentKind::theorem_ii, ExperimentKind::quasi_invariance,
                   ExperimentKind::galerkin_convergence}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source_name) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        throw ConfigInvalid({source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg});
    }
    Reader r(source_name);
    ExperimentConfig c;
    c.source_name = source_name;
    if (!root || root.IsNull()) throw ConfigInvalid({source_name + ": empty configuration"});
    if (r.section(root, "", {"schema_version", "experiment", "seed", "output", "initial", "perturbation",
                             "integrator", "simulate", "spectrum", "average", "theorem_i", "theorem_ii",
                             "quasi_invariance", "galerkin_convergence"})) {
        if (!root["schema_version"]) {
            r.error(0, "schema_version", "required (expected " + std::to_string(kConfigSchemaVersion) + ")");
        } else {
            int version = -1;
            r.get(root, "", "schema_version", version);
            if (version != kConfigSchemaVersion) {
                r.error(r.lines["schema_version"], "schema_version",
                        "unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kConfigSchemaVersion) + ")");
            }
        }
        if (!root["experiment"]) {
            r.error(0, "experiment", "required");
        } else {
            std::string name;
            r.get(root, "", "experiment", name);
            if (auto kind = experiment_kind_from_string(name)) {
                c.experiment = *kind;
            } else {
                r.error(r.lines["experiment"], "experiment", "unknown experiment '" + name + "'");
            }
        }
        r.get(root, "", "seed", c.seed);
        r.get(root, "", "output", c.output);
        read_initial(r, root["initial"], c.initial);
        read_perturbation(r, root["perturbation"], c.perturbation);
        read_integrator(r, root["integrator"], c.integrator);
        read_sections(r, root, c);
    }
    c.lines = r.lines;
    auto diagnostics = r.diagnostics;
    try {
        validate(c);
    } catch (const ConfigInvalid& e) {
        diagnostics.insert(diagnostics.end(), e.diagnostics().begin(), e.diagnostics().end());
    }
    if (!diagnostics.empty()) throw ConfigInvalid(diagnostics);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

void validate(const ExperimentConfig& c) {
    Checker k(c);
    const auto& init = c.initial;

    k.require(init.source == "zero" || init.source == "modes" || init.source == "measure", "initial.source",
              "must be one of zero, modes, measure");
    k.require(init.m_max >= 1 && init.m_max <= 1024, "initial.m_max", "must lie in [1, 1024]");
    if (init.source == "modes") {
        k.require(init.modes.size() <= init.m_max, "initial.modes", "more modes than initial.m_max");
    }
    if (init.source == "measure") {
        try {
            init.measure.validate();
        } catch (const std::invalid_argument& e) {
            std::string path = "initial.measure";
            const std::string msg = e.what();
            for (const char* field : {"zeta0_prime", "sigma_scale", "amplitude_cap", "p", "m"}) {
                if (msg.find(std::string(field) + " ") != std::string::npos) {
                    path += std::string(".") + field;
                    break;
                }
            }
            k.fail(path, msg.substr(msg.find(": ") == std::string::npos ? 0 : msg.find(": ") + 2));
        }
        k.require(init.measure.m <= init.m_max, "initial.measure.m", "must not exceed initial.m_max");
    }
    if (init.norm3) {
        k.positive(*init.norm3, "initial.norm3");
        k.require(init.source != "zero", "initial.norm3", "cannot rescale the zero field");
    }
    try {
        c.perturbation.validate();
    } catch (const std::invalid_argument& e) {
        k.fail("perturbation", e.what());
    }

    const auto& ig = c.integrator;
    k.require(ig.dt >= 0.0, "integrator.dt", "must be >= 0");
    k.positive(ig.dt_cap, "integrator.dt_cap");
    k.positive(ig.cfl, "integrator.cfl");
    k.require(ig.eps_dt_exponent >= 0.0 && ig.eps_dt_exponent <= 1.0, "integrator.eps_dt_exponent",
              "must lie in [0, 1]");
    k.positive(ig.tail_tolerance, "integrator.tail_tolerance");
    k.require(ig.growth_factor > 1.0, "integrator.growth_factor", "must be > 1");
    k.require(ig.max_halvings >= 0, "integrator.max_halvings", "must be >= 0");

    const int m_max = static_cast<int>(init.m_max);
    switch (c.experiment) {
        case ExperimentKind::simulate: {
            const auto& s = c.simulate;
            k.require(s.eps >= 0.0, "simulate.eps", "must be >= 0");
            if (s.tau_end > 0.0) {
                k.require(s.eps > 0.0, "simulate.tau_end", "a slow-time horizon needs eps > 0");
                k.stride(s.sample_stride, s.tau_end, "simulate.sample_stride");
            } else {
                k.positive(s.t_end, "simulate.t_end");
                k.stride(s.sample_stride, s.t_end, "simulate.sample_stride");
            }
            if (s.galerkin_m) k.require(*s.galerkin_m >= 1, "simulate.galerkin_m", "must be >= 1");
            break;
        }
        case ExperimentKind::spectrum:
            k.require(c.spectrum.n_gaps >= 1 && c.spectrum.n_gaps <= 64, "spectrum.n_gaps", "must lie in [1, 64]");
            break;
        case ExperimentKind::average:
            k.require(c.average.k_max >= 1 && c.average.k_max <= m_max, "average.k_max",
                      "must lie in [1, initial.m_max]");
            k.averaging(c.average.averaging, "average.averaging");
            break;
        case ExperimentKind::theorem_i: {
            const auto& t = c.theorem_i;
            k.eps_list(t.eps, "theorem_i.eps");
            k.positive(t.tau_end, "theorem_i.tau_end");
            k.require(t.k_max >= 1 && t.k_max <= m_max, "theorem_i.k_max", "must lie in [1, initial.m_max]");
            k.require(t.q >= 0.0, "theorem_i.q", "must be >= 0");
            if (t.rho) k.positive(*t.rho, "theorem_i.rho");
            k.positive(t.ball_radius, "theorem_i.ball_radius");
            k.require(t.averaged == "estimated" || t.averaged == "linear" || t.averaged == "zero",
                      "theorem_i.averaged", "must be one of estimated, linear, zero");
            if (t.averaged == "linear") {
                const auto kind = c.perturbation.kind;
                k.require(kind == PerturbationKind::double_antiderivative || kind == PerturbationKind::derivative ||
                              kind == PerturbationKind::antiderivative || kind == PerturbationKind::none,
                          "theorem_i.averaged", "linear rates exist only for linear perturbations");
            }
            k.require(t.delta >= 0.0, "theorem_i.delta", "must be >= 0");
            k.stride(t.sample_stride, t.tau_end, "theorem_i.sample_stride");
            k.averaging(t.averaging, "theorem_i.averaging");
            break;
        }
        case ExperimentKind::theorem_ii: {
            const auto& t = c.theorem_ii;
            k.eps_list(t.eps, "theorem_ii.eps");
            k.require(t.members >= 1, "theorem_ii.members", "must be >= 1");
            k.require(t.angles >= 1 && t.angles <= m_max, "theorem_ii.angles", "must lie in [1, initial.m_max]");
            k.require(t.order >= 1, "theorem_ii.order", "must be >= 1");
            k.positive(t.tau_end, "theorem_ii.tau_end");
            k.stride(t.sample_stride, t.tau_end, "theorem_ii.sample_stride");
            if (t.threshold) k.positive(*t.threshold, "theorem_ii.threshold");
            k.require(t.alpha > 0.0 && t.alpha < 0.25, "theorem_ii.alpha",
                      "must satisfy 0 < alpha < 1/4 (the resonance and small-action zones are defined only for "
                      "alpha < 1/4)");
            k.stride(t.resonance_stride, t.tau_end, "theorem_ii.resonance_stride");
            k.positive(t.scales.action_scale, "theorem_ii.action_scale");
            k.positive(t.scales.frequency_scale, "theorem_ii.frequency_scale");
            k.positive(t.scales.frequency_horizon, "theorem_ii.frequency_horizon");
            k.require(init.source == "measure", "initial.source", "theorem-ii draws an ensemble: use measure");
            if (init.source == "measure") {
                k.require(init.measure.amplitude_cap.has_value(), "initial.measure.amplitude_cap",
                          "angle experiments need an amplitude cap (||u||_3 bound of the ball)");
            }
            k.require(!init.norm3, "initial.norm3", "not supported for ensembles");
            break;
        }
        case ExperimentKind::quasi_invariance: {
            const auto& t = c.quasi_invariance;
            k.eps_list(t.eps, "quasi_invariance.eps");
            k.require(t.m >= 1, "quasi_invariance.m", "must be >= 1");
            k.require(t.p >= 0 && t.p + 1 <= kMaxConservationOrder, "quasi_invariance.p",
                      "must lie in [0, " + std::to_string(kMaxConservationOrder - 1) + "]");
            k.positive(t.tau_end, "quasi_invariance.tau_end");
            k.stride(t.sample_stride, t.tau_end, "quasi_invariance.sample_stride");
            k.require(t.max_ratio >= 1.0, "quasi_invariance.max_ratio", "must be >= 1");
            break;
        }
        case ExperimentKind::galerkin_convergence: {
            const auto& t = c.galerkin_convergence;
            k.require(t.eps > 0.0 && t.eps <= 1.0, "galerkin_convergence.eps", "must lie in (0, 1]");
            k.require(!t.m.empty(), "galerkin_convergence.m", "needs at least one dimension");
            for (std::size_t i = 0; i < t.m.size(); ++i) {
                k.require(t.m[i] >= 1 && (i == 0 || t.m[i] > t.m[i - 1]), "galerkin_convergence.m",
                          "must be positive and strictly increasing");
            }
            k.positive(t.tau_end, "galerkin_convergence.tau_end");
            k.stride(t.sample_stride, t.tau_end, "galerkin_convergence.sample_stride");
            k.require(t.q >= 0.0, "galerkin_convergence.q", "must be >= 0");
            break;
        }
    }
    if (!k.out.empty()) throw ConfigInvalid(k.out);
}

namespace {

nlohmann::json to_json(const AveragingParams& a) {
    return {{"t_avg", a.t_avg},
            {"samples", a.samples},
            {"blocks", a.blocks},
            {"dt", a.dt},
            {"check_resonance", a.check_resonance},
            {"resonance_order", a.resonance_order},
            {"resonance_gap", a.resonance_gap},
            {"frequency_horizon", a.frequency_horizon},
            {"fit_tolerance", a.fit_tolerance}};
}

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["schema_version"] = c.schema_version;
    j["experiment"] = std::string(to_string(c.experiment));
    j["seed"] = c.seed;
    j["output"] = c.output;

    const auto& in = c.initial;
    nlohmann::json init{{"source", in.source}, {"m_max", in.m_max}, {"norm3", opt(in.norm3)}};
    if (in.source == "modes") {
        nlohmann::json modes = nlohmann::json::array();
        for (const auto& m : in.modes) modes.push_back({m.plus, m.minus});
        init["modes"] = modes;
    }
    if (in.source == "measure") {
        init["measure"] = kdvlab::to_json(in.measure);
        init["index"] = in.index;
    }
    j["initial"] = init;
    j["perturbation"] = {{"kind", std::string(to_string(c.perturbation.kind))},
                         {"scale", c.perturbation.scale()},
                         {"zeta0", c.perturbation.zeta0}};
    const auto& ig = c.integrator;
    j["integrator"] = {{"dt", ig.dt},
                       {"dt_cap", ig.dt_cap},
                       {"cfl", ig.cfl},
                       {"eps_dt_exponent", ig.eps_dt_exponent},
                       {"tail_tolerance", ig.tail_tolerance},
                       {"growth_factor", ig.growth_factor},
                       {"max_halvings", ig.max_halvings}};

    switch (c.experiment) {
        case ExperimentKind::simulate: {
            const auto& s = c.simulate;
            j["simulate"] = {{"eps", s.eps},
                             {"t_end", s.t_end},
                             {"tau_end", s.tau_end},
                             {"sample_stride", s.sample_stride},
                             {"galerkin_m", opt(s.galerkin_m)}};
            break;
        }
        case ExperimentKind::spectrum:
            j["spectrum"] = {{"n_gaps", c.spectrum.n_gaps}};
            break;
        case ExperimentKind::average:
            j["average"] = {{"k_max", c.average.k_max}, {"averaging", to_json(c.average.averaging)}};
            break;
        case ExperimentKind::theorem_i: {
            const auto& t = c.theorem_i;
            j["theorem_i"] = {{"eps", t.eps},
                              {"tau_end", t.tau_end},
                              {"k_max", t.k_max},
                              {"q", t.q},
                              {"rho", opt(t.rho)},
                              {"p", t.p},
                              {"ball_radius", t.ball_radius},
                              {"averaged", t.averaged},
                              {"delta", t.delta},
                              {"sample_stride", t.sample_stride},
                              {"averaging", to_json(t.averaging)}};
            break;
        }
        case ExperimentKind::theorem_ii: {
            const auto& t = c.theorem_ii;
            j["theorem_ii"] = {{"eps", t.eps},
                               {"members", t.members},
                               {"angles", t.angles},
                               {"order", t.order},
                               {"tau_end", t.tau_end},
                               {"sample_stride", t.sample_stride},
                               {"threshold", opt(t.threshold)},
                               {"alpha", t.alpha},
                               {"resonance", t.resonance},
                               {"resonance_stride", t.resonance_stride},
                               {"action_scale", t.scales.action_scale},
                               {"frequency_scale", t.scales.frequency_scale},
                               {"frequency_horizon", t.scales.frequency_horizon}};
            break;
        }
        case ExperimentKind::quasi_invariance: {
            const auto& t = c.quasi_invariance;
            j["quasi_invariance"] = {{"eps", t.eps},
                                     {"m", t.m},
                                     {"p", t.p},
                                     {"tau_end", t.tau_end},
                                     {"sample_stride", t.sample_stride},
                                     {"max_ratio", t.max_ratio}};
            break;
        }
        case ExperimentKind::galerkin_convergence: {
            const auto& t = c.galerkin_convergence;
            j["galerkin_convergence"] = {{"eps", t.eps},
                                         {"m", t.m},
                                         {"tau_end", t.tau_end},
                                         {"sample_stride", t.sample_stride},
                                         {"q", t.q}};
            break;
        }
    }
    return j;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string config_digest(const ExperimentConfig& config) {
    auto j = to_json(config);
    j.erase("output");
    return sha256_hex(j.dump());
}

EvolveParams evolve_params(const IntegratorConfig& ig) {
    EvolveParams p;
    p.dt = ig.dt;
    p.dt_cap = ig.dt_cap;
    p.cfl = ig.cfl;
    p.tail_tolerance = ig.tail_tolerance;
    p.growth_factor = ig.growth_factor;
    p.max_halvings = ig.max_halvings;
    return p;
}

EvolveParams sweep_params(const IntegratorConfig& ig, double eps, double eps_max) {
    EvolveParams p = evolve_params(ig);
    if (ig.eps_dt_exponent > 0.0 && eps_max > 0.0) {
        const double f = std::pow(eps / eps_max, ig.eps_dt_exponent);
        p.dt *= f;
        p.dt_cap *= f;
    }
    return p;
}

}  // namespace kdvlab
