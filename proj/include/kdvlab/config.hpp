#pragma once

// Experiment configuration: YAML in, resolved canonical JSON out. The digest is the
// SHA-256 of the canonical dump and is stamped into every artifact of a run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kdvlab/averaging.hpp"
#include "kdvlab/field.hpp"
#include "kdvlab/kdv.hpp"
#include "kdvlab/measures.hpp"
#include "kdvlab/perturbation.hpp"

namespace kdvlab {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigInvalid : public std::runtime_error {
public:
    explicit ConfigInvalid(std::vector<std::string> diagnostics);

    const std::vector<std::string>& diagnostics() const { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { simulate, spectrum, average, theorem_i, theorem_ii, quasi_invariance, galerkin_convergence };

std::string_view to_string(ExperimentKind kind);
std::optional<ExperimentKind> experiment_kind_from_string(std::string_view name);

struct InitialConfig {
    std::string source = "measure";  // zero | modes | measure
    std::size_t m_max = 16;
    std::vector<ModePair> modes;     // source = modes
    MeasureSpec measure;             // source = measure
    std::uint64_t index = 0;         // ensemble index of the draw
    std::optional<double> norm3;     // rescale to this ||u||_3
};

struct IntegratorConfig {
    double dt = 0.0;
    double dt_cap = 1e-3;
    double cfl = 0.5;
    // Across an eps sweep, dt and dt_cap scale as (eps / eps_max)^exponent.
    double eps_dt_exponent = 0.0;
    double tail_tolerance = 1e-6;
    double growth_factor = 2.0;
    int max_halvings = 8;
};

struct SimulateConfig {
    double eps = 0.0;
    double t_end = 1.0;
    double tau_end = 0.0;
    double sample_stride = 0.01;
    std::optional<std::size_t> galerkin_m;
};

struct SpectrumConfig {
    int n_gaps = 4;
};

struct AverageConfig {
    int k_max = 3;
    AveragingParams averaging;
};

struct TheoremIConfig {
    std::vector<double> eps{1e-1, 1e-2, 1e-3};
    double tau_end = 1.0;
    int k_max = 3;
    double q = 0.0;
    std::optional<double> rho;
    double p = 0.0;                // norm of the averaged-solution ball
    double ball_radius = 1e6;
    std::string averaged = "estimated";  // estimated | linear | zero
    double delta = 0.0;            // relative offset of J(0) from I(0)
    double sample_stride = 0.02;
    AveragingParams averaging;
};

struct TheoremIIConfig {
    std::vector<double> eps{1e-1, 1e-2, 1e-3};
    std::size_t members = 50;
    int angles = 3;
    int order = 2;
    double tau_end = 1.0;
    double sample_stride = 1e-3;
    std::optional<double> threshold = 0.1;
    double alpha = 0.2;
    bool resonance = false;
    double resonance_stride = 0.05;
    ResonanceScales scales;
};

struct QuasiInvarianceConfig {
    std::vector<double> eps{1e-1, 1e-2, 1e-3};
    std::size_t m = 16;
    int p = 3;
    double tau_end = 1.0;
    double sample_stride = 0.01;
    double max_ratio = 2.0;
};

struct GalerkinConvergenceConfig {
    double eps = 1e-2;
    std::vector<std::size_t> m{8, 16, 32};
    double tau_end = 0.1;
    double sample_stride = 0.005;
    double q = 3.0;
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    ExperimentKind experiment = ExperimentKind::simulate;
    std::uint64_t seed = 0;
    std::string output = "out";
    InitialConfig initial;
    PerturbationSpec perturbation = PerturbationSpec::make(PerturbationKind::none);
    IntegratorConfig integrator;

    SimulateConfig simulate;
    SpectrumConfig spectrum;
    AverageConfig average;
    TheoremIConfig theorem_i;
    TheoremIIConfig theorem_ii;
    QuasiInvarianceConfig quasi_invariance;
    GalerkinConvergenceConfig galerkin_convergence;

    // Source line of each parsed key path ("theorem_ii.alpha"), for diagnostics.
    std::string source_name;
    std::map<std::string, int> lines;
};

// Parses and validates; throws ConfigInvalid with one "<source>:<line>: <field>: <msg>"
// entry per problem.
ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source_name = "<config>");
// Throws IoError when the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

// Cross-field checks on an already parsed config.
void validate(const ExperimentConfig& config);

// Resolved config with every default filled in; only the selected experiment's section.
nlohmann::json to_json(const ExperimentConfig& config);
// Hex SHA-256 of to_json(config).dump() with the output directory removed, so the
// digest names the computation rather than where it was written.
std::string config_digest(const ExperimentConfig& config);

std::string sha256_hex(std::string_view bytes);

EvolveParams evolve_params(const IntegratorConfig& integrator);
// Step scaled for one cell of an eps sweep.
EvolveParams sweep_params(const IntegratorConfig& integrator, double eps, double eps_max);

}  // namespace kdvlab
