#pragma once

// Gaussian measures in v (gaussian_h) and u (eta_p) coordinates and the Gibbs
// measure e^{-J_p(u)} d eta_p(u) via importance weights.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kdvlab/field.hpp"

namespace kdvlab {

enum class MeasureKind { gaussian_h, eta_p, gibbs_p };

std::string_view to_string(MeasureKind kind);
MeasureKind measure_kind_from_string(std::string_view name);

struct MeasureSpec {
    MeasureKind kind = MeasureKind::eta_p;
    double p = 3.0;
    std::size_t m = 16;
    double zeta0_prime = 2.0;  // sigma_j = sigma_scale j^{-zeta0'}
    double sigma_scale = 1.0;
    // Redraw (deterministically) while ||u||_3 exceeds the cap.
    std::optional<double> amplitude_cap;

    double sigma(std::size_t j) const;
    // Per-component standard deviation in u coordinates for mode j.
    double component_std(std::size_t j) const;
    void validate() const;
};

nlohmann::json to_json(const MeasureSpec& spec);
MeasureSpec measure_spec_from_json(const nlohmann::json& j);

struct WeightedSample {
    Field field;
    double log_weight = 0.0;
};

// Draw `index` of the ensemble keyed by `seed`; independent of evaluation order.
WeightedSample sample(const MeasureSpec& spec, std::uint64_t seed, std::uint64_t index = 0);

std::vector<WeightedSample> sample_ensemble(const MeasureSpec& spec, std::uint64_t seed, std::size_t count);

// Kish effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(const std::vector<WeightedSample>& samples);

// Self-normalized importance-weighted mean of g over the ensemble.
template <typename G>
double weighted_mean(const std::vector<WeightedSample>& samples, G g) {
    double top = -1e300;
    for (const auto& s : samples) top = std::max(top, s.log_weight);
    double num = 0.0, den = 0.0;
    for (const auto& s : samples) {
        const double w = std::exp(s.log_weight - top);
        num += w * g(s.field);
        den += w;
    }
    return num / den;
}

// <dir>/manifest.json (seed, count, spec, ess) and <dir>/samples.bin: per sample a
// float64 log_weight followed by a Field frame.
void write_ensemble(const std::filesystem::path& dir, const MeasureSpec& spec, std::uint64_t seed,
                    const std::vector<WeightedSample>& samples);
std::vector<WeightedSample> read_ensemble(const std::filesystem::path& dir);

}  // namespace kdvlab
