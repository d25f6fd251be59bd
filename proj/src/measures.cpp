#include "kdvlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "kdvlab/conservation.hpp"

namespace kdvlab {

std::string_view to_string(MeasureKind kind) {
    switch (kind) {
        case MeasureKind::gaussian_h: return "gaussian_h";
        case MeasureKind::eta_p: return "eta_p";
        case MeasureKind::gibbs_p: return "gibbs_p";
    }
    return "unknown";
}

MeasureKind measure_kind_from_string(std::string_view name) {
    for (auto k : {MeasureKind::gaussian_h, MeasureKind::eta_p, MeasureKind::gibbs_p}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown measure kind '" + std::string(name) + "'");
}

double MeasureSpec::sigma(std::size_t j) const {
    return sigma_scale * std::pow(static_cast<double>(j), -zeta0_prime);
}

double MeasureSpec::component_std(std::size_t j) const {
    const double w = wavenumber(j);
    if (kind == MeasureKind::gaussian_h) {
        // v_j ~ N(0, sigma_j w^{-(1+2p)}), u_j = w^{1/2} v_j.
        return std::sqrt(sigma(j) * std::pow(w, -(1.0 + 2.0 * p)) * w);
    }
    return std::pow(w, -(p + 1.0));
}

void MeasureSpec::validate() const {
    if (m < 1) throw std::invalid_argument("measure: m must be >= 1");
    if (!std::isfinite(p) || p < -1.0) throw std::invalid_argument("measure: p must be >= -1");
    if (kind == MeasureKind::gaussian_h) {
        if (!(zeta0_prime > 1.0)) {
            throw std::invalid_argument("measure: zeta0_prime must exceed 1 (sum of sigma_j must converge)");
        }
        if (!(sigma_scale > 0.0)) throw std::invalid_argument("measure: sigma_scale must be > 0");
    }
    if (kind == MeasureKind::gibbs_p) {
        if (p != std::floor(p) || p < 0.0 || p + 1.0 > kMaxConservationOrder) {
            throw std::invalid_argument("measure: gibbs_p needs an integer p with 0 <= p <= " +
                                        std::to_string(kMaxConservationOrder - 1));
        }
    }
    if (amplitude_cap && !(*amplitude_cap > 0.0)) throw std::invalid_argument("measure: amplitude_cap must be > 0");
}

nlohmann::json to_json(const MeasureSpec& s) {
    nlohmann::json j{{"kind", std::string(to_string(s.kind))},
                     {"p", s.p},
                     {"m", s.m},
                     {"zeta0_prime", s.zeta0_prime},
                     {"sigma_scale", s.sigma_scale}};
    j["amplitude_cap"] = s.amplitude_cap ? nlohmann::json(*s.amplitude_cap) : nlohmann::json(nullptr);
    return j;
}

MeasureSpec measure_spec_from_json(const nlohmann::json& j) {
    MeasureSpec s;
    s.kind = measure_kind_from_string(j.at("kind").get<std::string>());
    s.p = j.at("p").get<double>();
    s.m = j.at("m").get<std::size_t>();
    s.zeta0_prime = j.value("zeta0_prime", s.zeta0_prime);
    s.sigma_scale = j.value("sigma_scale", s.sigma_scale);
    if (j.contains("amplitude_cap") && !j["amplitude_cap"].is_null()) s.amplitude_cap = j["amplitude_cap"].get<double>();
    return s;
}

WeightedSample sample(const MeasureSpec& spec, std::uint64_t seed, std::uint64_t index) {
    spec.validate();
    // One stream per (seed, index); components are drawn in a fixed order from it.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    constexpr int kMaxRedraws = 1000;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        std::vector<ModePair> c(spec.m);
        for (std::size_t j = 1; j <= spec.m; ++j) {
            const double s = spec.component_std(j);
            const double a = normal(rng);
            const double b = normal(rng);
            c[j - 1] = {s * a, s * b};
        }
        Field u(std::move(c));
        if (spec.amplitude_cap && sobolev_norm(u, 3.0) > *spec.amplitude_cap) continue;
        WeightedSample out{std::move(u), 0.0};
        if (spec.kind == MeasureKind::gibbs_p) {
            out.log_weight = -conservation_remainder(out.field, static_cast<int>(spec.p) + 1);
        }
        return out;
    }
    throw std::runtime_error("measure: amplitude cap rejects every draw; raise the cap");
}

std::vector<WeightedSample> sample_ensemble(const MeasureSpec& spec, std::uint64_t seed, std::size_t count) {
    std::vector<WeightedSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample(spec, seed, i));
    return out;
}

double effective_sample_size(const std::vector<WeightedSample>& samples) {
    if (samples.empty()) return 0.0;
    double top = -1e300;
    for (const auto& s : samples) top = std::max(top, s.log_weight);
    double sw = 0.0, sw2 = 0.0;
    for (const auto& s : samples) {
        const double w = std::exp(s.log_weight - top);
        sw += w;
        sw2 += w * w;
    }
    return sw * sw / sw2;
}

void write_ensemble(const std::filesystem::path& dir, const MeasureSpec& spec, std::uint64_t seed,
                    const std::vector<WeightedSample>& samples) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "samples.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot write " + (dir / "samples.bin").string());
    for (const auto& s : samples) {
        std::uint64_t bits;
        std::memcpy(&bits, &s.log_weight, 8);
        char raw[8];
        for (int b = 0; b < 8; ++b) raw[b] = static_cast<char>(bits >> (8 * b));
        bin.write(raw, 8);
        write_field_frame(bin, s.field);
    }
    if (!bin) throw std::runtime_error("write failed: " + (dir / "samples.bin").string());
    const nlohmann::json m{{"schema_version", 1},
                           {"seed", seed},
                           {"count", samples.size()},
                           {"spec", to_json(spec)},
                           {"ess", effective_sample_size(samples)}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    out << m.dump(2) << '\n';
}

std::vector<WeightedSample> read_ensemble(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
    const auto m = nlohmann::json::parse(mf);
    const auto count = m.at("count").get<std::size_t>();
    std::ifstream bin(dir / "samples.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + (dir / "samples.bin").string());
    std::vector<WeightedSample> out;
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char raw[8];
        if (!bin.read(reinterpret_cast<char*>(raw), 8)) throw std::runtime_error("ensemble: truncated samples.bin");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[b]) << (8 * b);
        WeightedSample s;
        std::memcpy(&s.log_weight, &bits, 8);
        s.field = read_field_frame(bin);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace kdvlab
