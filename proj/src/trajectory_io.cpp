#include "kdvlab/trajectory_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kdvlab {

namespace fs = std::filesystem;

nlohmann::json to_json(const EvolveParams& p) {
    nlohmann::json j{{"eps", p.eps},       {"dt", p.dt},
                     {"dt_cap", p.dt_cap}, {"cfl", p.cfl},
                     {"t_end", p.t_end},   {"tau_end", p.tau_end},
                     {"dealias", p.dealias}, {"growth_factor", p.growth_factor},
                     {"max_halvings", p.max_halvings}, {"tail_tolerance", p.tail_tolerance}};
    j["m"] = p.m ? nlohmann::json(*p.m) : nlohmann::json(nullptr);
    return j;
}

EvolveParams evolve_params_from_json(const nlohmann::json& j) {
    EvolveParams p;
    p.eps = j.at("eps").get<double>();
    p.dt = j.at("dt").get<double>();
    p.dt_cap = j.value("dt_cap", p.dt_cap);
    p.cfl = j.value("cfl", p.cfl);
    p.t_end = j.at("t_end").get<double>();
    p.tau_end = j.at("tau_end").get<double>();
    p.dealias = j.value("dealias", true);
    p.growth_factor = j.value("growth_factor", p.growth_factor);
    p.max_halvings = j.value("max_halvings", p.max_halvings);
    p.tail_tolerance = j.value("tail_tolerance", p.tail_tolerance);
    if (j.contains("m") && !j["m"].is_null()) p.m = j["m"].get<std::size_t>();
    return p;
}

nlohmann::json to_json(const PerturbationSpec& spec) {
    return {{"kind", std::string(to_string(spec.kind))}, {"zeta0", spec.zeta0}, {"params", spec.params}};
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
    PerturbationSpec spec;
    spec.kind = perturbation_kind_from_string(j.at("kind").get<std::string>());
    spec.zeta0 = j.at("zeta0").get<double>();
    if (j.contains("params")) spec.params = j["params"].get<std::map<std::string, double>>();
    return spec;
}

void write_trajectory(const fs::path& dir, const Trajectory& traj) {
    fs::create_directories(dir);
    const bool slow = traj.slow_clock();
    {
        std::ofstream bin(dir / "trajectory.bin", std::ios::binary | std::ios::trunc);
        if (!bin) throw std::runtime_error("cannot write " + (dir / "trajectory.bin").string());
        for (const auto& s : traj.samples) {
            std::vector<std::uint8_t> rec(8);
            const double c = s.clock(slow);
            std::uint64_t bits;
            std::memcpy(&bits, &c, 8);
            for (int b = 0; b < 8; ++b) rec[b] = static_cast<std::uint8_t>(bits >> (8 * b));
            const auto frame = encode_field_frame(s.u);
            rec.insert(rec.end(), frame.begin(), frame.end());
            bin.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
        }
        if (!bin) throw std::runtime_error("write failed: " + (dir / "trajectory.bin").string());
    }
    nlohmann::json m{{"schema_version", kSchemaVersion},
                     {"params", to_json(traj.params)},
                     {"perturbation", to_json(traj.spec)},
                     {"seed", traj.provenance.seed},
                     {"config_digest", traj.provenance.config_digest},
                     {"clock", slow ? "tau" : "t"},
                     {"m_max", traj.m_max()},
                     {"n_samples", traj.samples.size()},
                     {"dt_used", traj.dt_used}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    out << m.dump(2) << '\n';
}

Trajectory read_trajectory(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
    const auto m = nlohmann::json::parse(mf);
    if (m.at("schema_version").get<int>() != kSchemaVersion) {
        throw std::runtime_error("trajectory: schema_version mismatch");
    }
    Trajectory traj;
    traj.params = evolve_params_from_json(m.at("params"));
    traj.spec = perturbation_from_json(m.at("perturbation"));
    traj.provenance.seed = m.at("seed").get<std::uint64_t>();
    traj.provenance.config_digest = m.at("config_digest").get<std::string>();
    traj.dt_used = m.value("dt_used", 0.0);
    const bool slow = traj.slow_clock();

    std::ifstream bin(dir / "trajectory.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + (dir / "trajectory.bin").string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 8) throw std::runtime_error("trajectory: truncated record");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[pos + b]) << (8 * b);
        double c;
        std::memcpy(&c, &bits, 8);
        pos += 8;
        std::size_t used = 0;
        Field u = decode_field_frame(std::span(bytes).subspan(pos), &used);
        pos += used;
        Sample s;
        s.u = std::move(u);
        if (slow) {
            s.tau = c;
            s.t = c / traj.params.eps;
        } else {
            s.t = c;
            s.tau = traj.params.eps * c;
        }
        traj.samples.push_back(std::move(s));
    }
    if (traj.samples.size() != m.at("n_samples").get<std::size_t>()) {
        throw std::runtime_error("trajectory: sample count disagrees with manifest");
    }
    return traj;
}

}  // namespace kdvlab
