#pragma once

// On-disk trajectories: <dir>/manifest.json plus <dir>/trajectory.bin, a stream of
// (float64 clock, Field frame) records. The clock is tau for slow-clock runs and t otherwise.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "kdvlab/kdv.hpp"

namespace kdvlab {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const EvolveParams& params);
EvolveParams evolve_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);

void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& dir);

}  // namespace kdvlab
