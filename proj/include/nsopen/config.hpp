#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsopen/maps.hpp"
#include "nsopen/phase.hpp"
#include "nsopen/seminorm.hpp"
#include "nsopen/transfer.hpp"

namespace nsopen {

struct LYSettings {
    LYOptions options;
    /// Given constants skip estimation.
    std::optional<double> theta;
    std::optional<double> C;
};

struct MixingSettings {
    double zeta1 = 0.9;
    double zeta2 = 1.1;
    int i_max = 64;
    /// Candidate reference partitions as parts per side, coarse to fine.
    std::vector<int> family;
    std::size_t stability_samples = 20;
};

struct ConeSettings {
    double sigma = 0.5;
    double a_min = 1.0;
    std::size_t contraction_samples = 0;
};

struct GlobalSettings {
    nlohmann::json curve;
    double t_start = 0.0;
    double t_end = 1.0;
    /// Parameter increment per step; nullopt means use the sampled bound.
    std::optional<double> step;
    int samples = 5;
    std::vector<double> xi_ladder{0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125};
};

struct ExperimentConfig {
    nlohmann::json raw;
    std::uint64_t seed = 1;
    Grid grid{1, 64};
    int horizon = 40;
    nlohmann::json base_map;
    double delta = 0.0;
    double epsilon = 0.0;
    nlohmann::json holes;
    nlohmann::json phi;
    nlohmann::json psi;
    Seminorm seminorm;
    LYSettings ly;
    MixingSettings mixing;
    ConeSettings cone;
    std::optional<GlobalSettings> global;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
};

/// Density declaration: uniform | cosine{amplitude, frequency} | bump{center, width, height}.
GridDensity density_from_config(const nlohmann::json& j, const Grid& grid);

} // namespace nsopen
