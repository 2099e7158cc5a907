#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nsopen/holes.hpp"
#include "nsopen/maps.hpp"
#include "nsopen/phase.hpp"
#include "nsopen/transfer.hpp"

namespace nsopen {

/// Operators of a block, applied first to last.
using Block = std::vector<std::shared_ptr<const UlamOperator>>;

Block make_block(const MapSequence& seq, const HoleSequence& holes, std::size_t start, int T, const Grid& grid,
                 OperatorCache* cache = nullptr);
/// The closed block g^i.
Block power_block(const MapSpec& g, int i, const Grid& grid, OperatorCache* cache = nullptr);

struct MixingRatios {
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    bool within(double zeta1, double zeta2) const { return zeta1 < min_ratio && max_ratio < zeta2; }
};

/// Entry (J1, J2) is λ(J1 ∩ F^{-1}(J2)) for the block composition F.
Eigen::MatrixXd transition_masses(const Block& block, const PartitionSpec& Q);
MixingRatios ratios_from_masses(const Eigen::MatrixXd& masses, const PartitionSpec& Q);
MixingRatios mixing_ratios(const Block& block, const PartitionSpec& Q);
MixingRatios mixing_ratios(const MapSpec& g, const PartitionSpec& Q, int i, OperatorCache* cache = nullptr);

struct MixingCertificate {
    double zeta1 = 0.0;
    double zeta2 = 0.0;
    PartitionSpec partition;
    int E = 0;
    double ratio_min = 0.0;
    double ratio_max = 0.0;
    int i_checked_max = 0;

    nlohmann::json to_json() const;
};

/// Smallest E <= i_max whose ratios stay in (zeta1, zeta2) for every E <= i <= i_max.
std::optional<MixingCertificate> find_mixing_time(const MapSpec& g, const PartitionSpec& Q, double zeta1, double zeta2,
                                                  int i_max, OperatorCache* cache = nullptr);

struct StabilityViolation {
    std::size_t sample = 0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
};

struct StabilityResult {
    bool ok = false;
    std::vector<StabilityViolation> violations;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double worst_min = 0.0;
    double worst_max = 0.0;

    nlohmann::json to_json() const;
};

/// Random hole of measure at most epsilon (arc in 1D, square in 2D); empty when epsilon is 0.
HoleSpec sample_hole(int dimension, double epsilon, std::mt19937_64& rng);

/// Sampled falsification of mixing stability for S-blocks of δ-perturbations with holes of measure <= ε.
StabilityResult stability_check(const MapSpec& g, const PartitionSpec& Q, double zeta1, double zeta2, int S,
                                double delta, double epsilon, std::size_t samples, std::uint64_t seed);

} // namespace nsopen
