#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"
#include "nsopen/holes.hpp"
#include "nsopen/maps.hpp"
#include "nsopen/phase.hpp"
#include "nsopen/seminorm.hpp"
#include "nsopen/transfer.hpp"

namespace nsopen {

struct ConeParams {
    double a = 0.0;
    double sigma = 0.5;
    int T = 1;
    int T1 = 1;
    /// Mixing time of the reference partition.
    int E = 1;
    double zeta1 = 0.0;
    double zeta2 = 0.0;
    double theta_ly = 0.0;
    double c_ly = 0.0;
    double M = 1.0;
    /// Partition diameter d entering the control bounds.
    double diameter = 0.0;
    Seminorm seminorm;
    std::shared_ptr<const PartitionSpec> partition;

    /// a * d / M.
    double x() const { return a * diameter / M; }
    nlohmann::json to_json() const;
    static ConeParams from_json(const nlohmann::json& j);
};

struct ParameterAudit {
    bool p1 = false;
    bool p2 = false;
    bool p3_positive = false;
    bool p3_invariance = false;
    bool ok() const { return p1 && p2 && p3_positive && p3_invariance; }
};

/// Replays the sigma, block-length and aperture conditions; the invariance inequality carries a 1e-12 relative tolerance.
ParameterAudit audit_parameters(const ConeParams& cp);

struct SelectionInputs {
    double zeta1 = 0.9;
    double zeta2 = 1.1;
    double theta_ly = 0.5;
    double c_ly = 0.0;
    int T1 = 1;
    double sigma = 0.5;
    /// Floor for the aperture when the analytic bound is smaller.
    double a_min = 1.0;
    int T_max = 10000;
};

/// Mixing time of a candidate partition, or nullopt when it is not mixing.
using MixingTimeFn = std::function<std::optional<int>(const PartitionSpec&)>;

/// Ordered selection: sigma, T, a, partition (first in `family` that is fine enough), then T >= E.
ConeParams select_parameters(const SelectionInputs& in, const Seminorm& s, const std::vector<PartitionSpec>& family,
                             const MixingTimeFn& mixing_time);

double delta0(double sigma, double zeta1, double zeta2, double x);
double delta0(const ConeParams& cp);
/// tanh(delta / 4); infinity maps to 1.
double birkhoff_factor(double delta);
double c_lip(double zeta1, double zeta2, double x);
double c_lip(const ConeParams& cp);

struct RateConstants {
    double delta0 = 0.0;
    double lambda = 0.0;
    double c0 = 0.0;
    double c_lip = 0.0;

    nlohmann::json to_json() const;
    static RateConstants from_json(const nlohmann::json& j);
};

RateConstants rate_constants(double delta0, double c_lip, int T);
RateConstants rate_constants(const ConeParams& cp);

/// Upper bound on the Hilbert distance in C_a; both inputs must lie in C_{sigma a}.
double hilbert_distance_bound(const GridDensity& phi, const GridDensity& psi, const ConeParams& cp);

/// Random members of C_a: convex combinations of the constant with ensemble shapes, scaled by random masses.
std::vector<GridDensity> sample_cone_densities(const PartitionSpec& Q, double a, const Seminorm& s, std::size_t count,
                                               std::uint64_t seed);

struct ContractionResult {
    bool ok = false;
    /// Largest |L phi|_s / (a min E[L phi | Q]) seen; contraction needs this <= sigma.
    double worst_ratio = 0.0;
    std::size_t samples = 0;
    std::optional<std::size_t> witness;

    nlohmann::json to_json() const;
};

/// Checks L(C_a) in C_{sigma a} on sampled densities for the T-block starting at `start`.
ContractionResult verify_cone_contraction(const MapSequence& seq, const HoleSequence& holes, std::size_t start,
                                          const ConeParams& cp, std::size_t samples, std::uint64_t seed,
                                          OperatorCache* cache = nullptr);

} // namespace nsopen
