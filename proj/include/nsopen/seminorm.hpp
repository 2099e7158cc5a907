#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nsopen/holes.hpp"
#include "nsopen/maps.hpp"
#include "nsopen/phase.hpp"
#include "nsopen/transfer.hpp"

namespace nsopen {

struct OscParams {
    double alpha = 1.0;
    double eps0 = 0.125;

    /// Throws InputError unless 0 < alpha <= 1 and eps0 >= one cell diameter.
    void validate(const Grid& grid) const;
    /// Scales cell_diameter * 2^j that do not exceed eps0.
    std::vector<double> ladder(const Grid& grid) const;
};

enum class SeminormKind { TotalVariation, Oscillation };

/// Strong seminorm selector: total variation (1D) or the oscillation seminorm.
struct Seminorm {
    SeminormKind kind = SeminormKind::TotalVariation;
    OscParams osc;

    static Seminorm total_variation() { return {}; }
    static Seminorm oscillation(double alpha, double eps0) { return {SeminormKind::Oscillation, {alpha, eps0}}; }

    double operator()(const GridDensity& phi) const;
    std::string id() const;
    /// Partition diameter entering the control bounds: measure diameter for TV, metric diameter otherwise.
    double partition_diameter(const PartitionSpec& Q) const;
    /// 1 for TV, (metric diameter)^(1 - alpha) for the oscillation seminorm.
    double constant_M(const PartitionSpec& Q) const;

    nlohmann::json to_json() const;
    static Seminorm from_json(const nlohmann::json& j);
};

double total_variation(const GridDensity& phi);
double oscillation_seminorm(const GridDensity& phi, const OscParams& p);

std::vector<double> element_averages(const GridDensity& phi, const PartitionSpec& Q);
GridDensity conditional_expectation(const GridDensity& phi, const PartitionSpec& Q);

struct ConeMembership {
    bool member = false;
    /// a * min E[phi|Q] - |phi|_s.
    double margin = 0.0;
    double seminorm = 0.0;
    double min_expectation = 0.0;
};

ConeMembership cone_member(const GridDensity& phi, double a, const PartitionSpec& Q, const Seminorm& s);

struct ControlBounds {
    bool lower_ok = false;
    bool upper_ok = false;
    double observed_min = 0.0;
    double observed_max = 0.0;
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    /// Lower bound is vacuous because zeta1 - zeta2 a d / M <= 0.
    bool degenerate_lower = false;
};

/// Evaluates the lower and upper control bounds for the block of T maps starting at step `start` (0-based).
ControlBounds control_bounds_check(const MapSequence& seq, const HoleSequence& holes, std::size_t start, int T,
                                   const PartitionSpec& Q, double zeta1, double zeta2, double a, double M,
                                   const Seminorm& s, const GridDensity& phi, OperatorCache* cache = nullptr);

struct LYOptions {
    int T1 = 1;
    int k_max = 4;
    std::size_t ensemble_size = 200;
    std::uint64_t seed = 1;
    double theta_max = 0.9;
    /// Block start steps (0-based) at which the inequality is checked.
    std::vector<std::size_t> starts{0};
};

struct LYCertificate {
    int T1 = 1;
    double theta = 0.0;
    double C = 0.0;
    Seminorm seminorm;
    std::size_t ensemble_size = 0;
    std::uint64_t seed = 0;
    int k_max = 0;
    std::vector<std::size_t> starts;
    /// Every admissible lattice pair (C, theta), best objective C / (1 - theta) first.
    std::vector<std::pair<double, double>> frontier;

    nlohmann::json to_json() const;
    static LYCertificate from_json(const nlohmann::json& j);
};

/// Unit-mass densities: a constant, steps, random piecewise-constant, cosine modes, narrow bumps.
std::vector<GridDensity> ly_ensemble(const Grid& grid, std::size_t size, std::uint64_t seed);

/// Lattice fit of (theta, C) over the ensemble; throws CertificationError with a witness on failure.
LYCertificate estimate_LY(const MapSequence& seq, const HoleSequence& holes, const Grid& grid, const Seminorm& s,
                          const LYOptions& options, OperatorCache* cache = nullptr);

/// Number of (member, start, k) triples violating the certified inequality.
std::size_t count_ly_violations(const LYCertificate& cert, const MapSequence& seq, const HoleSequence& holes,
                                const std::vector<GridDensity>& ensemble, OperatorCache* cache = nullptr);

} // namespace nsopen
