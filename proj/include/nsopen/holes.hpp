#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nsopen/maps.hpp"
#include "nsopen/phase.hpp"

namespace nsopen {

/// Arc [start, start + length) on the circle, 0 < length <= 1.
struct HoleArc {
    double start = 0.0;
    double length = 0.0;
};

/// Rectangle [x0, x0 + wx) x [y0, y0 + wy) on the torus, wrapping allowed.
struct HoleRect {
    double x0 = 0.0, y0 = 0.0, wx = 0.0, wy = 0.0;
};

/// Torus disk of radius r < 1/2; grid membership is decided at cell centers.
struct HoleDisk {
    double cx = 0.0, cy = 0.0, r = 0.0;
};

using HoleComponent = std::variant<HoleArc, HoleRect, HoleDisk>;

class HoleSpec {
public:
    HoleSpec(int dimension, std::vector<HoleComponent> components, double regularity_bound = 2.0);

    static HoleSpec empty(int dimension);
    static HoleSpec whole(int dimension);

    int dimension() const { return dimension_; }
    const std::vector<HoleComponent>& components() const { return components_; }
    bool is_empty() const { return components_.empty(); }
    /// Analytic Lebesgue measure.
    double measure() const;
    double regularity_bound() const { return regularity_; }

    bool contains(Point p) const;
    /// Fraction of the cell covered: exact for arcs and rectangles, 0/1 at the center for disks.
    double cell_coverage(std::size_t cell, const Grid& grid) const;
    double grid_measure(const Grid& grid) const;
    std::vector<BoundaryPiece> boundary_pieces() const;
    /// Boundary coordinates of arcs along the circle (1D only).
    std::vector<double> arc_endpoints() const;

    /// Same geometry translated by (dx, dy).
    HoleSpec shifted(double dx, double dy) const;

    nlohmann::json to_json() const;
    static HoleSpec from_json(const nlohmann::json& j, int dimension);
    std::string fingerprint() const;

private:
    int dimension_;
    std::vector<HoleComponent> components_;
    double regularity_;
};

class HoleSequence {
public:
    HoleSequence(int dimension, std::vector<HoleSpec> holes);

    static HoleSequence none(int dimension, std::size_t length);
    static HoleSequence constant(const HoleSpec& hole, std::size_t length);
    /// H_k = base translated by (k-1) * velocity, k = 1..length.
    static HoleSequence drifting(const HoleSpec& base, double vx, double vy, std::size_t length);

    int dimension() const { return dimension_; }
    std::size_t size() const { return holes_.size(); }
    const HoleSpec& operator[](std::size_t k) const { return holes_.at(k); }
    const std::vector<HoleSpec>& holes() const { return holes_; }
    double max_measure() const;
    HoleSequence slice(std::size_t start, std::size_t count) const;

private:
    int dimension_;
    std::vector<HoleSpec> holes_;
};

/// Schedules: none | static | drifting | explicit.
HoleSequence holes_from_config(const nlohmann::json& j, int dimension, std::size_t length);

struct SurvivorSet {
    std::vector<char> alive;
    /// Cells whose survival is not uniform across the cell.
    std::vector<char> straddling;
    double measure = 0.0;
    double straddling_measure = 0.0;
};

SurvivorSet survivor_indicator(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid);
double survivor_measure(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid);

} // namespace nsopen
