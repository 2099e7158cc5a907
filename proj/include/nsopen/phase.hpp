#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "json.hpp"

namespace nsopen {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Reduce to [0,1).
double wrap_unit(double v);
double circle_distance(double a, double b);
/// Torus metric: min over integer translates of the Euclidean distance.
double torus_distance(Point a, Point b, int dimension);

/// Uniform cell grid on T^1 or T^2. Cells are half-open; 2D index = iy * n + ix.
class Grid {
public:
    Grid(int dimension, int cells_per_side);

    int dimension() const { return dimension_; }
    int cells_per_side() const { return n_; }
    std::size_t total_cells() const { return total_; }
    double cell_measure() const { return 1.0 / static_cast<double>(total_); }
    double cell_width() const { return 1.0 / n_; }
    double cell_diameter() const;

    Point center(std::size_t cell) const;
    int ix(std::size_t cell) const { return static_cast<int>(cell % n_); }
    int iy(std::size_t cell) const { return dimension_ == 1 ? 0 : static_cast<int>(cell / n_); }
    /// Wraps both coordinates.
    std::size_t index(long ix, long iy = 0) const;
    /// Cell containing a point (half-open convention).
    std::size_t locate(Point p) const;

    bool operator==(const Grid& other) const { return dimension_ == other.dimension_ && n_ == other.n_; }
    bool operator!=(const Grid& other) const { return !(*this == other); }

    nlohmann::json to_json() const;
    static Grid from_json(const nlohmann::json& j);

private:
    int dimension_;
    int n_;
    std::size_t total_;
};

using CellSet = std::vector<std::size_t>;

/// Closed interval on the line model.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Closed axis-aligned box in the plane model.
struct Box {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
};

struct PointPiece {
    Point at;
};

/// Axis-aligned boundary segment; axis 0 runs along x, axis 1 along y. Length 1 is a closed loop.
struct SegmentPiece {
    Point start;
    int axis = 0;
    double length = 0.0;
};

/// Author-supplied C^2 chart, carried as a polyline through its vertices.
struct ChartPiece {
    std::vector<Point> polyline;
    double chart_norm = 0.0;
};

using BoundaryPiece = std::variant<PointPiece, SegmentPiece, ChartPiece>;

class PartitionSpec {
public:
    PartitionSpec(Grid grid, std::vector<CellSet> elements,
                  std::vector<std::vector<BoundaryPiece>> boundaries, double regularity_bound);

    /// Elements are the label classes, numbered by first appearance; boundaries are derived from the grid.
    static PartitionSpec from_labels(const Grid& grid, const std::vector<int>& labels,
                                     double regularity_bound = 2.0);
    /// k equal arcs (1D) or k x k equal squares (2D); n must be divisible by k.
    static PartitionSpec uniform(const Grid& grid, int parts_per_side);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return elements_.size(); }
    const std::vector<CellSet>& elements() const { return elements_; }
    const CellSet& element(std::size_t k) const { return elements_.at(k); }
    const std::vector<BoundaryPiece>& boundary(std::size_t k) const { return boundaries_.at(k); }
    const std::vector<std::vector<BoundaryPiece>>& boundaries() const { return boundaries_; }
    double regularity_bound() const { return regularity_bound_; }
    /// Element index of every cell.
    const std::vector<int>& labels() const { return labels_; }

    nlohmann::json to_json() const;
    static PartitionSpec from_json(const nlohmann::json& j);

private:
    Grid grid_;
    std::vector<CellSet> elements_;
    std::vector<std::vector<BoundaryPiece>> boundaries_;
    double regularity_bound_;
    std::vector<int> labels_;
};

double measure(const CellSet& cells, const Grid& grid);
double diam_lambda(const PartitionSpec& p);
double metric_diam(const CellSet& cells, const Grid& grid);
double metric_diam(const PartitionSpec& p);

double hausdorff_distance(const Interval& a, const Interval& b);
double hausdorff_distance(const Box& a, const Box& b);
/// Torus Hausdorff distance between cell sets, measured on cell centers.
double hausdorff_distance(const CellSet& a, const CellSet& b, const Grid& grid);

int partition_complexity(const PartitionSpec& p);
/// Max number of pieces through one point, for descriptor lists not tied to a grid.
int boundary_complexity(const std::vector<std::vector<BoundaryPiece>>& pieces, int dimension);

} // namespace nsopen
