#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "nsopen/holes.hpp"
#include "nsopen/maps.hpp"
#include "nsopen/phase.hpp"

namespace nsopen {

/// Piecewise-constant density: one value per grid cell.
class GridDensity {
public:
    GridDensity(Grid grid, std::vector<double> values);

    static GridDensity uniform(const Grid& grid);
    static GridDensity zero(const Grid& grid);
    static GridDensity indicator(const Grid& grid, const CellSet& cells);
    /// Cell averages of f by 4-point Gauss-Legendre quadrature per axis.
    static GridDensity from_function(const Grid& grid, const std::function<double(Point)>& f);

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t c) const { return values_[c]; }
    std::size_t size() const { return values_.size(); }
    double mass() const;
    /// Integral over a set of cells.
    double mass_on(const CellSet& cells) const;

    GridDensity scaled(double c) const;

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Sub-stochastic matrix M[j][i] = λ(C_i ∩ F^{-1}(C_j) \ escaped) / λ(C_i).
class UlamOperator {
public:
    using Matrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

    UlamOperator(Grid grid, Matrix matrix, bool open);

    const Grid& grid() const { return grid_; }
    const Matrix& matrix() const { return matrix_; }
    bool is_open() const { return open_; }

    GridDensity apply(const GridDensity& phi) const;
    std::vector<double> column_sums() const;
    /// Coordinate-list text: header "rows cols nnz", then "row col value" per entry.
    void export_coo(std::ostream& os) const;

private:
    Grid grid_;
    Matrix matrix_;
    bool open_;
};

UlamOperator build_closed(const MapSpec& map, const Grid& grid);
UlamOperator build_open(const MapSpec& map, const HoleSpec& hole, const Grid& grid);

/// Operators keyed by content; safe to share between threads.
class OperatorCache {
public:
    std::shared_ptr<const UlamOperator> get(const MapSpec& map, const HoleSpec& hole, const Grid& grid);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const UlamOperator>> entries_;
};

/// φ_k = (open operator of step k) φ_{k-1}, k = 1..m, unnormalized.
std::vector<GridDensity> evolve(const MapSequence& seq, const HoleSequence& holes, const GridDensity& phi0, int m,
                                OperatorCache* cache = nullptr);

/// Scales to unit mass; throws TotalEscapeError on zero mass.
GridDensity normalize(const GridDensity& phi);
double l1_distance(const GridDensity& phi, const GridDensity& psi);
/// Mass lost at each step of an evolution started from phi0.
std::vector<double> escape_mass(const GridDensity& phi0, const std::vector<GridDensity>& sequence);

} // namespace nsopen
