#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nsopen/phase.hpp"

namespace nsopen {

class HoleSequence;

/// f(x) = slope * x + offset on the lifted line.
struct AffineFormula {
    double slope = 1.0;
    double offset = 0.0;
};

/// f(x) = c0 + c1 t + c2 t^2 with t = x - origin; monotone on its domain.
struct QuadraticFormula {
    double origin = 0.0;
    double c0 = 0.0;
    double c1 = 1.0;
    double c2 = 0.0;
};

class Branch1D {
public:
    using Formula = std::variant<AffineFormula, QuadraticFormula>;

    Branch1D(Interval domain, Formula formula);

    const Interval& domain() const { return domain_; }
    const Formula& formula() const { return formula_; }
    /// Lifted value (not reduced mod 1).
    double value(double x) const;
    double derivative(double x) const;
    /// Inverse of the lifted branch on its lifted image.
    double inverse(double y) const;
    bool increasing() const;
    /// Sorted lifted image of the domain.
    Interval image() const;
    double inverse_contraction() const;
    double c1alpha_norm(double alpha) const;

private:
    Interval domain_;
    Formula formula_;
};

class Branch2D {
public:
    Branch2D(Box domain, Eigen::Matrix2d matrix, Eigen::Vector2d offset);

    const Box& domain() const { return domain_; }
    const Eigen::Matrix2d& matrix() const { return matrix_; }
    const Eigen::Vector2d& offset() const { return offset_; }
    Point value(Point p) const;
    /// Spectral norm of the inverse matrix.
    double inverse_contraction() const;
    double c1alpha_norm() const;

private:
    Box domain_;
    Eigen::Matrix2d matrix_;
    Eigen::Vector2d offset_;
};

/// Piecewise map on T^1 or T^2 with continuity partition given by the branch domains.
class MapSpec {
public:
    static MapSpec one_dimensional(std::vector<Branch1D> branches, double alpha = 1.0,
                                   std::optional<double> regularity = std::nullopt);
    static MapSpec two_dimensional(std::vector<Branch2D> branches, double alpha = 1.0,
                                   std::optional<double> regularity = std::nullopt);

    /// Full-branch affine map: branch k maps [cuts[k], cuts[k+1]) onto a unit interval, plus a rotation.
    static MapSpec full_branch_affine(const std::vector<double>& cuts, double shift = 0.0);
    static MapSpec doubling();
    static MapSpec translation(double shift);
    /// b full branches k + h(bx - k), h(u) = u + c u (1 - u); |c| < 1.
    static MapSpec quadratic_full_branch(int branches, double c);
    static MapSpec linear_2d(const Eigen::Matrix2d& matrix, const Eigen::Vector2d& offset = Eigen::Vector2d::Zero());

    int dimension() const { return dimension_; }
    std::size_t branch_count() const { return dimension_ == 1 ? branches1_.size() : branches2_.size(); }
    const std::vector<Branch1D>& branches_1d() const { return branches1_; }
    const std::vector<Branch2D>& branches_2d() const { return branches2_; }

    double expansion_bound() const { return s_; }
    bool is_expanding() const { return s_ < 1.0; }
    double regularity_bound() const { return regularity_; }
    double alpha() const { return alpha_; }
    int kappa() const { return kappa_; }

    /// Boundary pieces of each branch domain.
    const std::vector<std::vector<BoundaryPiece>>& boundary_pieces() const { return pieces_; }

    /// Branch whose half-open domain contains x.
    std::size_t branch_at(Point x) const;
    bool on_boundary(Point x, double tol = 1e-14) const;
    /// Image reduced mod 1; throws BoundaryError on a domain boundary.
    Point evaluate(Point x) const;
    Point evaluate_half_open(Point x) const;
    Point lifted(std::size_t branch, Point x) const;

    PartitionSpec continuity_partition(const Grid& grid) const;

    nlohmann::json to_json() const;
    static MapSpec from_json(const nlohmann::json& j);
    /// Canonical full-precision content string.
    std::string fingerprint() const;

private:
    MapSpec() = default;
    void finish(double alpha, std::optional<double> regularity);

    int dimension_ = 1;
    std::vector<Branch1D> branches1_;
    std::vector<Branch2D> branches2_;
    double s_ = 0.0;
    double regularity_ = 0.0;
    double alpha_ = 1.0;
    int kappa_ = 0;
    std::vector<std::vector<BoundaryPiece>> pieces_;
};

using MapSequence = std::vector<MapSpec>;

/// Parse a map declaration: affine_1d | full_branch_affine | smooth_1d | affine_2d_matrix.
MapSpec map_from_config(const nlohmann::json& j);

struct DynamicalPartition {
    PartitionSpec partition;
    std::size_t unresolved_cells = 0;
    bool resolution_warning() const { return unresolved_cells > 0; }
};

/// Itinerary classes of the first m maps at grid resolution.
DynamicalPartition dynamical_partition(const MapSequence& seq, int m, const Grid& grid);

/// Complexity of the survivor-restricted dynamical partitions for steps 1..m; escaped cells form one extra class.
std::vector<int> complexity_sequence(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid);

struct BalanceResult {
    double value = 0.0;
    bool ok = false;
};

double unit_ball_volume(int n);
BalanceResult balance_check(double s_T, double kappa_T, double alpha, int N);

/// Smallest δ making f and g δ-close; nullopt when no branch correspondence exists.
std::optional<double> perturbation_distance(const MapSpec& f, const MapSpec& g);

/// Random map within δ of `base`: cut points and rotation jittered for full-branch 1D maps,
/// offsets for 2D maps. Throws ConfigError if the family cannot be perturbed.
MapSpec sample_perturbation(const MapSpec& base, double delta, std::mt19937_64& rng);

} // namespace nsopen
