#include "nsopen/maps.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "nsopen/errors.hpp"
#include "nsopen/holes.hpp"

namespace nsopen {

namespace {

constexpr double kTilingTol = 1e-12;

double quad_value(const QuadraticFormula& q, double x) {
    double t = x - q.origin;
    return q.c0 + t * (q.c1 + q.c2 * t);
}

double quad_derivative(const QuadraticFormula& q, double x) { return q.c1 + 2.0 * q.c2 * (x - q.origin); }

} // namespace

Branch1D::Branch1D(Interval domain, Formula formula) : domain_(domain), formula_(formula) {
    if (!(domain_.lo >= 0.0 && domain_.hi <= 1.0 && domain_.lo < domain_.hi))
        throw ConstructionError("branch domain must be a nonempty subinterval of [0,1]");
    double d0 = derivative(domain_.lo), d1 = derivative(domain_.hi);
    if (d0 == 0.0 || d1 == 0.0 || (d0 > 0) != (d1 > 0))
        throw ConstructionError("branch is not invertible on its domain");
    Interval im = image();
    if (im.hi - im.lo > 1.0 + kTilingTol) throw ConstructionError("branch image longer than the circle");
}

double Branch1D::value(double x) const {
    if (auto a = std::get_if<AffineFormula>(&formula_)) return a->slope * x + a->offset;
    return quad_value(std::get<QuadraticFormula>(formula_), x);
}

double Branch1D::derivative(double x) const {
    if (auto a = std::get_if<AffineFormula>(&formula_)) return a->slope;
    return quad_derivative(std::get<QuadraticFormula>(formula_), x);
}

double Branch1D::inverse(double y) const {
    if (auto a = std::get_if<AffineFormula>(&formula_)) return (y - a->offset) / a->slope;
    const auto& q = std::get<QuadraticFormula>(formula_);
    double r = y - q.c0;
    if (q.c2 == 0.0) return q.origin + r / q.c1;
    double disc = std::max(0.0, q.c1 * q.c1 + 4.0 * q.c2 * r);
    double root = std::sqrt(disc);
    return q.origin + 2.0 * r / (q.c1 + std::copysign(root, q.c1));
}

bool Branch1D::increasing() const { return derivative(domain_.lo) > 0; }

Interval Branch1D::image() const {
    double a = value(domain_.lo), b = value(domain_.hi);
    return {std::min(a, b), std::max(a, b)};
}

double Branch1D::inverse_contraction() const {
    return 1.0 / std::min(std::fabs(derivative(domain_.lo)), std::fabs(derivative(domain_.hi)));
}

double Branch1D::c1alpha_norm(double alpha) const {
    double sup = std::max(std::fabs(value(domain_.lo)), std::fabs(value(domain_.hi)));
    double dsup = std::max(std::fabs(derivative(domain_.lo)), std::fabs(derivative(domain_.hi)));
    double holder = 0.0;
    if (auto q = std::get_if<QuadraticFormula>(&formula_))
        holder = 2.0 * std::fabs(q->c2) * std::pow(domain_.hi - domain_.lo, 1.0 - alpha);
    return sup + dsup + holder;
}

Branch2D::Branch2D(Box domain, Eigen::Matrix2d matrix, Eigen::Vector2d offset)
    : domain_(domain), matrix_(matrix), offset_(offset) {
    if (!(domain_.x0 >= 0 && domain_.x1 <= 1 && domain_.y0 >= 0 && domain_.y1 <= 1 && domain_.x0 < domain_.x1 &&
          domain_.y0 < domain_.y1))
        throw ConstructionError("branch domain must be a nonempty box in [0,1]^2");
    double det = matrix_.determinant();
    if (det == 0.0) throw ConstructionError("branch matrix is singular");
    double area = (domain_.x1 - domain_.x0) * (domain_.y1 - domain_.y0);
    if (std::fabs(det) * area > 1.0 + kTilingTol) throw ConstructionError("branch image area exceeds the torus");
}

Point Branch2D::value(Point p) const {
    Eigen::Vector2d v = matrix_ * Eigen::Vector2d(p.x, p.y) + offset_;
    return {v.x(), v.y()};
}

double Branch2D::inverse_contraction() const {
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(matrix_);
    return 1.0 / svd.singularValues()(1);
}

double Branch2D::c1alpha_norm() const {
    double sup = 0.0;
    for (double x : {domain_.x0, domain_.x1})
        for (double y : {domain_.y0, domain_.y1}) {
            Point q = value({x, y});
            sup = std::max({sup, std::fabs(q.x), std::fabs(q.y)});
        }
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(matrix_);
    return sup + svd.singularValues()(0);
}

// ---------------------------------------------------------------------------

MapSpec MapSpec::one_dimensional(std::vector<Branch1D> branches, double alpha, std::optional<double> regularity) {
    if (branches.empty()) throw ConstructionError("map needs at least one branch");
    std::sort(branches.begin(), branches.end(),
              [](const Branch1D& a, const Branch1D& b) { return a.domain().lo < b.domain().lo; });
    if (std::fabs(branches.front().domain().lo) > kTilingTol || std::fabs(branches.back().domain().hi - 1.0) > kTilingTol)
        throw ConstructionError("branch domains must tile [0,1)");
    for (std::size_t k = 1; k < branches.size(); ++k)
        if (std::fabs(branches[k].domain().lo - branches[k - 1].domain().hi) > kTilingTol)
            throw ConstructionError("branch domains must tile [0,1)");
    MapSpec m;
    m.dimension_ = 1;
    m.branches1_ = std::move(branches);
    m.finish(alpha, regularity);
    return m;
}

MapSpec MapSpec::two_dimensional(std::vector<Branch2D> branches, double alpha, std::optional<double> regularity) {
    if (branches.empty()) throw ConstructionError("map needs at least one branch");
    double area = 0.0;
    for (std::size_t a = 0; a < branches.size(); ++a) {
        const Box& A = branches[a].domain();
        area += (A.x1 - A.x0) * (A.y1 - A.y0);
        for (std::size_t b = a + 1; b < branches.size(); ++b) {
            const Box& B = branches[b].domain();
            double ox = std::min(A.x1, B.x1) - std::max(A.x0, B.x0);
            double oy = std::min(A.y1, B.y1) - std::max(A.y0, B.y0);
            if (ox > kTilingTol && oy > kTilingTol) throw ConstructionError("branch domains overlap");
        }
    }
    if (std::fabs(area - 1.0) > 1e-10) throw ConstructionError("branch domains must tile [0,1)^2");
    MapSpec m;
    m.dimension_ = 2;
    m.branches2_ = std::move(branches);
    m.finish(alpha, regularity);
    return m;
}

void MapSpec::finish(double alpha, std::optional<double> regularity) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConstructionError("Hölder exponent must lie in (0,1]");
    alpha_ = alpha;
    s_ = 0.0;
    double norm = 0.0;
    pieces_.clear();
    if (dimension_ == 1) {
        for (const auto& b : branches1_) {
            s_ = std::max(s_, b.inverse_contraction());
            norm = std::max(norm, b.c1alpha_norm(alpha));
        }
        pieces_.resize(branches1_.size());
        if (branches1_.size() > 1) {
            for (std::size_t k = 0; k < branches1_.size(); ++k) {
                pieces_[k].push_back(PointPiece{{wrap_unit(branches1_[k].domain().lo), 0.0}});
                pieces_[k].push_back(PointPiece{{wrap_unit(branches1_[k].domain().hi), 0.0}});
            }
        }
    } else {
        for (const auto& b : branches2_) {
            s_ = std::max(s_, b.inverse_contraction());
            norm = std::max(norm, b.c1alpha_norm());
        }
        pieces_.resize(branches2_.size());
        for (std::size_t k = 0; k < branches2_.size(); ++k) {
            const Box& d = branches2_[k].domain();
            bool full_x = d.x0 <= kTilingTol && d.x1 >= 1.0 - kTilingTol;
            bool full_y = d.y0 <= kTilingTol && d.y1 >= 1.0 - kTilingTol;
            double wx = d.x1 - d.x0, wy = d.y1 - d.y0;
            if (!full_y) {
                pieces_[k].push_back(SegmentPiece{{wrap_unit(d.x0), wrap_unit(d.y0)}, 0, wx});
                pieces_[k].push_back(SegmentPiece{{wrap_unit(d.x0), wrap_unit(d.y1)}, 0, wx});
            }
            if (!full_x) {
                pieces_[k].push_back(SegmentPiece{{wrap_unit(d.x0), wrap_unit(d.y0)}, 1, wy});
                pieces_[k].push_back(SegmentPiece{{wrap_unit(d.x1), wrap_unit(d.y0)}, 1, wy});
            }
        }
    }
    if (regularity) {
        if (!(norm < *regularity)) throw ConstructionError("branch C^{1+alpha} norm is not below the regularity bound");
        regularity_ = *regularity;
    } else {
        regularity_ = norm + 1.0;
    }
    kappa_ = boundary_complexity(pieces_, dimension_);
}

MapSpec MapSpec::full_branch_affine(const std::vector<double>& cuts, double shift) {
    if (cuts.size() < 2) throw ConstructionError("need at least two cut points");
    std::vector<Branch1D> branches;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        double len = cuts[k + 1] - cuts[k];
        if (!(len > 0)) throw ConstructionError("cut points must increase");
        double slope = 1.0 / len;
        branches.emplace_back(Interval{cuts[k], cuts[k + 1]},
                              AffineFormula{slope, static_cast<double>(k) + shift - cuts[k] * slope});
    }
    return one_dimensional(std::move(branches));
}

MapSpec MapSpec::doubling() { return full_branch_affine({0.0, 0.5, 1.0}); }

MapSpec MapSpec::translation(double shift) {
    return one_dimensional({Branch1D(Interval{0.0, 1.0}, AffineFormula{1.0, shift})});
}

MapSpec MapSpec::quadratic_full_branch(int branches, double c) {
    if (branches < 1 || !(std::fabs(c) < 1.0)) throw ConstructionError("quadratic family needs b >= 1 and |c| < 1");
    const double b = branches;
    std::vector<Branch1D> list;
    for (int k = 0; k < branches; ++k) {
        double u = k / b;
        double v = (k + 1) / b;
        if (k + 1 == branches) v = 1.0;
        list.emplace_back(Interval{u, v}, QuadraticFormula{u, static_cast<double>(k), b * (1.0 + c), -c * b * b});
    }
    return one_dimensional(std::move(list));
}

MapSpec MapSpec::linear_2d(const Eigen::Matrix2d& matrix, const Eigen::Vector2d& offset) {
    return two_dimensional({Branch2D(Box{0.0, 1.0, 0.0, 1.0}, matrix, offset)});
}

std::size_t MapSpec::branch_at(Point x) const {
    if (dimension_ == 1) {
        double v = wrap_unit(x.x);
        auto it = std::upper_bound(branches1_.begin(), branches1_.end(), v,
                                   [](double val, const Branch1D& b) { return val < b.domain().lo; });
        return it == branches1_.begin() ? 0 : static_cast<std::size_t>(it - branches1_.begin()) - 1;
    }
    double vx = wrap_unit(x.x), vy = wrap_unit(x.y);
    for (std::size_t k = 0; k < branches2_.size(); ++k) {
        const Box& d = branches2_[k].domain();
        if (vx >= d.x0 && vx < d.x1 && vy >= d.y0 && vy < d.y1) return k;
    }
    throw BoundaryError("point not covered by any branch domain");
}

bool MapSpec::on_boundary(Point x, double tol) const {
    if (dimension_ == 1) {
        if (branches1_.size() < 2) return false;
        for (const auto& b : branches1_)
            if (circle_distance(x.x, b.domain().lo) < tol) return true;
        return false;
    }
    double vx = wrap_unit(x.x), vy = wrap_unit(x.y);
    for (const auto& b : branches2_) {
        const Box& d = b.domain();
        bool full_x = d.x0 <= kTilingTol && d.x1 >= 1.0 - kTilingTol;
        bool full_y = d.y0 <= kTilingTol && d.y1 >= 1.0 - kTilingTol;
        bool in_x = vx >= d.x0 - tol && vx <= d.x1 + tol;
        bool in_y = vy >= d.y0 - tol && vy <= d.y1 + tol;
        if (!full_x && in_y && (circle_distance(vx, d.x0) < tol || circle_distance(vx, d.x1) < tol)) return true;
        if (!full_y && in_x && (circle_distance(vy, d.y0) < tol || circle_distance(vy, d.y1) < tol)) return true;
    }
    return false;
}

Point MapSpec::evaluate(Point x) const {
    if (on_boundary(x)) throw BoundaryError("point lies on a continuity boundary");
    return evaluate_half_open(x);
}

Point MapSpec::evaluate_half_open(Point x) const {
    Point y = lifted(branch_at(x), {wrap_unit(x.x), dimension_ == 1 ? 0.0 : wrap_unit(x.y)});
    return {wrap_unit(y.x), dimension_ == 1 ? 0.0 : wrap_unit(y.y)};
}

Point MapSpec::lifted(std::size_t branch, Point x) const {
    if (dimension_ == 1) return {branches1_.at(branch).value(x.x), 0.0};
    return branches2_.at(branch).value(x);
}

PartitionSpec MapSpec::continuity_partition(const Grid& grid) const {
    if (grid.dimension() != dimension_) throw InputError("grid dimension does not match the map");
    std::vector<int> labels(grid.total_cells());
    for (std::size_t c = 0; c < labels.size(); ++c) labels[c] = static_cast<int>(branch_at(grid.center(c)));
    return PartitionSpec::from_labels(grid, labels, regularity_);
}

nlohmann::json MapSpec::to_json() const {
    nlohmann::json branches = nlohmann::json::array();
    if (dimension_ == 1) {
        for (const auto& b : branches1_) {
            nlohmann::json e = {{"domain", {b.domain().lo, b.domain().hi}}};
            if (auto a = std::get_if<AffineFormula>(&b.formula())) {
                e["type"] = "affine";
                e["slope"] = a->slope;
                e["offset"] = a->offset;
            } else {
                const auto& q = std::get<QuadraticFormula>(b.formula());
                e["type"] = "quadratic";
                e["origin"] = q.origin;
                e["c0"] = q.c0;
                e["c1"] = q.c1;
                e["c2"] = q.c2;
            }
            branches.push_back(e);
        }
    } else {
        for (const auto& b : branches2_) {
            const auto& A = b.matrix();
            branches.push_back({{"domain", {b.domain().x0, b.domain().x1, b.domain().y0, b.domain().y1}},
                                {"matrix", {{A(0, 0), A(0, 1)}, {A(1, 0), A(1, 1)}}},
                                {"offset", {b.offset().x(), b.offset().y()}}});
        }
    }
    return {{"dimension", dimension_}, {"alpha", alpha_}, {"K", regularity_}, {"branches", branches}};
}

MapSpec MapSpec::from_json(const nlohmann::json& j) {
    int dim = j.at("dimension").get<int>();
    double alpha = j.value("alpha", 1.0);
    std::optional<double> K;
    if (j.contains("K")) K = j.at("K").get<double>();
    if (dim == 1) {
        std::vector<Branch1D> list;
        for (const auto& e : j.at("branches")) {
            Interval d{e.at("domain").at(0).get<double>(), e.at("domain").at(1).get<double>()};
            if (e.value("type", std::string("affine")) == "quadratic") {
                list.emplace_back(d, QuadraticFormula{e.at("origin").get<double>(), e.at("c0").get<double>(),
                                                      e.at("c1").get<double>(), e.at("c2").get<double>()});
            } else {
                list.emplace_back(d, AffineFormula{e.at("slope").get<double>(), e.at("offset").get<double>()});
            }
        }
        return one_dimensional(std::move(list), alpha, K);
    }
    if (dim != 2) throw InputError("map dimension must be 1 or 2");
    std::vector<Branch2D> list;
    for (const auto& e : j.at("branches")) {
        const auto& d = e.at("domain");
        Eigen::Matrix2d A;
        A << e.at("matrix").at(0).at(0).get<double>(), e.at("matrix").at(0).at(1).get<double>(),
            e.at("matrix").at(1).at(0).get<double>(), e.at("matrix").at(1).at(1).get<double>();
        Eigen::Vector2d b(e.at("offset").at(0).get<double>(), e.at("offset").at(1).get<double>());
        list.emplace_back(Box{d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>(), d.at(3).get<double>()},
                          A, b);
    }
    return two_dimensional(std::move(list), alpha, K);
}

std::string MapSpec::fingerprint() const { return to_json().dump(); }

MapSpec map_from_config(const nlohmann::json& j) {
    std::string kind = j.at("kind").get<std::string>();
    double alpha = j.value("alpha", 1.0);
    std::optional<double> K;
    if (j.contains("K")) K = j.at("K").get<double>();
    auto with_meta = [&](const MapSpec& m) {
        nlohmann::json raw = m.to_json();
        raw["alpha"] = alpha;
        if (K) raw["K"] = *K;
        else raw.erase("K");
        return MapSpec::from_json(raw);
    };
    if (kind == "doubling") return with_meta(MapSpec::doubling());
    if (kind == "translation") return with_meta(MapSpec::translation(j.at("shift").get<double>()));
    if (kind == "full_branch_affine")
        return with_meta(MapSpec::full_branch_affine(j.at("cuts").get<std::vector<double>>(), j.value("shift", 0.0)));
    if (kind == "affine_1d") {
        nlohmann::json raw = {{"dimension", 1}, {"alpha", alpha}, {"branches", j.at("branches")}};
        if (K) raw["K"] = *K;
        return MapSpec::from_json(raw);
    }
    if (kind == "smooth_1d") {
        std::string family = j.at("family").get<std::string>();
        if (family != "quadratic_full_branch") throw ConfigError("unknown smooth_1d family: " + family);
        return with_meta(MapSpec::quadratic_full_branch(j.at("branches").get<int>(), j.at("c").get<double>()));
    }
    if (kind == "affine_2d_matrix") {
        if (j.contains("branches")) {
            nlohmann::json raw = {{"dimension", 2}, {"alpha", alpha}, {"branches", j.at("branches")}};
            if (K) raw["K"] = *K;
            return MapSpec::from_json(raw);
        }
        const auto& M = j.at("matrix");
        Eigen::Matrix2d A;
        A << M.at(0).at(0).get<double>(), M.at(0).at(1).get<double>(), M.at(1).at(0).get<double>(),
            M.at(1).at(1).get<double>();
        Eigen::Vector2d b = Eigen::Vector2d::Zero();
        if (j.contains("offset")) b = Eigen::Vector2d(j["offset"].at(0).get<double>(), j["offset"].at(1).get<double>());
        return with_meta(MapSpec::linear_2d(A, b));
    }
    if (kind == "raw") return MapSpec::from_json(j.at("map"));
    throw ConfigError("unknown map kind: " + kind);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Point> cell_samples(const Grid& grid, std::size_t c) {
    const double h = grid.cell_width();
    const double inset = 1e-9 * h;
    Point ctr = grid.center(c);
    double x0 = grid.ix(c) * h + inset, x1 = (grid.ix(c) + 1) * h - inset;
    if (grid.dimension() == 1) return {ctr, {x0, 0.0}, {x1, 0.0}};
    double y0 = grid.iy(c) * h + inset, y1 = (grid.iy(c) + 1) * h - inset;
    return {ctr, {x0, y0}, {x1, y0}, {x0, y1}, {x1, y1}};
}

class Interner {
public:
    int get(int previous, int symbol) {
        std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(previous)) << 32) |
                            static_cast<std::uint32_t>(symbol);
        auto [it, inserted] = table_.emplace(key, static_cast<int>(table_.size()));
        return it->second;
    }
    void reset() { table_.clear(); }

private:
    std::unordered_map<std::uint64_t, int> table_;
};

void check_sequence(const MapSequence& seq, int m, const Grid& grid) {
    if (m < 1) throw InputError("m must be at least 1");
    if (seq.size() < static_cast<std::size_t>(m)) throw InputError("map sequence shorter than m");
    for (const auto& f : seq)
        if (f.dimension() != grid.dimension()) throw InputError("map and grid dimensions differ");
}

} // namespace

DynamicalPartition dynamical_partition(const MapSequence& seq, int m, const Grid& grid) {
    check_sequence(seq, m, grid);
    const std::size_t cells = grid.total_cells();
    const std::size_t per = grid.dimension() == 1 ? 3 : 5;
    std::vector<Point> pts(cells * per);
    std::vector<int> label(cells * per, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        auto s = cell_samples(grid, c);
        std::copy(s.begin(), s.end(), pts.begin() + c * per);
    }
    Interner interner;
    for (int k = 0; k < m; ++k) {
        const MapSpec& f = seq[k];
        interner.reset();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::size_t b = f.branch_at(pts[i]);
            label[i] = interner.get(label[i], static_cast<int>(b));
            pts[i] = f.evaluate_half_open(pts[i]);
        }
    }
    std::vector<int> center_labels(cells);
    std::size_t unresolved = 0;
    for (std::size_t c = 0; c < cells; ++c) {
        center_labels[c] = label[c * per];
        for (std::size_t j = 1; j < per; ++j) {
            if (label[c * per + j] != label[c * per]) {
                ++unresolved;
                break;
            }
        }
    }
    double K = seq.front().regularity_bound();
    return {PartitionSpec::from_labels(grid, center_labels, K), unresolved};
}

std::vector<int> complexity_sequence(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid) {
    check_sequence(seq, m, grid);
    if (holes.size() < static_cast<std::size_t>(m)) throw InputError("hole sequence shorter than m");
    if (holes.dimension() != grid.dimension()) throw InputError("hole and grid dimensions differ");
    const std::size_t cells = grid.total_cells();
    std::vector<Point> pts(cells);
    std::vector<int> label(cells, 0);
    for (std::size_t c = 0; c < cells; ++c) pts[c] = grid.center(c);
    std::vector<int> result;
    Interner interner;
    for (int k = 0; k < m; ++k) {
        const MapSpec& f = seq[k];
        const HoleSpec& hole = holes[k];
        interner.reset();
        for (std::size_t c = 0; c < cells; ++c) {
            if (label[c] < 0) continue;
            std::size_t b = f.branch_at(pts[c]);
            label[c] = interner.get(label[c], static_cast<int>(b));
            pts[c] = f.evaluate_half_open(pts[c]);
            if (hole.contains(pts[c])) label[c] = -1;
        }
        auto part = PartitionSpec::from_labels(grid, label, std::max(f.regularity_bound(), hole.regularity_bound()));
        result.push_back(partition_complexity(part));
    }
    return result;
}

double unit_ball_volume(int n) {
    return std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

BalanceResult balance_check(double s_T, double kappa_T, double alpha, int N) {
    if (!(s_T > 0.0 && s_T < 1.0)) throw InputError("s_T must lie in (0,1)");
    if (!(kappa_T >= 0.0)) throw InputError("kappa_T must be nonnegative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in (0,1]");
    if (N != 1 && N != 2) throw InputError("N must be 1 or 2");
    double value = std::pow(s_T, alpha) +
                   (4.0 * s_T * kappa_T / (1.0 - s_T)) * (unit_ball_volume(N - 1) / unit_ball_volume(N));
    return {value, value < 1.0};
}

// ---------------------------------------------------------------------------

namespace {

double partition_gap(const MapSpec& f, const MapSpec& g) {
    double gap = 0.0;
    if (f.dimension() == 1) {
        for (std::size_t k = 0; k < f.branch_count(); ++k)
            gap = std::max(gap, hausdorff_distance(f.branches_1d()[k].domain(), g.branches_1d()[k].domain()));
    } else {
        for (std::size_t k = 0; k < f.branch_count(); ++k)
            gap = std::max(gap, hausdorff_distance(f.branches_2d()[k].domain(), g.branches_2d()[k].domain()));
    }
    return gap;
}

double map_gap_1d(const Branch1D& a, const Branch1D& b, double delta, double alpha) {
    double lo = std::max(a.domain().lo, b.domain().lo) + delta;
    double hi = std::min(a.domain().hi, b.domain().hi) - delta;
    if (!(lo < hi)) return 0.0;
    constexpr int kSamples = 65;
    std::vector<double> xs(kSamples), dd(kSamples);
    double sup0 = 0.0, sup1 = 0.0;
    for (int i = 0; i < kSamples; ++i) {
        double x = lo + (hi - lo) * i / (kSamples - 1);
        xs[i] = x;
        sup0 = std::max(sup0, circle_distance(a.value(x), b.value(x)));
        dd[i] = a.derivative(x) - b.derivative(x);
        sup1 = std::max(sup1, std::fabs(dd[i]));
    }
    double holder = 0.0;
    for (int i = 0; i < kSamples; i += 4)
        for (int j = i + 4; j < kSamples; j += 4)
            holder = std::max(holder, std::fabs(dd[i] - dd[j]) / std::pow(xs[j] - xs[i], alpha));
    return sup0 + sup1 + holder;
}

double map_gap_2d(const Branch2D& a, const Branch2D& b, double delta) {
    const Box& A = a.domain();
    const Box& B = b.domain();
    double x0 = std::max(A.x0, B.x0) + delta, x1 = std::min(A.x1, B.x1) - delta;
    double y0 = std::max(A.y0, B.y0) + delta, y1 = std::min(A.y1, B.y1) - delta;
    if (!(x0 < x1 && y0 < y1)) return 0.0;
    double sup0 = 0.0;
    constexpr int kSamples = 9;
    for (int i = 0; i < kSamples; ++i)
        for (int j = 0; j < kSamples; ++j) {
            Point p{x0 + (x1 - x0) * i / (kSamples - 1), y0 + (y1 - y0) * j / (kSamples - 1)};
            sup0 = std::max(sup0, torus_distance(a.value(p), b.value(p), 2));
        }
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(a.matrix() - b.matrix());
    return sup0 + svd.singularValues()(0);
}

double map_gap(const MapSpec& f, const MapSpec& g, double delta) {
    double gap = 0.0;
    double alpha = std::min(f.alpha(), g.alpha());
    for (std::size_t k = 0; k < f.branch_count(); ++k) {
        gap = std::max(gap, f.dimension() == 1
                                ? map_gap_1d(f.branches_1d()[k], g.branches_1d()[k], delta, alpha)
                                : map_gap_2d(f.branches_2d()[k], g.branches_2d()[k], delta));
    }
    return gap;
}

} // namespace

std::optional<double> perturbation_distance(const MapSpec& f, const MapSpec& g) {
    if (f.dimension() != g.dimension() || f.branch_count() != g.branch_count()) return std::nullopt;
    const double part = partition_gap(f, g);
    auto close = [&](double delta) { return part < delta && map_gap(f, g, delta) < delta; };
    double lo = 0.0, hi = 2.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (close(mid)) hi = mid;
        else lo = mid;
    }
    return hi < 1e-15 ? 0.0 : hi;
}

namespace {

bool is_full_branch_affine(const MapSpec& m) {
    if (m.dimension() != 1) return false;
    for (const auto& b : m.branches_1d()) {
        auto a = std::get_if<AffineFormula>(&b.formula());
        if (!a || a->slope <= 0) return false;
        if (std::fabs(a->slope * (b.domain().hi - b.domain().lo) - 1.0) > 1e-12) return false;
    }
    return true;
}

MapSpec rotated(const MapSpec& m, double dx, double dy) {
    nlohmann::json raw = m.to_json();
    for (auto& e : raw["branches"]) {
        if (m.dimension() == 1) {
            if (e["type"] == "affine") e["offset"] = e["offset"].get<double>() + dx;
            else e["c0"] = e["c0"].get<double>() + dx;
        } else {
            e["offset"][0] = e["offset"][0].get<double>() + dx;
            e["offset"][1] = e["offset"][1].get<double>() + dy;
        }
    }
    return MapSpec::from_json(raw);
}

} // namespace

MapSpec sample_perturbation(const MapSpec& base, double delta, std::mt19937_64& rng) {
    if (delta < 0) throw ConfigError("perturbation size must be nonnegative");
    if (delta == 0) return base;
    if (!base.is_expanding()) throw ConfigError("cannot sample expanding perturbations of a non-expanding map");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int attempt = 0; attempt < 32; ++attempt) {
        MapSpec candidate = base;
        if (is_full_branch_affine(base)) {
            const auto& br = base.branches_1d();
            std::vector<double> cuts{0.0};
            double shortest = 1.0;
            for (const auto& b : br) shortest = std::min(shortest, b.domain().hi - b.domain().lo);
            double amp = delta * shortest * shortest / 16.0;
            for (std::size_t k = 1; k < br.size(); ++k) cuts.push_back(br[k].domain().lo + amp * unit(rng));
            cuts.push_back(1.0);
            double shift = std::get<AffineFormula>(br.front().formula()).offset + delta / 8.0 * unit(rng);
            bool ok = true;
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
                if (!(cuts[k + 1] - cuts[k] < 1.0 && cuts[k + 1] > cuts[k])) ok = false;
            if (!ok) continue;
            candidate = MapSpec::full_branch_affine(cuts, shift);
        } else if (base.dimension() == 1) {
            candidate = rotated(base, delta / 8.0 * unit(rng), 0.0);
        } else {
            candidate = rotated(base, delta / 8.0 * unit(rng), delta / 8.0 * unit(rng));
        }
        if (!candidate.is_expanding()) continue;
        auto d = perturbation_distance(base, candidate);
        if (d && *d < delta) return candidate;
    }
    throw ConfigError("could not realize a perturbation within the requested distance");
}

} // namespace nsopen
