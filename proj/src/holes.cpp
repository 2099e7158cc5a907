#include "nsopen/holes.hpp"

#include <algorithm>
#include <cmath>

#include "nsopen/errors.hpp"

namespace nsopen {

namespace {

constexpr double kOverlapTol = 1e-15;

// Length of [a, b) intersected with the circular arc [s, s + len).
double arc_overlap(double a, double b, double s, double len) {
    if (len >= 1.0) return b - a;
    s = wrap_unit(s);
    double total = 0.0;
    for (int z = -1; z <= 1; ++z) total += std::max(0.0, std::min(b, s + len + z) - std::max(a, s + z));
    return total;
}

double arc_arc_overlap(double s1, double l1, double s2, double l2) {
    s1 = wrap_unit(s1);
    if (l1 >= 1.0) return std::min(1.0, l2);
    double end = s1 + l1;
    if (end <= 1.0) return arc_overlap(s1, end, s2, l2);
    return arc_overlap(s1, 1.0, s2, l2) + arc_overlap(0.0, end - 1.0, s2, l2);
}

bool in_arc(double x, double s, double len) {
    if (len >= 1.0) return true;
    return wrap_unit(x - s) < len;
}

double disk_chart_norm(const HoleDisk& d) { return 1.0 / d.r; }

double rect_point_gap(const HoleRect& r, Point p) {
    auto axis_gap = [](double v, double s, double w) {
        if (w >= 1.0 || in_arc(v, s, w)) return 0.0;
        return std::min(circle_distance(v, s), circle_distance(v, s + w));
    };
    return std::hypot(axis_gap(p.x, r.x0, r.wx), axis_gap(p.y, r.y0, r.wy));
}

void validate_component(const HoleComponent& c, int dimension) {
    if (auto a = std::get_if<HoleArc>(&c)) {
        if (dimension != 1) throw InputError("arc holes are one-dimensional");
        if (!(a->length > 0.0 && a->length <= 1.0)) throw InputError("arc length must lie in (0,1]");
    } else if (auto r = std::get_if<HoleRect>(&c)) {
        if (dimension != 2) throw InputError("rectangle holes are two-dimensional");
        if (!(r->wx > 0.0 && r->wx <= 1.0 && r->wy > 0.0 && r->wy <= 1.0))
            throw InputError("rectangle sides must lie in (0,1]");
    } else {
        const auto& d = std::get<HoleDisk>(c);
        if (dimension != 2) throw InputError("disk holes are two-dimensional");
        if (!(d.r > 0.0 && d.r < 0.5)) throw InputError("disk radius must lie in (0,1/2)");
    }
}

bool components_overlap(const HoleComponent& a, const HoleComponent& b) {
    if (auto x = std::get_if<HoleArc>(&a)) {
        const auto& y = std::get<HoleArc>(b);
        return arc_arc_overlap(x->start, x->length, y.start, y.length) > kOverlapTol;
    }
    auto as_rect = std::get_if<HoleRect>(&a);
    auto bs_rect = std::get_if<HoleRect>(&b);
    if (as_rect && bs_rect) {
        return arc_arc_overlap(as_rect->x0, as_rect->wx, bs_rect->x0, bs_rect->wx) > kOverlapTol &&
               arc_arc_overlap(as_rect->y0, as_rect->wy, bs_rect->y0, bs_rect->wy) > kOverlapTol;
    }
    auto ad = std::get_if<HoleDisk>(&a);
    auto bd = std::get_if<HoleDisk>(&b);
    if (ad && bd) return torus_distance({ad->cx, ad->cy}, {bd->cx, bd->cy}, 2) < ad->r + bd->r;
    const HoleDisk& d = ad ? *ad : *bd;
    const HoleRect& r = ad ? *bs_rect : *as_rect;
    return rect_point_gap(r, {d.cx, d.cy}) < d.r;
}

} // namespace

HoleSpec::HoleSpec(int dimension, std::vector<HoleComponent> components, double regularity_bound)
    : dimension_(dimension), components_(std::move(components)), regularity_(regularity_bound) {
    if (dimension != 1 && dimension != 2) throw InputError("hole dimension must be 1 or 2");
    for (const auto& c : components_) validate_component(c, dimension_);
    for (std::size_t i = 0; i < components_.size(); ++i)
        for (std::size_t j = i + 1; j < components_.size(); ++j)
            if (components_overlap(components_[i], components_[j]))
                throw InputError("hole components must be disjoint");
    for (const auto& c : components_)
        if (auto d = std::get_if<HoleDisk>(&c))
            if (!(disk_chart_norm(*d) < regularity_)) regularity_ = disk_chart_norm(*d) + 1.0;
}

HoleSpec HoleSpec::empty(int dimension) { return HoleSpec(dimension, {}); }

HoleSpec HoleSpec::whole(int dimension) {
    if (dimension == 1) return HoleSpec(1, {HoleArc{0.0, 1.0}});
    return HoleSpec(2, {HoleRect{0.0, 0.0, 1.0, 1.0}});
}

double HoleSpec::measure() const {
    double total = 0.0;
    for (const auto& c : components_) {
        if (auto a = std::get_if<HoleArc>(&c)) total += a->length;
        else if (auto r = std::get_if<HoleRect>(&c)) total += r->wx * r->wy;
        else total += M_PI * std::get<HoleDisk>(c).r * std::get<HoleDisk>(c).r;
    }
    return total;
}

bool HoleSpec::contains(Point p) const {
    for (const auto& c : components_) {
        if (auto a = std::get_if<HoleArc>(&c)) {
            if (in_arc(p.x, a->start, a->length)) return true;
        } else if (auto r = std::get_if<HoleRect>(&c)) {
            if (in_arc(p.x, r->x0, r->wx) && in_arc(p.y, r->y0, r->wy)) return true;
        } else {
            const auto& d = std::get<HoleDisk>(c);
            if (torus_distance(p, {d.cx, d.cy}, 2) < d.r) return true;
        }
    }
    return false;
}

double HoleSpec::cell_coverage(std::size_t cell, const Grid& grid) const {
    if (components_.empty()) return 0.0;
    const double h = grid.cell_width();
    const double x0 = grid.ix(cell) * h, x1 = (grid.ix(cell) + 1) * h;
    const double y0 = grid.iy(cell) * h, y1 = (grid.iy(cell) + 1) * h;
    double covered = 0.0;
    for (const auto& c : components_) {
        if (auto a = std::get_if<HoleArc>(&c)) {
            covered += arc_overlap(x0, x1, a->start, a->length) / h;
        } else if (auto r = std::get_if<HoleRect>(&c)) {
            covered += arc_overlap(x0, x1, r->x0, r->wx) * arc_overlap(y0, y1, r->y0, r->wy) / (h * h);
        } else {
            const auto& d = std::get<HoleDisk>(c);
            if (torus_distance(grid.center(cell), {d.cx, d.cy}, 2) < d.r) covered += 1.0;
        }
    }
    return std::min(1.0, covered);
}

double HoleSpec::grid_measure(const Grid& grid) const {
    double total = 0.0;
    for (std::size_t c = 0; c < grid.total_cells(); ++c) total += cell_coverage(c, grid);
    return total * grid.cell_measure();
}

std::vector<BoundaryPiece> HoleSpec::boundary_pieces() const {
    std::vector<BoundaryPiece> out;
    for (const auto& c : components_) {
        if (auto a = std::get_if<HoleArc>(&c)) {
            if (a->length >= 1.0) continue;
            out.push_back(PointPiece{{wrap_unit(a->start), 0.0}});
            out.push_back(PointPiece{{wrap_unit(a->start + a->length), 0.0}});
        } else if (auto r = std::get_if<HoleRect>(&c)) {
            Point o{wrap_unit(r->x0), wrap_unit(r->y0)};
            if (r->wy < 1.0) {
                out.push_back(SegmentPiece{o, 0, r->wx});
                out.push_back(SegmentPiece{{o.x, wrap_unit(r->y0 + r->wy)}, 0, r->wx});
            }
            if (r->wx < 1.0) {
                out.push_back(SegmentPiece{o, 1, r->wy});
                out.push_back(SegmentPiece{{wrap_unit(r->x0 + r->wx), o.y}, 1, r->wy});
            }
        } else {
            const auto& d = std::get<HoleDisk>(c);
            ChartPiece chart;
            chart.chart_norm = disk_chart_norm(d);
            constexpr int kVertices = 32;
            for (int k = 0; k <= kVertices; ++k) {
                double t = 2.0 * M_PI * k / kVertices;
                chart.polyline.push_back({d.cx + d.r * std::cos(t), d.cy + d.r * std::sin(t)});
            }
            out.push_back(chart);
        }
    }
    return out;
}

std::vector<double> HoleSpec::arc_endpoints() const {
    std::vector<double> out;
    for (const auto& c : components_)
        if (auto a = std::get_if<HoleArc>(&c))
            if (a->length < 1.0) {
                out.push_back(wrap_unit(a->start));
                out.push_back(wrap_unit(a->start + a->length));
            }
    return out;
}

HoleSpec HoleSpec::shifted(double dx, double dy) const {
    std::vector<HoleComponent> moved;
    for (const auto& c : components_) {
        if (auto a = std::get_if<HoleArc>(&c)) moved.push_back(HoleArc{wrap_unit(a->start + dx), a->length});
        else if (auto r = std::get_if<HoleRect>(&c))
            moved.push_back(HoleRect{wrap_unit(r->x0 + dx), wrap_unit(r->y0 + dy), r->wx, r->wy});
        else {
            const auto& d = std::get<HoleDisk>(c);
            moved.push_back(HoleDisk{wrap_unit(d.cx + dx), wrap_unit(d.cy + dy), d.r});
        }
    }
    return HoleSpec(dimension_, std::move(moved), regularity_);
}

nlohmann::json HoleSpec::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : components_) {
        if (auto a = std::get_if<HoleArc>(&c)) list.push_back({{"type", "arc"}, {"start", a->start}, {"length", a->length}});
        else if (auto r = std::get_if<HoleRect>(&c))
            list.push_back({{"type", "rect"}, {"x0", r->x0}, {"y0", r->y0}, {"wx", r->wx}, {"wy", r->wy}});
        else {
            const auto& d = std::get<HoleDisk>(c);
            list.push_back({{"type", "disk"}, {"cx", d.cx}, {"cy", d.cy}, {"r", d.r}});
        }
    }
    return {{"dimension", dimension_}, {"components", list}, {"K", regularity_}};
}

HoleSpec HoleSpec::from_json(const nlohmann::json& j, int dimension) {
    std::vector<HoleComponent> list;
    const auto& comps = j.is_array() ? j : j.at("components");
    for (const auto& c : comps) {
        std::string type = c.at("type").get<std::string>();
        if (type == "arc") list.push_back(HoleArc{c.at("start").get<double>(), c.at("length").get<double>()});
        else if (type == "rect")
            list.push_back(HoleRect{c.at("x0").get<double>(), c.at("y0").get<double>(), c.at("wx").get<double>(),
                                    c.at("wy").get<double>()});
        else if (type == "disk")
            list.push_back(HoleDisk{c.at("cx").get<double>(), c.at("cy").get<double>(), c.at("r").get<double>()});
        else throw ConfigError("unknown hole component type: " + type);
    }
    double K = (!j.is_array() && j.contains("K")) ? j.at("K").get<double>() : 2.0;
    return HoleSpec(dimension, std::move(list), K);
}

std::string HoleSpec::fingerprint() const { return to_json().dump(); }

// ---------------------------------------------------------------------------

HoleSequence::HoleSequence(int dimension, std::vector<HoleSpec> holes)
    : dimension_(dimension), holes_(std::move(holes)) {
    for (const auto& h : holes_)
        if (h.dimension() != dimension_) throw InputError("hole sequence mixes dimensions");
}

HoleSequence HoleSequence::none(int dimension, std::size_t length) {
    return HoleSequence(dimension, std::vector<HoleSpec>(length, HoleSpec::empty(dimension)));
}

HoleSequence HoleSequence::constant(const HoleSpec& hole, std::size_t length) {
    return HoleSequence(hole.dimension(), std::vector<HoleSpec>(length, hole));
}

HoleSequence HoleSequence::drifting(const HoleSpec& base, double vx, double vy, std::size_t length) {
    std::vector<HoleSpec> list;
    list.reserve(length);
    for (std::size_t k = 0; k < length; ++k) list.push_back(base.shifted(vx * k, vy * k));
    return HoleSequence(base.dimension(), std::move(list));
}

double HoleSequence::max_measure() const {
    double best = 0.0;
    for (const auto& h : holes_) best = std::max(best, h.measure());
    return best;
}

HoleSequence HoleSequence::slice(std::size_t start, std::size_t count) const {
    if (start + count > holes_.size()) throw InputError("hole sequence slice out of range");
    return HoleSequence(dimension_, std::vector<HoleSpec>(holes_.begin() + start, holes_.begin() + start + count));
}

HoleSequence holes_from_config(const nlohmann::json& j, int dimension, std::size_t length) {
    std::string kind = j.value("kind", std::string("none"));
    if (kind == "none") return HoleSequence::none(dimension, length);
    if (kind == "static") return HoleSequence::constant(HoleSpec::from_json(j.at("components"), dimension), length);
    if (kind == "drifting") {
        HoleSpec base = HoleSpec::from_json(j.at("components"), dimension);
        double vx = 0.0, vy = 0.0;
        const auto& v = j.at("velocity");
        if (v.is_array()) {
            vx = v.at(0).get<double>();
            if (v.size() > 1) vy = v.at(1).get<double>();
        } else {
            vx = v.get<double>();
        }
        return HoleSequence::drifting(base, vx, vy, length);
    }
    if (kind == "explicit") {
        const auto& steps = j.at("steps");
        if (steps.size() < length) throw ConfigError("explicit hole schedule shorter than the horizon");
        std::vector<HoleSpec> list;
        for (std::size_t k = 0; k < length; ++k) list.push_back(HoleSpec::from_json(steps.at(k), dimension));
        return HoleSequence(dimension, std::move(list));
    }
    throw ConfigError("unknown hole schedule: " + kind);
}

// ---------------------------------------------------------------------------

namespace {

struct Piece {
    double lo, hi;
};

constexpr std::size_t kMaxPieces = 64;

// Does a hole endpoint lie strictly inside the lifted interval?
bool crosses(const std::vector<double>& endpoints, double lo, double hi) {
    double tol = 1e-12 * std::max(1.0, std::fabs(hi));
    for (double p : endpoints) {
        double z = std::ceil(lo - p);
        for (double q = p + z; q < hi; q += 1.0)
            if (q > lo + tol && q < hi - tol) return true;
    }
    return false;
}

void check_inputs(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid) {
    if (m < 1) throw InputError("m must be at least 1");
    if (seq.size() < static_cast<std::size_t>(m) || holes.size() < static_cast<std::size_t>(m))
        throw InputError("m exceeds the available sequence");
    if (holes.dimension() != grid.dimension()) throw InputError("hole and grid dimensions differ");
    for (const auto& f : seq)
        if (f.dimension() != grid.dimension()) throw InputError("map and grid dimensions differ");
}

// Exact per-cell interval tracking in 1D.
void survivors_1d(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid, SurvivorSet& out) {
    const double h = grid.cell_width();
    for (std::size_t c = 0; c < grid.total_cells(); ++c) {
        Point x = grid.center(c);
        bool alive = true;
        bool straddle = false;
        bool tracking = true;
        std::vector<Piece> pieces{{grid.ix(c) * h, (grid.ix(c) + 1) * h}};
        for (int k = 0; k < m && (alive || tracking); ++k) {
            const MapSpec& f = seq[k];
            const HoleSpec& H = holes[k];
            if (alive) {
                x = f.evaluate_half_open(x);
                if (H.contains(x)) alive = false;
            }
            if (!tracking) continue;
            std::vector<Piece> next;
            std::vector<double> ends = H.arc_endpoints();
            bool any_in = false, any_out = false;
            for (const Piece& p : pieces) {
                double shift = std::floor(p.lo);
                double a = p.lo - shift, b = p.hi - shift;
                for (std::size_t bi = 0; bi < f.branch_count(); ++bi) {
                    const Branch1D& br = f.branches_1d()[bi];
                    for (double z : {0.0, 1.0}) {
                        double lo = std::max(a, br.domain().lo + z);
                        double hi = std::min(b, br.domain().hi + z);
                        if (hi - lo <= 1e-15) continue;
                        double ya = br.value(lo - z), yb = br.value(hi - z);
                        Piece img{std::min(ya, yb), std::max(ya, yb)};
                        if (!H.is_empty() && (crosses(ends, img.lo, img.hi) || img.hi - img.lo >= 1.0) &&
                            H.measure() < 1.0) {
                            straddle = true;
                        }
                        double mid = 0.5 * (img.lo + img.hi);
                        if (H.contains({mid, 0.0})) any_in = true;
                        else {
                            any_out = true;
                            next.push_back(img);
                        }
                    }
                }
            }
            if (any_in && any_out) straddle = true;
            if (straddle || next.empty() || next.size() > kMaxPieces) {
                tracking = false;
                if (next.size() > kMaxPieces && !H.is_empty()) straddle = true;
            }
            pieces = std::move(next);
        }
        out.alive[c] = alive;
        out.straddling[c] = straddle;
    }
}

double matrix_norm(const MapSpec& f) {
    double best = 0.0;
    for (const auto& b : f.branches_2d()) {
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(b.matrix());
        best = std::max(best, svd.singularValues()(0));
    }
    return best;
}

void survivors_2d(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid, SurvivorSet& out) {
    const double h = grid.cell_width();
    const double inset = 1e-9 * h;
    for (std::size_t c = 0; c < grid.total_cells(); ++c) {
        double x0 = grid.ix(c) * h, y0 = grid.iy(c) * h;
        std::vector<Point> pts{grid.center(c),
                               {x0 + inset, y0 + inset},
                               {x0 + h - inset, y0 + inset},
                               {x0 + inset, y0 + h - inset},
                               {x0 + h - inset, y0 + h - inset}};
        std::vector<char> alive(pts.size(), 1);
        double size = grid.cell_diameter();
        bool straddle = false;
        for (int k = 0; k < m; ++k) {
            size *= matrix_norm(seq[k]);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (!alive[i]) continue;
                pts[i] = seq[k].evaluate_half_open(pts[i]);
                if (holes[k].contains(pts[i])) alive[i] = 0;
            }
            if (alive[0] && !holes[k].is_empty() && size >= 0.5) straddle = true;
        }
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (alive[i] != alive[0]) straddle = true;
        out.alive[c] = alive[0];
        out.straddling[c] = straddle;
    }
}

} // namespace

SurvivorSet survivor_indicator(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid) {
    check_inputs(seq, holes, m, grid);
    SurvivorSet out;
    out.alive.assign(grid.total_cells(), 0);
    out.straddling.assign(grid.total_cells(), 0);
    if (grid.dimension() == 1) survivors_1d(seq, holes, m, grid, out);
    else survivors_2d(seq, holes, m, grid, out);
    std::size_t alive = 0, straddle = 0;
    for (std::size_t c = 0; c < grid.total_cells(); ++c) {
        alive += out.alive[c] ? 1 : 0;
        straddle += out.straddling[c] ? 1 : 0;
    }
    out.measure = alive * grid.cell_measure();
    out.straddling_measure = straddle * grid.cell_measure();
    return out;
}

double survivor_measure(const MapSequence& seq, const HoleSequence& holes, int m, const Grid& grid) {
    return survivor_indicator(seq, holes, m, grid).measure;
}

} // namespace nsopen
