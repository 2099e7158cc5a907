#include "nsopen/phase.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "nsopen/errors.hpp"

namespace nsopen {

namespace {

constexpr double kCoordTol = 1e-12;

long mod_long(long v, long n) {
    long r = v % n;
    return r < 0 ? r + n : r;
}

long circ_int(long d, long n) {
    d = mod_long(d, n);
    return std::min(d, n - d);
}

// Largest circular distance from any value of `from` to the nearest-antipode value of `to`.
long max_circ_between(const std::vector<long>& from, const std::vector<long>& to, long n) {
    long best = 0;
    for (long y : from) {
        long target = mod_long(y + n / 2, n);
        auto it = std::lower_bound(to.begin(), to.end(), target);
        long cand[2] = {it == to.end() ? to.front() : *it, it == to.begin() ? to.back() : *(it - 1)};
        for (long c : cand) best = std::max(best, circ_int(y - c, n));
        if (best * 2 >= n) return best;
    }
    return best;
}

bool on_grid_line(double v, int n) {
    double s = v * n;
    return std::fabs(s - std::round(s)) < 1e-9;
}

} // namespace

double wrap_unit(double v) {
    double r = v - std::floor(v);
    return r >= 1.0 ? 0.0 : r;
}

double circle_distance(double a, double b) {
    double d = std::fabs(wrap_unit(a) - wrap_unit(b));
    return std::min(d, 1.0 - d);
}

double torus_distance(Point a, Point b, int dimension) {
    double dx = circle_distance(a.x, b.x);
    if (dimension == 1) return dx;
    double dy = circle_distance(a.y, b.y);
    return std::sqrt(dx * dx + dy * dy);
}

Grid::Grid(int dimension, int cells_per_side) : dimension_(dimension), n_(cells_per_side) {
    if (dimension != 1 && dimension != 2) throw InputError("grid dimension must be 1 or 2");
    if (cells_per_side <= 0) throw InputError("cells_per_side must be positive");
    total_ = dimension == 1 ? static_cast<std::size_t>(n_)
                            : static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
}

double Grid::cell_diameter() const {
    return dimension_ == 1 ? cell_width() : cell_width() * std::sqrt(2.0);
}

Point Grid::center(std::size_t cell) const {
    double h = cell_width();
    return {(ix(cell) + 0.5) * h, dimension_ == 1 ? 0.0 : (iy(cell) + 0.5) * h};
}

std::size_t Grid::index(long x, long y) const {
    long cx = mod_long(x, n_);
    if (dimension_ == 1) return static_cast<std::size_t>(cx);
    return static_cast<std::size_t>(mod_long(y, n_) * n_ + cx);
}

std::size_t Grid::locate(Point p) const {
    auto coord = [this](double v) {
        long k = static_cast<long>(std::floor(wrap_unit(v) * n_));
        return std::min<long>(k, n_ - 1);
    };
    return dimension_ == 1 ? index(coord(p.x)) : index(coord(p.x), coord(p.y));
}

nlohmann::json Grid::to_json() const {
    return {{"dimension", dimension_}, {"cells_per_side", n_}};
}

Grid Grid::from_json(const nlohmann::json& j) {
    return Grid(j.at("dimension").get<int>(), j.at("cells_per_side").get<int>());
}

// ---------------------------------------------------------------------------

namespace {

double piece_chart_norm(const BoundaryPiece& piece) {
    if (auto c = std::get_if<ChartPiece>(&piece)) return c->chart_norm;
    return 0.0;
}

// Maximal runs of marked edges on a cyclic line of n edges; returns (start, length) pairs.
std::vector<std::pair<long, long>> cyclic_runs(const std::vector<char>& marked) {
    long n = static_cast<long>(marked.size());
    std::vector<std::pair<long, long>> runs;
    long first_gap = -1;
    for (long i = 0; i < n; ++i) {
        if (!marked[i]) {
            first_gap = i;
            break;
        }
    }
    if (first_gap < 0) {
        runs.emplace_back(0, n);
        return runs;
    }
    long i = first_gap + 1;
    for (long step = 0; step < n;) {
        long k = mod_long(i, n);
        if (marked[k]) {
            long len = 0;
            while (step < n && marked[mod_long(i, n)]) {
                ++len;
                ++i;
                ++step;
            }
            runs.emplace_back(k, len);
        } else {
            ++i;
            ++step;
        }
    }
    return runs;
}

} // namespace

PartitionSpec::PartitionSpec(Grid grid, std::vector<CellSet> elements,
                             std::vector<std::vector<BoundaryPiece>> boundaries, double regularity_bound)
    : grid_(grid), elements_(std::move(elements)), boundaries_(std::move(boundaries)),
      regularity_bound_(regularity_bound) {
    if (elements_.empty()) throw InputError("partition has no elements");
    if (boundaries_.empty()) boundaries_.resize(elements_.size());
    if (boundaries_.size() != elements_.size())
        throw InputError("boundary descriptor list does not match element count");
    labels_.assign(grid_.total_cells(), -1);
    for (std::size_t k = 0; k < elements_.size(); ++k) {
        auto& el = elements_[k];
        if (el.empty()) throw InputError("partition element is empty");
        std::sort(el.begin(), el.end());
        for (std::size_t c : el) {
            if (c >= grid_.total_cells()) throw InputError("cell index out of range");
            if (labels_[c] != -1) throw InputError("partition elements overlap");
            labels_[c] = static_cast<int>(k);
        }
    }
    if (std::find(labels_.begin(), labels_.end(), -1) != labels_.end())
        throw InputError("partition does not cover the grid");
    for (const auto& list : boundaries_)
        for (const auto& piece : list)
            if (!(piece_chart_norm(piece) < regularity_bound_))
                throw InputError("boundary chart norm exceeds regularity bound");
}

PartitionSpec PartitionSpec::from_labels(const Grid& grid, const std::vector<int>& labels,
                                         double regularity_bound) {
    if (labels.size() != grid.total_cells()) throw InputError("label vector size mismatch");
    std::map<int, int> id_of;
    std::vector<int> ids(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
        auto [it, inserted] = id_of.emplace(labels[c], static_cast<int>(id_of.size()));
        ids[c] = it->second;
    }
    std::size_t count = id_of.size();
    std::vector<CellSet> elements(count);
    for (std::size_t c = 0; c < ids.size(); ++c) elements[ids[c]].push_back(c);

    std::vector<std::vector<BoundaryPiece>> bounds(count);
    const long n = grid.cells_per_side();
    const double h = grid.cell_width();
    if (count > 1) {
        if (grid.dimension() == 1) {
            for (long i = 0; i < n; ++i) {
                int left = ids[mod_long(i - 1, n)];
                int right = ids[i];
                if (left != right) {
                    PointPiece p{{i * h, 0.0}};
                    bounds[left].push_back(p);
                    bounds[right].push_back(p);
                }
            }
        } else {
            // Edge (line, position) marked per element, then merged into maximal runs.
            std::vector<std::map<long, std::vector<char>>> horiz(count), vert(count);
            auto mark = [n](std::map<long, std::vector<char>>& m, long line, long pos) {
                auto& row = m[line];
                if (row.empty()) row.assign(n, 0);
                row[pos] = 1;
            };
            for (long y = 0; y < n; ++y) {
                for (long x = 0; x < n; ++x) {
                    int self = ids[grid.index(x, y)];
                    int below = ids[grid.index(x, y - 1)];
                    int left = ids[grid.index(x - 1, y)];
                    if (self != below) {
                        mark(horiz[self], y, x);
                        mark(horiz[below], y, x);
                    }
                    if (self != left) {
                        mark(vert[self], x, y);
                        mark(vert[left], x, y);
                    }
                }
            }
            for (std::size_t e = 0; e < count; ++e) {
                for (const auto& [line, row] : horiz[e])
                    for (auto [start, len] : cyclic_runs(row))
                        bounds[e].push_back(SegmentPiece{{start * h, line * h}, 0, len * h});
                for (const auto& [line, row] : vert[e])
                    for (auto [start, len] : cyclic_runs(row))
                        bounds[e].push_back(SegmentPiece{{line * h, start * h}, 1, len * h});
            }
        }
    }
    return PartitionSpec(grid, std::move(elements), std::move(bounds), regularity_bound);
}

PartitionSpec PartitionSpec::uniform(const Grid& grid, int parts_per_side) {
    const int n = grid.cells_per_side();
    if (parts_per_side <= 0 || n % parts_per_side != 0)
        throw InputError("grid side must be divisible by the number of parts");
    const int w = n / parts_per_side;
    std::vector<int> labels(grid.total_cells());
    for (std::size_t c = 0; c < labels.size(); ++c) {
        int bx = grid.ix(c) / w;
        int by = grid.iy(c) / w;
        labels[c] = by * parts_per_side + bx;
    }
    return from_labels(grid, labels);
}

namespace {

nlohmann::json point_json(Point p) { return nlohmann::json::array({p.x, p.y}); }
Point point_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

} // namespace

nlohmann::json PartitionSpec::to_json() const {
    nlohmann::json bounds = nlohmann::json::array();
    for (const auto& list : boundaries_) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& piece : list) {
            std::visit(
                [&arr](const auto& p) {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, PointPiece>) {
                        arr.push_back({{"type", "point"}, {"at", point_json(p.at)}});
                    } else if constexpr (std::is_same_v<T, SegmentPiece>) {
                        arr.push_back({{"type", "segment"},
                                       {"start", point_json(p.start)},
                                       {"axis", p.axis},
                                       {"length", p.length}});
                    } else {
                        nlohmann::json poly = nlohmann::json::array();
                        for (auto v : p.polyline) poly.push_back(point_json(v));
                        arr.push_back({{"type", "chart"}, {"polyline", poly}, {"chart_norm", p.chart_norm}});
                    }
                },
                piece);
        }
        bounds.push_back(arr);
    }
    return {{"grid", grid_.to_json()},
            {"elements", elements_},
            {"boundaries", bounds},
            {"regularity_bound", regularity_bound_}};
}

PartitionSpec PartitionSpec::from_json(const nlohmann::json& j) {
    Grid grid = Grid::from_json(j.at("grid"));
    auto elements = j.at("elements").get<std::vector<CellSet>>();
    std::vector<std::vector<BoundaryPiece>> bounds;
    for (const auto& list : j.at("boundaries")) {
        std::vector<BoundaryPiece> pieces;
        for (const auto& piece : list) {
            auto type = piece.at("type").get<std::string>();
            if (type == "point") {
                pieces.push_back(PointPiece{point_from(piece.at("at"))});
            } else if (type == "segment") {
                pieces.push_back(SegmentPiece{point_from(piece.at("start")), piece.at("axis").get<int>(),
                                              piece.at("length").get<double>()});
            } else if (type == "chart") {
                ChartPiece c;
                for (const auto& v : piece.at("polyline")) c.polyline.push_back(point_from(v));
                c.chart_norm = piece.at("chart_norm").get<double>();
                pieces.push_back(c);
            } else {
                throw InputError("unknown boundary descriptor type: " + type);
            }
        }
        bounds.push_back(std::move(pieces));
    }
    return PartitionSpec(grid, std::move(elements), std::move(bounds), j.at("regularity_bound").get<double>());
}

// ---------------------------------------------------------------------------

double measure(const CellSet& cells, const Grid& grid) {
    for (std::size_t c : cells)
        if (c >= grid.total_cells()) throw InputError("cell index out of range");
    return static_cast<double>(cells.size()) * grid.cell_measure();
}

double diam_lambda(const PartitionSpec& p) {
    std::size_t largest = 0;
    for (const auto& el : p.elements()) largest = std::max(largest, el.size());
    return static_cast<double>(largest) * p.grid().cell_measure();
}

double metric_diam(const CellSet& cells, const Grid& grid) {
    if (cells.empty()) throw InputError("metric_diam of an empty set");
    const long n = grid.cells_per_side();
    const double h = grid.cell_width();
    if (grid.dimension() == 1) {
        std::vector<long> corners;
        corners.reserve(cells.size() * 2);
        for (std::size_t c : cells) {
            if (c >= grid.total_cells()) throw InputError("cell index out of range");
            corners.push_back(static_cast<long>(c));
            corners.push_back(mod_long(static_cast<long>(c) + 1, n));
        }
        std::sort(corners.begin(), corners.end());
        corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
        // The circle of length n in integer units; the antipode of k is k + n/2.
        long best = 0;
        for (long k : corners) {
            double target = k + n / 2.0;
            long t = mod_long(static_cast<long>(std::floor(target)), n);
            auto it = std::lower_bound(corners.begin(), corners.end(), t);
            long cand[2] = {it == corners.end() ? corners.front() : *it,
                            it == corners.begin() ? corners.back() : *(it - 1)};
            for (long c : cand) best = std::max(best, circ_int(k - c, n));
        }
        return static_cast<double>(best) * h;
    }

    std::map<long, std::vector<long>> columns;
    for (std::size_t c : cells) {
        if (c >= grid.total_cells()) throw InputError("cell index out of range");
        long x = grid.ix(c), y = grid.iy(c);
        for (long dx = 0; dx <= 1; ++dx)
            for (long dy = 0; dy <= 1; ++dy) columns[mod_long(x + dx, n)].push_back(mod_long(y + dy, n));
    }
    std::vector<std::pair<long, std::vector<long>>> cols;
    for (auto& [x, ys] : columns) {
        std::sort(ys.begin(), ys.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
        cols.emplace_back(x, std::move(ys));
    }
    const long half = n / 2;
    const long cap = 2 * half * half;
    long best = 0;
    for (std::size_t a = 0; a < cols.size(); ++a) {
        for (std::size_t b = a; b < cols.size(); ++b) {
            long dx = circ_int(cols[a].first - cols[b].first, n);
            if (dx * dx + half * half <= best) continue;
            long dy = max_circ_between(cols[a].second, cols[b].second, n);
            best = std::max(best, dx * dx + dy * dy);
            if (best >= cap) return std::sqrt(static_cast<double>(best)) * h;
        }
    }
    return std::sqrt(static_cast<double>(best)) * h;
}

double metric_diam(const PartitionSpec& p) {
    double best = 0.0;
    for (const auto& el : p.elements()) best = std::max(best, metric_diam(el, p.grid()));
    return best;
}

double hausdorff_distance(const Interval& a, const Interval& b) {
    if (a.lo > a.hi || b.lo > b.hi) throw InputError("empty interval");
    return std::max(std::fabs(a.lo - b.lo), std::fabs(a.hi - b.hi));
}

namespace {

double box_point_distance(const Box& b, double x, double y) {
    double dx = std::max({b.x0 - x, 0.0, x - b.x1});
    double dy = std::max({b.y0 - y, 0.0, y - b.y1});
    return std::hypot(dx, dy);
}

double directed_box(const Box& a, const Box& b) {
    double best = 0.0;
    for (double x : {a.x0, a.x1})
        for (double y : {a.y0, a.y1}) best = std::max(best, box_point_distance(b, x, y));
    return best;
}

} // namespace

double hausdorff_distance(const Box& a, const Box& b) {
    if (a.x0 > a.x1 || a.y0 > a.y1 || b.x0 > b.x1 || b.y0 > b.y1) throw InputError("empty box");
    return std::max(directed_box(a, b), directed_box(b, a));
}

namespace {

// Squared integer torus distance (in cell units) from cell `c` to the nearest occupied cell.
long nearest_sq(const Grid& grid, const std::vector<char>& occupied, std::size_t c) {
    const long n = grid.cells_per_side();
    const long x = grid.ix(c), y = grid.iy(c);
    long best = -1;
    for (long r = 0; r <= n / 2 + 1; ++r) {
        if (best >= 0 && r * r > best) break;
        for (long dx = -r; dx <= r; ++dx) {
            for (long dy = -r; dy <= r; ++dy) {
                if (std::max(std::labs(dx), std::labs(dy)) != r) continue;
                if (occupied[grid.index(x + dx, y + dy)]) {
                    long cx = circ_int(dx, n), cy = circ_int(dy, n);
                    long d = cx * cx + cy * cy;
                    if (best < 0 || d < best) best = d;
                }
            }
        }
    }
    return best;
}

double directed_cells(const CellSet& a, const CellSet& b, const Grid& grid) {
    const long n = grid.cells_per_side();
    if (grid.dimension() == 1) {
        std::vector<long> sorted(b.begin(), b.end());
        std::sort(sorted.begin(), sorted.end());
        long worst = 0;
        for (std::size_t c : a) {
            long k = static_cast<long>(c);
            auto it = std::lower_bound(sorted.begin(), sorted.end(), k);
            long cand[2] = {it == sorted.end() ? sorted.front() : *it,
                            it == sorted.begin() ? sorted.back() : *(it - 1)};
            long d = std::min(circ_int(k - cand[0], n), circ_int(k - cand[1], n));
            worst = std::max(worst, d);
        }
        return worst * grid.cell_width();
    }
    std::vector<char> occupied(grid.total_cells(), 0);
    for (std::size_t c : b) occupied[c] = 1;
    long worst = 0;
    for (std::size_t c : a) worst = std::max(worst, nearest_sq(grid, occupied, c));
    return std::sqrt(static_cast<double>(worst)) * grid.cell_width();
}

} // namespace

double hausdorff_distance(const CellSet& a, const CellSet& b, const Grid& grid) {
    if (a.empty() || b.empty()) throw InputError("Hausdorff distance of an empty set");
    for (const CellSet* s : {&a, &b})
        for (std::size_t c : *s)
            if (c >= grid.total_cells()) throw InputError("cell index out of range");
    return std::max(directed_cells(a, b, grid), directed_cells(b, a, grid));
}

// ---------------------------------------------------------------------------

namespace {

bool grid_aligned(const PartitionSpec& p) {
    const int n = p.grid().cells_per_side();
    for (const auto& list : p.boundaries()) {
        for (const auto& piece : list) {
            if (std::holds_alternative<ChartPiece>(piece)) return false;
            if (auto q = std::get_if<PointPiece>(&piece)) {
                if (!on_grid_line(q->at.x, n) || (p.grid().dimension() == 2 && !on_grid_line(q->at.y, n)))
                    return false;
            }
            if (auto s = std::get_if<SegmentPiece>(&piece)) {
                if (!on_grid_line(s->start.x, n) || !on_grid_line(s->start.y, n) || !on_grid_line(s->length, n))
                    return false;
            }
        }
    }
    return true;
}

int complexity_on_vertices(const PartitionSpec& p) {
    const Grid& grid = p.grid();
    const long n = grid.cells_per_side();
    std::vector<int> count(grid.total_cells(), 0);
    auto snap = [n](double v) { return mod_long(std::lround(v * n), n); };
    for (const auto& list : p.boundaries()) {
        for (const auto& piece : list) {
            if (auto q = std::get_if<PointPiece>(&piece)) {
                ++count[grid.index(snap(q->at.x), grid.dimension() == 2 ? snap(q->at.y) : 0)];
            } else if (auto s = std::get_if<SegmentPiece>(&piece)) {
                long x = snap(s->start.x), y = snap(s->start.y);
                long len = std::lround(s->length * n);
                long steps = len >= n ? n : len + 1;
                for (long k = 0; k < steps; ++k) {
                    if (s->axis == 0) ++count[grid.index(x + k, y)];
                    else ++count[grid.index(x, y + k)];
                }
            }
        }
    }
    return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
}

double segment_point_gap(const SegmentPiece& s, Point q) {
    // Distance on the torus between q and the segment (allowing wrap along the segment axis).
    double along0 = s.axis == 0 ? s.start.x : s.start.y;
    double across0 = s.axis == 0 ? s.start.y : s.start.x;
    double qa = s.axis == 0 ? q.x : q.y;
    double qc = s.axis == 0 ? q.y : q.x;
    double across = circle_distance(qc, across0);
    double rel = wrap_unit(qa - along0);
    double along = 0.0;
    if (s.length < 1.0 && rel > s.length) along = std::min(rel - s.length, 1.0 - rel);
    return std::hypot(along, across);
}

double chart_point_gap(const ChartPiece& c, Point q) {
    double best = 1e300;
    for (std::size_t k = 0; k + 1 < c.polyline.size(); ++k) {
        Point a = c.polyline[k], b = c.polyline[k + 1];
        double vx = b.x - a.x, vy = b.y - a.y;
        double wx = q.x - a.x, wy = q.y - a.y;
        double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, torus_distance(q, {a.x + t * vx, a.y + t * vy}, 2));
    }
    if (c.polyline.size() == 1) best = torus_distance(q, c.polyline[0], 2);
    return best;
}

bool piece_contains(const BoundaryPiece& piece, Point q, int dimension) {
    if (auto p = std::get_if<PointPiece>(&piece)) return torus_distance(p->at, q, dimension) < kCoordTol * 1e3;
    if (auto s = std::get_if<SegmentPiece>(&piece)) return segment_point_gap(*s, q) < kCoordTol * 1e3;
    return chart_point_gap(std::get<ChartPiece>(piece), q) < kCoordTol * 1e3;
}

} // namespace

int boundary_complexity(const std::vector<std::vector<BoundaryPiece>>& pieces, int dim) {
    std::vector<Point> candidates;
    std::vector<const SegmentPiece*> horizontal, vertical;
    for (const auto& list : pieces) {
        for (const auto& piece : list) {
            if (auto q = std::get_if<PointPiece>(&piece)) candidates.push_back(q->at);
            if (auto s = std::get_if<SegmentPiece>(&piece)) {
                candidates.push_back(s->start);
                Point end = s->start;
                (s->axis == 0 ? end.x : end.y) += s->length;
                candidates.push_back(end);
                (s->axis == 0 ? horizontal : vertical).push_back(s);
            }
            if (auto c = std::get_if<ChartPiece>(&piece))
                candidates.insert(candidates.end(), c->polyline.begin(), c->polyline.end());
        }
    }
    for (const auto* hs : horizontal) {
        for (const auto* vs : vertical) {
            Point q{vs->start.x, hs->start.y};
            if (segment_point_gap(*hs, q) < 1e-9 && segment_point_gap(*vs, q) < 1e-9) candidates.push_back(q);
        }
    }
    int best = 0;
    for (Point q : candidates) {
        int count = 0;
        for (const auto& list : pieces)
            for (const auto& piece : list) count += piece_contains(piece, q, dim) ? 1 : 0;
        best = std::max(best, count);
    }
    return best;
}

int partition_complexity(const PartitionSpec& p) {
    if (p.size() >= 2) {
        for (const auto& list : p.boundaries())
            if (list.empty()) throw InputError("partition element is missing boundary descriptors");
    }
    return grid_aligned(p) ? complexity_on_vertices(p) : boundary_complexity(p.boundaries(), p.grid().dimension());
}

} // namespace nsopen
