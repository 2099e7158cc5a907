#include "nsopen/transfer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "nsopen/errors.hpp"

namespace nsopen {

GridDensity::GridDensity(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.total_cells()) throw InputError("density size does not match the grid");
    for (double v : values_)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("density values must be finite and nonnegative");
}

GridDensity GridDensity::uniform(const Grid& grid) { return {grid, std::vector<double>(grid.total_cells(), 1.0)}; }

GridDensity GridDensity::zero(const Grid& grid) { return {grid, std::vector<double>(grid.total_cells(), 0.0)}; }

GridDensity GridDensity::indicator(const Grid& grid, const CellSet& cells) {
    std::vector<double> v(grid.total_cells(), 0.0);
    for (std::size_t c : cells) v.at(c) = 1.0;
    return {grid, std::move(v)};
}

GridDensity GridDensity::from_function(const Grid& grid, const std::function<double(Point)>& f) {
    static const std::array<double, 4> nodes = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                                0.8611363115940526};
    static const std::array<double, 4> weights = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                                  0.3478548451374538};
    const double h = grid.cell_width();
    std::vector<double> v(grid.total_cells());
    for (std::size_t c = 0; c < v.size(); ++c) {
        Point ctr = grid.center(c);
        double acc = 0.0;
        if (grid.dimension() == 1) {
            for (int a = 0; a < 4; ++a) acc += weights[a] * f({ctr.x + 0.5 * h * nodes[a], 0.0});
            acc *= 0.5;
        } else {
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    acc += weights[a] * weights[b] * f({ctr.x + 0.5 * h * nodes[a], ctr.y + 0.5 * h * nodes[b]});
            acc *= 0.25;
        }
        v[c] = std::max(0.0, acc);
    }
    return {grid, std::move(v)};
}

double GridDensity::mass() const {
    double total = 0.0;
    for (double v : values_) total += v;
    return total * grid_.cell_measure();
}

double GridDensity::mass_on(const CellSet& cells) const {
    double total = 0.0;
    for (std::size_t c : cells) total += values_.at(c);
    return total * grid_.cell_measure();
}

GridDensity GridDensity::scaled(double c) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= c;
    return {grid_, std::move(v)};
}

// ---------------------------------------------------------------------------

UlamOperator::UlamOperator(Grid grid, Matrix matrix, bool open)
    : grid_(grid), matrix_(std::move(matrix)), open_(open) {
    if (matrix_.rows() != static_cast<Eigen::Index>(grid_.total_cells()) || matrix_.cols() != matrix_.rows())
        throw InputError("operator shape does not match the grid");
}

GridDensity UlamOperator::apply(const GridDensity& phi) const {
    if (phi.grid() != grid_) throw InputError("density and operator grids differ");
    Eigen::Map<const Eigen::VectorXd> x(phi.values().data(), static_cast<Eigen::Index>(phi.size()));
    Eigen::VectorXd y = matrix_ * x;
    return {grid_, std::vector<double>(y.data(), y.data() + y.size())};
}

std::vector<double> UlamOperator::column_sums() const {
    std::vector<double> sums(static_cast<std::size_t>(matrix_.cols()), 0.0);
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k)
        for (Matrix::InnerIterator it(matrix_, k); it; ++it) sums[static_cast<std::size_t>(it.col())] += it.value();
    return sums;
}

void UlamOperator::export_coo(std::ostream& os) const {
    os << matrix_.rows() << ' ' << matrix_.cols() << ' ' << matrix_.nonZeros() << '\n';
    char buf[64];
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k) {
        for (Matrix::InnerIterator it(matrix_, k); it; ++it) {
            std::snprintf(buf, sizeof buf, "%.17g", it.value());
            os << it.row() << ' ' << it.col() << ' ' << buf << '\n';
        }
    }
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

long mod_long(long v, long n) {
    long r = v % n;
    return r < 0 ? r + n : r;
}

void check_resolution(const MapSpec& map, const Grid& grid) {
    if (map.dimension() != grid.dimension()) throw InputError("map and grid dimensions differ");
    const double n = grid.cells_per_side();
    auto has_center = [n](double lo, double hi) {
        double first = std::ceil(lo * n - 0.5);
        return (first + 0.5) / n < hi;
    };
    if (map.dimension() == 1) {
        for (const auto& b : map.branches_1d())
            if (!has_center(b.domain().lo, b.domain().hi))
                throw ResolutionError("a branch domain contains no grid cell");
    } else {
        for (const auto& b : map.branches_2d())
            if (!has_center(b.domain().x0, b.domain().x1) || !has_center(b.domain().y0, b.domain().y1))
                throw ResolutionError("a branch domain contains no grid cell");
    }
}

void closed_1d(const MapSpec& map, const Grid& grid, Triplets& out) {
    const long n = grid.cells_per_side();
    const double nd = static_cast<double>(n);
    for (const auto& br : map.branches_1d()) {
        const double u = br.domain().lo, v = br.domain().hi;
        const bool up = br.increasing();
        long i0 = static_cast<long>(std::floor(u * nd));
        long i1 = std::min(n - 1, static_cast<long>(std::ceil(v * nd)) - 1);
        for (long i = i0; i <= i1; ++i) {
            double a = std::max(u, i / nd), c = std::min(v, (i + 1) / nd);
            if (c <= a) continue;
            // Share of cell i inside the branch, in cell units so that split cells add up to 1.
            const double share = std::min(v * nd, i + 1.0) - std::max(u * nd, static_cast<double>(i));
            double ya = br.value(a), yc = br.value(c);
            double lo = std::min(ya, yc), hi = std::max(ya, yc);
            // Position of an image point within [a, c], as a fraction; the ends are pinned so weights telescope to 1.
            auto frac = [&](double y) {
                if (y <= lo) return up ? 0.0 : 1.0;
                if (y >= hi) return up ? 1.0 : 0.0;
                return std::clamp((br.inverse(y) - a) / (c - a), 0.0, 1.0);
            };
            long k = static_cast<long>(std::floor(lo * nd));
            double prev = frac(lo);
            for (; k / nd < hi; ++k) {
                double y1 = std::min(hi, (k + 1) / nd);
                if (y1 <= std::max(lo, k / nd)) continue;
                double next = frac(y1);
                double w = std::fabs(next - prev);
                prev = next;
                if (w > 0.0) out.emplace_back(static_cast<int>(mod_long(k, n)), static_cast<int>(i), w * share);
            }
        }
    }
}

using Poly = std::vector<Eigen::Vector2d>;

Poly clip(const Poly& in, int axis, double bound, bool keep_above) {
    Poly out;
    if (in.empty()) return out;
    auto inside = [&](const Eigen::Vector2d& p) { return keep_above ? p[axis] >= bound : p[axis] <= bound; };
    for (std::size_t k = 0; k < in.size(); ++k) {
        const Eigen::Vector2d& cur = in[k];
        const Eigen::Vector2d& prev = in[(k + in.size() - 1) % in.size()];
        bool ci = inside(cur), pi = inside(prev);
        if (ci != pi) {
            double t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
            Eigen::Vector2d q = prev + t * (cur - prev);
            q[axis] = bound;
            out.push_back(q);
        }
        if (ci) out.push_back(cur);
    }
    return out;
}

double area(const Poly& p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const auto& a = p[k];
        const auto& b = p[(k + 1) % p.size()];
        acc += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * std::fabs(acc);
}

void closed_2d(const MapSpec& map, const Grid& grid, Triplets& out) {
    const long n = grid.cells_per_side();
    const double nd = static_cast<double>(n);
    for (const auto& br : map.branches_2d()) {
        const Box& d = br.domain();
        const Eigen::Matrix2d& A = br.matrix();
        const Eigen::Vector2d b = br.offset() * nd;
        const double det = std::fabs(A.determinant());
        long x0 = static_cast<long>(std::floor(d.x0 * nd)), x1 = std::min(n - 1, static_cast<long>(std::ceil(d.x1 * nd)) - 1);
        long y0 = static_cast<long>(std::floor(d.y0 * nd)), y1 = std::min(n - 1, static_cast<long>(std::ceil(d.y1 * nd)) - 1);
        for (long iy = y0; iy <= y1; ++iy) {
            for (long ix = x0; ix <= x1; ++ix) {
                // Work in grid units: cell (ix, iy) is [ix, ix+1] x [iy, iy+1].
                double ax = std::max(d.x0 * nd, static_cast<double>(ix)), bx = std::min(d.x1 * nd, ix + 1.0);
                double ay = std::max(d.y0 * nd, static_cast<double>(iy)), by = std::min(d.y1 * nd, iy + 1.0);
                if (bx <= ax || by <= ay) continue;
                Poly image;
                for (auto [px, py] : {std::pair{ax, ay}, std::pair{bx, ay}, std::pair{bx, by}, std::pair{ax, by}})
                    image.push_back(A * Eigen::Vector2d(px, py) + b);
                double mnx = image[0].x(), mxx = mnx, mny = image[0].y(), mxy = mny;
                for (const auto& p : image) {
                    mnx = std::min(mnx, p.x());
                    mxx = std::max(mxx, p.x());
                    mny = std::min(mny, p.y());
                    mxy = std::max(mxy, p.y());
                }
                const int col = static_cast<int>(grid.index(ix, iy));
                for (long ky = static_cast<long>(std::floor(mny)); ky < mxy; ++ky) {
                    for (long kx = static_cast<long>(std::floor(mnx)); kx < mxx; ++kx) {
                        Poly local = image;
                        for (auto& p : local) p -= Eigen::Vector2d(static_cast<double>(kx), static_cast<double>(ky));
                        local = clip(local, 0, 0.0, true);
                        local = clip(local, 0, 1.0, false);
                        local = clip(local, 1, 0.0, true);
                        local = clip(local, 1, 1.0, false);
                        if (local.size() < 3) continue;
                        double a = area(local) / det;
                        if (a > 0.0) out.emplace_back(static_cast<int>(grid.index(kx, ky)), col, a);
                    }
                }
            }
        }
    }
}

UlamOperator::Matrix assemble(const Grid& grid, const Triplets& t) {
    const auto size = static_cast<Eigen::Index>(grid.total_cells());
    UlamOperator::Matrix m(size, size);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

} // namespace

UlamOperator build_closed(const MapSpec& map, const Grid& grid) {
    check_resolution(map, grid);
    Triplets t;
    if (map.dimension() == 1) closed_1d(map, grid, t);
    else closed_2d(map, grid, t);
    return {grid, assemble(grid, t), false};
}

UlamOperator build_open(const MapSpec& map, const HoleSpec& hole, const Grid& grid) {
    if (hole.dimension() != grid.dimension()) throw InputError("hole and grid dimensions differ");
    UlamOperator closed = build_closed(map, grid);
    if (hole.is_empty()) return {grid, closed.matrix(), true};
    std::vector<double> keep(grid.total_cells());
    for (std::size_t c = 0; c < keep.size(); ++c) keep[c] = 1.0 - hole.cell_coverage(c, grid);
    UlamOperator::Matrix m = closed.matrix();
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (UlamOperator::Matrix::InnerIterator it(m, k); it; ++it)
            it.valueRef() *= keep[static_cast<std::size_t>(it.row())];
    m.prune(0.0);
    m.makeCompressed();
    return {grid, std::move(m), true};
}

std::shared_ptr<const UlamOperator> OperatorCache::get(const MapSpec& map, const HoleSpec& hole, const Grid& grid) {
    std::string key = map.fingerprint() + '|' + hole.fingerprint() + '|' + grid.to_json().dump();
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    auto op = std::make_shared<const UlamOperator>(build_open(map, hole, grid));
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.emplace(key, op).first->second;
}

std::size_t OperatorCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

std::vector<GridDensity> evolve(const MapSequence& seq, const HoleSequence& holes, const GridDensity& phi0, int m,
                                OperatorCache* cache) {
    if (m < 1) throw InputError("m must be at least 1");
    if (seq.size() < static_cast<std::size_t>(m) || holes.size() < static_cast<std::size_t>(m))
        throw InputError("sequence shorter than the requested horizon");
    OperatorCache local;
    OperatorCache& ops = cache ? *cache : local;
    std::vector<GridDensity> out;
    out.reserve(static_cast<std::size_t>(m));
    const GridDensity* current = &phi0;
    for (int k = 0; k < m; ++k) {
        auto op = ops.get(seq[k], holes[k], phi0.grid());
        out.push_back(op->apply(*current));
        current = &out.back();
    }
    return out;
}

GridDensity normalize(const GridDensity& phi) {
    double mass = phi.mass();
    if (!(mass > 0.0)) throw TotalEscapeError("density has zero mass");
    return phi.scaled(1.0 / mass);
}

double l1_distance(const GridDensity& phi, const GridDensity& psi) {
    if (phi.grid() != psi.grid()) throw InputError("densities live on different grids");
    double total = 0.0;
    for (std::size_t c = 0; c < phi.size(); ++c) total += std::fabs(phi[c] - psi[c]);
    return total * phi.grid().cell_measure();
}

std::vector<double> escape_mass(const GridDensity& phi0, const std::vector<GridDensity>& sequence) {
    std::vector<double> out;
    out.reserve(sequence.size());
    double prev = phi0.mass();
    for (const auto& phi : sequence) {
        double now = phi.mass();
        out.push_back(std::max(0.0, prev - now));
        prev = now;
    }
    return out;
}

} // namespace nsopen
