#include "nsopen/seminorm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "nsopen/errors.hpp"
#include "nsopen/mixing.hpp"

namespace nsopen {

void OscParams::validate(const Grid& grid) const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("oscillation exponent must lie in (0,1]");
    if (!(eps0 >= grid.cell_diameter() * (1.0 - 1e-12))) throw InputError("eps0 is below one cell diameter");
}

std::vector<double> OscParams::ladder(const Grid& grid) const {
    validate(grid);
    std::vector<double> out;
    for (double eps = grid.cell_diameter(); eps <= eps0 * (1.0 + 1e-12); eps *= 2.0) out.push_back(eps);
    return out;
}

double Seminorm::operator()(const GridDensity& phi) const {
    return kind == SeminormKind::TotalVariation ? nsopen::total_variation(phi) : oscillation_seminorm(phi, osc);
}

std::string Seminorm::id() const {
    if (kind == SeminormKind::TotalVariation) return "tv";
    std::ostringstream os;
    os.precision(17);
    os << "osc(alpha=" << osc.alpha << ",eps0=" << osc.eps0 << ")";
    return os.str();
}

double Seminorm::partition_diameter(const PartitionSpec& Q) const {
    return kind == SeminormKind::TotalVariation ? diam_lambda(Q) : metric_diam(Q);
}

double Seminorm::constant_M(const PartitionSpec& Q) const {
    if (kind == SeminormKind::TotalVariation) return 1.0;
    return std::pow(metric_diam(Q), 1.0 - osc.alpha);
}

nlohmann::json Seminorm::to_json() const {
    if (kind == SeminormKind::TotalVariation) return {{"kind", "tv"}};
    return {{"kind", "osc"}, {"alpha", osc.alpha}, {"eps0", osc.eps0}};
}

Seminorm Seminorm::from_json(const nlohmann::json& j) {
    std::string kind = j.value("kind", std::string("tv"));
    if (kind == "tv") return total_variation();
    if (kind == "osc") return oscillation(j.value("alpha", 1.0), j.value("eps0", 0.125));
    throw ConfigError("unknown seminorm kind: " + kind);
}

double total_variation(const GridDensity& phi) {
    if (phi.grid().dimension() != 1) throw InputError("total variation is defined for 1D densities");
    const auto& v = phi.values();
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) total += std::fabs(v[(i + 1) % v.size()] - v[i]);
    return total;
}

namespace {

// Circular sliding max/min over radius w on each row of length n.
void row_extrema(const std::vector<double>& src, int n, int rows, int w, std::vector<double>& mx,
                 std::vector<double>& mn) {
    mx.assign(src.size(), 0.0);
    mn.assign(src.size(), 0.0);
    for (int r = 0; r < rows; ++r) {
        const double* row = src.data() + static_cast<std::size_t>(r) * n;
        double* omx = mx.data() + static_cast<std::size_t>(r) * n;
        double* omn = mn.data() + static_cast<std::size_t>(r) * n;
        if (2 * w + 1 >= n) {
            double hi = *std::max_element(row, row + n), lo = *std::min_element(row, row + n);
            std::fill(omx, omx + n, hi);
            std::fill(omn, omn + n, lo);
            continue;
        }
        std::deque<int> dmax, dmin;
        // Extended index e in [-w, n + w); output at x uses e in [x - w, x + w].
        for (int e = -w; e < n + w; ++e) {
            int idx = ((e % n) + n) % n;
            double v = row[idx];
            while (!dmax.empty() && row[((dmax.back() % n) + n) % n] <= v) dmax.pop_back();
            dmax.push_back(e);
            while (!dmin.empty() && row[((dmin.back() % n) + n) % n] >= v) dmin.pop_back();
            dmin.push_back(e);
            int x = e - w;
            if (x >= 0) {
                while (dmax.front() < x - w) dmax.pop_front();
                while (dmin.front() < x - w) dmin.pop_front();
                omx[x] = row[((dmax.front() % n) + n) % n];
                omn[x] = row[((dmin.front() % n) + n) % n];
            }
        }
    }
}

// Largest |dx| whose cell meets the open ball of radius eps (grid units) around a cell center at row offset dy.
int half_width(double eps_cells, int dy) {
    double ay = std::max(0.0, std::abs(dy) - 0.5);
    if (!(ay < eps_cells)) return -1;
    int w = 0;
    while (std::hypot(std::max(0.0, (w + 1) - 0.5), ay) < eps_cells) ++w;
    return w;
}

double osc_integral(const GridDensity& phi, double eps) {
    const Grid& grid = phi.grid();
    const int n = grid.cells_per_side();
    const int rows = grid.dimension() == 1 ? 1 : n;
    const double eps_cells = eps * n;
    const auto& v = phi.values();
    std::vector<double> best_max(v.size(), -std::numeric_limits<double>::infinity());
    std::vector<double> best_min(v.size(), std::numeric_limits<double>::infinity());
    std::vector<std::pair<int, int>> offsets;  // (dy, w)
    if (rows == 1) {
        offsets.emplace_back(0, half_width(eps_cells, 0));
    } else {
        int R = 0;
        while (half_width(eps_cells, R + 1) >= 0) ++R;
        if (2 * R + 1 >= n) {
            for (int r = 0; r < n; ++r) {
                int w = half_width(eps_cells, std::min(r, n - r));
                if (w >= 0) offsets.emplace_back(r, w);
            }
        } else {
            for (int dy = -R; dy <= R; ++dy) offsets.emplace_back(dy, half_width(eps_cells, dy));
        }
    }
    std::vector<int> widths;
    for (auto [dy, w] : offsets) widths.push_back(w);
    std::sort(widths.begin(), widths.end());
    widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
    std::vector<double> mx, mn;
    for (int w : widths) {
        row_extrema(v, n, rows, w, mx, mn);
        for (auto [dy, ww] : offsets) {
            if (ww != w) continue;
            for (int y = 0; y < rows; ++y) {
                int src = (((y + dy) % rows) + rows) % rows;
                const std::size_t so = static_cast<std::size_t>(src) * n, dst = static_cast<std::size_t>(y) * n;
                for (int x = 0; x < n; ++x) {
                    best_max[dst + x] = std::max(best_max[dst + x], mx[so + x]);
                    best_min[dst + x] = std::min(best_min[dst + x], mn[so + x]);
                }
            }
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) total += best_max[c] - best_min[c];
    return total * grid.cell_measure();
}

} // namespace

double oscillation_seminorm(const GridDensity& phi, const OscParams& p) {
    double best = 0.0;
    for (double eps : p.ladder(phi.grid())) best = std::max(best, std::pow(eps, -p.alpha) * osc_integral(phi, eps));
    return best;
}

std::vector<double> element_averages(const GridDensity& phi, const PartitionSpec& Q) {
    if (phi.grid() != Q.grid()) throw InputError("density and partition grids differ");
    std::vector<double> sums(Q.size(), 0.0);
    const auto& labels = Q.labels();
    for (std::size_t c = 0; c < phi.size(); ++c) sums[static_cast<std::size_t>(labels[c])] += phi[c];
    for (std::size_t k = 0; k < sums.size(); ++k) sums[k] /= static_cast<double>(Q.element(k).size());
    return sums;
}

GridDensity conditional_expectation(const GridDensity& phi, const PartitionSpec& Q) {
    auto avg = element_averages(phi, Q);
    std::vector<double> v(phi.size());
    const auto& labels = Q.labels();
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = avg[static_cast<std::size_t>(labels[c])];
    return {phi.grid(), std::move(v)};
}

ConeMembership cone_member(const GridDensity& phi, double a, const PartitionSpec& Q, const Seminorm& s) {
    if (!(a > 0.0)) throw InputError("cone aperture must be positive");
    ConeMembership out;
    auto avg = element_averages(phi, Q);
    out.min_expectation = *std::min_element(avg.begin(), avg.end());
    out.seminorm = s(phi);
    out.margin = a * out.min_expectation - out.seminorm;
    out.member = phi.mass() > 0.0 && out.seminorm <= a * out.min_expectation;
    return out;
}

ControlBounds control_bounds_check(const MapSequence& seq, const HoleSequence& holes, std::size_t start, int T,
                                   const PartitionSpec& Q, double zeta1, double zeta2, double a, double M,
                                   const Seminorm& s, const GridDensity& phi, OperatorCache* cache) {
    if (!cone_member(phi, a, Q, s).member) throw PreconditionError("density is not in the cone");
    Block block = make_block(seq, holes, start, T, Q.grid(), cache);
    MixingRatios r = mixing_ratios(block, Q);
    if (!r.within(zeta1, zeta2)) throw PreconditionError("block does not satisfy the mixing condition");
    GridDensity image = phi;
    for (const auto& op : block) image = op->apply(image);
    auto avg = element_averages(image, Q);
    ControlBounds out;
    out.observed_min = *std::min_element(avg.begin(), avg.end());
    out.observed_max = *std::max_element(avg.begin(), avg.end());
    const double x = a * s.partition_diameter(Q) / M;
    const double mass = phi.mass();
    out.lower_bound = (zeta1 - zeta2 * x) * mass;
    out.upper_bound = zeta2 * (1.0 + x) * mass;
    out.degenerate_lower = zeta1 - zeta2 * x <= 0.0;
    out.lower_ok = out.lower_bound <= out.observed_min;
    out.upper_ok = out.observed_max <= out.upper_bound;
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json LYCertificate::to_json() const {
    return {{"T1", T1},         {"theta", theta}, {"C", C},         {"seminorm", seminorm.to_json()},
            {"ensemble_size", ensemble_size}, {"seed", seed}, {"k_max", k_max}, {"starts", starts},
            {"frontier", frontier}};
}

LYCertificate LYCertificate::from_json(const nlohmann::json& j) {
    LYCertificate c;
    c.T1 = j.at("T1").get<int>();
    c.theta = j.at("theta").get<double>();
    c.C = j.at("C").get<double>();
    c.seminorm = Seminorm::from_json(j.at("seminorm"));
    c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.k_max = j.at("k_max").get<int>();
    c.starts = j.at("starts").get<std::vector<std::size_t>>();
    if (j.contains("frontier")) c.frontier = j.at("frontier").get<std::vector<std::pair<double, double>>>();
    return c;
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index, std::uint32_t tag) {
    std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), tag};
    return std::mt19937_64(s);
}

GridDensity unit_mass(GridDensity phi) {
    double m = phi.mass();
    return m > 0 ? phi.scaled(1.0 / m) : GridDensity::uniform(phi.grid());
}

} // namespace

std::vector<GridDensity> ly_ensemble(const Grid& grid, std::size_t size, std::uint64_t seed) {
    std::vector<GridDensity> out;
    out.reserve(size);
    const int n = grid.cells_per_side();
    const bool two = grid.dimension() == 2;
    for (std::size_t k = 0; k < size; ++k) {
        if (k == 0) {
            out.push_back(GridDensity::uniform(grid));
            continue;
        }
        auto rng = stream(seed, k, 0x1e5u);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> v(grid.total_cells(), 0.0);
        int type = static_cast<int>(k % 4);
        auto arc = [&](double lo, double len, double x) { return wrap_unit(x - lo) < len; };
        if (type == 0) {
            double height = 5.0 * unit(rng);
            double ax = unit(rng), lx = 0.05 + 0.5 * unit(rng), ay = unit(rng), ly = 0.05 + 0.5 * unit(rng);
            for (std::size_t c = 0; c < v.size(); ++c) {
                Point p = grid.center(c);
                bool in = arc(ax, lx, p.x) && (!two || arc(ay, ly, p.y));
                v[c] = 1.0 + (in ? height : 0.0);
            }
        } else if (type == 1) {
            int pieces = 2 + static_cast<int>(unit(rng) * 15);
            std::vector<double> cx(pieces), cy(pieces), val(pieces), valy(pieces);
            for (int i = 0; i < pieces; ++i) {
                cx[i] = unit(rng);
                cy[i] = unit(rng);
                val[i] = unit(rng);
                valy[i] = unit(rng);
            }
            std::sort(cx.begin(), cx.end());
            std::sort(cy.begin(), cy.end());
            auto piece_of = [](const std::vector<double>& cuts, double x) {
                return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin()) %
                       cuts.size();
            };
            for (std::size_t c = 0; c < v.size(); ++c) {
                Point p = grid.center(c);
                double a = val[piece_of(cx, p.x)];
                v[c] = two ? a * valy[piece_of(cy, p.y)] + 0.01 : a;
            }
        } else if (type == 2) {
            double amp = unit(rng);
            int fx = 1 + static_cast<int>(unit(rng) * 8), fy = 1 + static_cast<int>(unit(rng) * 8);
            double ph = 2 * M_PI * unit(rng);
            for (std::size_t c = 0; c < v.size(); ++c) {
                Point p = grid.center(c);
                double arg = 2 * M_PI * fx * p.x + (two ? 2 * M_PI * fy * p.y : 0.0) + ph;
                v[c] = 1.0 + amp * std::cos(arg);
            }
        } else {
            double w = (4.0 / n) + 0.1 * unit(rng);
            double ax = unit(rng), ay = unit(rng);
            for (std::size_t c = 0; c < v.size(); ++c) {
                Point p = grid.center(c);
                v[c] = (arc(ax, w, p.x) && (!two || arc(ay, w, p.y))) ? 1.0 : 0.0;
            }
        }
        out.push_back(unit_mass(GridDensity(grid, std::move(v))));
    }
    return out;
}

namespace {

struct LYRecord {
    double s0 = 0.0;
    double mass = 0.0;
    std::vector<double> sk;  // k = 1..k_max
    std::size_t member = 0;
    std::size_t start = 0;
};

std::vector<LYRecord> ly_records(const MapSequence& seq, const HoleSequence& holes, const Seminorm& s, int T1,
                                 int k_max, const std::vector<std::size_t>& starts,
                                 const std::vector<GridDensity>& ensemble, OperatorCache* cache) {
    if (T1 < 1 || k_max < 1) throw InputError("T1 and k_max must be positive");
    const std::size_t need = static_cast<std::size_t>(T1) * static_cast<std::size_t>(k_max);
    for (std::size_t st : starts)
        if (st + need > seq.size() || st + need > holes.size())
            throw InputError("sequence too short for the requested Lasota-Yorke horizon");
    OperatorCache local;
    OperatorCache& ops = cache ? *cache : local;
    std::vector<LYRecord> out;
    for (std::size_t st : starts) {
        std::vector<std::shared_ptr<const UlamOperator>> block;
        for (std::size_t k = 0; k < need; ++k) block.push_back(ops.get(seq[st + k], holes[st + k], ensemble.front().grid()));
        for (std::size_t m = 0; m < ensemble.size(); ++m) {
            LYRecord rec;
            rec.member = m;
            rec.start = st;
            rec.s0 = s(ensemble[m]);
            rec.mass = ensemble[m].mass();
            GridDensity phi = ensemble[m];
            for (std::size_t step = 0; step < need; ++step) {
                phi = block[step]->apply(phi);
                if ((step + 1) % static_cast<std::size_t>(T1) == 0) rec.sk.push_back(s(phi));
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

constexpr double kRelSlack = 1e-12;

// Minimal theta for additive constant C, or a negative value if C is infeasible.
double theta_for(const std::vector<LYRecord>& recs, double C, int T1, const LYRecord** witness, int* witness_k) {
    double theta = 0.0;
    for (const auto& r : recs) {
        for (std::size_t k = 0; k < r.sk.size(); ++k) {
            double excess = r.sk[k] - C * r.mass;
            if (r.s0 <= 0.0) {
                if (excess > kRelSlack * std::max(1.0, r.sk[k])) {
                    if (witness) *witness = &r;
                    if (witness_k) *witness_k = static_cast<int>(k + 1);
                    return -1.0;
                }
                continue;
            }
            if (excess <= 0.0) continue;
            double t = std::pow(excess / r.s0, 1.0 / ((k + 1.0) * T1));
            if (t > theta) {
                theta = t;
                if (witness) *witness = &r;
                if (witness_k) *witness_k = static_cast<int>(k + 1);
            }
        }
    }
    return theta;
}

std::vector<double> c_lattice() {
    std::vector<double> out{0.0};
    for (int e = -12; e <= 4; ++e)
        for (double m : {1.0, 2.0, 5.0}) out.push_back(m * std::pow(10.0, e));
    return out;
}

} // namespace

LYCertificate estimate_LY(const MapSequence& seq, const HoleSequence& holes, const Grid& grid, const Seminorm& s,
                          const LYOptions& options, OperatorCache* cache) {
    if (options.ensemble_size < 1) throw InputError("ensemble must be nonempty");
    if (!(options.theta_max > 0.0 && options.theta_max < 1.0)) throw InputError("theta_max must lie in (0,1)");
    if (s.kind == SeminormKind::Oscillation) s.osc.validate(grid);
    auto ensemble = ly_ensemble(grid, options.ensemble_size, options.seed);
    auto recs = ly_records(seq, holes, s, options.T1, options.k_max, options.starts, ensemble, cache);
    std::vector<std::pair<double, double>> frontier;
    for (double C : c_lattice()) {
        double theta = theta_for(recs, C, options.T1, nullptr, nullptr);
        if (theta < 0.0 || theta > options.theta_max) continue;
        frontier.emplace_back(C, std::max(theta * (1.0 + 1e-10), 1e-12));
    }
    // Stable sort keeps smaller C first among equal objectives.
    std::stable_sort(frontier.begin(), frontier.end(), [](const auto& x, const auto& y) {
        return x.first / (1.0 - x.second) < y.first / (1.0 - y.second);
    });
    if (frontier.empty()) {
        const LYRecord* w = nullptr;
        int wk = 0;
        double C = c_lattice().back();
        double theta = theta_for(recs, C, options.T1, &w, &wk);
        std::ostringstream os;
        os.precision(17);
        os << "member=" << (w ? w->member : 0) << " start=" << (w ? w->start : 0) << " k=" << wk
           << " seminorm_before=" << (w ? w->s0 : 0.0)
           << " seminorm_after=" << (w && wk > 0 ? w->sk[wk - 1] : 0.0) << " mass=" << (w ? w->mass : 0.0)
           << " C=" << C << " theta=" << theta << " seed=" << options.seed;
        throw CertificationError("no admissible Lasota-Yorke constants on the lattice", os.str());
    }
    LYCertificate cert;
    cert.T1 = options.T1;
    cert.C = frontier.front().first;
    cert.theta = frontier.front().second;
    cert.frontier = std::move(frontier);
    cert.seminorm = s;
    cert.ensemble_size = options.ensemble_size;
    cert.seed = options.seed;
    cert.k_max = options.k_max;
    cert.starts = options.starts;
    return cert;
}

std::size_t count_ly_violations(const LYCertificate& cert, const MapSequence& seq, const HoleSequence& holes,
                                const std::vector<GridDensity>& ensemble, OperatorCache* cache) {
    auto recs = ly_records(seq, holes, cert.seminorm, cert.T1, cert.k_max, cert.starts, ensemble, cache);
    std::size_t bad = 0;
    for (const auto& r : recs) {
        for (std::size_t k = 0; k < r.sk.size(); ++k) {
            double rhs = std::pow(cert.theta, (k + 1.0) * cert.T1) * r.s0 + cert.C * r.mass;
            if (r.sk[k] > rhs + kRelSlack * std::max(1.0, rhs)) ++bad;
        }
    }
    return bad;
}

} // namespace nsopen
