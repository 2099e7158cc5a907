#include "nsopen/cone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "nsopen/errors.hpp"
#include "nsopen/mixing.hpp"

namespace nsopen {

namespace {

constexpr double kTol = 1e-12;

bool invariance_holds(double a, double theta_T, double c, double denom, double sigma) {
    double lhs = (a * theta_T + c) / denom;
    double rhs = sigma * a;
    return lhs <= rhs * (1.0 + kTol);
}

} // namespace

nlohmann::json ConeParams::to_json() const {
    nlohmann::json j{{"a", a},           {"sigma", sigma}, {"T", T},           {"T1", T1},
                     {"E", E},           {"zeta1", zeta1}, {"zeta2", zeta2},   {"theta_ly", theta_ly},
                     {"c_ly", c_ly},     {"M", M},         {"diameter", diameter},
                     {"seminorm", seminorm.to_json()}};
    j["partition"] = partition ? partition->to_json() : nlohmann::json(nullptr);
    return j;
}

ConeParams ConeParams::from_json(const nlohmann::json& j) {
    ConeParams cp;
    cp.a = j.at("a").get<double>();
    cp.sigma = j.at("sigma").get<double>();
    cp.T = j.at("T").get<int>();
    cp.T1 = j.at("T1").get<int>();
    cp.E = j.at("E").get<int>();
    cp.zeta1 = j.at("zeta1").get<double>();
    cp.zeta2 = j.at("zeta2").get<double>();
    cp.theta_ly = j.at("theta_ly").get<double>();
    cp.c_ly = j.at("c_ly").get<double>();
    cp.M = j.at("M").get<double>();
    cp.diameter = j.at("diameter").get<double>();
    cp.seminorm = Seminorm::from_json(j.at("seminorm"));
    if (j.contains("partition") && !j.at("partition").is_null())
        cp.partition = std::make_shared<const PartitionSpec>(PartitionSpec::from_json(j.at("partition")));
    return cp;
}

ParameterAudit audit_parameters(const ConeParams& cp) {
    ParameterAudit r;
    r.p1 = cp.sigma > 0.0 && cp.sigma < 1.0;
    r.p2 = cp.T1 >= 1 && cp.T >= cp.T1 && cp.T % cp.T1 == 0 && cp.T >= cp.E;
    const double denom = cp.zeta1 - cp.zeta2 * cp.x();
    r.p3_positive = cp.a > 0.0 && cp.M > 0.0 && denom > 0.0;
    r.p3_invariance = r.p3_positive && invariance_holds(cp.a, std::pow(cp.theta_ly, cp.T), cp.c_ly, denom, cp.sigma);
    return r;
}

ConeParams select_parameters(const SelectionInputs& in, const Seminorm& s, const std::vector<PartitionSpec>& family,
                             const MixingTimeFn& mixing_time) {
    if (!(in.theta_ly > 0.0 && in.theta_ly < 1.0)) throw InputError("theta_LY must lie in (0,1)");
    if (!(in.c_ly >= 0.0)) throw InputError("C_LY must be nonnegative");
    if (!(in.zeta1 > 0.0 && in.zeta1 < 1.0)) throw InputError("zeta1 must lie in (0,1)");
    if (!(in.zeta2 > 1.0)) throw InputError("zeta2 must exceed 1");
    if (in.T1 < 1) throw InputError("T1 must be positive");
    if (!(in.sigma > 0.0 && in.sigma < 1.0)) throw InputError("sigma must lie in (0,1)");
    if (!(in.a_min > 0.0)) throw InputError("a_min must be positive");

    ConeParams cp;
    cp.sigma = in.sigma;
    cp.T1 = in.T1;
    cp.zeta1 = in.zeta1;
    cp.zeta2 = in.zeta2;
    cp.theta_ly = in.theta_ly;
    cp.c_ly = in.c_ly;
    cp.seminorm = s;

    const double half = in.zeta1 / 2.0;
    int T = in.T1;
    while (std::pow(in.theta_ly, T) / half >= in.sigma) {
        T += in.T1;
        if (T > in.T_max) throw SelectionError("no block length brings theta^T below sigma zeta1 / 2");
    }
    const double theta_T = std::pow(in.theta_ly, T);
    const double gap = in.sigma * half - theta_T;
    const double a_star = in.c_ly / gap;
    const double base = std::max(a_star, in.a_min);
    double a = base;
    int k = 0;
    while (!invariance_holds(a, theta_T, in.c_ly, half, in.sigma)) {
        if (++k > 60) {
            std::ostringstream os;
            os.precision(17);
            os << "no admissible aperture: theta^T=" << theta_T << " C=" << in.c_ly << " sigma=" << in.sigma;
            throw SelectionError(os.str());
        }
        a = base * std::ldexp(1.0, k);
    }
    cp.a = a;

    const PartitionSpec* chosen = nullptr;
    for (const auto& Q : family) {
        double d = s.partition_diameter(Q);
        double M = s.constant_M(Q);
        if (in.zeta2 * a * d / M <= half) {
            chosen = &Q;
            cp.diameter = d;
            cp.M = M;
            break;
        }
    }
    if (!chosen) throw SelectionError("partition family exhausted before zeta2 a d / M <= zeta1 / 2");
    auto E = mixing_time(*chosen);
    if (!E) throw SelectionError("selected partition is not mixing within the checked horizon");
    cp.E = *E;
    cp.partition = std::make_shared<const PartitionSpec>(*chosen);
    int blocks = (std::max(T, cp.E) + in.T1 - 1) / in.T1;
    cp.T = blocks * in.T1;
    if (!audit_parameters(cp).ok()) throw SelectionError("selected parameters fail the parameter audit");
    return cp;
}

double delta0(double sigma, double zeta1, double zeta2, double x) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw InvalidParametersError("sigma must lie in (0,1)");
    if (!(zeta1 > 0.0 && zeta2 > 0.0 && x >= 0.0)) throw InvalidParametersError("invalid mixing constants");
    const double denom = zeta1 - zeta2 * x;
    if (!(denom > 0.0)) throw InvalidParametersError("zeta1 - zeta2 a d / M must be positive");
    return 2.0 * std::log((1.0 + sigma) / (1.0 - sigma)) + 2.0 * std::log(zeta2 * (1.0 + x) / denom);
}

double delta0(const ConeParams& cp) { return delta0(cp.sigma, cp.zeta1, cp.zeta2, cp.x()); }

double birkhoff_factor(double delta) {
    if (std::isnan(delta) || delta < 0.0) throw InputError("projective diameter must be nonnegative");
    if (std::isinf(delta)) return 1.0;
    return std::tanh(delta / 4.0);
}

double c_lip(double zeta1, double zeta2, double x) {
    const double denom = zeta1 - zeta2 * x;
    if (!(denom > 0.0) || !(x >= 0.0)) throw InvalidParametersError("zeta1 - zeta2 a d / M must be positive");
    return 2.0 / denom;
}

double c_lip(const ConeParams& cp) { return c_lip(cp.zeta1, cp.zeta2, cp.x()); }

nlohmann::json RateConstants::to_json() const {
    return {{"delta0", delta0}, {"lambda", lambda}, {"c0", c0}, {"c_lip", c_lip}};
}

RateConstants RateConstants::from_json(const nlohmann::json& j) {
    return {j.at("delta0").get<double>(), j.at("lambda").get<double>(), j.at("c0").get<double>(),
            j.at("c_lip").get<double>()};
}

RateConstants rate_constants(double d0, double clip, int T) {
    if (!(d0 > 0.0) || std::isinf(d0)) throw InvalidParametersError("delta0 must be finite and positive");
    if (!(clip > 0.0)) throw InvalidParametersError("C_Lip must be positive");
    if (T < 1) throw InvalidParametersError("T must be positive");
    const double t = std::tanh(d0 / 4.0);
    RateConstants r;
    r.delta0 = d0;
    r.c_lip = clip;
    r.lambda = std::pow(t, 1.0 / T);
    r.c0 = clip * std::max(d0, 1.0) * std::exp(d0) / (t * t);
    return r;
}

RateConstants rate_constants(const ConeParams& cp) {
    auto audit = audit_parameters(cp);
    if (!audit.ok()) throw InvalidParametersError("cone parameters fail the parameter audit");
    return rate_constants(delta0(cp), c_lip(cp), cp.T);
}

double hilbert_distance_bound(const GridDensity& phi, const GridDensity& psi, const ConeParams& cp) {
    if (!cp.partition) throw InputError("cone parameters carry no partition");
    const PartitionSpec& Q = *cp.partition;
    if (!cone_member(phi, cp.sigma * cp.a, Q, cp.seminorm).member ||
        !cone_member(psi, cp.sigma * cp.a, Q, cp.seminorm).member)
        throw PreconditionError("inputs must lie in the cone of aperture sigma a");
    auto ep = element_averages(phi, Q);
    auto eq = element_averages(psi, Q);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < ep.size(); ++k) {
        if (!(ep[k] > 0.0) || !(eq[k] > 0.0)) throw InputError("zero conditional expectation");
        double r = eq[k] / ep[k];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return 2.0 * std::log((1.0 + cp.sigma) / (1.0 - cp.sigma)) + std::log(hi) - std::log(lo);
}

std::vector<GridDensity> sample_cone_densities(const PartitionSpec& Q, double a, const Seminorm& s, std::size_t count,
                                               std::uint64_t seed) {
    if (!(a > 0.0)) throw InputError("cone aperture must be positive");
    const Grid& grid = Q.grid();
    auto shapes = ly_ensemble(grid, count + 1, seed);
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xc0eu};
    std::mt19937_64 rng(sseq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<GridDensity> out;
    out.reserve(count);
    const auto one = GridDensity::uniform(grid);
    for (std::size_t k = 0; k < count; ++k) {
        const GridDensity& shape = shapes[k + 1];
        double sn = s(shape);
        auto avg = element_averages(shape, Q);
        double m = *std::min_element(avg.begin(), avg.end());
        // |(1-l) + l psi|_s = l |psi|_s and min E >= (1-l) + l m.
        double lmax = 1.0;
        double denom = sn + a - a * m;
        if (denom > 0.0) lmax = std::min(1.0, a / denom);
        double lam = lmax * (0.5 + 0.5 * unit(rng)) * (1.0 - 1e-9);
        double scale = 0.1 + 10.0 * unit(rng);
        std::vector<double> v(grid.total_cells());
        for (std::size_t c = 0; c < v.size(); ++c) v[c] = scale * ((1.0 - lam) * one[c] + lam * shape[c]);
        GridDensity phi(grid, std::move(v));
        if (!cone_member(phi, a, Q, s).member) phi = one.scaled(scale);
        out.push_back(std::move(phi));
    }
    return out;
}

nlohmann::json ContractionResult::to_json() const {
    nlohmann::json j{{"ok", ok}, {"worst_ratio", worst_ratio}, {"samples", samples}};
    j["witness"] = witness ? nlohmann::json(*witness) : nlohmann::json(nullptr);
    return j;
}

ContractionResult verify_cone_contraction(const MapSequence& seq, const HoleSequence& holes, std::size_t start,
                                          const ConeParams& cp, std::size_t samples, std::uint64_t seed,
                                          OperatorCache* cache) {
    if (!cp.partition) throw PreconditionError("cone parameters carry no partition");
    if (!audit_parameters(cp).ok()) throw PreconditionError("cone parameters fail the parameter audit");
    const PartitionSpec& Q = *cp.partition;
    Block block = make_block(seq, holes, start, cp.T, Q.grid(), cache);
    if (!mixing_ratios(block, Q).within(cp.zeta1, cp.zeta2))
        throw PreconditionError("block does not satisfy the mixing condition");
    auto ensemble = sample_cone_densities(Q, cp.a, cp.seminorm, samples, seed);
    ContractionResult r;
    r.samples = samples;
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
        GridDensity phi = ensemble[k];
        for (const auto& op : block) phi = op->apply(phi);
        auto avg = element_averages(phi, Q);
        double m = *std::min_element(avg.begin(), avg.end());
        double ratio = m > 0.0 ? cp.seminorm(phi) / (cp.a * m) : std::numeric_limits<double>::infinity();
        if (ratio > r.worst_ratio) r.worst_ratio = ratio;
        if (ratio > cp.sigma && !r.witness) r.witness = k;
    }
    r.ok = !r.witness.has_value();
    return r;
}

} // namespace nsopen
