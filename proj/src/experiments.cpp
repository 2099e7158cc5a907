#include "nsopen/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "nsopen/errors.hpp"

namespace nsopen {

namespace {

constexpr double kFloor = 1e-14;

std::mt19937_64 step_stream(std::uint64_t seed, std::uint64_t k, std::uint32_t tag) {
    std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32), tag};
    return std::mt19937_64(s);
}

std::vector<PartitionSpec> partition_family(const ExperimentConfig& cfg) {
    std::vector<PartitionSpec> out;
    for (int k : cfg.mixing.family) out.push_back(PartitionSpec::uniform(cfg.grid, k));
    return out;
}

nlohmann::json lerp_json(const nlohmann::json& a, const nlohmann::json& b, double t) {
    if (a == b) return a;
    if (a.is_number() && b.is_number()) return (1.0 - t) * a.get<double>() + t * b.get<double>();
    if (a.is_array() && b.is_array() && a.size() == b.size()) {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t k = 0; k < a.size(); ++k) out.push_back(lerp_json(a[k], b[k], t));
        return out;
    }
    if (a.is_object() && b.is_object() && a.size() == b.size()) {
        nlohmann::json out = nlohmann::json::object();
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) throw ConfigError("curve endpoints differ in structure at " + it.key());
            out[it.key()] = lerp_json(it.value(), b.at(it.key()), t);
        }
        return out;
    }
    throw ConfigError("curve endpoints differ in structure");
}

} // namespace

nlohmann::json FitResult::to_json() const {
    return {{"c_fit", c_fit}, {"lambda_fit", lambda_fit}, {"r2", r2}, {"points", points}};
}

FitResult fit_exponential(const std::vector<std::pair<int, double>>& series) {
    std::vector<std::pair<double, double>> pts;
    for (auto [m, d] : series)
        if (d >= kFloor && std::isfinite(d)) pts.emplace_back(static_cast<double>(m), std::log(d));
    if (pts.size() < 3) throw InputError("exponential fit needs at least three points above the floor");
    const double n = static_cast<double>(pts.size());
    double sx = 0, sy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (!(sxx > 0)) throw InputError("exponential fit needs at least two distinct steps");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ssres = 0;
    for (auto [x, y] : pts) {
        double r = y - (intercept + slope * x);
        ssres += r * r;
    }
    FitResult f;
    f.c_fit = std::exp(intercept);
    f.lambda_fit = std::exp(slope);
    f.r2 = syy > 0 ? std::clamp(1.0 - ssres / syy, 0.0, 1.0) : 1.0;
    f.points = pts.size();
    return f;
}

nlohmann::json Certification::to_json() const {
    nlohmann::json blocks{{"checked", blocks_checked}, {"mixing", blocks_mixing}};
    return {{"lasota_yorke", ly.to_json()}, {"cone", cone.to_json()},          {"constants", constants.to_json()},
            {"stability", stability.to_json()}, {"blocks", blocks},         {"certified", certified()}};
}

MapSequence local_sequence(const ExperimentConfig& cfg, const MapSpec& base, int length, std::uint32_t tag) {
    MapSequence seq;
    seq.reserve(static_cast<std::size_t>(length));
    for (int k = 0; k < length; ++k) {
        auto rng = step_stream(cfg.seed, static_cast<std::uint64_t>(k), tag);
        seq.push_back(sample_perturbation(base, cfg.delta, rng));
    }
    return seq;
}

HoleSequence config_holes(const ExperimentConfig& cfg, int length) {
    HoleSequence holes = holes_from_config(cfg.holes, cfg.grid.dimension(), static_cast<std::size_t>(length));
    if (holes.max_measure() > cfg.epsilon * (1.0 + 1e-12))
        throw ConfigError("a hole exceeds the declared measure cap epsilon");
    return holes;
}

MapSpec curve_map(const nlohmann::json& curve, double t) {
    std::string kind = curve.value("kind", std::string());
    if (kind == "constant") return map_from_config(curve.at("map"));
    if (kind == "full_branch_cuts") {
        auto from = curve.at("from").get<std::vector<double>>();
        auto to = curve.at("to").get<std::vector<double>>();
        if (from.size() != to.size()) throw ConfigError("curve cut lists differ in length");
        std::vector<double> cuts(from.size());
        for (std::size_t k = 0; k < cuts.size(); ++k) cuts[k] = (1.0 - t) * from[k] + t * to[k];
        return MapSpec::full_branch_affine(cuts, curve.value("shift", 0.0));
    }
    if (kind == "interpolation") {
        auto a = map_from_config(curve.at("from")).to_json();
        auto b = map_from_config(curve.at("to")).to_json();
        return MapSpec::from_json(lerp_json(a, b, t));
    }
    throw ConfigError("unknown curve kind: " + kind);
}

MapSpec config_base_map(const ExperimentConfig& cfg) {
    if (!cfg.base_map.is_null()) return map_from_config(cfg.base_map);
    return curve_map(cfg.global->curve, cfg.global->t_start);
}

LYCertificate certify_ly(const ExperimentConfig& cfg, const MapSequence& seq, const HoleSequence& holes,
                         OperatorCache& cache) {
    LYOptions opts = cfg.ly.options;
    if (cfg.ly.theta) {
        LYCertificate c;
        c.T1 = opts.T1;
        c.theta = *cfg.ly.theta;
        c.C = *cfg.ly.C;
        c.seminorm = cfg.seminorm;
        c.k_max = opts.k_max;
        c.seed = opts.seed;
        return c;
    }
    const std::size_t span = static_cast<std::size_t>(opts.T1) * static_cast<std::size_t>(opts.k_max);
    if (span > seq.size()) throw ConfigError("horizon is shorter than T1 * k_max");
    opts.starts.clear();
    for (std::size_t st = 0; st + span <= seq.size(); st += static_cast<std::size_t>(opts.T1)) opts.starts.push_back(st);
    return estimate_LY(seq, holes, cfg.grid, cfg.seminorm, opts, &cache);
}

nlohmann::json certify_mixing(const ExperimentConfig& cfg, const MapSpec& base, OperatorCache& cache) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& Q : partition_family(cfg)) {
        auto cert = find_mixing_time(base, Q, cfg.mixing.zeta1, cfg.mixing.zeta2, cfg.mixing.i_max, &cache);
        nlohmann::json entry{{"elements", Q.size()}};
        if (cert) {
            entry["certificate"] = cert->to_json();
            entry["stability"] = stability_check(base, Q, cfg.mixing.zeta1, cfg.mixing.zeta2, cert->E, cfg.delta,
                                                 cfg.epsilon, cfg.mixing.stability_samples, cfg.seed)
                                     .to_json();
        } else {
            entry["certificate"] = nullptr;
        }
        out.push_back(entry);
    }
    return out;
}

ConeParams select_for(const ExperimentConfig& cfg, const MapSpec& base, LYCertificate& ly, OperatorCache& cache) {
    SelectionInputs in;
    in.zeta1 = cfg.mixing.zeta1;
    in.zeta2 = cfg.mixing.zeta2;
    in.T1 = ly.T1;
    in.sigma = cfg.cone.sigma;
    in.a_min = cfg.cone.a_min;
    std::map<int, std::optional<int>> mixing_times;
    auto mixing_time = [&](const PartitionSpec& Q) -> std::optional<int> {
        const int key = static_cast<int>(Q.size());
        auto it = mixing_times.find(key);
        if (it != mixing_times.end()) return it->second;
        auto cert = find_mixing_time(base, Q, cfg.mixing.zeta1, cfg.mixing.zeta2, cfg.mixing.i_max, &cache);
        std::optional<int> E;
        if (cert) E = cert->E;
        mixing_times[key] = E;
        return E;
    };
    auto candidates = ly.frontier;
    if (candidates.empty()) candidates.emplace_back(ly.C, ly.theta);
    std::string last;
    for (auto [C, theta] : candidates) {
        in.theta_ly = theta;
        in.c_ly = C;
        try {
            ConeParams cp = select_parameters(in, cfg.seminorm, partition_family(cfg), mixing_time);
            ly.C = C;
            ly.theta = theta;
            return cp;
        } catch (const SelectionError& e) {
            last = e.what();
        }
    }
    throw SelectionError("no Lasota-Yorke frontier point admits parameters: " + last);
}

Certification certify(const ExperimentConfig& cfg, const MapSpec& base, const MapSequence& seq,
                      const HoleSequence& holes, OperatorCache& cache) {
    Certification c;
    c.ly = certify_ly(cfg, seq, holes, cache);
    c.cone = select_for(cfg, base, c.ly, cache);
    if (cfg.horizon < 2 * c.cone.T) throw ConfigError("horizon must be at least twice the selected block length");
    c.stability = stability_check(base, *c.cone.partition, c.cone.zeta1, c.cone.zeta2, c.cone.T, cfg.delta,
                                  cfg.epsilon, cfg.mixing.stability_samples, cfg.seed);
    for (std::size_t st = 0; st + static_cast<std::size_t>(c.cone.T) <= seq.size();
         st += static_cast<std::size_t>(c.cone.T)) {
        ++c.blocks_checked;
        Block block = make_block(seq, holes, st, c.cone.T, cfg.grid, &cache);
        if (mixing_ratios(block, *c.cone.partition).within(c.cone.zeta1, c.cone.zeta2)) ++c.blocks_mixing;
    }
    c.constants = rate_constants(c.cone);
    return c;
}

nlohmann::json Verdict::to_json() const {
    return {{"certified", certified},
            {"bound_checked", bound_checked},
            {"bound_ok", bound_ok},
            {"first_violation", first_violation < 0 ? nlohmann::json(nullptr) : nlohmann::json(first_violation)},
            {"pass", pass()}};
}

namespace {

struct BoundSpec {
    double c0 = 0.0;
    double lambda = 1.0;
    double h_alpha = 0.0;
    Seminorm seminorm;
};

void audit_density(const GridDensity& phi, const ConeParams& cp, const char* name) {
    auto r = cone_member(phi, cp.a, *cp.partition, cp.seminorm);
    if (!r.member) {
        std::ostringstream os;
        os.precision(17);
        os << "initial density " << name << " is not in the cone: seminorm=" << r.seminorm
           << " a*minE=" << cp.a * r.min_expectation;
        throw ConfigError(os.str());
    }
}

// Normalized evolution of both densities with the memory-loss bound checked at every step.
void evolve_pair(const MapSequence& seq, const HoleSequence& holes, const GridDensity& phi0, const GridDensity& psi0,
                 const std::optional<BoundSpec>& bound, OperatorCache& cache, RunResult& r) {
    GridDensity phi = normalize(phi0), psi = normalize(psi0);
    double mass_phi = phi0.mass(), mass_psi = psi0.mass();
    double sup_semi = 0.0;
    r.verdict.bound_checked = bound.has_value();
    r.verdict.bound_ok = true;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const int m = static_cast<int>(k + 1);
        auto op = cache.get(seq[k], holes[k], phi.grid());
        GridDensity a = op->apply(phi), b = op->apply(psi);
        const double sa = a.mass(), sb = b.mass();
        if (!(sa > 0.0) || !(sb > 0.0)) throw TotalEscapeError("all mass escaped", static_cast<std::size_t>(m));
        phi = a.scaled(1.0 / sa);
        psi = b.scaled(1.0 / sb);
        mass_phi *= sa;
        mass_psi *= sb;
        r.records.push_back({m, mass_phi, mass_psi, l1_distance(phi, psi)});
        if (bound) {
            sup_semi = std::max(sup_semi, bound->seminorm(phi) + bound->seminorm(psi));
            double budget = m * bound->h_alpha * sup_semi;
            double rhs = bound->c0 * std::pow(bound->lambda, m);
            r.budget.push_back(budget);
            r.bound.push_back(rhs);
            if (r.records.back().l1_distance > rhs + budget && r.verdict.first_violation < 0) {
                r.verdict.bound_ok = false;
                r.verdict.first_violation = m;
            }
        }
    }
    std::vector<std::pair<int, double>> series;
    for (const auto& rec : r.records) series.emplace_back(rec.m, rec.l1_distance);
    try {
        r.fit = fit_exponential(series);
    } catch (const InputError& e) {
        r.notes.push_back(std::string("no fit: ") + e.what());
    }
}

double h_alpha(const ExperimentConfig& cfg) {
    double alpha = cfg.seminorm.kind == SeminormKind::TotalVariation ? 1.0 : cfg.seminorm.osc.alpha;
    return std::pow(cfg.grid.cell_diameter(), alpha);
}

} // namespace

RunResult run_local(const ExperimentConfig& cfg) {
    RunResult r;
    r.mode = "local";
    r.config_echo = cfg.raw;
    OperatorCache cache;
    const MapSpec base = config_base_map(cfg);
    const MapSequence seq = local_sequence(cfg, base, cfg.horizon);
    const HoleSequence holes = config_holes(cfg, cfg.horizon);
    const GridDensity phi0 = density_from_config(cfg.phi, cfg.grid);
    const GridDensity psi0 = density_from_config(cfg.psi, cfg.grid);

    std::optional<BoundSpec> bound;
    try {
        Certification c = certify(cfg, base, seq, holes, cache);
        audit_density(phi0, c.cone, "phi");
        audit_density(psi0, c.cone, "psi");
        r.certificates = c.to_json();
        r.constants = c.constants;
        r.verdict.certified = c.certified();
        if (!c.stability.ok) r.notes.push_back("sampled mixing stability found violations");
        if (c.blocks_mixing != c.blocks_checked) r.notes.push_back("some realized blocks fail the mixing condition");
        if (cfg.cone.contraction_samples > 0) {
            auto cc = verify_cone_contraction(seq, holes, 0, c.cone, cfg.cone.contraction_samples, cfg.seed, &cache);
            r.certificates["contraction"] = cc.to_json();
            if (!cc.ok) r.verdict.certified = false;
        }
        bound = BoundSpec{c.constants.c0, c.constants.lambda, h_alpha(cfg), cfg.seminorm};
    } catch (const CertificationError& e) {
        r.certificates["failure"] = {{"what", e.what()}, {"witness", e.witness()}};
        r.notes.push_back(std::string("certification failed: ") + e.what());
    } catch (const SelectionError& e) {
        r.certificates["failure"] = {{"what", e.what()}};
        r.notes.push_back(std::string("parameter selection failed: ") + e.what());
    }
    evolve_pair(seq, holes, phi0, psi0, bound, cache, r);
    return r;
}

RunResult run_global(const ExperimentConfig& cfg) {
    if (!cfg.global) throw ConfigError("simulate-global needs a global section");
    const GlobalSettings& gs = *cfg.global;
    RunResult r;
    r.mode = "global";
    r.config_echo = cfg.raw;
    OperatorCache cache;
    const HoleSequence holes = config_holes(cfg, cfg.horizon);
    const GridDensity phi0 = density_from_config(cfg.phi, cfg.grid);
    const GridDensity psi0 = density_from_config(cfg.psi, cfg.grid);

    std::vector<double> s(static_cast<std::size_t>(gs.samples));
    for (int i = 0; i < gs.samples; ++i)
        s[i] = gs.samples == 1 ? gs.t_start : gs.t_start + (gs.t_end - gs.t_start) * i / (gs.samples - 1.0);

    struct Sample {
        double s;
        double xi;
        Certification cert;
    };
    std::vector<Sample> samples;
    nlohmann::json sample_json = nlohmann::json::array();
    std::optional<BoundSpec> bound;
    bool certified = true;
    try {
        for (int i = 0; i < gs.samples; ++i) {
            const MapSpec g = curve_map(gs.curve, s[i]);
            double xi = 0.0;
            for (double cand : gs.xi_ladder) {
                bool ok = true;
                for (int j = -4; j <= 4 && ok; ++j) {
                    double t = std::clamp(s[i] + cand * j / 4.0, gs.t_start, gs.t_end);
                    auto d = perturbation_distance(g, curve_map(gs.curve, t));
                    ok = d && *d < cfg.delta;
                }
                if (ok) {
                    xi = cand;
                    break;
                }
            }
            if (!(xi > 0.0)) {
                std::ostringstream os;
                os.precision(17);
                os << "sample s=" << s[i] << " delta=" << cfg.delta;
                throw CertificationError("no ladder radius keeps the curve within delta", os.str());
            }
            const MapSequence seq = local_sequence(cfg, g, cfg.horizon, 0x9100u + static_cast<std::uint32_t>(i));
            Certification c = certify(cfg, g, seq, holes, cache);
            certified = certified && c.certified();
            sample_json.push_back({{"s", s[i]}, {"xi", xi}, {"certification", c.to_json()}});
            samples.push_back({s[i], xi, std::move(c)});
        }
        double sigma = std::numeric_limits<double>::infinity();
        RateConstants worst{0.0, 0.0, 0.0, 0.0};
        for (const auto& sm : samples) {
            sigma = std::min(sigma, sm.xi / (2.0 * sm.cert.cone.T));
            worst.delta0 = std::max(worst.delta0, sm.cert.constants.delta0);
            worst.lambda = std::max(worst.lambda, sm.cert.constants.lambda);
            worst.c0 = std::max(worst.c0, sm.cert.constants.c0);
            worst.c_lip = std::max(worst.c_lip, sm.cert.constants.c_lip);
        }
        r.sigma_estimate = sigma;
        r.constants = worst;
        bound = BoundSpec{worst.c0, worst.lambda, h_alpha(cfg), cfg.seminorm};
    } catch (const CertificationError& e) {
        r.certificates["failure"] = {{"what", e.what()}, {"witness", e.witness()}};
        r.notes.push_back(std::string("certification failed: ") + e.what());
        certified = false;
    } catch (const SelectionError& e) {
        r.certificates["failure"] = {{"what", e.what()}};
        r.notes.push_back(std::string("parameter selection failed: ") + e.what());
        certified = false;
    }
    r.certificates["samples"] = sample_json;

    double step = 0.0;
    if (gs.step) {
        step = *gs.step;
        if (r.sigma_estimate && step > *r.sigma_estimate * (1.0 + 1e-12))
            throw ConfigError("configured step exceeds the sampled step bound");
    } else {
        if (!r.sigma_estimate)
            throw ConfigError("step \"auto\" needs a certified step bound; " + r.notes.back());
        step = *r.sigma_estimate;
    }
    if (gs.t_start + step * (cfg.horizon - 1) > gs.t_end + 1e-12)
        throw ConfigError("horizon runs past the end of the curve");
    r.certificates["step"] = step;

    MapSequence seq;
    for (int k = 0; k < cfg.horizon; ++k) seq.push_back(curve_map(gs.curve, gs.t_start + step * k));

    if (!samples.empty()) {
        // Realized blocks, each judged with the constants of its nearest sample.
        std::size_t checked = 0, mixing = 0;
        std::size_t st = 0;
        while (true) {
            double t = gs.t_start + step * static_cast<double>(st);
            auto near = std::min_element(samples.begin(), samples.end(), [&](const Sample& a, const Sample& b) {
                return std::fabs(a.s - t) < std::fabs(b.s - t);
            });
            const ConeParams& cp = near->cert.cone;
            if (st + static_cast<std::size_t>(cp.T) > seq.size()) break;
            ++checked;
            if (mixing_ratios(make_block(seq, holes, st, cp.T, cfg.grid, &cache), *cp.partition).within(cp.zeta1, cp.zeta2))
                ++mixing;
            st += static_cast<std::size_t>(cp.T);
        }
        r.certificates["blocks"] = {{"checked", checked}, {"mixing", mixing}};
        if (mixing != checked) {
            certified = false;
            r.notes.push_back("some realized blocks fail the mixing condition");
        }
        audit_density(phi0, samples.front().cert.cone, "phi");
        audit_density(psi0, samples.front().cert.cone, "psi");
    }
    r.verdict.certified = certified && !samples.empty();
    evolve_pair(seq, holes, phi0, psi0, bound, cache, r);
    return r;
}

void write_csv(const RunResult& result, std::ostream& os) {
    os << "m,mass_phi,mass_psi,l1_distance\n";
    char buf[128];
    for (const auto& rec : result.records) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", rec.m, rec.mass_phi, rec.mass_psi, rec.l1_distance);
        os << buf;
    }
}

nlohmann::json summary_json(const RunResult& result) {
    nlohmann::json constants = nlohmann::json::object();
    if (result.constants) constants = result.constants->to_json();
    if (result.sigma_estimate) constants["step_bound"] = *result.sigma_estimate;
    constants["grid_budget"] = result.budget.empty() ? 0.0 : result.budget.back();
    nlohmann::json verdict = result.verdict.to_json();
    verdict["bound"] = result.bound;
    verdict["budget"] = result.budget;
    verdict["notes"] = result.notes;
    return {{"mode", result.mode},
            {"config_echo", result.config_echo},
            {"certificates", result.certificates},
            {"constants", constants},
            {"fit", result.fit ? result.fit->to_json() : nlohmann::json(nullptr)},
            {"verdict", verdict}};
}

void emit_report(const RunResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::ofstream csv(dir / "trajectory.csv");
    if (!csv) throw IoError("cannot write " + (dir / "trajectory.csv").string());
    write_csv(result, csv);
    std::ofstream summary(dir / "summary.json");
    if (!summary) throw IoError("cannot write " + (dir / "summary.json").string());
    summary << summary_json(result).dump(2) << "\n";
    if (!csv || !summary) throw IoError("write failed in " + dir.string());
}

} // namespace nsopen
