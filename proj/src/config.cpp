#include "nsopen/config.hpp"

#include <cmath>
#include <fstream>

#include "nsopen/errors.hpp"

namespace nsopen {

namespace {

void parse_into(ExperimentConfig& c, const nlohmann::json& j) {
    c.raw = j;
    c.seed = j.value("seed", std::uint64_t{1});
    c.grid = Grid::from_json(j.at("grid"));
    c.horizon = j.value("horizon", 40);
    if (c.horizon < 1) throw ConfigError("horizon must be positive");
    c.base_map = j.value("base_map", nlohmann::json());
    c.delta = j.value("delta", 0.0);
    c.epsilon = j.value("epsilon", 0.0);
    if (c.delta < 0 || c.epsilon < 0) throw ConfigError("delta and epsilon must be nonnegative");
    c.holes = j.value("holes", nlohmann::json{{"kind", "none"}});
    c.phi = j.value("phi", nlohmann::json{{"kind", "uniform"}});
    c.psi = j.value("psi", nlohmann::json{{"kind", "cosine"}, {"amplitude", 0.5}, {"frequency", 1}});
    c.seminorm = j.contains("seminorm") ? Seminorm::from_json(j.at("seminorm")) : Seminorm::total_variation();
    if (c.seminorm.kind == SeminormKind::TotalVariation && c.grid.dimension() != 1)
        throw ConfigError("total variation needs a 1D grid; use the oscillation seminorm");

    if (j.contains("ly")) {
        const auto& l = j.at("ly");
        c.ly.options.T1 = l.value("T1", 1);
        c.ly.options.k_max = l.value("k_max", 4);
        c.ly.options.ensemble_size = l.value("ensemble_size", std::size_t{200});
        c.ly.options.seed = l.value("seed", c.seed);
        c.ly.options.theta_max = l.value("theta_max", 0.9);
        if (l.contains("theta")) c.ly.theta = l.at("theta").get<double>();
        if (l.contains("C")) c.ly.C = l.at("C").get<double>();
        if (c.ly.theta.has_value() != c.ly.C.has_value()) throw ConfigError("ly.theta and ly.C go together");
    } else {
        c.ly.options.seed = c.seed;
    }
    if (c.ly.options.T1 < 1 || c.ly.options.k_max < 1) throw ConfigError("ly.T1 and ly.k_max must be positive");

    if (j.contains("mixing")) {
        const auto& m = j.at("mixing");
        c.mixing.zeta1 = m.value("zeta1", 0.9);
        c.mixing.zeta2 = m.value("zeta2", 1.1);
        c.mixing.i_max = m.value("i_max", 64);
        c.mixing.stability_samples = m.value("stability_samples", std::size_t{20});
        if (m.contains("family")) c.mixing.family = m.at("family").get<std::vector<int>>();
    }
    if (!(c.mixing.zeta1 > 0 && c.mixing.zeta1 < 1 && c.mixing.zeta2 > 1))
        throw ConfigError("mixing constants need 0 < zeta1 < 1 < zeta2");
    if (c.mixing.family.empty())
        for (int k = 2; k <= c.grid.cells_per_side(); k *= 2)
            if (c.grid.cells_per_side() % k == 0) c.mixing.family.push_back(k);
    for (int k : c.mixing.family)
        if (k < 1 || c.grid.cells_per_side() % k != 0)
            throw ConfigError("partition family entries must divide the cells per side");

    if (j.contains("cone")) {
        const auto& k = j.at("cone");
        c.cone.sigma = k.value("sigma", 0.5);
        c.cone.a_min = k.value("a_min", 1.0);
        c.cone.contraction_samples = k.value("contraction_samples", std::size_t{0});
    }

    if (j.contains("global")) {
        const auto& g = j.at("global");
        GlobalSettings gs;
        gs.curve = g.at("curve");
        gs.t_start = g.value("t_start", 0.0);
        gs.t_end = g.value("t_end", 1.0);
        if (!(gs.t_end > gs.t_start)) throw ConfigError("global.t_end must exceed global.t_start");
        if (g.contains("step")) {
            const auto& st = g.at("step");
            if (st.is_string()) {
                if (st.get<std::string>() != "auto") throw ConfigError("global.step must be a number or \"auto\"");
            } else {
                gs.step = st.get<double>();
                if (!(*gs.step > 0)) throw ConfigError("global.step must be positive");
            }
        }
        gs.samples = g.value("samples", 5);
        if (gs.samples < 1) throw ConfigError("global.samples must be positive");
        if (g.contains("xi_ladder")) gs.xi_ladder = g.at("xi_ladder").get<std::vector<double>>();
        c.global = gs;
    }
    if (c.base_map.is_null() && !c.global) throw ConfigError("config needs base_map or a global curve");
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        parse_into(c, j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return from_json(j);
}

GridDensity density_from_config(const nlohmann::json& j, const Grid& grid) {
    std::string kind = j.value("kind", std::string("uniform"));
    if (kind == "uniform") return GridDensity::uniform(grid);
    if (kind == "cosine") {
        double amp = j.value("amplitude", 0.5);
        int freq = j.value("frequency", 1);
        if (!(std::fabs(amp) < 1.0)) throw ConfigError("cosine amplitude must be below 1 in size");
        return GridDensity::from_function(grid, [&](Point p) { return 1.0 + amp * std::cos(2.0 * M_PI * freq * p.x); });
    }
    if (kind == "bump") {
        double center = j.value("center", 0.5), width = j.value("width", 0.25), height = j.value("height", 1.0);
        if (!(width > 0 && width < 1 && height >= 0)) throw ConfigError("bump needs 0 < width < 1 and height >= 0");
        auto inside = [&](double u, double c) { return circle_distance(u, c) < width / 2.0; };
        std::vector<double> v(grid.total_cells());
        for (std::size_t c = 0; c < v.size(); ++c) {
            Point p = grid.center(c);
            bool in = inside(p.x, center) && (grid.dimension() == 1 || inside(p.y, center));
            v[c] = 1.0 + (in ? height : 0.0);
        }
        return GridDensity(grid, std::move(v));
    }
    throw ConfigError("unknown density kind: " + kind);
}

} // namespace nsopen
