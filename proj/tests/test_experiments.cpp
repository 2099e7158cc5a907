#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "nsopen/errors.hpp"
#include "nsopen/experiments.hpp"

using namespace nsopen;
using nlohmann::json;

namespace {

json stationary_config() {
    return {{"seed", 3},
            {"grid", {{"dimension", 1}, {"cells_per_side", 4096}}},
            {"horizon", 40},
            {"base_map", {{"kind", "doubling"}}},
            {"delta", 0.0},
            {"epsilon", 0.0},
            {"phi", {{"kind", "uniform"}}},
            {"psi", {{"kind", "cosine"}, {"amplitude", 0.5}, {"frequency", 1}}},
            {"ly", {{"ensemble_size", 40}}},
            {"mixing", {{"i_max", 12}, {"stability_samples", 2}}},
            {"cone", {{"a_min", 8.0}}}};
}

json open_config() {
    return {{"seed", 5},
            {"grid", {{"dimension", 1}, {"cells_per_side", 1024}}},
            {"horizon", 30},
            {"base_map", {{"kind", "doubling"}}},
            {"delta", 0.02},
            {"epsilon", 0.01},
            {"holes",
             {{"kind", "drifting"},
              {"components", {{{"type", "arc"}, {"start", 0.3}, {"length", 0.01}}}},
              {"velocity", 0.0731}}},
            {"phi", {{"kind", "uniform"}}},
            {"psi", {{"kind", "bump"}, {"center", 0.4}, {"width", 0.25}, {"height", 0.5}}},
            {"ly", {{"ensemble_size", 40}}},
            {"mixing", {{"i_max", 12}, {"stability_samples", 2}}}};
}

std::string csv_of(const RunResult& r) {
    std::ostringstream os;
    write_csv(r, os);
    return os.str();
}

} // namespace

TEST_CASE("exponential fit") {
    std::vector<std::pair<int, double>> planted;
    for (int m = 1; m <= 40; ++m) planted.emplace_back(m, 5.0 * std::pow(0.9, m));
    auto f = fit_exponential(planted);
    CHECK(f.c_fit == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(f.lambda_fit == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f.points == 40);

    std::vector<std::pair<int, double>> flat;
    for (int m = 1; m <= 10; ++m) flat.emplace_back(m, 0.3);
    auto c = fit_exponential(flat);
    CHECK(c.lambda_fit == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.r2 == 1.0);

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
    std::vector<std::pair<int, double>> noisy;
    for (int m = 1; m <= 40; ++m) noisy.emplace_back(m, 5.0 * std::pow(0.9, m) + noise(rng));
    auto n = fit_exponential(noisy);
    CHECK(n.lambda_fit > 0.88);
    CHECK(n.lambda_fit < 0.92);
    CHECK(n.r2 >= 0.0);
    CHECK(n.r2 <= 1.0);

    std::vector<std::pair<int, double>> floored{{1, 1.0}, {2, 0.5}, {3, 0.0}, {4, 1e-16}};
    CHECK_THROWS_AS(fit_exponential(floored), InputError);
}

TEST_CASE("CSV and summary") {
    RunResult empty;
    CHECK(csv_of(empty) == "m,mass_phi,mass_psi,l1_distance\n");

    auto cfg = ExperimentConfig::from_json(open_config());
    auto r = run_local(cfg);
    REQUIRE(r.records.size() == 30);
    auto text = csv_of(r);
    CHECK(std::count(text.begin(), text.end(), '\n') == 31);
    for (std::size_t k = 1; k < r.records.size(); ++k) {
        CHECK(r.records[k].mass_phi <= r.records[k - 1].mass_phi);
        CHECK(r.records[k].mass_psi <= r.records[k - 1].mass_psi);
        CHECK(r.records[k].l1_distance >= 0.0);
    }

    auto summary = summary_json(r);
    for (const char* key : {"config_echo", "certificates", "constants", "fit", "verdict"})
        CHECK(summary.contains(key));
    auto back = json::parse(summary.dump(2));
    CHECK(back == summary);
    if (r.constants) {
        auto rc = RateConstants::from_json(back.at("constants"));
        CHECK(rc.c0 == r.constants->c0);
        CHECK(rc.lambda == r.constants->lambda);
        CHECK(rc.delta0 == r.constants->delta0);
    }

    auto dir = std::filesystem::temp_directory_path() / "nsopen_report_test";
    std::filesystem::remove_all(dir);
    emit_report(r, dir);
    CHECK(std::filesystem::exists(dir / "trajectory.csv"));
    CHECK(std::filesystem::exists(dir / "summary.json"));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(emit_report(r, "/proc/nsopen_cannot_write_here"), IoError);
}

TEST_CASE("identical densities never separate") {
    auto j = open_config();
    j["psi"] = j["phi"];
    auto r = run_local(ExperimentConfig::from_json(j));
    for (const auto& rec : r.records) CHECK(rec.l1_distance == 0.0);
}

TEST_CASE("runs are deterministic") {
    auto cfg = ExperimentConfig::from_json(open_config());
    auto a = run_local(cfg), b = run_local(cfg);
    CHECK(csv_of(a) == csv_of(b));
    CHECK(summary_json(a).dump() == summary_json(b).dump());
    auto j = open_config();
    j["seed"] = 6;
    CHECK(csv_of(run_local(ExperimentConfig::from_json(j))) != csv_of(a));
}

TEST_CASE("stationary closed run matches a dense matrix power") {
    auto j = stationary_config();
    j["grid"]["cells_per_side"] = 256;
    j["base_map"] = {{"kind", "full_branch_affine"}, {"cuts", {0.0, 0.375, 1.0}}, {"shift", 0.1}};
    j["horizon"] = 20;
    auto cfg = ExperimentConfig::from_json(j);
    auto r = run_local(cfg);
    Eigen::MatrixXd P(build_closed(config_base_map(cfg), cfg.grid).matrix());
    auto to_vec = [](const GridDensity& d) { return Eigen::Map<const Eigen::VectorXd>(d.values().data(), d.size()); };
    Eigen::VectorXd phi = to_vec(density_from_config(cfg.phi, cfg.grid));
    Eigen::VectorXd psi = to_vec(density_from_config(cfg.psi, cfg.grid));
    const double h = cfg.grid.cell_measure();
    for (const auto& rec : r.records) {
        phi = P * phi;
        psi = P * psi;
        phi /= phi.sum() * h;
        psi /= psi.sum() * h;
        CHECK(rec.mass_phi == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::fabs(rec.l1_distance - (phi - psi).cwiseAbs().sum() * h) < 1e-12);
    }
}

TEST_CASE("stationary doubling forgets a cosine mode") {
    auto r = run_local(ExperimentConfig::from_json(stationary_config()));
    REQUIRE(r.records.size() == 40);
    for (std::size_t k = 1; k < r.records.size(); ++k)
        CHECK(r.records[k].l1_distance <= 0.5 * r.records[k - 1].l1_distance + 1e-15);
    CHECK(r.records.back().l1_distance < 1e-6);
    REQUIRE(r.constants.has_value());
    CHECK(r.verdict.bound_checked);
    CHECK(r.verdict.pass());
    CHECK(r.exit_code() == 0);
}

TEST_CASE("drifting holes give an exponential fit") {
    auto r = run_local(ExperimentConfig::from_json(open_config()));
    REQUIRE(r.fit.has_value());
    CHECK(r.fit->lambda_fit < 1.0);
    CHECK(r.fit->r2 >= 0.95);
}

TEST_CASE("a constant curve reproduces the stationary local run") {
    auto local_json = stationary_config();
    local_json["horizon"] = 20;
    local_json["grid"]["cells_per_side"] = 1024;
    auto global_json = local_json;
    global_json.erase("base_map");
    global_json["delta"] = 0.01;
    global_json["global"] = {{"curve", {{"kind", "constant"}, {"map", {{"kind", "doubling"}}}}},
                             {"step", "auto"},
                             {"samples", 2}};
    auto l = run_local(ExperimentConfig::from_json(local_json));
    auto g = run_global(ExperimentConfig::from_json(global_json));
    CHECK(csv_of(l) == csv_of(g));
    REQUIRE(g.sigma_estimate.has_value());
    CHECK(*g.sigma_estimate > 0.0);

    global_json["global"]["step"] = 0.5;
    CHECK_THROWS_AS(run_global(ExperimentConfig::from_json(global_json)), ConfigError);
}

TEST_CASE("config validation") {
    auto j = open_config();
    j["epsilon"] = 0.001;
    CHECK_THROWS_AS(run_local(ExperimentConfig::from_json(j)), ConfigError);
    auto k = open_config();
    k["grid"] = {{"dimension", 2}, {"cells_per_side", 32}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(k), ConfigError);
    auto m = open_config();
    m["mixing"]["zeta1"] = 0.0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(m), ConfigError);
    auto n = open_config();
    n.erase("base_map");
    CHECK_THROWS_AS(ExperimentConfig::from_json(n), ConfigError);
    CHECK_THROWS_AS(density_from_config({{"kind", "nope"}}, Grid(1, 8)), ConfigError);
}

TEST_CASE("total escape aborts with the step index") {
    auto j = open_config();
    j["epsilon"] = 1.0;
    j["holes"] = {{"kind", "static"}, {"components", {{{"type", "arc"}, {"start", 0.0}, {"length", 1.0}}}}};
    try {
        run_local(ExperimentConfig::from_json(j));
        FAIL("expected total escape");
    } catch (const TotalEscapeError& e) {
        CHECK(e.step() == 1);
    }
}
