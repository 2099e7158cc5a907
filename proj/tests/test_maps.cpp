#include <cmath>
#include <random>
#include <set>

#include <Eigen/SVD>

#include "doctest.h"
#include "gen.hpp"
#include "nsopen/errors.hpp"
#include "nsopen/holes.hpp"
#include "nsopen/maps.hpp"

using namespace nsopen;

TEST_CASE("evaluate") {
    auto d = MapSpec::doubling();
    CHECK(d.evaluate({0.3}).x == doctest::Approx(0.6));
    CHECK(d.evaluate({0.7}).x == doctest::Approx(0.4));
    CHECK_THROWS_AS(d.evaluate({0.5}), BoundaryError);
    CHECK(d.evaluate_half_open({0.5}).x == doctest::Approx(0.0));

    Eigen::Matrix2d A;
    A << 2, 1, 1, 1;
    auto cat = MapSpec::linear_2d(A);
    Point p = cat.evaluate({0.25, 0.5});
    CHECK(p.x == doctest::Approx(0.0));
    CHECK(p.y == doctest::Approx(0.75));
}

TEST_CASE("expansion bound") {
    CHECK(MapSpec::doubling().expansion_bound() == doctest::Approx(0.5));
    auto three = MapSpec::one_dimensional({Branch1D({0.0, 0.4}, AffineFormula{2.0, 0.0}),
                                           Branch1D({0.4, 0.7}, AffineFormula{2.5, 0.0}),
                                           Branch1D({0.7, 1.0}, AffineFormula{3.0, 0.0})});
    CHECK(three.expansion_bound() == doctest::Approx(0.5));
    CHECK(three.is_expanding());

    Eigen::Matrix2d A;
    A << 2, 1, 1, 1;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(A);
    double oracle = 1.0 / svd.singularValues()(1);
    auto cat = MapSpec::linear_2d(A);
    CHECK(cat.expansion_bound() == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(oracle == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0));
    CHECK_FALSE(cat.is_expanding());

    CHECK_THROWS_AS(MapSpec::linear_2d(Eigen::Matrix2d::Zero()), ConstructionError);
}

TEST_CASE("expansion bound of random affine maps is the inverse of the smallest slope") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 30; ++k) {
        auto m = gen::affine_map(rng);
        double smin = 1e9;
        for (const auto& b : m.branches_1d()) smin = std::min(smin, std::fabs(std::get<AffineFormula>(b.formula()).slope));
        CHECK(m.expansion_bound() == doctest::Approx(1.0 / smin).epsilon(1e-12));
    }
}

TEST_CASE("dynamical partition") {
    Grid g(1, 4096);
    auto d = MapSpec::doubling();
    auto p2 = dynamical_partition({d, d}, 2, g);
    CHECK(p2.partition.size() == 4);
    CHECK_FALSE(p2.resolution_warning());
    for (const auto& el : p2.partition.elements()) CHECK(el.size() == 1024);

    auto p1 = dynamical_partition({d}, 1, g);
    CHECK(p1.partition.labels() == d.continuity_partition(g).labels());

    Grid g6(1, 48);
    auto t = MapSpec::full_branch_affine({0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0});
    auto p6 = dynamical_partition({d, t}, 2, g6);
    CHECK(p6.partition.size() == 6);
    for (const auto& el : p6.partition.elements()) CHECK(el.size() == 8);
}

TEST_CASE("itinerary classes match a brute-force orbit oracle") {
    std::mt19937_64 rng(3);
    Grid g(1, 1024);
    for (int trial = 0; trial < 10; ++trial) {
        MapSequence seq{gen::full_branch_map(rng, 2, 0.3), gen::full_branch_map(rng, 3, 0.2)};
        auto dp = dynamical_partition(seq, 2, g);
        std::set<std::pair<std::size_t, std::size_t>> classes;
        for (std::size_t c = 0; c < g.total_cells(); ++c) {
            Point x = g.center(c);
            std::size_t b1 = seq[0].branch_at(x);
            std::size_t b2 = seq[1].branch_at(seq[0].evaluate_half_open(x));
            classes.insert({b1, b2});
        }
        // Unresolved cells straddle a cut and may add classes of their own.
        CHECK(dp.partition.size() >= classes.size());
        CHECK(dp.partition.size() <= classes.size() + dp.unresolved_cells);
    }
}

TEST_CASE("complexity sequence of the doubling map") {
    Grid g(1, 1024);
    auto d = MapSpec::doubling();
    auto k = complexity_sequence({d, d, d, d, d}, HoleSequence::none(1, 5), 5, g);
    REQUIRE(k.size() == 5);
    for (int v : k) CHECK(v == 2);
}

TEST_CASE("balance check") {
    auto ok = balance_check(1.0 / 16.0, 2.0, 1.0, 1);
    CHECK(ok.value == doctest::Approx(0.0625 + (4.0 / 16.0 * 2.0 / (15.0 / 16.0)) * 0.5).epsilon(1e-14));
    CHECK(ok.value == doctest::Approx(0.3292).epsilon(1e-4));
    CHECK(ok.ok);
    auto bad = balance_check(0.5, 2.0, 1.0, 1);
    CHECK(bad.value == doctest::Approx(4.5));
    CHECK_FALSE(bad.ok);
    auto zero = balance_check(0.3, 0.0, 0.5, 2);
    CHECK(zero.value == doctest::Approx(std::pow(0.3, 0.5)));
    CHECK(zero.ok);
    CHECK_THROWS_AS(balance_check(1.0, 2.0, 1.0, 1), InputError);
    CHECK_THROWS_AS(balance_check(0.0, 2.0, 1.0, 1), InputError);

    CHECK(unit_ball_volume(0) == doctest::Approx(1.0));
    CHECK(unit_ball_volume(1) == doctest::Approx(2.0));
    CHECK(unit_ball_volume(2) == doctest::Approx(M_PI));
}

TEST_CASE("perturbation distance") {
    auto d = MapSpec::doubling();
    CHECK(*perturbation_distance(d, d) == 0.0);
    auto shifted = MapSpec::full_branch_affine({0.0, 0.5, 1.0}, 0.01);
    auto pd = perturbation_distance(d, shifted);
    REQUIRE(pd.has_value());
    CHECK(*pd == doctest::Approx(0.01).epsilon(1e-9));
    CHECK_FALSE(perturbation_distance(d, MapSpec::full_branch_affine({0.0, 0.3, 0.6, 1.0})).has_value());
}

TEST_CASE("sampled perturbations stay within delta") {
    std::mt19937_64 rng(99);
    std::vector<MapSpec> bases{MapSpec::doubling(), MapSpec::full_branch_affine({0.0, 0.5, 0.75, 1.0}),
                               MapSpec::quadratic_full_branch(2, 0.2)};
    for (const auto& base : bases)
        for (double delta : {0.001, 0.02, 0.1})
            for (int k = 0; k < 20; ++k) {
                auto p = sample_perturbation(base, delta, rng);
                auto dist = perturbation_distance(base, p);
                REQUIRE(dist.has_value());
                CHECK(*dist < delta);
            }
}

TEST_CASE("map json round trip and config parsing") {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 10; ++k) {
        auto m = gen::affine_map(rng);
        auto back = MapSpec::from_json(m.to_json());
        CHECK(back.fingerprint() == m.fingerprint());
    }
    auto d = map_from_config({{"kind", "doubling"}});
    CHECK(d.fingerprint() == MapSpec::doubling().fingerprint());
    auto cat = map_from_config({{"kind", "affine_2d_matrix"}, {"matrix", {{2, 1}, {1, 1}}}});
    CHECK(cat.dimension() == 2);
    CHECK_THROWS_AS(map_from_config({{"kind", "nope"}}), ConfigError);
}

TEST_CASE("branch domains must tile the circle") {
    CHECK_THROWS_AS(MapSpec::one_dimensional({Branch1D({0.0, 0.4}, AffineFormula{2.0, 0.0}),
                                              Branch1D({0.5, 1.0}, AffineFormula{2.0, 0.0})}),
                    ConstructionError);
}
