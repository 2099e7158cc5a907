#include <cmath>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "nsopen/errors.hpp"
#include "nsopen/holes.hpp"

using namespace nsopen;

namespace {

// Orbit of the cell center, exact in binary for the doubling map on a dyadic grid.
bool orbit_survives_left_hole(double x, int m) {
    for (int i = 0; i < m; ++i) {
        x = 2.0 * x;
        x -= std::floor(x);
        if (x < 0.5) return false;
    }
    return true;
}

} // namespace

TEST_CASE("hole geometry") {
    HoleSpec arc(1, {HoleArc{0.9, 0.2}});
    CHECK(arc.measure() == doctest::Approx(0.2));
    CHECK(arc.contains({0.95}));
    CHECK(arc.contains({0.05}));
    CHECK_FALSE(arc.contains({0.5}));
    CHECK(arc.grid_measure(Grid(1, 10)) == doctest::Approx(0.2));

    HoleSpec rect(2, {HoleRect{0.75, 0.0, 0.5, 0.25}});
    CHECK(rect.measure() == doctest::Approx(0.125));
    CHECK(rect.contains({0.1, 0.1}));
    CHECK(rect.grid_measure(Grid(2, 8)) == doctest::Approx(0.125));

    HoleSpec disk(2, {HoleDisk{0.5, 0.5, 0.1}});
    CHECK(disk.measure() == doctest::Approx(M_PI * 0.01));

    HoleSpec partial(1, {HoleArc{0.05, 0.1}});
    Grid g(1, 10);
    CHECK(partial.cell_coverage(0, g) == doctest::Approx(0.5));
    CHECK(partial.cell_coverage(1, g) == doctest::Approx(0.5));
    CHECK(partial.cell_coverage(2, g) == 0.0);

    CHECK(HoleSpec::empty(1).measure() == 0.0);
    CHECK(HoleSpec::whole(1).measure() == doctest::Approx(1.0));

    auto moved = arc.shifted(0.2, 0.0);
    CHECK(moved.contains({0.15}));
    CHECK(HoleSpec::from_json(arc.to_json(), 1).fingerprint() == arc.fingerprint());
}

TEST_CASE("hole schedules") {
    HoleSpec base(1, {HoleArc{0.3, 0.01}});
    auto seq = HoleSequence::drifting(base, 0.1, 0.0, 5);
    REQUIRE(seq.size() == 5);
    CHECK(seq[0].contains({0.305}));
    CHECK(seq[2].contains({0.505}));
    CHECK(seq.max_measure() == doctest::Approx(0.01));
    CHECK(seq.slice(2, 2).size() == 2);

    auto cfg = holes_from_config({{"kind", "drifting"},
                                  {"components", {{{"type", "arc"}, {"start", 0.3}, {"length", 0.01}}}},
                                  {"velocity", 0.1}},
                                 1, 5);
    CHECK(cfg[4].fingerprint() == seq[4].fingerprint());
    CHECK_THROWS_AS(holes_from_config({{"kind", "sometimes"}}, 1, 3), ConfigError);
}

TEST_CASE("dyadic survivor measures") {
    Grid g(1, 4096);
    auto d = MapSpec::doubling();
    MapSequence seq(10, d);
    auto holes = HoleSequence::constant(HoleSpec(1, {HoleArc{0.0, 0.5}}), 10);
    for (int m = 1; m <= 10; ++m) {
        auto s = survivor_indicator(seq, holes, m, g);
        CHECK(s.measure == std::ldexp(1.0, -m));
        for (std::size_t c = 0; c < g.total_cells(); ++c)
            CHECK(static_cast<bool>(s.alive[c]) == orbit_survives_left_hole(g.center(c).x, m));
    }
}

TEST_CASE("survivors without holes and with the whole space") {
    Grid g(1, 64);
    auto d = MapSpec::doubling();
    auto s = survivor_indicator({d, d, d}, HoleSequence::none(1, 3), 3, g);
    CHECK(s.measure == 1.0);
    for (char a : s.alive) CHECK(a);
    CHECK(survivor_measure({d}, HoleSequence::constant(HoleSpec::whole(1), 1), 1, g) == 0.0);
    CHECK_THROWS_AS(survivor_measure({d}, HoleSequence::none(1, 1), 2, g), InputError);
}

TEST_CASE("one-step survivors of full-branch maps lose the hole measure") {
    Grid aligned(1, 64);
    auto f = MapSpec::full_branch_affine({0.0, 0.25, 1.0});
    auto h = HoleSequence::constant(HoleSpec(1, {HoleArc{0.5, 0.25}}), 1);
    CHECK(survivor_measure({f}, h, 1, aligned) == doctest::Approx(0.75).epsilon(1e-15));

    std::mt19937_64 rng(12);
    Grid g(1, 2048);
    for (int k = 0; k < 20; ++k) {
        auto map = gen::full_branch_map(rng, gen::integer(rng, 2, 4), 0.15);
        double p = gen::uniform(rng, 0.001, 0.2);
        auto hs = HoleSequence::constant(HoleSpec(1, {HoleArc{gen::uniform(rng, 0, 1), p}}), 1);
        auto s = survivor_indicator({map}, hs, 1, g);
        CHECK(std::fabs(s.measure - (1.0 - p)) <= s.straddling_measure + 1e-12);
    }
}

TEST_CASE("survivor sets shrink with m") {
    std::mt19937_64 rng(44);
    Grid g(1, 1024);
    MapSequence seq;
    for (int k = 0; k < 6; ++k) seq.push_back(gen::full_branch_map(rng, 3, 0.2));
    auto holes = HoleSequence::drifting(HoleSpec(1, {HoleArc{0.1, 0.05}}), 0.13, 0.0, 6);
    double prev = 1.0;
    for (int m = 1; m <= 6; ++m) {
        double now = survivor_measure(seq, holes, m, g);
        CHECK(now <= prev);
        prev = now;
    }
}
