#include <cmath>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "nsopen/errors.hpp"
#include "nsopen/phase.hpp"

using namespace nsopen;

namespace {

double circ(double a, double b) {
    double d = std::fabs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

// Brute force over cell corners.
double corner_diam(const CellSet& cells, const Grid& g) {
    const double h = g.cell_width();
    std::vector<std::pair<double, double>> pts;
    for (auto c : cells)
        for (int dx = 0; dx < 2; ++dx)
            for (int dy = 0; dy < (g.dimension() == 2 ? 2 : 1); ++dy)
                pts.emplace_back((g.ix(c) + dx) * h, (g.iy(c) + dy) * h);
    double best = 0.0;
    for (auto& p : pts)
        for (auto& q : pts) best = std::max(best, std::hypot(circ(p.first, q.first), circ(p.second, q.second)));
    return best;
}

// Brute force on a fine sample of both intervals.
double sampled_hausdorff(Interval a, Interval b) {
    auto directed = [](Interval s, Interval t) {
        double worst = 0.0;
        for (int k = 0; k <= 2000; ++k) {
            double x = s.lo + (s.hi - s.lo) * k / 2000.0;
            double d = x < t.lo ? t.lo - x : (x > t.hi ? x - t.hi : 0.0);
            worst = std::max(worst, d);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

} // namespace

TEST_CASE("measure counts cells") {
    Grid g8(1, 8);
    CellSet all{0, 1, 2, 3, 4, 5, 6, 7};
    CHECK(measure(all, g8) == 1.0);
    CHECK(measure({}, g8) == 0.0);
    CHECK(measure({1, 4, 7}, Grid(1, 10)) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(measure({8}, g8), InputError);
}

TEST_CASE("measure diameter") {
    CHECK(diam_lambda(PartitionSpec::uniform(Grid(1, 8), 4)) == 0.25);
    Grid g10(1, 10);
    auto p = PartitionSpec::from_labels(g10, {0, 0, 0, 0, 0, 1, 1, 1, 2, 2});
    CHECK(diam_lambda(p) == doctest::Approx(0.5));
    CHECK(diam_lambda(PartitionSpec::uniform(Grid(2, 4), 2)) == 0.25);
}

TEST_CASE("metric diameter") {
    Grid g(1, 16);
    CHECK(metric_diam(PartitionSpec::uniform(g, 2)) == doctest::Approx(0.5));
    CHECK(metric_diam(PartitionSpec::uniform(g, 1)) == doctest::Approx(0.5));
    CHECK(metric_diam(PartitionSpec::uniform(Grid(2, 4), 2)) == doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("metric diameter matches brute force on random cell sets") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        Grid g(trial % 2 ? 2 : 1, trial % 2 ? 8 : 32);
        CellSet cells;
        for (std::size_t c = 0; c < g.total_cells(); ++c)
            if (gen::uniform(rng, 0, 1) < 0.15) cells.push_back(c);
        if (cells.empty()) cells.push_back(0);
        CHECK(metric_diam(cells, g) == doctest::Approx(corner_diam(cells, g)).epsilon(1e-12));
    }
}

TEST_CASE("interval Hausdorff distance") {
    CHECK(hausdorff_distance(Interval{0, 0.5}, Interval{0.1, 0.6}) == doctest::Approx(0.1));
    CHECK(hausdorff_distance(Interval{0.2, 0.3}, Interval{0.2, 0.3}) == 0.0);
    CHECK(hausdorff_distance(Interval{0, 0.25}, Interval{0, 0.5}) == doctest::Approx(sampled_hausdorff({0, 0.25}, {0, 0.5})));
    CHECK(hausdorff_distance(Interval{0, 0.25}, Interval{0, 0.5}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(hausdorff_distance(Interval{0.5, 0.1}, Interval{0, 1}), InputError);
}

TEST_CASE("Hausdorff distance is a symmetric nonnegative function") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        double a0 = gen::uniform(rng, 0, 1), a1 = a0 + gen::uniform(rng, 0, 1);
        double b0 = gen::uniform(rng, 0, 1), b1 = b0 + gen::uniform(rng, 0, 1);
        Interval A{a0, a1}, B{b0, b1};
        double d = hausdorff_distance(A, B);
        CHECK(d >= 0.0);
        CHECK(d == hausdorff_distance(B, A));
        CHECK(d == doctest::Approx(sampled_hausdorff(A, B)).epsilon(1e-3));
    }
    Grid g(2, 8);
    CellSet a{0, 1, 9}, b{0, 1, 9};
    CHECK(hausdorff_distance(a, b, g) == 0.0);
    CHECK(hausdorff_distance(a, CellSet{2}, g) > 0.0);
    CHECK_THROWS_AS(hausdorff_distance(CellSet{}, b, g), InputError);
}

TEST_CASE("partition complexity") {
    for (int k : {2, 4, 8}) CHECK(partition_complexity(PartitionSpec::uniform(Grid(1, 16), k)) == 2);
    CHECK(partition_complexity(PartitionSpec::uniform(Grid(2, 8), 2)) == 8);
    CHECK(partition_complexity(PartitionSpec::uniform(Grid(1, 16), 1)) == 0);
}

TEST_CASE("partition json round trip") {
    auto p = PartitionSpec::from_labels(Grid(1, 10), {0, 0, 1, 1, 1, 2, 2, 0, 0, 0});
    auto q = PartitionSpec::from_json(p.to_json());
    CHECK(q.size() == p.size());
    CHECK(q.labels() == p.labels());
    CHECK(q.grid() == p.grid());
}
