#include <cmath>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "nsopen/errors.hpp"
#include "nsopen/mixing.hpp"

using namespace nsopen;

namespace {

// λ(J1 ∩ F^{-1} J2) from a dense product of the block matrices.
Eigen::MatrixXd dense_masses(const Block& block, const PartitionSpec& Q) {
    const auto n = static_cast<Eigen::Index>(Q.grid().total_cells());
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
    for (const auto& op : block) P = Eigen::MatrixXd(op->matrix()) * P;
    Eigen::MatrixXd out(Q.size(), Q.size());
    for (std::size_t a = 0; a < Q.size(); ++a) {
        Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
        for (auto c : Q.element(a)) ind(static_cast<Eigen::Index>(c)) = 1.0;
        Eigen::VectorXd img = P * ind;
        for (std::size_t b = 0; b < Q.size(); ++b) {
            double s = 0.0;
            for (auto c : Q.element(b)) s += img(static_cast<Eigen::Index>(c));
            out(a, b) = s * Q.grid().cell_measure();
        }
    }
    return out;
}

} // namespace

TEST_CASE("doubling on halves mixes in one step") {
    Grid g(1, 64);
    auto r = mixing_ratios(MapSpec::doubling(), PartitionSpec::uniform(g, 2), 1);
    CHECK(r.min_ratio == 1.0);
    CHECK(r.max_ratio == 1.0);
    auto m = transition_masses(power_block(MapSpec::doubling(), 1, g), PartitionSpec::uniform(g, 2));
    CHECK(m(0, 0) == 0.25);
    CHECK(m(1, 0) == 0.25);
}

TEST_CASE("dyadic self-similarity") {
    Grid g(1, 4096);
    auto d = MapSpec::doubling();
    OperatorCache cache;
    for (int n = 1; n <= 4; ++n) {
        auto Q = PartitionSpec::uniform(g, 1 << n);
        for (int i = n; i <= 12; ++i) {
            auto r = mixing_ratios(d, Q, i, &cache);
            CHECK(r.min_ratio == 1.0);
            CHECK(r.max_ratio == 1.0);
        }
        if (n > 1) CHECK(mixing_ratios(d, Q, n - 1, &cache).min_ratio == 0.0);
        auto cert = find_mixing_time(d, Q, 0.9, 1.1, 12, &cache);
        REQUIRE(cert.has_value());
        CHECK(cert->E == n);
    }
}

TEST_CASE("translations never mix") {
    Grid g(1, 64);
    auto t = MapSpec::translation(0.5);
    auto Q = PartitionSpec::uniform(g, 2);
    for (int i = 1; i <= 6; ++i) CHECK(mixing_ratios(t, Q, i).min_ratio == 0.0);
    CHECK_FALSE(find_mixing_time(t, Q, 0.9, 1.1, 16).has_value());
    CHECK_THROWS_AS(find_mixing_time(MapSpec::doubling(), Q, 0.0, 1.1, 4), InputError);
    CHECK_THROWS_AS(find_mixing_time(MapSpec::doubling(), Q, 0.9, 1.0, 4), InputError);
}

TEST_CASE("transition masses match a dense matrix oracle") {
    std::mt19937_64 rng(13);
    Grid g(1, 128);
    for (int trial = 0; trial < 8; ++trial) {
        MapSequence seq;
        std::vector<HoleSpec> hs;
        for (int k = 0; k < 3; ++k) {
            seq.push_back(gen::affine_map(rng));
            hs.push_back(HoleSpec(1, {HoleArc{gen::uniform(rng, 0, 1), gen::uniform(rng, 0, 0.1)}}));
        }
        std::vector<int> labels(g.total_cells());
        for (auto& l : labels) l = gen::integer(rng, 0, 4);
        auto Q = PartitionSpec::from_labels(g, labels);
        auto block = make_block(seq, HoleSequence(1, hs), 0, 3, g);
        Eigen::MatrixXd ours = transition_masses(block, Q);
        CHECK((ours - dense_masses(block, Q)).cwiseAbs().maxCoeff() < 1e-14);
        auto r = ratios_from_masses(ours, Q);
        auto direct = mixing_ratios(block, Q);
        CHECK(r.min_ratio == doctest::Approx(direct.min_ratio).epsilon(1e-14));
        CHECK(r.max_ratio == doctest::Approx(direct.max_ratio).epsilon(1e-14));
    }
}

TEST_CASE("closed blocks preserve total transition mass") {
    std::mt19937_64 rng(14);
    Grid g(1, 256);
    auto Q = PartitionSpec::uniform(g, 8);
    for (int trial = 0; trial < 8; ++trial) {
        auto block = power_block(gen::affine_map(rng), 3, g);
        CHECK(block.size() == 3);
        auto m = transition_masses(block, Q);
        for (Eigen::Index a = 0; a < m.rows(); ++a) CHECK(m.row(a).sum() == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
    }
}

TEST_CASE("stability check") {
    Grid g(1, 1024);
    auto d = MapSpec::doubling();
    auto Q = PartitionSpec::uniform(g, 4);
    auto base = stability_check(d, Q, 0.9, 1.1, 4, 0.01, 0.005, 50, 11);
    CHECK(base.ok);
    CHECK(base.violations.empty());
    CHECK(base.samples == 50);

    auto huge = stability_check(d, Q, 0.9, 1.1, 4, 0.0, 0.4, 10, 11);
    CHECK_FALSE(huge.ok);
    CHECK_FALSE(huge.violations.empty());
    CHECK(huge.worst_min < 0.9);
}

TEST_CASE("degenerate stability agrees with the mixing time") {
    Grid g(1, 256);
    std::mt19937_64 rng(19);
    std::vector<MapSpec> maps{MapSpec::doubling(), MapSpec::translation(0.25),
                              MapSpec::full_branch_affine({0.0, 0.5, 0.75, 1.0})};
    for (int k = 0; k < 3; ++k) maps.push_back(gen::affine_map(rng));
    for (const auto& m : maps) {
        for (int parts : {2, 4, 8}) {
            auto Q = PartitionSpec::uniform(g, parts);
            auto cert = find_mixing_time(m, Q, 0.9, 1.1, 8);
            for (int S = 1; S <= 8; ++S) {
                auto st = stability_check(m, Q, 0.9, 1.1, S, 0.0, 0.0, 1, 3);
                CHECK(st.ok == mixing_ratios(m, Q, S).within(0.9, 1.1));
                if (cert && S >= cert->E) CHECK(st.ok);
            }
        }
    }
}

TEST_CASE("sampled holes respect the cap") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        for (int dim : {1, 2}) {
            double eps = gen::uniform(rng, 0.0, 0.2);
            auto h = sample_hole(dim, eps, rng);
            CHECK(h.measure() <= eps + 1e-15);
        }
    }
    CHECK(sample_hole(1, 0.0, rng).is_empty());
}
