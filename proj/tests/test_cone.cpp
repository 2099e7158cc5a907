#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "nsopen/cone.hpp"
#include "nsopen/errors.hpp"
#include "nsopen/mixing.hpp"

using namespace nsopen;

namespace {

std::vector<PartitionSpec> dyadic_family(const Grid& g) {
    std::vector<PartitionSpec> out;
    for (int k = 2; k <= g.cells_per_side(); k *= 2) out.push_back(PartitionSpec::uniform(g, k));
    return out;
}

ConeParams halves_params(const Grid& g, double a) {
    ConeParams cp;
    cp.a = a;
    cp.sigma = 0.5;
    cp.zeta1 = 0.9;
    cp.zeta2 = 1.1;
    cp.partition = std::make_shared<const PartitionSpec>(PartitionSpec::uniform(g, 2));
    cp.diameter = 0.5;
    return cp;
}

ConeParams doubling_params(const Grid& g) {
    SelectionInputs in;
    in.theta_ly = 0.5;
    in.c_ly = 0.0;
    auto d = MapSpec::doubling();
    return select_parameters(in, Seminorm::total_variation(), dyadic_family(g), [&](const PartitionSpec& Q) {
        auto cert = find_mixing_time(d, Q, 0.9, 1.1, 12);
        return cert ? std::optional<int>(cert->E) : std::nullopt;
    });
}

} // namespace

TEST_CASE("projective diameter") {
    const double expected = 2.0 * std::log(3.0) + 2.0 * std::log(1.5);
    CHECK(delta0(0.5, 0.9, 1.1, 1.0 / 11.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(3.008).epsilon(1e-3));
    CHECK_THROWS_AS(delta0(0.0, 1.0, 1.0, 0.0), InvalidParametersError);
    CHECK_THROWS_AS(delta0(0.5, 0.9, 1.1, 1.0), InvalidParametersError);

    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
        double z1 = gen::uniform(rng, 0.1, 0.99), z2 = gen::uniform(rng, 1.01, 3.0);
        double x_max = z1 / z2;
        double x0 = gen::uniform(rng, 0.0, 0.9 * x_max), x1 = gen::uniform(rng, x0, x_max);
        if (x1 <= x0) continue;
        CHECK(delta0(0.5, z1, z2, x0) < delta0(0.5, z1, z2, x1));
    }
}

TEST_CASE("Birkhoff factor and Lipschitz constant") {
    CHECK(birkhoff_factor(0.0) == 0.0);
    CHECK(birkhoff_factor(3.008) == doctest::Approx(std::tanh(0.752)).epsilon(1e-14));
    CHECK(birkhoff_factor(3.008) == doctest::Approx(0.6364).epsilon(1e-4));
    CHECK(birkhoff_factor(std::numeric_limits<double>::infinity()) == 1.0);
    CHECK_THROWS_AS(birkhoff_factor(-1.0), InputError);

    CHECK(c_lip(0.9, 1.1, 1.0 / 11.0) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(c_lip(0.9, 1.1, 0.0) == doctest::Approx(2.0 / 0.9));
    CHECK_THROWS_AS(c_lip(0.9, 1.1, 1.0), InvalidParametersError);
}

TEST_CASE("rate constants") {
    auto rc = rate_constants(3.008, 2.5, 8);
    CHECK(rc.lambda == doctest::Approx(std::pow(std::tanh(0.752), 1.0 / 8.0)).epsilon(1e-14));
    CHECK(rc.lambda == doctest::Approx(0.9452).epsilon(1e-4));
    CHECK(rc.c0 == doctest::Approx(2.5 * 3.008 * std::exp(3.008) / std::pow(std::tanh(0.752), 2)).epsilon(1e-13));
    CHECK(rc.c0 == doctest::Approx(376.0).epsilon(2e-3));
    double prev = 0.0;
    for (int T : {1, 10, 100, 1000, 100000}) {
        double l = rate_constants(3.008, 2.5, T).lambda;
        CHECK(l > prev);
        CHECK(l < 1.0);
        prev = l;
    }
    CHECK(prev > 0.99999);
    auto back = RateConstants::from_json(rc.to_json());
    CHECK(back.c0 == rc.c0);
    CHECK(back.lambda == rc.lambda);
    CHECK_THROWS_AS(rate_constants(0.0, 2.5, 8), InvalidParametersError);
}

TEST_CASE("Hilbert distance bound") {
    Grid g(1, 64);
    auto cp = halves_params(g, 10.0);
    auto u = GridDensity::uniform(g);
    CHECK(hilbert_distance_bound(u, u, cp) == doctest::Approx(2.0 * std::log(3.0)));
    std::vector<double> v(64, 0.75);
    for (int c = 0; c < 32; ++c) v[c] = 1.5;
    GridDensity psi(g, v);
    double expected = 2.0 * std::log(3.0) + std::log(1.5) - std::log(0.75);
    CHECK(hilbert_distance_bound(u, psi, cp) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(2.890).epsilon(1e-3));
    CHECK(hilbert_distance_bound(psi, u, cp) == doctest::Approx(expected).epsilon(1e-14));

    auto narrow = halves_params(g, 1.0);
    CHECK_THROWS_AS(hilbert_distance_bound(u, psi, narrow), PreconditionError);
}

TEST_CASE("normalized cone densities are close in L1 when the Hilbert bound is small") {
    Grid g(1, 256);
    auto cp = doubling_params(g);
    auto pool = sample_cone_densities(*cp.partition, cp.sigma * cp.a, cp.seminorm, 40, 5);
    for (std::size_t k = 0; k + 1 < pool.size(); k += 2) {
        auto p = normalize(pool[k]), q = normalize(pool[k + 1]);
        double d = hilbert_distance_bound(p, q, cp);
        CHECK(l1_distance(p, q) <= std::exp(d) - 1.0);
    }
}

TEST_CASE("parameter selection follows the ordered procedure") {
    Grid g(1, 256);
    SelectionInputs in;
    in.theta_ly = 0.5;
    in.c_ly = 1.0;
    int calls = 0;
    auto cp = select_parameters(in, Seminorm::total_variation(), dyadic_family(g), [&](const PartitionSpec&) {
        ++calls;
        return std::optional<int>(2);
    });
    CHECK(calls == 1);
    CHECK(cp.T == 3);
    CHECK(cp.a == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(1.1 * cp.a * cp.diameter / cp.M <= 0.45);
    CHECK(cp.partition->size() == 32);
    CHECK(audit_parameters(cp).ok());

    auto late = select_parameters(in, Seminorm::total_variation(), dyadic_family(g),
                                  [](const PartitionSpec&) { return std::optional<int>(5); });
    CHECK(late.T == 5);

    in.theta_ly = 0.1;
    auto quick = select_parameters(in, Seminorm::total_variation(), dyadic_family(g),
                                   [](const PartitionSpec&) { return std::optional<int>(1); });
    CHECK(quick.T == 1);

    in.theta_ly = 0.5;
    in.c_ly = 0.0;
    in.a_min = 1.0;
    auto edge = select_parameters(in, Seminorm::total_variation(), dyadic_family(g),
                                  [](const PartitionSpec&) { return std::optional<int>(1); });
    CHECK(edge.a == 1.0);

    in.c_ly = 1e4;
    CHECK_THROWS_AS(select_parameters(in, Seminorm::total_variation(), dyadic_family(Grid(1, 16)),
                                      [](const PartitionSpec&) { return std::optional<int>(1); }),
                    SelectionError);
    in.c_ly = 1.0;
    CHECK_THROWS_AS(select_parameters(in, Seminorm::total_variation(), dyadic_family(g),
                                      [](const PartitionSpec&) { return std::optional<int>(); }),
                    SelectionError);
    in.zeta1 = 0.0;
    CHECK_THROWS_AS(select_parameters(in, Seminorm::total_variation(), dyadic_family(g),
                                      [](const PartitionSpec&) { return std::optional<int>(1); }),
                    InputError);
}

TEST_CASE("selected parameters always pass the audit") {
    std::mt19937_64 rng(23);
    Grid g(1, 4096);
    auto family = dyadic_family(g);
    int selected = 0;
    for (int k = 0; k < 100; ++k) {
        SelectionInputs in;
        in.zeta1 = gen::uniform(rng, 0.3, 0.99);
        in.zeta2 = gen::uniform(rng, 1.01, 2.0);
        in.theta_ly = gen::uniform(rng, 0.05, 0.95);
        in.c_ly = gen::uniform(rng, 0.0, 1.0) < 0.2 ? 0.0 : std::pow(10.0, gen::uniform(rng, -3, 2));
        in.T1 = gen::integer(rng, 1, 3);
        in.sigma = gen::uniform(rng, 0.1, 0.9);
        int E = gen::integer(rng, 1, 20);
        try {
            auto cp = select_parameters(in, Seminorm::total_variation(), family,
                                        [&](const PartitionSpec&) { return std::optional<int>(E); });
            ++selected;
            CHECK(audit_parameters(cp).ok());
            CHECK(cp.T % in.T1 == 0);
            CHECK(cp.T >= E);
            CHECK(in.zeta2 * cp.x() <= in.zeta1 / 2.0);
        } catch (const SelectionError&) {
        }
    }
    CHECK(selected > 50);
}

TEST_CASE("rate constants from cone parameters") {
    Grid g(1, 256);
    auto cp = doubling_params(g);
    auto rc = rate_constants(cp);
    CHECK(rc.delta0 == doctest::Approx(delta0(cp.sigma, cp.zeta1, cp.zeta2, cp.x())));
    CHECK(rc.c_lip == doctest::Approx(c_lip(cp)));
    CHECK(rc.lambda < 1.0);

    auto broken = cp;
    broken.a = 1e-3;
    broken.c_ly = 1.0;
    CHECK_FALSE(audit_parameters(broken).ok());
    CHECK_THROWS_AS(rate_constants(broken), InvalidParametersError);

    auto back = ConeParams::from_json(cp.to_json());
    CHECK(back.a == cp.a);
    CHECK(back.T == cp.T);
    CHECK(back.partition->labels() == cp.partition->labels());
}

TEST_CASE("sampled cone densities") {
    Grid g(1, 256);
    auto Q = PartitionSpec::uniform(g, 8);
    for (auto s : {Seminorm::total_variation(), Seminorm::oscillation(1.0, 0.05)}) {
        auto a = sample_cone_densities(Q, 3.0, s, 30, 4);
        auto b = sample_cone_densities(Q, 3.0, s, 30, 4);
        REQUIRE(a.size() == 30);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(cone_member(a[k], 3.0, Q, s).member);
            CHECK(a[k].values() == b[k].values());
        }
    }
}

TEST_CASE("cone contraction on the doubling block") {
    Grid g(1, 256);
    auto cp = doubling_params(g);
    auto d = MapSpec::doubling();
    MapSequence seq(cp.T, d);
    auto holes = HoleSequence::none(1, cp.T);
    auto r = verify_cone_contraction(seq, holes, 0, cp, 100, 8);
    CHECK(r.ok);
    CHECK(r.samples == 100);
    CHECK(r.worst_ratio <= cp.sigma);
    CHECK_FALSE(r.witness.has_value());

    auto broken = cp;
    broken.a = 1e-3;
    broken.c_ly = 1.0;
    CHECK_THROWS_AS(verify_cone_contraction(seq, holes, 0, broken, 10, 8), PreconditionError);
}
