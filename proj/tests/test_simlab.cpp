#include "test_support.hpp"

#include "safepl/simlab.hpp"

#include <doctest.h>

#include <cmath>

using namespace safepl;
using namespace safepl::sim;

TEST_CASE("rng: fixed engine output and substream independence") {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    // First mt19937_64 output for seed 5489 is fixed by the standard.
    Rng ref(5489);
    CHECK(ref.next() == 14514284786278117030ull);
    auto s0 = Rng::substream(1, 0), s1 = Rng::substream(1, 1);
    CHECK(s0.next() != s1.next());
    Rng u(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        CHECK(u.below(7) < 7);
    }
}

TEST_CASE("rff: same seed gives identical data, smaller n is a prefix") {
    const auto a = gen_rff_instance(17, 300), b = gen_rff_instance(17, 300), c = gen_rff_instance(17, 120);
    REQUIRE(a.data.size() == 300);
    for (std::size_t i = 0; i < 300; ++i) {
        CHECK(a.data.row(i).x == b.data.row(i).x);
        CHECK(a.data.row(i).outcome == b.data.row(i).outcome);
    }
    for (std::size_t i = 0; i < 120; ++i) {
        CHECK(c.data.row(i).x == a.data.row(i).x);
        CHECK(c.data.row(i).outcome == a.data.row(i).outcome);
    }
    CHECK(a.dgp.omega == c.dgp.omega);
}

TEST_CASE("rff: effect on the logit scale and interior probabilities") {
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        const auto dgp = RffDgp::draw(seed);
        CHECK(dgp.omega.size() == RffDgp::kFeatures);
        for (int x = 0; x < 10; ++x) {
            CHECK(dgp.logit1(x) - dgp.logit0(x) == doctest::Approx(0.5 * (x - 4.5) - 0.8).epsilon(1e-12));
            CHECK(logit(dgp.m(1, x)) - logit(dgp.m(0, x)) == doctest::Approx(0.5 * (x - 4.5) - 0.8).epsilon(1e-9));
            for (int a = 0; a < 2; ++a) {
                CHECK(dgp.m(a, x) > 0.0);
                CHECK(dgp.m(a, x) < 1.0);
            }
        }
    }
}

TEST_CASE("rff: stratum means track the baseline function") {
    const auto inst = gen_rff_instance(3, 100000);
    std::vector<double> s(10, 0), n(10, 0);
    for (const auto& r : inst.data.rows()) {
        s[r.x[0]] += r.outcome;
        n[r.x[0]] += 1;
    }
    for (int x = 0; x < 10; ++x) {
        const double p = inst.dgp.m(x >= 5, x);
        CHECK(std::abs(s[x] / n[x] - p) <= 3 * std::sqrt(p * (1 - p) / n[x]));
        const auto j = *inst.grid.find({x});
        CHECK(inst.truth.at(0, j) == inst.dgp.m(0, x));
        CHECK(inst.baseline.at(j) == (x >= 5));
    }
    CHECK(inst.util.gain_of(1) == 10.0);
    CHECK(inst.util.cost_of(1) == -1.0);
}

TEST_CASE("discrete example: constant intercepts, positive effect and oracle") {
    const auto flat = gen_discrete_example(std::vector<double>(8, -0.4));
    CHECK(flat.lambda_true.at(0) == 0.0);
    CHECK(flat.lambda_true.at(1) == 0.0);

    const auto ex = gen_discrete_example();
    REQUIRE(ex.grid.size() == 20);
    CHECK(ex.intercepts.front() == doctest::Approx(logit(0.15)).epsilon(1e-14));
    CHECK(ex.intercepts.back() == doctest::Approx(logit(0.6)).epsilon(1e-14));
    std::vector<int> oracle;
    for (std::size_t j = 0; j < 20; ++j) {
        CHECK(ex.truth.at(1, j) > ex.truth.at(0, j));
        CHECK(ex.baseline.at(j) == (j >= 10));
        oracle.push_back(ex.truth.at(1, j) > ex.truth.at(0, j) ? 1 : 0);
    }
    CHECK(Policy(oracle) == Policy::constant(20, 1));
    double lam = 0;
    for (std::size_t j = 0; j + 1 < 20; ++j) lam = std::max(lam, std::abs(ex.truth.at(0, j + 1) - ex.truth.at(0, j)));
    CHECK(ex.lambda_true.at(0) == doctest::Approx(lam).epsilon(1e-15));
}

TEST_CASE("two binary example: constraints hold along the whole null space") {
    testsupport::Rng rng(81);
    for (int t = 0; t < 100; ++t) {
        const auto ex = gen_two_binary_example(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
        for (int k = 0; k < 5; ++k) {
            const auto r = ex.residuals(rng.uniform(-5, 5), rng.uniform(-5, 5));
            for (double v : r) CHECK(std::abs(v) <= 1e-12);
        }
        CHECK(ex.baseline == Policy({0, 0, 0, 1}));
    }
    const auto sym = gen_two_binary_example(0.2, 0.5, 0.5, 0.9);
    CHECK(sym.extrapolated_control() == doctest::Approx(2 * 0.5 - 0.2).epsilon(1e-15));
    CHECK_THROWS_AS(gen_two_binary_example(1.2, 0, 0, 0), ConfigError);
}

TEST_CASE("psa: risk factor arithmetic and collapse maps") {
    // Violent offense over 20, pending charge, prior conviction and one prior
    // violent conviction: 2 + 1 + 1 + 1 = 5 points.
    int points = 0;
    const std::array<int, 7> f{1, 0, 1, 1, 1, 0, 0};
    for (std::size_t k = 0; k < 7; ++k) points += kNvcaWeights[k] * f[k];
    CHECK(points == 5);
    CHECK(points >= kNvcaThreshold);
    CHECK(fta_level(7) == 6);
    CHECK(fta_level(0) == 1);
    CHECK(nca_level(13) == 6);
    CHECK_THROWS_AS(fta_level(8), DataError);

    const auto s = gen_psa_like(5, 2000);
    for (const auto& r : s.records) {
        int p = 0;
        for (std::size_t k = 0; k < 7; ++k) p += kNvcaWeights[k] * r.factors[k];
        CHECK(p == r.nvca_points);
        CHECK(r.flag == (p >= 4));
        CHECK(r.fta == fta_level(r.fta_raw));
        CHECK(r.nca == nca_level(r.nca_raw));
        CHECK(r.dmf == ((r.fta >= 5 || r.nca >= 5) || r.flag));
        CHECK((r.factors[1] <= r.factors[0]));
    }
}

TEST_CASE("psa: datasets satisfy the baseline invariant and are deterministic") {
    const auto a = gen_psa_like(9, 3000), b = gen_psa_like(9, 3000);
    const auto pa = a.nvca_points(), pb = b.nvca_points();
    REQUIRE(pa.size() == 3000);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa.row(i).outcome == pb.row(i).outcome);
        CHECK(pa.row(i).decision == pb.row(i).decision);
    }
    CHECK_NOTHROW(a.nvca_factors());
    const auto dmf = a.dmf();
    for (const auto& r : dmf.rows()) CHECK(r.action == (r.x[0] >= 5 || r.x[1] >= 5));
    const auto tau = a.effect_by_points();
    CHECK(tau.grid_size() == 8);
}

TEST_CASE("psa: default calibration at n = 100000") {
    const auto s = gen_psa_like(2024, 100000);
    double flag = 0, cash = 0, nvca = 0;
    for (const auto& r : s.records) {
        flag += r.flag;
        cash += r.cash;
        nvca += r.nvca;
    }
    const double n = static_cast<double>(s.records.size());
    CHECK(flag / n == doctest::Approx(0.16).epsilon(0.15));
    CHECK(std::abs((1 - cash / n) - 1410.0 / 1891.0) <= 0.03);
    CHECK(std::abs(nvca / n - 109.0 / 1891.0) <= 0.01);
    MESSAGE("flag " << flag / n << ", signature bond " << 1 - cash / n << ", nvca " << nvca / n);
}
