#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "refract/levy_model.hpp"

using namespace refract;
using cd = std::complex<double>;

namespace {

LevyModel make_model(double gamma, double sigma, std::vector<JumpTerm> terms = {}) {
    LevyModel m;
    m.gamma = gamma;
    m.sigma = sigma;
    m.jumps.terms = std::move(terms);
    return m;
}

JumpTerm point_mass(JumpSide side, double rate, double size) {
    JumpTerm t;
    t.side = side;
    t.rate = rate;
    t.kind = JumpKind::point_mass;
    t.size = size;
    return t;
}

JumpTerm exponential(JumpSide side, double rate, double decay) {
    JumpTerm t;
    t.side = side;
    t.rate = rate;
    t.kind = JumpKind::exponential;
    t.decay = decay;
    return t;
}

// Bounded-variation form of the exponent: -i delta lam + sum over terms of
// int (1 - e^{i lam z}) Pi(dz), with delta the natural drift. Independent
// recomputation used as an oracle against the compensated form.
cd bv_exponent(const LevyModel& m, double lam) {
    const cd i(0.0, 1.0);
    cd psi = -i * m.natural_drift() * lam + 0.5 * m.sigma * m.sigma * lam * lam;
    for (const auto& t : m.jumps.terms) {
        if (t.kind == JumpKind::point_mass) {
            psi += t.rate * (1.0 - std::exp(i * lam * t.sign() * t.size));
        } else {
            // int_0^inf (1 - e^{+-i lam z}) eta e^{-eta z} dz = 1 - eta/(eta -+ i lam)
            psi += t.rate * (1.0 - t.decay / (t.decay - t.sign() * i * lam));
        }
    }
    return psi;
}

}  // namespace

TEST_CASE("characteristic exponent closed forms") {
    // pure Gaussian: Psi(lam) = lam^2/2
    CHECK(characteristic_exponent(make_model(0.0, 1.0), 2.0).real() == doctest::Approx(2.0));
    CHECK(characteristic_exponent(make_model(0.0, 1.0), 2.0).imag() == doctest::Approx(0.0));

    // pure drift gamma=1: Psi(1) = -i
    const cd drift = characteristic_exponent(make_model(1.0, 0.0), 1.0);
    CHECK(drift.real() == doctest::Approx(0.0));
    CHECK(drift.imag() == doctest::Approx(-1.0));

    // point mass +1 rate 1 at lam=pi: |z|=1 escapes compensation, 1 - e^{i pi} = 2
    const auto m = make_model(0.0, 0.0, {point_mass(JumpSide::up, 1.0, 1.0)});
    const cd psi = characteristic_exponent(m, M_PI);
    CHECK(psi.real() == doctest::Approx(2.0));
    CHECK(psi.imag() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hermitian symmetry Psi(-lam) = conj Psi(lam)") {
    const auto m = make_model(0.7, 1.3,
                              {exponential(JumpSide::down, 2.0, 3.0),
                               exponential(JumpSide::up, 0.5, 1.5),
                               point_mass(JumpSide::up, 0.4, 0.6)});
    for (double lam : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const cd a = characteristic_exponent(m, -lam);
        const cd b = std::conj(characteristic_exponent(m, lam));
        CHECK(std::abs(a - b) < 1e-13 * (1.0 + std::abs(b)));
    }
}

TEST_CASE("bounded-variation form agrees with compensated form") {
    const auto m = make_model(1.5, 0.0,
                              {exponential(JumpSide::down, 1.0, 2.0),
                               exponential(JumpSide::up, 0.3, 4.0),
                               point_mass(JumpSide::down, 0.8, 0.5),
                               point_mass(JumpSide::up, 0.2, 2.5)});
    for (double lam : {0.25, 1.0, 3.0}) {
        const cd a = characteristic_exponent(m, lam);
        const cd b = bv_exponent(m, lam);
        CHECK(std::abs(a - b) < 1e-12 * (1.0 + std::abs(b)));
    }
}

TEST_CASE("classify: drift and case dichotomy") {
    // compensation of the +-0.5 point masses cancels, so delta = gamma = 2
    const auto m = make_model(2.0, 0.0,
                              {point_mass(JumpSide::up, 1.0, 0.5),
                               point_mass(JumpSide::down, 1.0, 0.5)});
    {
        const auto [pc, tag] = classify(m, 1.0);
        CHECK(pc.bounded_variation);
        CHECK(pc.delta == doctest::Approx(2.0));
        CHECK(tag == CaseTag::case1);  // 2 not in [0,1]
    }
    {
        const auto [pc, tag] = classify(m, 3.0);
        CHECK(pc.delta == doctest::Approx(2.0));
        CHECK(tag == CaseTag::case2);  // 2 in [0,3]
    }
    {
        const auto g = make_model(0.0, 1.0, {point_mass(JumpSide::down, 1.0, 1.0)});
        const auto [pc, tag] = classify(g, 5.0);
        CHECK(!pc.bounded_variation);
        CHECK(tag == CaseTag::case1);
    }
}

TEST_CASE("classify invariant under a zero-rate jump term") {
    auto m = make_model(2.0, 0.0, {point_mass(JumpSide::up, 1.0, 0.5),
                                   point_mass(JumpSide::down, 1.0, 0.5)});
    const auto before = classify(m, 3.0);
    m.jumps.terms.push_back(point_mass(JumpSide::up, 0.0, 1.0));
    const auto after = classify(m, 3.0);
    CHECK(before.first.bounded_variation == after.first.bounded_variation);
    CHECK(before.first.delta == doctest::Approx(after.first.delta));
    CHECK(before.second == after.second);
}

TEST_CASE("check_assumptions: exponential moment boundary") {
    ProblemSpec spec;
    spec.model = make_model(0.0, 1.0,
                            {exponential(JumpSide::up, 1.0, 3.0),
                             exponential(JumpSide::down, 1.0, 3.0)});
    spec.cost = CostSpec::quadratic(1.0);
    spec.q = 1.0;
    spec.beta = 1.0;
    spec.alpha = 1.0;
    std::vector<double> grid;
    for (int i = -50; i <= 50; ++i) grid.push_back(0.1 * i);

    CHECK(check_assumptions(spec, 1.0, grid).pass);  // 1 < 3
    const auto bad = check_assumptions(spec, 3.0, grid);
    CHECK(!bad.pass);  // moment divergent at the decay rate
    CHECK(!bad.violations.empty());
}

TEST_CASE("check_assumptions: convex quadratic cost passes") {
    ProblemSpec spec;
    spec.model = make_model(0.0, 1.0);
    spec.cost = CostSpec::quadratic(1.0);
    spec.q = 1.0;
    spec.beta = 1.0;
    spec.alpha = 1.0;
    std::vector<double> grid;
    for (int i = -50; i <= 50; ++i) grid.push_back(0.1 * i);
    CHECK(check_assumptions(spec, 0.5, grid).pass);
    CHECK(spec.cost.fp_neg_inf == -kInf);
    CHECK(spec.cost.fp_pos_inf == kInf);
}

TEST_CASE("cost spec invariants on a sampled grid") {
    const auto cost = CostSpec::quadratic(2.0, -1.0, 3.0);
    double prev = -kInf;
    for (int i = -20; i <= 20; ++i) {
        const double x = 0.25 * i;
        CHECK(cost.fp(x) >= prev);  // convexity witness
        prev = cost.fp(x);
        CHECK(std::abs(cost.f(x)) <=
              cost.k1 + cost.k2 * std::pow(std::abs(x), cost.N) + 1e-9);
    }
}

TEST_CASE("validation rejects malformed specs") {
    CHECK_THROWS(make_model(0.0, -1.0).validate());
    CHECK_THROWS(point_mass(JumpSide::up, 1.0, 0.0).validate());
    CHECK_THROWS(exponential(JumpSide::up, 1.0, 0.0).validate());
    CHECK_THROWS(point_mass(JumpSide::up, -1.0, 1.0).validate());

    ProblemSpec spec;
    spec.model = make_model(0.0, 1.0);
    spec.cost = CostSpec::quadratic(1.0);
    spec.q = 0.0;
    spec.alpha = 1.0;
    CHECK_THROWS(spec.validate());
    spec.q = 1.0;
    spec.alpha = 0.0;
    CHECK_THROWS(spec.validate());
}
