#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "refract/resolvent.hpp"
#include "refract/threshold.hpp"

using namespace refract;

namespace {

// Deterministic case2 instance: pure drift delta=1, alpha=2, f(x)=x^2, q=1,
// beta=4. Closed form: U^0 = 0 forever, rho(b) = 2b, b* = 2.
ProblemSpec det_spec() {
    ProblemSpec spec;
    spec.model.gamma = 1.0;
    spec.cost = CostSpec::quadratic(1.0);
    spec.q = 1.0;
    spec.beta = 4.0;
    spec.alpha = 2.0;
    return spec;
}

ProblemSpec brownian_spec(double beta) {
    ProblemSpec spec;
    spec.model.sigma = 1.0;
    spec.cost = CostSpec::quadratic(1.0);
    spec.q = 1.0;
    spec.beta = beta;
    spec.alpha = 1.0;
    return spec;
}

MonteCarloConfig small_mc(long n = 2000, double dt = 0.01, double T = 12.0,
                          std::uint64_t seed = 1) {
    MonteCarloConfig mc;
    mc.n_paths = n;
    mc.grid = {dt, T};
    mc.seed = seed;
    return mc;
}

}  // namespace

TEST_CASE("rho curve: constant f' has zero variance") {
    auto spec = det_spec();
    spec.cost = CostSpec::linear(3.0);
    const auto curve = estimate_rho_curve(spec, {-2.0, 0.0, 5.0}, small_mc(50, 0.1, 25.0));
    for (std::size_t i = 0; i < curve.rho_hat.size(); ++i) {
        CHECK(curve.rho_hat[i] == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(curve.se[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("rho curve: deterministic case2 gives rho(b) = 2b") {
    const auto spec = det_spec();
    REQUIRE(spec.case_tag() == CaseTag::case2);
    const auto curve = estimate_rho_curve(spec, {-1.0, 0.5, 2.0, 4.0},
                                          small_mc(10, 0.1, 30.0));
    for (std::size_t i = 0; i < curve.b_values.size(); ++i) {
        CHECK(curve.rho_hat[i] ==
              doctest::Approx(2.0 * curve.b_values[i]).epsilon(1e-8));
        CHECK(curve.se[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("rho curve: Brownian rho(0) matches the resolvent oracle") {
    const auto spec = brownian_spec(4.0);
    const auto mc = small_mc(20000, 0.005, 14.0, 7);
    const auto curve = estimate_rho_curve(spec, {0.0}, mc);

    SnModel sn;
    sn.sigma = 1.0;
    const ResolventKernel kernel(sn, spec.q, 0.0, spec.alpha);
    const double oracle =
        resolvent_apply(kernel, [&](double y) { return spec.cost.fp(y); }, 0.0);
    CHECK(std::abs(curve.rho_hat[0] - oracle) < 3.0 * curve.se[0] + 2e-3);
}

TEST_CASE("rho curve is non-decreasing in b under common random numbers") {
    ProblemSpec spec = brownian_spec(1.0);
    spec.model.gamma = 0.2;
    JumpTerm t;
    t.side = JumpSide::down;
    t.rate = 1.0;
    t.kind = JumpKind::exponential;
    t.decay = 2.0;
    spec.model.jumps.terms = {t};
    std::vector<double> bs;
    for (int i = -8; i <= 8; ++i) bs.push_back(0.5 * i);
    const auto curve = estimate_rho_curve(spec, bs, small_mc(200, 0.02, 8.0, 3));
    for (std::size_t i = 0; i + 1 < bs.size(); ++i)
        CHECK(curve.rho_hat[i] <= curve.rho_hat[i + 1] + 1e-12);
}

TEST_CASE("solve_threshold: degenerate limits") {
    auto spec = det_spec();
    spec.cost = CostSpec::linear(3.0);
    spec.beta = 2.0;  // f'(-inf) = 3 >= q beta = 2
    CHECK(solve_threshold(spec, small_mc(10, 0.1, 5.0), 1e-3).b_star == -kInf);
    spec.beta = 5.0;  // f'(x) = 3 < 5 everywhere
    CHECK(solve_threshold(spec, small_mc(10, 0.1, 5.0), 1e-3).b_star == kInf);
}

TEST_CASE("solve_threshold: deterministic b* = 2") {
    const auto res = solve_threshold(det_spec(), small_mc(10, 0.05, 25.0), 1e-4);
    CHECK(res.has_bracket);
    CHECK(res.b_star == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(res.residual < 1e-3);
    CHECK(res.rho_se == doctest::Approx(0.0));
}

TEST_CASE("estimate_value: deterministic oracles") {
    const auto spec = det_spec();
    const auto mc = small_mc(10, 0.05, 30.0);
    // started at b* = 2: U = 2 forever, l = delta = 1; v = f(2)/q + beta*1/q = 8
    const auto v = estimate_value(spec, Strategy::refraction(2.0), 2.0, mc);
    CHECK(v.mean == doctest::Approx(8.0).epsilon(1e-9));
    CHECK(v.se == doctest::Approx(0.0));
    CHECK(v.tail_bound < 1e-6);

    // constant r=0 on the gamma=0 model from x0=0: U = 0, value 0
    ProblemSpec still = spec;
    still.model.gamma = 0.0;
    const auto z = estimate_value(still, Strategy::constant(0.0), 0.0, mc);
    CHECK(z.mean == doctest::Approx(0.0));
}

TEST_CASE("control cost component lies in [0, alpha/q]") {
    // f = 0, beta = 1 isolates E int e^{-qt} l dt
    ProblemSpec spec = brownian_spec(1.0);
    spec.cost = CostSpec::quadratic(0.0, 0.0, 0.0);
    const auto mc = small_mc(500, 0.02, 10.0, 11);
    for (const auto& s : {Strategy::refraction(0.0), Strategy::constant(0.6),
                          Strategy::refraction(-kInf)}) {
        const auto v = estimate_value(spec, s, 0.3, mc);
        CHECK(v.mean >= -1e-12);
        CHECK(v.mean <= spec.alpha / spec.q + 1e-9);
    }
}

TEST_CASE("estimate_value_derivative: deterministic and constant-f' oracles") {
    const auto spec = det_spec();
    const auto mc = small_mc(10, 0.05, 30.0);
    const auto d = estimate_value_derivative(spec, 2.0, 2.0, mc);
    CHECK(d.mean == doctest::Approx(4.0).epsilon(1e-9));  // = beta, rho(b*)=beta

    ProblemSpec lin = brownian_spec(1.0);
    lin.cost = CostSpec::linear(3.0);
    lin.q = 2.0;
    const auto mcl = small_mc(20, 0.05, 20.0, 5);
    for (double b : {-kInf, 0.7, kInf}) {
        const auto c = estimate_value_derivative(lin, b, -1.3, mcl);
        CHECK(c.mean == doctest::Approx(1.5).epsilon(1e-9));  // 3/q
        CHECK(c.se == doctest::Approx(0.0));
    }
}

TEST_CASE("derivative sign pattern around b* on the Brownian model") {
    const auto spec = brownian_spec(4.0);
    const auto mc = small_mc(20000, 0.005, 14.0, 13);
    const auto res = solve_threshold(spec, mc, 1e-3);
    REQUIRE(res.has_bracket);
    const auto lo = estimate_value_derivative(spec, res.b_star, res.b_star - 1.0, mc);
    const auto at = estimate_value_derivative(spec, res.b_star, res.b_star, mc);
    const auto hi = estimate_value_derivative(spec, res.b_star, res.b_star + 1.0, mc);
    CHECK(lo.mean < spec.beta + 3.0 * lo.se);
    CHECK(std::abs(at.mean - spec.beta) < 3.0 * at.se + 3.0 * res.rho_se + 1e-2);
    CHECK(hi.mean > spec.beta - 3.0 * hi.se);
}

TEST_CASE("sandwich: linear cost collapses to equality") {
    // rho == c/q == beta, so every finite threshold is optimal and the three
    // estimators agree up to the horizon-truncation boundary term. Pure drift
    // keeps the agreement exact per path (no cell-end Gaussian increments).
    ProblemSpec spec;
    spec.model.gamma = 0.3;
    spec.cost = CostSpec::linear(2.0);
    spec.q = 1.0;
    spec.beta = 2.0;
    spec.alpha = 1.0;
    const auto rep = sandwich_check(spec, 0.5, 0.0, 0.1, small_mc(200, 0.02, 15.0, 17));
    CHECK(rep.chain_holds);
    CHECK(rep.lower == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.mid == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.upper == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("sandwich: deterministic case2 chain") {
    const auto spec = det_spec();
    for (double eps : {0.05, 0.3}) {
        const auto rep = sandwich_check(spec, 2.0, 2.0, eps, small_mc(10, 0.05, 25.0));
        CHECK(rep.chain_holds);
        CHECK(rep.lower <= rep.mid + 1e-12);
        CHECK(rep.mid <= rep.upper + 1e-12);
        // equality gaps are O(eps * sup |f''|) = O(2 eps)
        CHECK(rep.upper - rep.lower <= 2.0 * eps * 2.0 + 1e-9);
    }
}

TEST_CASE("sandwich: Brownian CRN chain holds at the solved threshold") {
    const auto spec = brownian_spec(4.0);
    const auto mc = small_mc(2000, 0.01, 12.0, 19);
    const auto th = solve_threshold(spec, mc, 1e-3);
    REQUIRE(th.has_bracket);
    const auto rep = sandwich_check(spec, th.b_star, th.b_star, 0.1, mc);
    CHECK(rep.chain_holds);
    CHECK(rep.lower <= rep.upper);
}

TEST_CASE("compare_strategies: deterministic rivals lose, clone ties") {
    const auto spec = det_spec();
    const auto mc = small_mc(10, 0.02, 25.0);
    const double bs = 2.0;
    const std::vector<Strategy> rivals = {
        Strategy::refraction(bs - 0.5), Strategy::refraction(bs + 0.5),
        Strategy::refraction(bs), Strategy::constant(0.0),
        Strategy::constant(spec.alpha)};
    const auto rep = compare_strategies(spec, bs, {bs - 1.0, bs, bs + 1.0}, rivals, mc);
    CHECK(!rep.any_flagged);
    for (const auto& row : rep.rows) {
        if (row.strategy == Strategy::refraction(bs).name() && row.diff_se == 0.0)
            continue;
        CHECK(row.diff_vs_ref >= -1e-9);
    }
    // the clone rival differs by exactly zero
    int clone_rows = 0;
    for (std::size_t i = 3; i < rep.rows.size(); ++i) {  // skip reference rows
        const auto& row = rep.rows[i];
        if (row.strategy == Strategy::refraction(bs).name()) {
            CHECK(row.diff_vs_ref == doctest::Approx(0.0));
            CHECK(row.diff_se == doctest::Approx(0.0));
            ++clone_rows;
        }
    }
    CHECK(clone_rows == 3);
}

TEST_CASE("value estimates on a grid are convex for the threshold strategy") {
    const auto spec = brownian_spec(4.0);
    const auto mc = small_mc(5000, 0.01, 12.0, 23);
    const double bs = solve_threshold(spec, mc, 1e-3).b_star;
    std::vector<ValueEstimate> vs;
    for (int i = -2; i <= 2; ++i)
        vs.push_back(estimate_value(spec, Strategy::refraction(bs), bs + 0.8 * i, mc));
    for (std::size_t i = 1; i + 1 < vs.size(); ++i) {
        const double second = vs[i - 1].mean + vs[i + 1].mean - 2.0 * vs[i].mean;
        const double se = vs[i - 1].se + vs[i + 1].se + 2.0 * vs[i].se;
        CHECK(second >= -3.0 * se);
    }
}

TEST_CASE("tail bound certificate is finite and decays with the horizon") {
    const auto spec = brownian_spec(4.0);
    const auto a = discounted_tail_bound(spec, 0.0, {0.01, 8.0});
    const auto b = discounted_tail_bound(spec, 0.0, {0.01, 16.0});
    CHECK(a.finite);
    CHECK(b.finite);
    CHECK(a.value > 0.0);
    CHECK(b.value < a.value);
    CHECK(b.value < 1e-3);
}
