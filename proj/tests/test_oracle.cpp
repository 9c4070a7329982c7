#include <doctest.h>

#include <cmath>

#include "didp/oracle.hpp"
#include "didp/scm.hpp"
#include "support/enumeration_oracle.hpp"

using namespace didp;

namespace {

McConfig quick_mc(std::uint64_t seed = 1, std::int64_t draws = 200000) {
  McConfig mc;
  mc.n_draws = draws;
  mc.seed = seed;
  return mc;
}

}  // namespace

TEST_CASE("car-recall estimands hit the worked-example values") {
  const Scm cars = builtin_cars_example();
  const McConfig mc = quick_mc(2);

  const OracleEstimand att_a2 = oracle_estimand(cars, EstimandKind::att_a2, mc);
  CHECK(std::fabs(att_a2.value - 0.0) <= 3.0 * att_a2.mc_se + 1e-9);
  CHECK(att_a2.conditioning == "A2=1");

  const OracleEstimand att_p = oracle_estimand(cars, EstimandKind::att_p, mc);
  CHECK(std::fabs(att_p.value - (-4.0)) <= 3.0 * att_p.mc_se + 1e-9);

  const OracleEstimand psi = oracle_estimand(cars, EstimandKind::psi, mc);
  CHECK(std::fabs(psi.value - (-5.0)) <= 3.0 * psi.mc_se + 1e-9);

  // Conditioning on P=1 keeps ~20% of draws.
  CHECK(att_p.kept_draws > 0.18 * mc.n_draws);
  CHECK(att_p.kept_draws < 0.22 * mc.n_draws);
}

TEST_CASE("oracle is deterministic given (scm, kind, seed)") {
  const Scm cars = builtin_cars_example();
  const OracleEstimand a = oracle_estimand(cars, EstimandKind::att_p, quick_mc(5));
  const OracleEstimand b = oracle_estimand(cars, EstimandKind::att_p, quick_mc(5));
  CHECK(a.value == b.value);
  CHECK(a.mc_se == b.mc_se);
}

TEST_CASE("enumeration oracle reproduces the worked example exactly") {
  const Scm cars = builtin_cars_example();
  const testing::EnumerationOracle enumerator(cars);
  const int y1 = cars.require_node("Y1");
  const int y2 = cars.require_node("Y2");
  const int a2 = cars.require_node("A2");
  const int p = cars.require_node("P");

  // ATT_A2 = 8 - 8 = 0
  CHECK(enumerator.contrast(y2, InterventionSpec::on({{"A2", 1.0}}), y2,
                            InterventionSpec::on({{"A2", 0.0}}), {{a2, 1.0}}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // ATT_P = 8 - 12 = -4
  CHECK(enumerator.contrast(y2, InterventionSpec::on({{"P", 1.0}}), y2,
                            InterventionSpec::on({{"P", 0.0}}), {{p, 1.0}}) ==
        doctest::Approx(-4.0).epsilon(1e-12));
  // psi = 10 - 15 = -5
  CHECK(enumerator.contrast(y1, InterventionSpec::on({{"P", 1.0}}), y1,
                            InterventionSpec::on({{"P", 0.0}}), {{p, 1.0}}) ==
        doctest::Approx(-5.0).epsilon(1e-12));
  // Observational trends under do(A2=0): -2 in both arms.
  const InterventionSpec a0 = InterventionSpec::on({{"A2", 0.0}});
  CHECK(enumerator.contrast(y2, a0, y1, InterventionSpec{}, {{a2, 1.0}}) ==
        doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(enumerator.contrast(y2, a0, y1, InterventionSpec{}, {{a2, 0.0}}) ==
        doctest::Approx(-2.0).epsilon(1e-12));
  // P(A2=1) = 0.2 exactly.
  CHECK(enumerator.event_probability({{a2, 1.0}}) ==
        doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("Monte Carlo oracle agrees with enumeration on the two-period DGPs") {
  struct Case {
    Scm scm;
    EstimandKind kind;
    double expected;
  };
  const std::vector<Case> cases = {
      {builtin_prop2_dgp(), EstimandKind::att_p, -3.0},
      {builtin_prop2_dgp(), EstimandKind::psi, 0.0},
      {builtin_prop2_dgp(), EstimandKind::att_a2, 0.0},
      {builtin_prop1_dgp(-2.0), EstimandKind::att_a2, -3.0},
      {builtin_prop1_dgp(-2.0), EstimandKind::psi, -2.0},
      {builtin_prop1_dgp(0.0), EstimandKind::psi, 0.0},
  };
  for (const Case& c : cases) {
    const testing::EnumerationOracle enumerator(c.scm);
    const int target = c.scm.require_node(c.kind == EstimandKind::psi ? "Y1" : "Y2");
    const int p = c.scm.require_node("P");
    const int a2 = c.scm.require_node("A2");
    double exact;
    if (c.kind == EstimandKind::att_a2) {
      exact = enumerator.contrast(target, InterventionSpec::on({{"A2", 1.0}}),
                                  target, InterventionSpec::on({{"A2", 0.0}}),
                                  {{a2, 1.0}});
    } else {
      exact = enumerator.contrast(target, InterventionSpec::on({{"P", 1.0}}),
                                  target, InterventionSpec::on({{"P", 0.0}}),
                                  {{p, 1.0}});
    }
    CHECK(exact == doctest::Approx(c.expected).epsilon(1e-12));
    const OracleEstimand mc = oracle_estimand(c.scm, c.kind, quick_mc(3));
    CHECK(std::fabs(mc.value - exact) <= 4.0 * mc.mc_se + 1e-9);
  }
}

TEST_CASE("MC oracle matches enumeration on an all-affine SCM with real noise") {
  // Normal outcomes, no max terms: exact-mode propagation must agree with
  // the closed-form enumeration within 4 MC sigma.
  const char* text = R"({
    "name": "affine", "lag_s": 1, "nodes": [
      {"name":"U","kind":"exogenous","dist":"bernoulli","mean":{"intercept":0.3}},
      {"name":"A1","kind":"deterministic","mean":{"intercept":0}},
      {"name":"P","kind":"deterministic","mean":{"intercept":0,"terms":[{"parent":"U","coef":1}]}},
      {"name":"Y1","kind":"stochastic","dist":"normal","sd":2.5,
       "mean":{"intercept":4,"terms":[{"parent":"U","coef":2},{"parent":"P","coef":-1}]}},
      {"name":"A2","kind":"deterministic","mean":{"intercept":0,"terms":[{"parent":"P","coef":1}]}},
      {"name":"Y2","kind":"stochastic","dist":"normal","sd":1.5,
       "mean":{"intercept":6,"terms":[{"parent":"Y1","coef":0.5},{"parent":"U","coef":2},{"parent":"A2","coef":-3}]}}
    ]})";
  const Scm scm = scm_from_json(text);
  const testing::EnumerationOracle enumerator(scm);
  for (EstimandKind kind :
       {EstimandKind::att_a2, EstimandKind::att_p, EstimandKind::psi}) {
    const OracleEstimand mc = oracle_estimand(scm, kind, quick_mc(7));
    const int target = scm.require_node(kind == EstimandKind::psi ? "Y1" : "Y2");
    const int cond = kind == EstimandKind::att_a2 ? scm.require_node("A2")
                                                  : scm.require_node("P");
    const std::string arm_node = kind == EstimandKind::att_a2 ? "A2" : "P";
    const double exact =
        enumerator.contrast(target, InterventionSpec::on({{arm_node, 1.0}}),
                            target, InterventionSpec::on({{arm_node, 0.0}}),
                            {{cond, 1.0}});
    CHECK(std::fabs(mc.value - exact) <= 4.0 * mc.mc_se + 1e-9);
  }
}

TEST_CASE("group-time oracle on the staggered DGP equals the exposure profile") {
  StaggeredParams params;  // theta = (1.0, 1.8, 2.4), anticipation 0
  const Scm scm = builtin_staggered_dgp(params);
  const McConfig mc = quick_mc(11, 150000);
  const double theta[] = {1.0, 1.8, 2.4};
  for (int g = 1; g <= 3; ++g) {
    for (int k = 1; k <= 4; ++k) {
      const OracleEstimand e = oracle_estimand(scm, EstimandKind::att_p_gt, mc, g, k);
      const double expected = k >= g + 1 ? theta[k - g - 1] : 0.0;
      CAPTURE(g);
      CAPTURE(k);
      CHECK(std::fabs(e.value - expected) <= 4.0 * e.mc_se + 1e-9);
    }
  }
}

TEST_CASE("anticipation shows up only before implementation") {
  StaggeredParams params;
  params.anticipation = -1.5;
  const Scm scm = builtin_staggered_dgp(params);
  const McConfig mc = quick_mc(13, 150000);
  // k in [g, g+s) picks up exactly the anticipation coefficient.
  const OracleEstimand pre = oracle_estimand(scm, EstimandKind::att_p_gt, mc, 2, 2);
  CHECK(std::fabs(pre.value - (-1.5)) <= 4.0 * pre.mc_se + 1e-9);
  // k >= g+s is the pure exposure effect again.
  const OracleEstimand post = oracle_estimand(scm, EstimandKind::att_p_gt, mc, 2, 3);
  CHECK(std::fabs(post.value - 1.0) <= 4.0 * post.mc_se + 1e-9);
  // Before the decision nothing happens.
  const OracleEstimand before = oracle_estimand(scm, EstimandKind::att_p_gt, mc, 2, 1);
  CHECK(std::fabs(before.value) <= 4.0 * before.mc_se + 1e-9);
}

TEST_CASE("treatment-path oracle (oracle-only estimand) is exposed") {
  // With zero anticipation the A-path and P-path group-time effects agree.
  const Scm scm = builtin_staggered_dgp();
  const McConfig mc = quick_mc(17, 150000);
  const OracleEstimand a_gt =
      oracle_estimand(scm, EstimandKind::att_a_gt, mc, 2, 3);  // first treated 2
  const OracleEstimand p_gt =
      oracle_estimand(scm, EstimandKind::att_p_gt, mc, 1, 3);  // decided 1
  CHECK(std::fabs(a_gt.value - p_gt.value) <=
        4.0 * std::sqrt(a_gt.mc_se * a_gt.mc_se + p_gt.mc_se * p_gt.mc_se) + 1e-9);
}

TEST_CASE("positivity floor trips on near-impossible events") {
  // P(U=1) = 1e-6 makes the conditioning event effectively empty.
  const char* text = R"({
    "name": "rare", "nodes": [
      {"name":"U","kind":"exogenous","dist":"bernoulli","mean":{"intercept":0.000001}},
      {"name":"A1","kind":"deterministic","mean":{"intercept":0}},
      {"name":"P","kind":"deterministic","mean":{"intercept":0,"terms":[{"parent":"U","coef":1}]}},
      {"name":"Y1","kind":"stochastic","dist":"poisson","mean":{"intercept":5}},
      {"name":"A2","kind":"deterministic","mean":{"intercept":0,"terms":[{"parent":"P","coef":1}]}},
      {"name":"Y2","kind":"stochastic","dist":"poisson","mean":{"intercept":5}}
    ]})";
  const Scm scm = scm_from_json(text);
  CHECK_THROWS_WITH_AS(oracle_estimand(scm, EstimandKind::att_p, quick_mc(19)),
                       doctest::Contains("positivity floor"), EstimationError);
}

TEST_CASE("sampling fallback handles max terms over noisy parents") {
  // max(Y1, M) with Poisson Y1 downstream of the intervention: exact mean
  // propagation is invalid, so the engine must re-sample. The truth is
  // computed by conditioning on U and averaging E[max(Y1, 6)] under
  // Y1 ~ Poisson(mu): intervention do(P=1) makes mu = 4 + 2U - 1.
  const char* text = R"({
    "name": "noisy-max", "nodes": [
      {"name":"U","kind":"exogenous","dist":"bernoulli","mean":{"intercept":0.3}},
      {"name":"A1","kind":"deterministic","mean":{"intercept":0}},
      {"name":"P","kind":"deterministic","mean":{"intercept":0,"terms":[{"parent":"U","coef":1}]}},
      {"name":"Y1","kind":"stochastic","dist":"poisson",
       "mean":{"intercept":4,"terms":[{"parent":"U","coef":2},{"parent":"P","coef":-1}]}},
      {"name":"M","kind":"deterministic","mean":{"intercept":6}},
      {"name":"A2","kind":"deterministic","mean":{"intercept":0,"terms":[{"parent":"P","coef":1}]}},
      {"name":"Y2","kind":"stochastic","dist":"normal","sd":1,
       "mean":{"intercept":0,"max_terms":[{"parents":["Y1","M"],"coef":1}]}}
    ]})";
  const Scm scm = scm_from_json(text);
  const int y2 = scm.require_node("Y2");
  const OracleContrast c =
      oracle_contrast(scm, y2, InterventionSpec::on({{"P", 1.0}}), -1,
                      InterventionSpec{}, {}, quick_mc(23, 400000));
  // E[max(Poisson(mu), 6)] summed over the tail, weighted by P(U).
  auto emax = [](double mu) {
    double total = 0.0, pk = std::exp(-mu), cum = 0.0;
    for (int k = 0; k <= 60; ++k) {
      total += std::max(static_cast<double>(k), 6.0) * pk;
      cum += pk;
      pk *= mu / (k + 1);
    }
    return total + (1.0 - cum) * 61.0;  // negligible remainder
  };
  const double truth = 0.7 * emax(3.0) + 0.3 * emax(5.0);
  CHECK(std::fabs(c.value - truth) <= 4.0 * c.mc_se + 1e-6);
}
