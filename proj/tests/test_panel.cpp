#include <doctest.h>

#include <sstream>

#include "didp/panel.hpp"
#include "didp/rng.hpp"
#include "didp/scm.hpp"
#include "support/random_panels.hpp"

using namespace didp;

namespace {

PanelDataset load_text(const std::string& text, PanelSchema schema = {}) {
  std::istringstream in(text);
  return load_panel(in, schema);
}

}  // namespace

TEST_CASE("all-zero two-unit panel loads") {
  const PanelDataset panel = load_text(
      "unit,time,a,y\n"
      "u1,1,0,0\nu1,2,0,0\nu2,1,0,0\nu2,2,0,0\n");
  CHECK(panel.n_units == 2);
  CHECK(panel.n_periods == 2);
  CHECK(!panel.has_decision());
  CHECK(panel.y(0, 1) == 0.0);
  CHECK(panel.a(1, 2) == 0);
}

TEST_CASE("row order is irrelevant; original ids are retained") {
  const PanelDataset panel = load_text(
      "unit,time,a,y\n"
      "b,2,1,4.5\na,1,0,1\nb,1,0,2\na,2,0,3\n");
  CHECK(panel.unit_ids == std::vector<std::string>{"b", "a"});
  CHECK(panel.y(0, 2) == 4.5);
  CHECK(panel.a(0, 2) == 1);
}

TEST_CASE("schema map renames columns") {
  PanelSchema schema;
  schema.unit = "state";
  schema.time = "year";
  schema.treatment = "treated";
  schema.outcome = "coverage";
  const PanelDataset panel = load_text(
      "state,year,treated,coverage\n"
      "CA,1,0,10\nCA,2,1,11\nTX,1,0,9\nTX,2,0,9.5\n",
      schema);
  CHECK(panel.n_units == 2);
  CHECK(panel.y(1, 2) == 9.5);
}

TEST_CASE("ragged panel is rejected") {
  CHECK_THROWS_WITH_AS(
      load_text("unit,time,a,y\n7,1,0,1\n8,1,0,1\n8,2,0,1\n"),
      doctest::Contains("ragged panel: unit '7' lacks the time-2 row"),
      ValidationError);
}

TEST_CASE("duplicate (unit,time) row is rejected") {
  CHECK_THROWS_WITH_AS(
      load_text("unit,time,a,y\n1,1,0,1\n1,1,0,2\n"),
      doctest::Contains("duplicate row"), ValidationError);
}

TEST_CASE("non-binary treatment and decision are rejected") {
  CHECK_THROWS_WITH_AS(load_text("unit,time,a,y\n1,1,2,1\n"),
                       doctest::Contains("non-binary treatment"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(load_text("unit,time,a,y,p\n1,1,0,1,0.4\n"),
                       doctest::Contains("non-binary decision"),
                       ValidationError);
}

TEST_CASE("partially observed decision column is rejected") {
  CHECK_THROWS_WITH_AS(
      load_text("unit,time,a,y,p\n1,1,0,1,0\n1,2,0,1,\n"),
      doctest::Contains("partially observed decision"), ValidationError);
}

TEST_CASE("cars panel round-trips bit-exactly through save/load") {
  const Scm cars = builtin_cars_example();
  const PanelDataset panel = sample_observational(cars, 1000, 1);
  std::ostringstream saved;
  save_panel(panel, saved);
  const PanelDataset reloaded = load_text(saved.str());
  CHECK(panel == reloaded);

  // Fractional outcomes survive the 17-significant-digit rendering too.
  rng::Stream stream = rng::substream(99, 0);
  const PanelDataset noisy = testing::random_staggered_panel(stream, 57, 4, 1, true);
  std::ostringstream saved2;
  save_panel(noisy, saved2);
  CHECK(noisy == load_text(saved2.str()));
}

TEST_CASE("infer_groups maps first treated time to decision time") {
  const PanelDataset panel = load_text(
      "unit,time,a,y\n"
      "u,1,0,0\nu,2,0,0\nu,3,1,0\nu,4,1,0\n"
      "v,1,0,0\nv,2,0,0\nv,3,0,0\nv,4,0,0\n");
  const GroupAssignment ga = infer_groups(panel, 1);
  REQUIRE(ga.group.size() == 2);
  CHECK(ga.group[0] == 2);  // treated at 3, decided at 2
  CHECK(!ga.group[1].has_value());
  CHECK(ga.never_count() == 1);
  CHECK(ga.counts().at(2) == 1);
}

TEST_CASE("infer_groups rejects non-monotone and too-early paths") {
  const PanelDataset flip = load_text(
      "unit,time,a,y\nu,1,0,0\nu,2,1,0\nu,3,0,0\nu,4,1,0\n");
  CHECK_THROWS_WITH_AS(infer_groups(flip, 1), doctest::Contains("non-monotone"),
                       ValidationError);

  const PanelDataset early = load_text(
      "unit,time,a,y\nu,1,1,0\nu,2,1,0\nu,3,1,0\nu,4,1,0\n");
  CHECK_THROWS_WITH_AS(infer_groups(early, 1),
                       doctest::Contains("before any admissible decision"),
                       ValidationError);
}

TEST_CASE("infer_groups is invariant to unit permutation") {
  rng::Stream stream = rng::substream(7, 0);
  const PanelDataset panel = testing::random_staggered_panel(stream, 40, 5, 1, false);
  const GroupAssignment before = infer_groups(panel, 1);

  PanelDataset reversed = panel;
  for (int u = 0; u < panel.n_units; ++u) {
    const int src = panel.n_units - 1 - u;
    reversed.unit_ids[u] = panel.unit_ids[src];
    for (int k = 1; k <= panel.n_periods; ++k) {
      reversed.outcome[reversed.idx(u, k)] = panel.y(src, k);
      reversed.treatment[reversed.idx(u, k)] =
          static_cast<std::uint8_t>(panel.a(src, k));
    }
  }
  const GroupAssignment after = infer_groups(reversed, 1);
  for (int u = 0; u < panel.n_units; ++u) {
    CHECK(after.group[u] == before.group[panel.n_units - 1 - u]);
  }
}

TEST_CASE("audit flags an empty arm as a positivity violation") {
  const PanelDataset panel = load_text(
      "unit,time,a,y\nu,1,0,1\nu,2,1,2\nv,1,0,1\nv,2,1,2\n");
  const AuditReport report = audit_assumptions(panel);
  CHECK(!report.positivity_ok);
  CHECK(report.positivity_detail.find("A2=0") != std::string::npos);
}

TEST_CASE("audit on a sampled cars panel: determinism holds, share near 0.2") {
  const PanelDataset panel = sample_observational(builtin_cars_example(), 1000, 1);
  const AuditReport report = audit_assumptions(panel);
  CHECK(report.determinism == AuditReport::Determinism::passed);
  CHECK(report.determinism_violations == 0);
  CHECK(report.lag_s_used == 1);
  int treated = 0;
  for (int u = 0; u < panel.n_units; ++u) treated += panel.a(u, 2);
  // Bernoulli(0.2) at n=1000: 4-sigma band is about +-0.051
  CHECK(std::abs(treated / 1000.0 - 0.2) < 0.051);
}

TEST_CASE("audit reports decision checks skipped when P is unobserved") {
  PanelDataset panel = sample_observational(builtin_cars_example(), 100, 2);
  panel.decision.clear();
  const AuditReport report = audit_assumptions(panel);
  CHECK(report.determinism == AuditReport::Determinism::skipped_unobserved);
  CHECK(report.to_json().find("skipped: P unobserved") != std::string::npos);
}

TEST_CASE("audit determinism holds on staggered samples for every lag") {
  for (int s : {1, 2}) {
    StaggeredParams params;
    params.tau = 4 + s;
    params.s = s;
    const PanelDataset panel =
        sample_observational(builtin_staggered_dgp(params), 4000, 5);
    const AuditReport report = audit_assumptions(panel);
    CHECK(report.determinism == AuditReport::Determinism::passed);
    CHECK(report.lag_s_used == s);
  }
}
