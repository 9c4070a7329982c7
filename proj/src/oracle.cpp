#include "didp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "didp/estimators.hpp"
#include "didp/rng.hpp"

namespace didp {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rss(double a, double b) { return std::sqrt(a * a + b * b); }
double rss(double a, double b, double c) { return std::sqrt(a * a + b * b + c * c); }

// Small absolute guard so exact-zero comparisons (mc_se == 0) tolerate
// floating-point dust without widening any statistical tolerance.
constexpr double kExactGuard = 1e-9;

struct MeanAcc {
  double sum = 0.0;
  double sumsq = 0.0;
  std::int64_t n = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double sd() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = (sumsq - static_cast<double>(n) * m * m) /
                       static_cast<double>(n - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
  double se() const { return n > 0 ? sd() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

std::vector<double> resolve_arm(const Scm& scm, const InterventionSpec& spec) {
  std::vector<double> forced(scm.nodes.size(), kNaN);
  for (const auto& [name, value] : spec.assignments) {
    forced[scm.require_node(name)] = value;
  }
  return forced;
}

// Strict descendants of the forced nodes: everything whose mechanism must be
// re-evaluated under the arm. Non-descendants keep their natural values.
std::vector<char> descendants_of(const Scm& scm, const std::vector<double>& forced) {
  std::vector<char> desc(scm.nodes.size(), 0);
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    if (!std::isnan(forced[i])) continue;
    for (int p : scm.nodes[i].parents) {
      if (!std::isnan(forced[p]) || desc[p]) {
        desc[i] = 1;
        break;
      }
    }
  }
  return desc;
}

// Mean propagation through the arm is exact iff every max term that gets
// re-evaluated has point-valued (deterministic given the retained context)
// arguments. Stochastic descendants are the only non-point values.
bool exact_mode(const Scm& scm, const std::vector<double>& forced,
                const std::vector<char>& desc) {
  std::vector<char> point(scm.nodes.size(), 0);
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    if (!std::isnan(forced[i]) || !desc[i]) {
      point[i] = 1;  // forced constant or retained natural value
      continue;
    }
    if (scm.nodes[i].kind == NodeKind::deterministic) {
      point[i] = 1;
      for (int p : scm.nodes[i].parents) {
        if (!point[p]) point[i] = 0;
      }
    }
  }
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    if (!desc[i]) continue;
    for (const LinExpr::MaxTerm& m : scm.nodes[i].mean.max_terms) {
      if (!point[m.parent_a] || !point[m.parent_b]) return false;
    }
  }
  return true;
}

void natural_draw(const Scm& scm, rng::Stream& stream, std::vector<double>& values) {
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    const NodeSpec& node = scm.nodes[i];
    switch (node.dist) {
      case Dist::none:
        values[i] = node.mean.eval(values);
        break;
      case Dist::bernoulli:
        values[i] = stream.bernoulli(node.mean.eval(values)) ? 1.0 : 0.0;
        break;
      case Dist::poisson:
        values[i] = static_cast<double>(stream.poisson(node.mean.eval(values)));
        break;
      case Dist::normal:
        values[i] = stream.normal(node.mean.eval(values), node.sd);
        break;
    }
  }
}

// E[target | natural draw, arm] for one kept draw. In exact mode stochastic
// descendants carry their conditional means; in sampling mode they are
// redrawn with fresh noise and the target (when stochastic) contributes its
// conditional mean given the sampled parents.
double propagate_arm(const Scm& scm, const std::vector<double>& natural,
                     const std::vector<double>& forced,
                     const std::vector<char>& desc, bool exact, int target,
                     rng::Stream* noise, std::vector<double>& work) {
  const int last = target;  // nodes after the target cannot affect it
  for (int i = 0; i <= last; ++i) {
    if (!std::isnan(forced[i])) {
      work[i] = forced[i];
      continue;
    }
    if (!desc[i]) {
      work[i] = natural[i];
      continue;
    }
    const NodeSpec& node = scm.nodes[i];
    if (node.dist == Dist::none) {
      work[i] = node.mean.eval(work);
    } else if (exact || i == last) {
      work[i] = node.mean.eval(work);  // conditional mean
    } else {
      switch (node.dist) {
        case Dist::bernoulli:
          work[i] = noise->bernoulli(node.mean.eval(work)) ? 1.0 : 0.0;
          break;
        case Dist::poisson:
          work[i] = static_cast<double>(noise->poisson(node.mean.eval(work)));
          break;
        case Dist::normal:
          work[i] = noise->normal(node.mean.eval(work), node.sd);
          break;
        case Dist::none:
          break;
      }
    }
  }
  return work[last];
}

bool event_holds(const std::vector<std::pair<int, double>>& event,
                 const std::vector<double>& values) {
  for (const auto& [node, v] : event) {
    if (values[node] != v) return false;
  }
  return true;
}

std::string event_text(const Scm& scm,
                       const std::vector<std::pair<int, double>>& event) {
  if (event.empty()) return "(unconditional)";
  std::ostringstream out;
  for (std::size_t i = 0; i < event.size(); ++i) {
    if (i) out << ", ";
    out << scm.nodes[event[i].first].name << "=" << event[i].second;
  }
  return out.str();
}

}  // namespace

OracleContrast oracle_contrast(const Scm& scm, int target_a,
                               const InterventionSpec& arm_a, int target_b,
                               const InterventionSpec& arm_b,
                               const std::vector<std::pair<int, double>>& event,
                               const McConfig& mc) {
  validate(scm);
  const std::vector<double> forced_a = resolve_arm(scm, arm_a);
  const std::vector<double> forced_b = resolve_arm(scm, arm_b);
  const std::vector<char> desc_a = descendants_of(scm, forced_a);
  const std::vector<char> desc_b = descendants_of(scm, forced_b);
  const bool exact_a = exact_mode(scm, forced_a, desc_a);
  const bool exact_b = exact_mode(scm, forced_b, desc_b);

  std::vector<double> natural(scm.nodes.size());
  std::vector<double> work(scm.nodes.size());
  MeanAcc acc;
  for (std::int64_t d = 0; d < mc.n_draws; ++d) {
    rng::Stream stream = rng::substream(mc.seed, static_cast<std::uint64_t>(d));
    natural_draw(scm, stream, natural);
    if (!event_holds(event, natural)) continue;
    rng::Stream noise_a = rng::substream(mc.seed, static_cast<std::uint64_t>(d), 1);
    rng::Stream noise_b = rng::substream(mc.seed, static_cast<std::uint64_t>(d), 2);
    double value = propagate_arm(scm, natural, forced_a, desc_a, exact_a,
                                 target_a, &noise_a, work);
    if (target_b >= 0) {
      value -= propagate_arm(scm, natural, forced_b, desc_b, exact_b, target_b,
                             &noise_b, work);
    }
    acc.add(value);
  }

  OracleContrast result;
  result.kept = acc.n;
  result.event_prob =
      static_cast<double>(acc.n) / static_cast<double>(mc.n_draws);
  if (acc.n == 0 || result.event_prob < mc.positivity_floor) {
    throw EstimationError(
        "conditioning event {" + event_text(scm, event) +
        "} has empirical probability " + std::to_string(result.event_prob) +
        " below the positivity floor " + std::to_string(mc.positivity_floor));
  }
  result.value = acc.mean();
  result.mc_se = acc.se();
  return result;
}

// ----- estimand construction -----

namespace {

int decision_node(const Scm& scm, int k) {
  if (k == 1) {
    const int i = scm.node_index("P");
    if (i >= 0) return i;
  }
  return scm.node_index("P" + std::to_string(k));
}

// Forced decision path: zeros before g, ones from g on; g = 0 means never.
// Only nodes the model defines are forced/pinned; missing periods are
// deterministic copies whose values the path implies.
InterventionSpec decision_path_arm(const Scm& scm, int tau, int g) {
  InterventionSpec spec;
  for (int k = 1; k <= tau; ++k) {
    const int node = decision_node(scm, k);
    if (node < 0) continue;
    spec.assignments[scm.nodes[node].name] = (g >= 1 && k >= g) ? 1.0 : 0.0;
  }
  if (spec.assignments.empty()) {
    throw ValidationError("SCM defines no decision nodes (P<k>)");
  }
  return spec;
}

std::vector<std::pair<int, double>> decision_path_event(const Scm& scm, int j,
                                                        int g) {
  std::vector<std::pair<int, double>> event;
  for (int k = 1; k <= j; ++k) {
    const int node = decision_node(scm, k);
    if (node < 0) continue;
    event.emplace_back(node, (g >= 1 && k >= g) ? 1.0 : 0.0);
  }
  return event;
}

InterventionSpec treatment_path_arm(const Scm& scm, int tau, int g) {
  InterventionSpec spec;
  for (int k = 1; k <= tau; ++k) {
    const int node = scm.require_node("A" + std::to_string(k));
    spec.assignments[scm.nodes[node].name] = (g >= 1 && k >= g) ? 1.0 : 0.0;
  }
  return spec;
}

std::vector<std::pair<int, double>> treatment_path_event(const Scm& scm, int tau,
                                                         int g) {
  std::vector<std::pair<int, double>> event;
  for (int k = 1; k <= tau; ++k) {
    event.emplace_back(scm.require_node("A" + std::to_string(k)),
                       (g >= 1 && k >= g) ? 1.0 : 0.0);
  }
  return event;
}

std::string path_text(int tau, int g, const char* symbol) {
  std::ostringstream out;
  out << symbol << "=(";
  for (int k = 1; k <= tau; ++k) {
    if (k > 1) out << ",";
    out << ((g >= 1 && k >= g) ? 1 : 0);
  }
  out << ")";
  return out.str();
}

McConfig derived_mc(const McConfig& mc, std::uint64_t salt_a, std::uint64_t salt_b) {
  McConfig out = mc;
  out.seed = rng::stream_key(mc.seed, salt_a, salt_b);
  return out;
}

}  // namespace

std::string estimand_name(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::att_a2: return "ATT_A2";
    case EstimandKind::att_p: return "ATT_P";
    case EstimandKind::psi: return "PSI";
    case EstimandKind::att_p_gt: return "ATT_P_GT";
    case EstimandKind::att_a_gt: return "ATT_A_GT";
  }
  return "";
}

OracleEstimand oracle_estimand(const Scm& scm, EstimandKind kind,
                               const McConfig& mc, int g, int k) {
  OracleEstimand out;
  out.kind = kind;
  const McConfig sub = derived_mc(mc, static_cast<std::uint64_t>(kind) + 17,
                                  static_cast<std::uint64_t>(g + 1) * 1000 + (k + 1));

  OracleContrast c;
  switch (kind) {
    case EstimandKind::att_a2: {
      const int a2 = scm.require_node("A2");
      const int y2 = scm.require_node("Y2");
      out.conditioning = "A2=1";
      c = oracle_contrast(scm, y2, InterventionSpec::on({{"A2", 1.0}}), y2,
                          InterventionSpec::on({{"A2", 0.0}}), {{a2, 1.0}}, sub);
      break;
    }
    case EstimandKind::att_p: {
      const int p = decision_node(scm, 1);
      if (p < 0) throw ValidationError("SCM defines no decision node P");
      const int y2 = scm.require_node("Y2");
      const std::string pname = scm.nodes[p].name;
      out.conditioning = pname + "=1";
      c = oracle_contrast(scm, y2, InterventionSpec::on({{pname, 1.0}}), y2,
                          InterventionSpec::on({{pname, 0.0}}), {{p, 1.0}}, sub);
      break;
    }
    case EstimandKind::psi: {
      const int p = decision_node(scm, 1);
      if (p < 0) throw ValidationError("SCM defines no decision node P");
      const int y1 = scm.require_node("Y1");
      const std::string pname = scm.nodes[p].name;
      out.conditioning = pname + "=1";
      c = oracle_contrast(scm, y1, InterventionSpec::on({{pname, 1.0}}), y1,
                          InterventionSpec::on({{pname, 0.0}}), {{p, 1.0}}, sub);
      break;
    }
    case EstimandKind::att_p_gt: {
      const int tau = scm_tau(scm);
      const int s = scm.lag_s.value_or(1);
      if (g < 1 || g > tau - s || k < 1 || k > tau) {
        throw ValidationError("ATT_P_GT needs 1 <= g <= tau-s and 1 <= k <= tau");
      }
      const int yk = scm.require_node("Y" + std::to_string(k));
      out.g = g;
      out.k = k;
      out.conditioning = path_text(tau, g, "Pbar");
      c = oracle_contrast(scm, yk, decision_path_arm(scm, tau, g), yk,
                          decision_path_arm(scm, tau, 0),
                          decision_path_event(scm, tau, g), sub);
      break;
    }
    case EstimandKind::att_a_gt: {
      const int tau = scm_tau(scm);
      if (g < 1 || g > tau || k < 1 || k > tau) {
        throw ValidationError("ATT_A_GT needs 1 <= g <= tau and 1 <= k <= tau");
      }
      const int yk = scm.require_node("Y" + std::to_string(k));
      out.g = g;
      out.k = k;
      out.conditioning = path_text(tau, g, "Abar");
      c = oracle_contrast(scm, yk, treatment_path_arm(scm, tau, g), yk,
                          treatment_path_arm(scm, tau, 0),
                          treatment_path_event(scm, tau, g), sub);
      break;
    }
  }
  out.value = c.value;
  out.mc_se = c.mc_se;
  out.n_draws = sub.n_draws;
  out.kept_draws = c.kept;
  return out;
}

// ----- assumption audits -----

namespace {

AssumptionCheck contrast_vs_zero(const std::string& assumption,
                                 const std::string& detail,
                                 const OracleContrast& c) {
  AssumptionCheck out;
  out.assumption = assumption;
  out.detail = detail;
  out.lhs = c.value;
  out.rhs = 0.0;
  out.tolerance = 4.0 * c.mc_se;
  out.pass = std::fabs(c.value) <= out.tolerance + kExactGuard;
  out.method = "oracle contrast";
  return out;
}

AssumptionCheck contrast_pair(const std::string& assumption,
                              const std::string& detail, const OracleContrast& a,
                              const OracleContrast& b) {
  AssumptionCheck out;
  out.assumption = assumption;
  out.detail = detail;
  out.lhs = a.value;
  out.rhs = b.value;
  out.tolerance = 4.0 * rss(a.mc_se, b.mc_se);
  out.pass = std::fabs(a.value - b.value) <= out.tolerance + kExactGuard;
  out.method = "oracle contrast";
  return out;
}

AssumptionCheck by_construction(const std::string& assumption) {
  AssumptionCheck out;
  out.assumption = assumption;
  out.detail =
      "holds structurally: potential and observed values coincide by the "
      "recursive-substitution semantics of the model";
  out.pass = true;
  out.method = "by construction";
  return out;
}

AssumptionCheck audit_positivity_2p(const Scm& scm, const McConfig& mc) {
  const int a2 = scm.require_node("A2");
  std::vector<double> values(scm.nodes.size());
  std::int64_t treated = 0;
  const McConfig sub = derived_mc(mc, 901, 0);
  for (std::int64_t d = 0; d < sub.n_draws; ++d) {
    rng::Stream stream = rng::substream(sub.seed, static_cast<std::uint64_t>(d));
    natural_draw(scm, stream, values);
    if (values[a2] == 1.0) ++treated;
  }
  const double p1 = static_cast<double>(treated) / static_cast<double>(sub.n_draws);
  AssumptionCheck out;
  out.assumption = "positivity";
  out.detail = "Pr(A2=1) and Pr(A2=0) both above the positivity floor";
  out.lhs = std::min(p1, 1.0 - p1);
  out.rhs = mc.positivity_floor;
  out.pass = out.lhs >= mc.positivity_floor;
  out.method = "observational";
  return out;
}

AssumptionCheck audit_determinism_2p(const Scm& scm, const McConfig& mc, int p_star) {
  const int p = decision_node(scm, 1);
  if (p < 0) throw ValidationError("SCM defines no decision node P");
  const int a2 = scm.require_node("A2");
  const std::string pname = scm.nodes[p].name;
  const OracleContrast c = oracle_contrast(
      scm, a2, InterventionSpec::on({{pname, static_cast<double>(p_star)}}), -1,
      InterventionSpec{}, {}, derived_mc(mc, 902, p_star));
  AssumptionCheck out;
  out.assumption = "decision determinism";
  out.detail = "E[A2 | do(" + pname + "=" + std::to_string(p_star) +
               ")] = " + std::to_string(p_star);
  out.lhs = c.value;
  out.rhs = static_cast<double>(p_star);
  out.tolerance = 4.0 * c.mc_se;
  out.pass = std::fabs(out.lhs - out.rhs) <= out.tolerance + kExactGuard;
  out.method = "oracle contrast";
  return out;
}

AssumptionCheck audit_no_anticipation_2p(const Scm& scm, const McConfig& mc) {
  const int p = decision_node(scm, 1);
  const int y1 = scm.require_node("Y1");
  const std::string pname = scm.nodes[p].name;
  const OracleContrast c = oracle_contrast(
      scm, y1, InterventionSpec::on({{pname, 1.0}}), y1,
      InterventionSpec::on({{pname, 0.0}}), {{p, 1.0}}, derived_mc(mc, 903, 0));
  return contrast_vs_zero(
      "no anticipation",
      "E[Y1^{p=1} - Y1^{p=0} | " + pname + "=1] = 0 (this is psi)", c);
}

AssumptionCheck audit_parallel_decision_2p(const Scm& scm, const McConfig& mc) {
  const int p = decision_node(scm, 1);
  const int y1 = scm.require_node("Y1");
  const int y2 = scm.require_node("Y2");
  const std::string pname = scm.nodes[p].name;
  const InterventionSpec p0 = InterventionSpec::on({{pname, 0.0}});
  const OracleContrast t1 = oracle_contrast(scm, y2, p0, y1, p0, {{p, 1.0}},
                                            derived_mc(mc, 904, 1));
  const OracleContrast t0 = oracle_contrast(scm, y2, p0, y1, p0, {{p, 0.0}},
                                            derived_mc(mc, 904, 0));
  return contrast_pair("parallel trends (decision)",
                       "E[Y2^{p=0}-Y1^{p=0}|" + pname + "=1] vs |" + pname + "=0]",
                       t1, t0);
}

AssumptionCheck audit_parallel_classic_2p(const Scm& scm, const McConfig& mc) {
  const int a2 = scm.require_node("A2");
  const int y1 = scm.require_node("Y1");
  const int y2 = scm.require_node("Y2");
  const InterventionSpec a0 = InterventionSpec::on({{"A2", 0.0}});
  const OracleContrast t1 = oracle_contrast(scm, y2, a0, y1, a0, {{a2, 1.0}},
                                            derived_mc(mc, 905, 1));
  const OracleContrast t0 = oracle_contrast(scm, y2, a0, y1, a0, {{a2, 0.0}},
                                            derived_mc(mc, 905, 0));
  return contrast_pair("parallel trends (classic)",
                       "E[Y2^{a2=0}-Y1|A2=1] vs E[Y2^{a2=0}-Y1|A2=0]", t1, t0);
}

std::vector<AssumptionCheck> audit_exclusion_2p(const Scm& scm, const McConfig& mc) {
  const int p = decision_node(scm, 1);
  const int y2 = scm.require_node("Y2");
  const std::string pname = scm.nodes[p].name;
  std::vector<AssumptionCheck> out;
  for (int a = 0; a <= 1; ++a) {
    for (int cond = 0; cond <= 1; ++cond) {
      const OracleContrast c = oracle_contrast(
          scm, y2,
          InterventionSpec::on({{pname, 1.0}, {"A2", static_cast<double>(a)}}),
          y2,
          InterventionSpec::on({{pname, 0.0}, {"A2", static_cast<double>(a)}}),
          {{p, static_cast<double>(cond)}},
          derived_mc(mc, 906, static_cast<std::uint64_t>(a) * 2 + cond));
      out.push_back(contrast_vs_zero(
          "exclusion restriction",
          "E[Y2^{p,a2=" + std::to_string(a) + "}|" + pname + "=" +
              std::to_string(cond) + "] invariant in the forced p",
          c));
    }
  }
  return out;
}

// ----- staggered audits -----

AssumptionCheck audit_determinism_staggered(const Scm& scm, const McConfig& mc) {
  const std::int64_t n = std::min<std::int64_t>(mc.n_draws, 50000);
  const PanelDataset panel =
      sample_observational(scm, n, rng::stream_key(mc.seed, 907, 0));
  const AuditReport audit = audit_assumptions(panel);
  AssumptionCheck out;
  out.assumption = "lagged determinism";
  out.detail = "A_k = P_{k-s} across " + std::to_string(n) + " sampled units";
  out.lhs = static_cast<double>(audit.determinism_violations);
  out.rhs = 0.0;
  out.pass = audit.determinism == AuditReport::Determinism::passed;
  out.method = "observational";
  return out;
}

AssumptionCheck audit_decision_structure(const Scm& scm, const McConfig& mc,
                                         int tau, int s) {
  const std::int64_t n = std::min<std::int64_t>(mc.n_draws, 50000);
  const PanelDataset panel =
      sample_observational(scm, n, rng::stream_key(mc.seed, 908, 0));
  // Admissible paths: first decision at g in {1,..,tau-s}, or never; always
  // absorbing and constant after tau-s.
  std::vector<std::int64_t> counts(tau - s + 1, 0);  // index 0 = never
  std::int64_t inadmissible = 0;
  for (int u = 0; u < panel.n_units; ++u) {
    int first = 0;
    bool ok = true;
    for (int k = 1; k <= tau; ++k) {
      const int p = panel.p(u, k);
      if (p == 1 && first == 0) first = k;
      if (p == 0 && first != 0) ok = false;  // not absorbing
    }
    if (first > tau - s) ok = false;  // first decision past tau-s
    if (!ok) {
      ++inadmissible;
    } else {
      ++counts[first == 0 ? 0 : first];
    }
  }
  std::int64_t min_count = counts[0];
  for (std::int64_t c : counts) min_count = std::min(min_count, c);
  AssumptionCheck out;
  out.assumption = "decision-path structure";
  std::ostringstream detail;
  detail << "all sampled decision paths admissible (" << inadmissible
         << " violations); path counts never=" << counts[0];
  for (int g = 1; g <= tau - s; ++g) detail << ", g=" << g << ":" << counts[g];
  out.detail = detail.str();
  out.lhs = static_cast<double>(min_count) / static_cast<double>(n);
  out.rhs = mc.positivity_floor;
  out.pass = inadmissible == 0 && out.lhs >= mc.positivity_floor;
  out.method = "observational";
  return out;
}

std::vector<AssumptionCheck> audit_no_anticipation_staggered(const Scm& scm,
                                                             const McConfig& mc,
                                                             int tau, int s) {
  std::vector<AssumptionCheck> out;
  for (int g = 1; g <= tau - s; ++g) {
    for (int k = g; k < g + s && k <= tau; ++k) {
      const OracleEstimand e = oracle_estimand(scm, EstimandKind::att_p_gt, mc, g, k);
      AssumptionCheck check;
      check.assumption = "no anticipation";
      check.detail = "ATT_Pbar(g=" + std::to_string(g) + ",k=" + std::to_string(k) +
                     ") = 0 for k < g+s";
      check.lhs = e.value;
      check.rhs = 0.0;
      check.tolerance = 4.0 * e.mc_se;
      check.pass = std::fabs(e.value) <= check.tolerance + kExactGuard;
      check.method = "oracle contrast";
      out.push_back(check);
    }
  }
  return out;
}

std::vector<AssumptionCheck> audit_parallel_staggered(const Scm& scm,
                                                      const McConfig& mc, int tau,
                                                      int s) {
  std::vector<AssumptionCheck> out;
  const InterventionSpec never = decision_path_arm(scm, tau, 0);
  for (int g = 1; g <= tau - s; ++g) {
    for (int k = g + s; k <= tau; ++k) {
      const int yk = scm.require_node("Y" + std::to_string(k));
      const int yk1 = scm.require_node("Y" + std::to_string(k - 1));
      const OracleContrast trend_g = oracle_contrast(
          scm, yk, never, yk1, never, decision_path_event(scm, tau, g),
          derived_mc(mc, 909, static_cast<std::uint64_t>(g) * 100 + k));
      std::set<int> js = {k, tau};
      for (int j : js) {
        const OracleContrast trend_c = oracle_contrast(
            scm, yk, never, yk1, never, decision_path_event(scm, j, 0),
            derived_mc(mc, 910, static_cast<std::uint64_t>(j) * 100 + k));
        out.push_back(contrast_pair(
            "parallel trends (decision, staggered)",
            "E[Y" + std::to_string(k) + "^{pbar=0}-Y" + std::to_string(k - 1) +
                "^{pbar=0}] among g=" + std::to_string(g) + " vs Pbar_" +
                std::to_string(j) + "=0",
            trend_g, trend_c));
      }
    }
  }
  return out;
}

// ----- replication harness -----

struct RepStats {
  MeanAcc acc;
  int failures = 0;
};

double sample_sd(const MeanAcc& acc) { return acc.sd(); }

IdentityCheck make_identity(const std::string& name, const MeanAcc& est,
                            double oracle_value, double oracle_se) {
  IdentityCheck check;
  check.name = name;
  check.estimator_mean = est.mean();
  check.estimator_sd = sample_sd(est);
  check.replications = static_cast<int>(est.n);
  check.oracle_value = oracle_value;
  check.oracle_mc_se = oracle_se;
  check.tolerance = 4.0 * rss(oracle_se, est.se());
  check.pass = std::fabs(check.estimator_mean - oracle_value) <=
               check.tolerance + kExactGuard;
  return check;
}

McConfig mc_from(const VerifyConfig& cfg) {
  McConfig mc;
  mc.n_draws = cfg.oracle_draws;
  mc.seed = cfg.seed;
  mc.positivity_floor = cfg.positivity_floor;
  return mc;
}

}  // namespace

bool VerificationReport::premises_hold() const {
  for (const AssumptionCheck& a : assumptions) {
    if (!a.pass) return false;
  }
  return true;
}

std::string VerificationReport::status_text() const {
  switch (status) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::vacuous: return "vacuous: premises violated";
  }
  return "";
}

VerificationReport verify_proposition(int proposition, const Scm& scm,
                                      const VerifyConfig& config) {
  if (proposition < 1 || proposition > 3) {
    throw ValidationError("proposition must be 1, 2, or 3");
  }
  validate(scm);
  VerificationReport report;
  report.proposition = proposition;
  report.scm_name = scm.name;
  report.scm_hash = scm_hash(scm);
  report.config = config;
  const McConfig mc = mc_from(config);
  const int tau = scm_tau(scm);

  if (proposition == 1 || proposition == 2) {
    if (tau != 2) {
      throw ValidationError("propositions 1 and 2 need a two-period SCM, got tau=" +
                            std::to_string(tau));
    }
    MeanAcc did;
    for (int r = 0; r < config.replications; ++r) {
      const PanelDataset panel = sample_observational(
          scm, config.n_units, rng::stream_key(config.seed, 1001, r));
      did.add(did_classic(panel).point);
    }
    const OracleEstimand att_a2 = oracle_estimand(scm, EstimandKind::att_a2, mc);
    const OracleEstimand psi = oracle_estimand(scm, EstimandKind::psi, mc);

    if (proposition == 1) {
      report.identities.push_back(
          make_identity("did_classic = ATT_A2 - psi (Prop 1)", did,
                        att_a2.value - psi.value, rss(att_a2.mc_se, psi.mc_se)));
      report.assumptions.push_back(audit_positivity_2p(scm, mc));
      report.assumptions.push_back(audit_determinism_2p(scm, mc, 1));
      report.assumptions.push_back(audit_determinism_2p(scm, mc, 0));
      report.assumptions.push_back(audit_parallel_decision_2p(scm, mc));
      report.assumptions.push_back(by_construction("consistency (decision)"));
      for (AssumptionCheck& c : audit_exclusion_2p(scm, mc)) {
        report.assumptions.push_back(std::move(c));
      }
    } else {
      const OracleEstimand att_p = oracle_estimand(scm, EstimandKind::att_p, mc);
      report.identities.push_back(make_identity("did_classic = ATT_P (Prop 2)",
                                                did, att_p.value, att_p.mc_se));
      report.assumptions.push_back(audit_positivity_2p(scm, mc));
      report.assumptions.push_back(audit_determinism_2p(scm, mc, 1));
      report.assumptions.push_back(audit_determinism_2p(scm, mc, 0));
      report.assumptions.push_back(audit_no_anticipation_2p(scm, mc));
      report.assumptions.push_back(audit_parallel_decision_2p(scm, mc));
      report.assumptions.push_back(by_construction("consistency (decision)"));
    }

    // Classic reading of the same functional, as diagnostics: does Eq. 1
    // still identify the implementation effect on this model?
    report.supplementary_assumptions.push_back(audit_parallel_classic_2p(scm, mc));
    report.supplementary.push_back(make_identity(
        "did_classic = ATT_A2 (Eq. 1 reading)", did, att_a2.value, att_a2.mc_se));
  } else {
    if (!scm.lag_s) {
      throw ValidationError("proposition 3 needs an SCM with lag_s metadata");
    }
    const int s = *scm.lag_s;
    if (tau < s + 1) throw ValidationError("proposition 3 needs tau >= s+1");

    struct Key {
      int g, k;
      ControlGroup control;
      bool operator<(const Key& o) const {
        return std::tie(g, k, control) < std::tie(o.g, o.k, o.control);
      }
    };
    std::map<Key, RepStats> stats;
    for (int r = 0; r < config.replications; ++r) {
      const PanelDataset panel = sample_observational(
          scm, config.n_units, rng::stream_key(config.seed, 1001, r));
      for (int g = 1; g <= tau - s; ++g) {
        if (g + s < 2) continue;
        for (int k = g + s; k <= tau; ++k) {
          for (ControlGroup control :
               {ControlGroup::not_yet_treated, ControlGroup::never_treated}) {
            RepStats& entry = stats[{g, k, control}];
            try {
              entry.acc.add(group_time_att(panel, g, k, s, control).point);
            } catch (const EstimationError&) {
              ++entry.failures;
            }
          }
        }
      }
    }

    for (auto& [key, entry] : stats) {
      const OracleEstimand truth =
          oracle_estimand(scm, EstimandKind::att_p_gt, mc, key.g, key.k);
      IdentityCheck check = make_identity(
          "group_time_att = ATT_Pbar(g,k) (Prop 3)", entry.acc, truth.value,
          truth.mc_se);
      check.g = key.g;
      check.k = key.k;
      check.control = key.control == ControlGroup::never_treated
                          ? "never_treated"
                          : "not_yet_treated";
      if (entry.failures > 0) {
        check.name += " [" + std::to_string(entry.failures) + " degenerate reps]";
        if (entry.acc.n == 0) check.pass = false;
      }
      report.identities.push_back(std::move(check));
    }

    // Both control groups identify the same estimand; their replication
    // means must agree within joint MC tolerance.
    for (int g = 1; g <= tau - s; ++g) {
      if (g + s < 2) continue;
      for (int k = g + s; k <= tau; ++k) {
        const RepStats& ny = stats[{g, k, ControlGroup::not_yet_treated}];
        const RepStats& never = stats[{g, k, ControlGroup::never_treated}];
        if (ny.acc.n == 0 || never.acc.n == 0) continue;
        IdentityCheck agree;
        agree.name = "control-group agreement";
        agree.g = g;
        agree.k = k;
        agree.estimator_mean = ny.acc.mean();
        agree.oracle_value = never.acc.mean();
        agree.estimator_sd = sample_sd(ny.acc);
        agree.oracle_mc_se = never.acc.se();
        agree.replications = static_cast<int>(ny.acc.n);
        agree.tolerance = 4.0 * rss(ny.acc.se(), never.acc.se());
        agree.pass = std::fabs(agree.estimator_mean - agree.oracle_value) <=
                     agree.tolerance + kExactGuard;
        report.supplementary.push_back(std::move(agree));
      }
    }

    report.assumptions.push_back(audit_determinism_staggered(scm, mc));
    report.assumptions.push_back(audit_decision_structure(scm, mc, tau, s));
    report.assumptions.push_back(by_construction("consistency (decision)"));
    for (AssumptionCheck& c : audit_no_anticipation_staggered(scm, mc, tau, s)) {
      report.assumptions.push_back(std::move(c));
    }
    for (AssumptionCheck& c : audit_parallel_staggered(scm, mc, tau, s)) {
      report.assumptions.push_back(std::move(c));
    }
  }

  if (!report.premises_hold()) {
    report.status = VerificationReport::Status::vacuous;
  } else {
    bool all = true;
    for (const IdentityCheck& c : report.identities) all = all && c.pass;
    report.status = all ? VerificationReport::Status::pass
                        : VerificationReport::Status::fail;
  }
  return report;
}

SweepTable bias_sweep(const std::vector<double>& alphas, const VerifyConfig& config) {
  SweepTable table;
  const McConfig mc = mc_from(config);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const Scm scm = builtin_prop1_dgp(alphas[i]);
    const McConfig sub = derived_mc(mc, 2000, i);
    const OracleEstimand psi = oracle_estimand(scm, EstimandKind::psi, sub);
    const OracleEstimand att_a2 = oracle_estimand(scm, EstimandKind::att_a2, sub);
    MeanAcc did;
    for (int r = 0; r < config.replications; ++r) {
      const PanelDataset panel = sample_observational(
          scm, config.n_units,
          rng::stream_key(config.seed, 3000 + i, static_cast<std::uint64_t>(r)));
      did.add(did_classic(panel).point);
    }
    SweepRow row;
    row.alpha = alphas[i];
    row.psi = psi.value;
    row.psi_mc_se = psi.mc_se;
    row.att_a2 = att_a2.value;
    row.att_a2_mc_se = att_a2.mc_se;
    row.did_mean = did.mean();
    row.did_se = did.se();
    row.residual = row.did_mean - row.att_a2 + row.psi;
    row.tolerance = 4.0 * rss(row.did_se, row.att_a2_mc_se, row.psi_mc_se);
    row.pass = std::fabs(row.residual) <= row.tolerance + kExactGuard;
    table.rows.push_back(row);
  }
  return table;
}

// ----- JSON -----

std::string OracleEstimand::to_json() const {
  json j;
  j["kind"] = estimand_name(kind);
  if (g) j["g"] = *g;
  if (k) j["k"] = *k;
  j["value"] = value;
  j["mc_se"] = mc_se;
  j["n_draws"] = n_draws;
  j["kept_draws"] = kept_draws;
  j["conditioning"] = conditioning;
  return j.dump(2);
}

std::string AssumptionCheck::to_json_obj() const {
  json j;
  j["assumption"] = assumption;
  j["detail"] = detail;
  j["lhs"] = lhs;
  j["rhs"] = rhs;
  j["tolerance"] = tolerance;
  j["pass"] = pass;
  j["method"] = method;
  return j.dump();
}

namespace {

json identity_to_json(const IdentityCheck& c) {
  json j;
  j["name"] = c.name;
  j["estimator_mean"] = c.estimator_mean;
  j["estimator_sd"] = c.estimator_sd;
  j["replications"] = c.replications;
  j["oracle_value"] = c.oracle_value;
  j["oracle_mc_se"] = c.oracle_mc_se;
  j["tolerance"] = c.tolerance;
  j["pass"] = c.pass;
  if (c.g) j["g"] = *c.g;
  if (c.k) j["k"] = *c.k;
  j["control"] = c.control;
  return j;
}

json assumption_to_json(const AssumptionCheck& c) {
  return json::parse(c.to_json_obj());
}

}  // namespace

std::string VerificationReport::to_json() const {
  json j;
  j["proposition"] = proposition;
  j["scm"] = scm_name;
  j["scm_hash"] = scm_hash;
  j["status"] = status_text();
  json ids = json::array();
  for (const IdentityCheck& c : identities) ids.push_back(identity_to_json(c));
  j["identities"] = ids;
  json as = json::array();
  for (const AssumptionCheck& c : assumptions) as.push_back(assumption_to_json(c));
  j["assumptions"] = as;
  json sup = json::array();
  for (const IdentityCheck& c : supplementary) sup.push_back(identity_to_json(c));
  j["supplementary"] = sup;
  json supa = json::array();
  for (const AssumptionCheck& c : supplementary_assumptions) {
    supa.push_back(assumption_to_json(c));
  }
  j["supplementary_assumptions"] = supa;
  j["config"] = {{"n_units", config.n_units},
                 {"replications", config.replications},
                 {"seed", config.seed},
                 {"oracle_draws", config.oracle_draws},
                 {"positivity_floor", config.positivity_floor}};
  return j.dump(2);
}

std::string SweepTable::to_json() const {
  json rows_json = json::array();
  for (const SweepRow& r : rows) {
    rows_json.push_back({{"alpha", r.alpha},
                         {"psi", r.psi},
                         {"psi_mc_se", r.psi_mc_se},
                         {"att_a2", r.att_a2},
                         {"att_a2_mc_se", r.att_a2_mc_se},
                         {"did_mean", r.did_mean},
                         {"did_se", r.did_se},
                         {"residual", r.residual},
                         {"tolerance", r.tolerance},
                         {"pass", r.pass}});
  }
  json j;
  j["rows"] = rows_json;
  return j.dump(2);
}

std::string SweepTable::to_csv() const {
  std::ostringstream out;
  out << "alpha,psi,psi_mc_se,att_a2,att_a2_mc_se,did_mean,did_se,residual,"
         "tolerance,pass\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    out << buf;
  };
  for (const SweepRow& r : rows) {
    put(r.alpha, ',');
    put(r.psi, ',');
    put(r.psi_mc_se, ',');
    put(r.att_a2, ',');
    put(r.att_a2_mc_se, ',');
    put(r.did_mean, ',');
    put(r.did_se, ',');
    put(r.residual, ',');
    put(r.tolerance, ',');
    out << (r.pass ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace didp
