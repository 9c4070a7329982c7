#pragma once

// Recursive structural causal models over a totally ordered node list.
// Parents must precede their children, so future-to-past edges cannot be
// expressed at all: the temporal order is enforced structurally rather than
// assumed. Sampling is deterministic given (model, n, seed) and independent
// of thread scheduling via per-unit substreams.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "didp/common.hpp"
#include "didp/panel.hpp"

namespace didp {

enum class NodeKind { exogenous, deterministic, stochastic };
enum class Dist { none, bernoulli, poisson, normal };

// Affine-plus-max expression over parent values:
//   intercept + sum coef_i * parent_i + sum coef_j * max(parent_a_j, parent_b_j)
// This covers every data-generating process the library ships (e.g.
// 10 + 5*U - 5*P, or -5*max(P, A2)) while keeping the static mean-range
// check decidable.
struct LinExpr {
  struct Term {
    int parent;  // node index
    double coef;
  };
  struct MaxTerm {
    int parent_a;
    int parent_b;
    double coef;
  };
  double intercept = 0.0;
  std::vector<Term> terms;
  std::vector<MaxTerm> max_terms;

  double eval(const std::vector<double>& values) const;
};

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::deterministic;
  Dist dist = Dist::none;  // none for deterministic nodes
  LinExpr mean;            // the value expression for deterministic nodes
  double sd = 0.0;         // normal only
  std::vector<int> parents;  // union of all indices referenced by mean
};

struct Scm {
  std::string name;
  std::optional<int> lag_s;  // decision-to-implementation lag metadata
  std::vector<NodeSpec> nodes;

  int node_index(const std::string& name) const;  // -1 when absent
  int require_node(const std::string& name) const;  // throws ValidationError
  bool has_node(const std::string& name) const { return node_index(name) >= 0; }
};

// Forced node values for graph surgery. Intervened nodes keep their position
// in the order; their mechanisms are replaced by constants and everything
// downstream reacts naturally.
struct InterventionSpec {
  std::map<std::string, double> assignments;

  static InterventionSpec on(std::initializer_list<std::pair<const std::string, double>> xs) {
    InterventionSpec spec;
    spec.assignments = xs;
    return spec;
  }
};

// Structural checks: every parent reference must point at an earlier node
// ("forward reference" otherwise), Poisson means must be nonnegative and
// Bernoulli means must stay in [0,1] over the reachable value ranges, and
// normal sds must be nonnegative.
//
// Reachable ranges are computed by interval propagation: Bernoulli nodes
// contribute [0,1], Poisson nodes [0, upper mean], normal nodes their mean
// range, deterministic nodes the interval arithmetic of their expression.
// Ranging over mean intervals rather than full tail support is what makes
// the check useful: a Poisson outcome always has unbounded support, so a
// literal reading would reject any model with a negative coefficient on it.
void validate(const Scm& scm);

struct SampleOptions {
  bool keep_exogenous = false;  // retain non-panel nodes in panel.extra
  int threads = 0;              // 0 = DIDP_THREADS env or hardware default
};

// n i.i.d. unit draws in node order; bit-identical output for identical
// (scm, n, seed) regardless of thread count. Node names A<k>, Y<k>, P<k>
// (and plain "P", an alias for P1) map onto panel columns; anything else is
// auxiliary and dropped unless keep_exogenous is set. Decision columns for
// periods past the last defined P node carry the last value forward,
// matching the absorbing admissible paths.
PanelDataset sample_observational(const Scm& scm, std::int64_t n,
                                  std::uint64_t seed, SampleOptions opts = {});

// Same, after graph surgery replacing the intervened nodes' mechanisms with
// constants. Upstream nodes are still drawn naturally.
PanelDataset sample_interventional(const Scm& scm, const InterventionSpec& spec,
                                   std::int64_t n, std::uint64_t seed,
                                   SampleOptions opts = {});

// Throws ValidationError for unknown node names or values outside a binary
// node's support.
void check_intervention(const Scm& scm, const InterventionSpec& spec);

// ----- Built-in data-generating processes -----

// The two-period car-recall model:
//   U ~ Bernoulli(0.2); A1 := 0; P := U; Y1 ~ Poisson(10 + 5U - 5P);
//   A2 := P; Y2 ~ Poisson(10 - 0.2*Y1 + 5U - 5*max(P, A2)).
// Anticipation fully offsets the defect, so intervening on the
// implementation does nothing while intervening on the decision helps.
Scm builtin_cars_example();

// Two-period family with anticipation on the first outcome and an exclusion
// restriction on the second (the decision moves Y2 only through A2):
//   U ~ Bernoulli(0.2); A1 := 0; P := U; Y1 ~ Poisson(10 + 5U + alpha*P);
//   A2 := P; Y2 ~ Poisson(12 + 5U - 3*A2).
Scm builtin_prop1_dgp(double alpha = -2.0);

// Two-period no-anticipation model where decision and implementation effects
// differ:
//   U ~ Bernoulli(0.2); A1 := 0; P := U; Y1 ~ Poisson(10 + 5U);
//   A2 := P; Y2 ~ Poisson(12 + 5U - 3*max(P, A2)).
Scm builtin_prop2_dgp();

struct StaggeredParams {
  int tau = 4;
  int s = 1;
  double u_prob = 0.5;           // P(unit type U = 1)
  double level = 10.0;           // outcome intercept
  std::vector<double> time_trend;        // per-period shift, size tau
                                         // (default 0.5*(k-1))
  double unit_coef = 2.0;        // additive level effect of U (time-invariant,
                                 // so decision-based parallel trends hold by
                                 // construction)
  std::vector<double> exposure_effects;  // effect after e periods of
                                         // implementation, e = 1.. (default
                                         // {1.0, 1.8, 2.4, ...})
  double anticipation = 0.0;     // effect of a made-but-unimplemented decision
  std::vector<double> hazard_base;       // per-period first-decision hazard
                                         // for U = 0, size tau - s
  double hazard_u_coef = 0.15;   // hazard shift for U = 1
  double outcome_sd = 1.0;
};

// Staggered adoption with absorbing decisions: auxiliary draws
// D_k ~ Bernoulli(hazard) feed P_k := max(P_{k-1}, D_k) for k <= tau-s, the
// later P_k copy P_{tau-s}, and A_k := P_{k-s}. The admissible decision
// paths are exactly "zeros then ones up to tau-s, then constant", each with
// positive probability. Outcomes are Normal with additive unit level,
// common time trend, exposure-indexed implementation effects, and an
// anticipation term active between decision and implementation. With
// anticipation == 0 the no-anticipation condition holds by construction.
Scm builtin_staggered_dgp(const StaggeredParams& params = {});

// Resolve "cars" / "prop1[:alpha]" / "prop2" / "staggered" (with optional
// parameter overrides applied by the caller for staggered).
Scm builtin_by_name(const std::string& name);

// ----- JSON interface -----
//
// {"name": ..., "lag_s": ..., "nodes": [{"name","kind","dist","mean":
//   {"intercept","terms":[{"parent","coef"}],"max_terms":[{"parents":[a,b],
//   "coef"}]},"sd"}, ...]}
// max_terms entries may also be plain ["a","b"] pairs (coefficient 1).
Scm scm_from_json(const std::string& text);
Scm scm_from_json_file(const std::string& path);
std::string scm_to_json(const Scm& scm, int indent = 2);

// Stable content hash over the canonical (sorted-key, minified) JSON form;
// equal models hash equal regardless of formatting or key order.
std::string scm_hash(const Scm& scm);

// Value interval of each node under the validate() propagation rules.
// Exposed for diagnostics and tests.
std::vector<std::pair<double, double>> node_intervals(const Scm& scm);

int default_thread_count();

// Number of outcome periods defined by the model (max k over Y<k> nodes).
int scm_tau(const Scm& scm);

}  // namespace didp
