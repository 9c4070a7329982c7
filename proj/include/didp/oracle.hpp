#pragma once

// Ground-truth causal estimands by brute-force simulation on an SCM, and the
// Monte Carlo experiments that check the identification results against
// them.
//
// Every estimand in scope is a difference of conditional interventional
// means. The oracle therefore (i) draws the natural world, (ii) keeps the
// draws satisfying the conditioning event (rejection), and (iii) for each
// kept draw propagates expected values through the graph once per
// intervention arm, sharing the exogenous and non-descendant natural values
// across arms and nothing else. No joint counterfactual law beyond that
// single-world sharing is assumed or needed. Propagation is exact
// (linearity of expectation) whenever every max term evaluated downstream of
// the intervention has deterministic arguments; otherwise the engine falls
// back to re-sampling the downstream noise, which is unbiased for any model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "didp/common.hpp"
#include "didp/scm.hpp"

namespace didp {

enum class EstimandKind { att_a2, att_p, psi, att_p_gt, att_a_gt };

std::string estimand_name(EstimandKind kind);

struct McConfig {
  std::int64_t n_draws = 1000000;
  std::uint64_t seed = 1;
  // Conditioning events with empirical probability below this floor are
  // treated as positivity failures.
  double positivity_floor = 1e-4;
};

struct OracleEstimand {
  EstimandKind kind;
  std::optional<int> g, k;
  double value = 0.0;
  double mc_se = 0.0;
  std::int64_t n_draws = 0;
  std::int64_t kept_draws = 0;
  std::string conditioning;  // e.g. "P=1", "Pbar=(0,1,1,1)"

  std::string to_json() const;
};

// Compute one estimand. g/k are required for the group-time kinds; for
// att_p_gt g is the first-decision time, for att_a_gt the first-implementation
// time (the latter is an oracle-only quantity: no estimator in the library
// claims to identify it).
// Throws EstimationError when the conditioning event falls below the
// positivity floor.
OracleEstimand oracle_estimand(const Scm& scm, EstimandKind kind,
                               const McConfig& mc, int g = -1, int k = -1);

// General conditional interventional contrast
//   E[ target_a^{arm_a} - target_b^{arm_b} | event on natural values ],
// the primitive everything above reduces to. Exposed for the assumption
// audits and for tests. Event entries pin natural node values exactly;
// target_b < 0 means a single-arm expectation.
struct OracleContrast {
  double value = 0.0;
  double mc_se = 0.0;
  std::int64_t kept = 0;
  double event_prob = 0.0;
};
OracleContrast oracle_contrast(const Scm& scm, int target_a,
                               const InterventionSpec& arm_a, int target_b,
                               const InterventionSpec& arm_b,
                               const std::vector<std::pair<int, double>>& event,
                               const McConfig& mc);

struct AssumptionCheck {
  std::string assumption;   // short id, e.g. "parallel trends (decision)"
  std::string detail;       // what was contrasted
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;   // 0 with "by construction" method
  bool pass = false;
  std::string method;       // "oracle contrast" | "observational" |
                            // "by construction"

  std::string to_json_obj() const;
};

struct IdentityCheck {
  std::string name;
  double estimator_mean = 0.0;
  double estimator_sd = 0.0;
  int replications = 0;
  double oracle_value = 0.0;
  double oracle_mc_se = 0.0;
  double tolerance = 0.0;  // 4 * combined MC standard error
  bool pass = false;
  std::optional<int> g, k;
  std::string control = "n/a";
};

struct VerifyConfig {
  std::int64_t n_units = 10000;
  int replications = 200;
  std::uint64_t seed = 1;
  std::int64_t oracle_draws = 400000;
  double positivity_floor = 1e-4;
};

struct VerificationReport {
  int proposition = 0;
  std::string scm_name;
  std::string scm_hash;
  enum class Status { pass, fail, vacuous } status = Status::fail;
  std::vector<IdentityCheck> identities;
  std::vector<AssumptionCheck> assumptions;       // the proposition's premises
  // Diagnostics outside the proposition's premises (e.g. the classic
  // parallel-trends reading and the Eq.-1 identity when verifying the
  // decision-based result); these never change the status.
  std::vector<IdentityCheck> supplementary;
  std::vector<AssumptionCheck> supplementary_assumptions;
  VerifyConfig config;

  bool premises_hold() const;
  std::string status_text() const;
  std::string to_json() const;
};

// Run `replications` simulate-then-estimate cycles and compare the
// estimator's mean against the proposition's claimed identity:
//   1: did_classic = oracle(ATT_A2) - oracle(psi)   (two-period SCM)
//   2: did_classic = oracle(ATT_P)                  (two-period SCM)
//   3: group_time_att(g,k,control) = oracle(ATT_P_GT(g,k)) for every
//      admissible (g,k) and both control groups     (staggered SCM)
// The proposition's assumptions are audited via oracle contrasts; if any
// required premise fails the report is marked vacuous rather than failed.
VerificationReport verify_proposition(int proposition, const Scm& scm,
                                      const VerifyConfig& config);

struct SweepRow {
  double alpha = 0.0;
  double psi = 0.0;
  double psi_mc_se = 0.0;
  double att_a2 = 0.0;
  double att_a2_mc_se = 0.0;
  double did_mean = 0.0;
  double did_se = 0.0;       // MC error of the replication mean
  double residual = 0.0;     // did_mean - att_a2 + psi, ~0 under the premises
  double tolerance = 0.0;    // 4 * joint MC sigma
  bool pass = false;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::string to_json() const;
  std::string to_csv() const;
};

// Anticipation sweep over the two-period family builtin_prop1_dgp(alpha):
// for each alpha, the oracle bias term psi(alpha), the replication mean of
// the classic contrast, the oracle ATT_A2, and the residual of the
// decomposition, which is ~0 because the family satisfies the decision-based
// parallel trends and the exclusion restriction by construction.
SweepTable bias_sweep(const std::vector<double>& alphas, const VerifyConfig& config);

}  // namespace didp
