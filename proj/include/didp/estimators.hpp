#pragma once

// The identification functionals computed from observed panels: the classic
// two-period difference-in-differences contrast and the group-time contrasts
// for staggered adoption with a decision-to-implementation lag. All means
// are simple unweighted arithmetic means of the named cells; everything here
// is a pure function of an immutable panel.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "didp/common.hpp"
#include "didp/panel.hpp"

namespace didp {

enum class ControlGroup { not_yet_treated, never_treated };

// Which estimand the caller asserts the functional identifies. The same
// two-period contrast reads as the implementation effect under the classic
// parallel-trends assumptions, or as the decision effect under the
// decision-based assumption set; the data cannot tell the two apart, so the
// reading is recorded, never inferred.
enum class AttReading { att_a2, att_p };

struct CellStat {
  std::string name;
  int size = 0;
  double mean_pre = 0.0;
  double mean_post = 0.0;
};

struct BootstrapResult {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
  int replicates = 0;
  std::uint64_t seed = 0;
  int degenerate_redraws = 0;
};

struct EstimateReport {
  std::string estimand;    // ATT_A2 | ATT_P | ATT_P_GT(g,k)
  double point = 0.0;
  std::string functional;  // textual identity of the formula used
  std::string control_group = "n/a";
  std::vector<CellStat> cells;
  std::vector<std::string> singleton_cells;  // size-1 cells allowed for the
                                             // point estimate, refused by the
                                             // bootstrap
  std::optional<int> g, k, s;
  std::optional<BootstrapResult> bootstrap;

  std::string to_json() const;
};

// The canonical two-period contrast
//   {E[Y2|A2=1] - E[Y1|A2=1]} - {E[Y2|A2=0] - E[Y1|A2=0]}.
// Requires a two-period panel with both A2 arms nonempty; the two-period
// canonical setting also requires A1 = 0 for every unit.
EstimateReport did_classic(const PanelDataset& panel,
                           AttReading reading = AttReading::att_a2);

// Group-time decision-effect contrast for first-decision time g, outcome
// time k, lag s:
//   {E[Y_k|T] - E[Y_{g+s-1}|T]} - {E[Y_k|C] - E[Y_{g+s-1}|C]}
// with treated cell T = {A_{g+s}=1, Abar_{g+s-1}=0} and control cell
//   not_yet_treated: Abar_{k+s}=0 -- observed as Abar_{min(k+s,tau)}=0, which
//     is equivalent under the admissible decision paths; when the decision
//     column is present the cell is selected by Pbar_k=0 directly and checked
//     against the treatment-based proxy,
//   never_treated:   Abar_tau=0 (equivalently Pbar_{tau-s}=0 when observed).
// Index requirements: 1 <= g <= tau-s, g+s <= k <= tau, g+s >= 2.
EstimateReport group_time_att(const PanelDataset& panel, int g, int k, int s,
                              ControlGroup control);

// Nonparametric unit-level resampling with a percentile interval.
// Deterministic given seed; resamples on which the estimator raises an
// EstimationError (empty or refused cell) are redrawn and counted, and more
// than 50% degenerate attempts is an error. Requires replicates >= 100.
BootstrapResult bootstrap_ci(const PanelDataset& panel,
                             const std::function<double(const PanelDataset&)>& estimator,
                             double level, int replicates, std::uint64_t seed);

// Bootstrap closure guard: single-unit cells are tolerated for point
// estimates but refused under resampling (a mean of one value carries no
// resampling information).
double refuse_singletons(const EstimateReport& report);

}  // namespace didp
