#pragma once

// Long-format unit x time panels: ingestion, validation, adoption-group
// inference, and the assumption checks that are possible from observed data
// alone. Counterfactual assumptions live in oracle.hpp; they cannot be
// audited from a panel and are only flagged as such here.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "didp/common.hpp"

namespace didp {

// Dense rectangular panel. Periods are 1..n_periods; all accessors take
// 1-based period indices. Immutable by convention once built: nothing in the
// library mutates a panel after construction, so sharing across threads is
// safe.
struct PanelDataset {
  int n_units = 0;
  int n_periods = 0;
  std::vector<std::string> unit_ids;        // original ids, index-aligned
  std::vector<double> outcome;              // [unit * n_periods + (k-1)]
  std::vector<std::uint8_t> treatment;      // same layout, values 0/1
  std::vector<std::uint8_t> decision;       // empty when P unobserved
  std::optional<int> lag_s;                 // decision-to-implementation lag,
                                            // known only when set by a sampler
                                            // or the caller
  std::map<std::string, std::vector<double>> extra;  // per-unit retained nodes
                                                     // (e.g. exogenous U);
                                                     // estimators never read it

  bool has_decision() const { return !decision.empty(); }

  double y(int unit, int k) const { return outcome[idx(unit, k)]; }
  int a(int unit, int k) const { return treatment[idx(unit, k)]; }
  int p(int unit, int k) const { return decision[idx(unit, k)]; }

  std::size_t idx(int unit, int k) const {
    return static_cast<std::size_t>(unit) * n_periods + (k - 1);
  }

  // First period with treatment == 1, or nullopt for an all-zero row.
  std::optional<int> first_treated(int unit) const;

  // Content equality over the CSV-representable fields (ids, outcomes,
  // treatment, decision). lag_s and extra are sampler-side metadata that a
  // CSV round trip does not carry.
  friend bool operator==(const PanelDataset& a, const PanelDataset& b);
};

// Per-unit adoption labels: first-decision time g in {1,..,tau-s}, or
// "never" (nullopt).
struct GroupAssignment {
  int lag_s = 0;
  std::vector<std::optional<int>> group;  // index-aligned with panel units

  std::map<int, int> counts() const;
  int never_count() const;
  static std::string label(const std::optional<int>& g);
};

// Column-name mapping for CSV ingestion. Defaults match the canonical save
// format.
struct PanelSchema {
  std::string unit = "unit";
  std::string time = "time";
  std::string treatment = "a";
  std::string outcome = "y";
  std::string decision = "p";
};

// Parse a long-format CSV (header row required). Row order is irrelevant;
// unit ids are remapped to 0-based indices in order of first appearance.
// Times must form the same contiguous 1..tau grid for every unit.
// Throws ValidationError on: missing cells, ragged grids, duplicate
// (unit,time) rows, non-binary treatment/decision values, and partially
// observed decision columns (a decision column must be fully populated or
// fully empty).
PanelDataset load_panel(std::istream& source, const PanelSchema& schema = {});
PanelDataset load_panel_file(const std::string& path, const PanelSchema& schema = {});

// Canonical save format: columns unit,time,a,y[,p], rows ordered by
// (unit index, time), outcomes rendered with 17 significant digits so that
// load(save(panel)) == panel holds bit-exactly.
void save_panel(const PanelDataset& panel, std::ostream& out);
void save_panel_file(const PanelDataset& panel, const std::string& path);

// Assign each unit its first-decision time g = (first treated time - s), or
// "never" for all-zero treatment rows, and verify the implied decision path
// is admissible: zeros, then ones up to tau-s, then constant.
// Throws ValidationError on non-monotone treatment paths (1 -> 0 reversion)
// and on first treated time <= s.
GroupAssignment infer_groups(const PanelDataset& panel, int s);

struct AuditReport {
  // Positivity: arm/group counts at the comparison times.
  bool positivity_ok = true;
  std::vector<std::pair<std::string, int>> arm_counts;
  std::string positivity_detail;

  // Determinism A_k = P_{k-s}: checkable only when decision is observed.
  enum class Determinism { passed, violated, skipped_unobserved, skipped_no_lag };
  Determinism determinism = Determinism::skipped_unobserved;
  int determinism_violations = 0;
  int lag_s_used = 0;
  bool lag_s_inferred = false;

  // Group sizes per adoption label (when treatment paths are monotone).
  std::map<std::string, int> group_sizes;
  std::string group_detail;

  // Assumptions that cannot be checked from observed data.
  std::vector<std::string> not_checkable;

  std::string to_json() const;
};

// Observational diagnostics only; never throws on violations (downstream
// estimators are the ones that refuse to run). `s` overrides panel.lag_s;
// when neither is available and a decision column exists, the smallest lag
// consistent with the data is tried.
AuditReport audit_assumptions(const PanelDataset& panel,
                              std::optional<int> s = std::nullopt);

}  // namespace didp
