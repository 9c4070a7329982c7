#include "didp/panel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace didp {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ValidationError("");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + what + " value '" + s + "'");
  }
}

int parse_binary(const std::string& s, const std::string& what) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  double v = parse_double(s, what);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw ValidationError("non-binary " + what + " value '" + s + "'");
}

}  // namespace

std::optional<int> PanelDataset::first_treated(int unit) const {
  for (int k = 1; k <= n_periods; ++k) {
    if (a(unit, k) == 1) return k;
  }
  return std::nullopt;
}

bool operator==(const PanelDataset& a, const PanelDataset& b) {
  return a.n_units == b.n_units && a.n_periods == b.n_periods &&
         a.unit_ids == b.unit_ids && a.outcome == b.outcome &&
         a.treatment == b.treatment && a.decision == b.decision;
}

std::map<int, int> GroupAssignment::counts() const {
  std::map<int, int> out;
  for (const auto& g : group) {
    if (g) ++out[*g];
  }
  return out;
}

int GroupAssignment::never_count() const {
  int n = 0;
  for (const auto& g : group) {
    if (!g) ++n;
  }
  return n;
}

std::string GroupAssignment::label(const std::optional<int>& g) {
  return g ? "g=" + std::to_string(*g) : "never";
}

PanelDataset load_panel(std::istream& source, const PanelSchema& schema) {
  std::string line;
  if (!std::getline(source, line)) throw ValidationError("empty CSV input");
  const std::vector<std::string> header = split_csv_line(line);

  auto column = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_unit = column(schema.unit);
  const int c_time = column(schema.time);
  const int c_a = column(schema.treatment);
  const int c_y = column(schema.outcome);
  const int c_p = column(schema.decision);
  if (c_unit < 0 || c_time < 0 || c_a < 0 || c_y < 0) {
    throw ValidationError("missing required column(s): need '" + schema.unit +
                          "', '" + schema.time + "', '" + schema.treatment +
                          "', '" + schema.outcome + "'");
  }

  struct Row {
    int unit;
    int time;
    double y;
    int a;
    int p;  // -1 = missing
  };
  std::vector<Row> rows;
  std::vector<std::string> unit_ids;
  std::unordered_map<std::string, int> unit_index;
  int max_time = 0;

  int lineno = 1;
  while (std::getline(source, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_line(line);
    auto field = [&](int c) -> const std::string& {
      if (c >= static_cast<int>(f.size())) {
        throw ValidationError("line " + std::to_string(lineno) +
                              ": too few fields");
      }
      return f[c];
    };
    const std::string& uid = field(c_unit);
    auto [it, inserted] = unit_index.try_emplace(uid, static_cast<int>(unit_ids.size()));
    if (inserted) unit_ids.push_back(uid);

    Row r;
    r.unit = it->second;
    double t = parse_double(field(c_time), "time");
    r.time = static_cast<int>(t);
    if (r.time < 1 || static_cast<double>(r.time) != t) {
      throw ValidationError("line " + std::to_string(lineno) +
                            ": time must be a positive integer, got '" +
                            field(c_time) + "'");
    }
    r.y = parse_double(field(c_y), "outcome");
    r.a = parse_binary(field(c_a), "treatment");
    r.p = -1;
    if (c_p >= 0) {
      const std::string& pv = field(c_p);
      if (!pv.empty()) r.p = parse_binary(pv, "decision");
    }
    max_time = std::max(max_time, r.time);
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError("CSV contains no data rows");

  PanelDataset panel;
  panel.n_units = static_cast<int>(unit_ids.size());
  panel.n_periods = max_time;
  panel.unit_ids = std::move(unit_ids);
  const std::size_t cells = static_cast<std::size_t>(panel.n_units) * panel.n_periods;
  panel.outcome.assign(cells, 0.0);
  panel.treatment.assign(cells, 0);

  std::vector<std::uint8_t> seen(cells, 0);
  int p_present = 0, p_missing = 0;
  std::vector<std::int8_t> pcells(cells, -1);
  for (const Row& r : rows) {
    if (r.time > panel.n_periods) continue;  // unreachable; max_time bound
    const std::size_t i = panel.idx(r.unit, r.time);
    if (seen[i]) {
      throw ValidationError("duplicate row for unit '" +
                            panel.unit_ids[r.unit] + "', time " +
                            std::to_string(r.time));
    }
    seen[i] = 1;
    panel.outcome[i] = r.y;
    panel.treatment[i] = static_cast<std::uint8_t>(r.a);
    pcells[i] = static_cast<std::int8_t>(r.p);
    if (r.p >= 0) ++p_present; else ++p_missing;
  }
  for (int u = 0; u < panel.n_units; ++u) {
    for (int k = 1; k <= panel.n_periods; ++k) {
      if (!seen[panel.idx(u, k)]) {
        throw ValidationError("ragged panel: unit '" + panel.unit_ids[u] +
                              "' lacks the time-" + std::to_string(k) + " row");
      }
    }
  }
  // Decision is all-or-nothing: a column with some values missing is
  // rejected rather than treated as partially observed.
  if (p_present > 0 && p_missing > 0) {
    throw ValidationError("partially observed decision column: " +
                          std::to_string(p_missing) + " missing cell(s)");
  }
  if (p_present > 0) {
    panel.decision.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      panel.decision[i] = static_cast<std::uint8_t>(pcells[i]);
    }
  }
  return panel;
}

PanelDataset load_panel_file(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file '" + path + "'");
  return load_panel(in, schema);
}

void save_panel(const PanelDataset& panel, std::ostream& out) {
  const bool has_p = panel.has_decision();
  out << "unit,time,a,y";
  if (has_p) out << ",p";
  out << "\n";
  char buf[40];
  for (int u = 0; u < panel.n_units; ++u) {
    for (int k = 1; k <= panel.n_periods; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", panel.y(u, k));
      out << panel.unit_ids[u] << ',' << k << ',' << panel.a(u, k) << ',' << buf;
      if (has_p) out << ',' << panel.p(u, k);
      out << "\n";
    }
  }
}

void save_panel_file(const PanelDataset& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  save_panel(panel, out);
}

GroupAssignment infer_groups(const PanelDataset& panel, int s) {
  if (s < 0) throw ValidationError("lag s must be nonnegative");
  GroupAssignment ga;
  ga.lag_s = s;
  ga.group.resize(panel.n_units);
  for (int u = 0; u < panel.n_units; ++u) {
    // Monotone check: once treated, treated forever.
    int first = 0;
    for (int k = 1; k <= panel.n_periods; ++k) {
      const int a = panel.a(u, k);
      if (a == 1 && first == 0) first = k;
      if (a == 0 && first != 0) {
        throw ValidationError("non-monotone treatment path for unit '" +
                              panel.unit_ids[u] + "' (reverts 1->0 at time " +
                              std::to_string(k) + ")");
      }
    }
    if (first == 0) {
      ga.group[u] = std::nullopt;
      continue;
    }
    if (first <= s) {
      throw ValidationError(
          "unit '" + panel.unit_ids[u] + "' first treated at time " +
          std::to_string(first) + " <= lag s=" + std::to_string(s) +
          ": implementation before any admissible decision time");
    }
    ga.group[u] = first - s;
  }
  return ga;
}

namespace {

// Smallest s in [0, tau) under which A_k = P_{k-s} holds for every cell
// (with A_k = 0 required for k <= s), or nullopt.
std::optional<int> infer_lag(const PanelDataset& panel) {
  for (int s = 0; s < panel.n_periods; ++s) {
    bool ok = true;
    for (int u = 0; u < panel.n_units && ok; ++u) {
      for (int k = 1; k <= panel.n_periods && ok; ++k) {
        const int expected = (k <= s) ? 0 : panel.p(u, k - s);
        if (panel.a(u, k) != expected) ok = false;
      }
    }
    if (ok) return s;
  }
  return std::nullopt;
}

}  // namespace

AuditReport audit_assumptions(const PanelDataset& panel, std::optional<int> s) {
  AuditReport report;

  // Lag resolution: explicit argument > panel metadata > inference from the
  // decision column.
  std::optional<int> lag = s ? s : panel.lag_s;
  if (!lag && panel.has_decision()) {
    lag = infer_lag(panel);
    if (lag) report.lag_s_inferred = true;
  }
  report.lag_s_used = lag.value_or(0);

  // Determinism A_k = P_{k-s}.
  if (!panel.has_decision()) {
    report.determinism = AuditReport::Determinism::skipped_unobserved;
  } else if (!lag) {
    report.determinism = AuditReport::Determinism::skipped_no_lag;
  } else {
    int violations = 0;
    for (int u = 0; u < panel.n_units; ++u) {
      for (int k = 1; k <= panel.n_periods; ++k) {
        const int expected = (k <= *lag) ? 0 : panel.p(u, k - *lag);
        if (panel.a(u, k) != expected) ++violations;
      }
    }
    report.determinism_violations = violations;
    report.determinism = violations == 0 ? AuditReport::Determinism::passed
                                         : AuditReport::Determinism::violated;
  }

  // Positivity. Two periods: both A_2 arms must be nonempty. Staggered:
  // report adoption-group sizes (per-query cell checks happen inside the
  // estimators, which refuse empty cells).
  if (panel.n_periods == 2) {
    int treated = 0;
    for (int u = 0; u < panel.n_units; ++u) treated += panel.a(u, 2);
    report.arm_counts.emplace_back("A2=1", treated);
    report.arm_counts.emplace_back("A2=0", panel.n_units - treated);
    if (treated == 0 || treated == panel.n_units) {
      report.positivity_ok = false;
      report.positivity_detail =
          "empty arm A2=" + std::string(treated == 0 ? "1" : "0") +
          ": downstream estimators will refuse this panel";
    }
  }
  try {
    const GroupAssignment ga = infer_groups(panel, report.lag_s_used);
    report.group_sizes["never"] = ga.never_count();
    for (const auto& [g, n] : ga.counts()) {
      report.group_sizes[GroupAssignment::label(g)] = n;
    }
  } catch (const ValidationError& e) {
    report.group_detail = std::string("group inference failed: ") + e.what();
  }

  report.not_checkable = {
      "parallel trends (classic and decision-based)",
      "no anticipation",
      "exclusion restriction (decision affects later outcomes only through "
      "implementation)",
      "counterfactual consistency",
  };
  return report;
}

std::string AuditReport::to_json() const {
  nlohmann::json j;
  j["positivity"]["ok"] = positivity_ok;
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& [label, count] : arm_counts) {
    arms.push_back({{"arm", label}, {"count", count}});
  }
  j["positivity"]["arms"] = arms;
  if (!positivity_detail.empty()) j["positivity"]["detail"] = positivity_detail;

  const char* status = nullptr;
  switch (determinism) {
    case Determinism::passed: status = "passed"; break;
    case Determinism::violated: status = "violated"; break;
    case Determinism::skipped_unobserved: status = "skipped: P unobserved"; break;
    case Determinism::skipped_no_lag: status = "skipped: lag unknown"; break;
  }
  j["determinism"]["status"] = status;
  j["determinism"]["violations"] = determinism_violations;
  j["determinism"]["lag_s"] = lag_s_used;
  j["determinism"]["lag_inferred"] = lag_s_inferred;

  j["groups"] = group_sizes;
  if (!group_detail.empty()) j["groups_detail"] = group_detail;
  j["not_checkable_from_data"] = not_checkable;
  return j.dump(2);
}

}  // namespace didp
