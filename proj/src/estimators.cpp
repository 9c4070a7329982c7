#include "didp/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "didp/rng.hpp"

namespace didp {

namespace {

double cell_mean(const PanelDataset& panel, const std::vector<int>& units, int k) {
  double sum = 0.0;
  for (int u : units) sum += panel.y(u, k);
  return sum / static_cast<double>(units.size());
}

// Treatment record all zero through period `through`.
bool untreated_through(const PanelDataset& panel, int u, int through) {
  for (int k = 1; k <= through; ++k) {
    if (panel.a(u, k) != 0) return false;
  }
  return true;
}

bool undecided_through(const PanelDataset& panel, int u, int through) {
  for (int k = 1; k <= through; ++k) {
    if (panel.p(u, k) != 0) return false;
  }
  return true;
}

}  // namespace

EstimateReport did_classic(const PanelDataset& panel, AttReading reading) {
  if (panel.n_periods != 2) {
    throw ValidationError("did_classic requires a two-period panel, got " +
                          std::to_string(panel.n_periods) + " periods");
  }
  std::vector<int> treated, control;
  for (int u = 0; u < panel.n_units; ++u) {
    if (panel.a(u, 1) != 0) {
      throw ValidationError("unit '" + panel.unit_ids[u] +
                            "' treated at time 1: the canonical two-period "
                            "setting has A1 = 0 for all units");
    }
    (panel.a(u, 2) == 1 ? treated : control).push_back(u);
  }
  if (treated.empty() || control.empty()) {
    throw EstimationError(std::string("positivity violation: arm A2=") +
                          (treated.empty() ? "1" : "0") + " is empty");
  }

  EstimateReport report;
  report.estimand = reading == AttReading::att_p ? "ATT_P" : "ATT_A2";
  report.functional =
      "{E[Y2|A2=1]-E[Y1|A2=1]} - {E[Y2|A2=0]-E[Y1|A2=0]}";
  const double t_pre = cell_mean(panel, treated, 1);
  const double t_post = cell_mean(panel, treated, 2);
  const double c_pre = cell_mean(panel, control, 1);
  const double c_post = cell_mean(panel, control, 2);
  report.point = (t_post - t_pre) - (c_post - c_pre);
  report.cells.push_back({"A2=1", static_cast<int>(treated.size()), t_pre, t_post});
  report.cells.push_back({"A2=0", static_cast<int>(control.size()), c_pre, c_post});
  for (const CellStat& c : report.cells) {
    if (c.size == 1) report.singleton_cells.push_back(c.name);
  }
  return report;
}

EstimateReport group_time_att(const PanelDataset& panel, int g, int k, int s,
                              ControlGroup control) {
  const int tau = panel.n_periods;
  if (s < 0) throw ValidationError("lag s must be nonnegative");
  if (g < 1 || g > tau - s) {
    throw ValidationError("decision time g=" + std::to_string(g) +
                          " outside {1,..," + std::to_string(tau - s) + "}");
  }
  if (k < g + s || k > tau) {
    throw ValidationError("outcome time k=" + std::to_string(k) +
                          " outside {g+s,..,tau} = {" + std::to_string(g + s) +
                          ",..," + std::to_string(tau) + "}");
  }
  const int base = g + s - 1;  // last pre-implementation period
  if (base < 1) {
    throw ValidationError("no pre-implementation period: g+s must be >= 2");
  }

  // Treated cell: first treated exactly at g+s.
  std::vector<int> treated;
  for (int u = 0; u < panel.n_units; ++u) {
    if (panel.a(u, g + s) == 1 && untreated_through(panel, u, g + s - 1)) {
      treated.push_back(u);
    }
  }

  // Control cell. The not-yet-treated comparison needs the treatment record
  // through k+s, which the panel only carries to tau; for k+s > tau the
  // admissible (absorbing, eventually constant) decision paths make
  // Abar_tau=0 the same event.
  std::vector<int> ctrl;
  const int horizon = control == ControlGroup::never_treated
                          ? tau
                          : std::min(k + s, tau);
  std::vector<int> ctrl_proxy;
  for (int u = 0; u < panel.n_units; ++u) {
    if (untreated_through(panel, u, horizon)) ctrl_proxy.push_back(u);
  }
  if (panel.has_decision()) {
    // With the decision observed the cells are defined on it directly:
    // Pbar_k=0 (not yet) / Pbar_{tau-s}=0 (never). Under the lagged
    // determinism A_j = P_{j-s} these must select exactly the units the
    // treatment-based proxy selects.
    const int p_through = control == ControlGroup::never_treated
                              ? std::max(1, tau - s)
                              : std::min(k, std::max(1, tau - s));
    for (int u = 0; u < panel.n_units; ++u) {
      if (undecided_through(panel, u, p_through)) ctrl.push_back(u);
    }
    if (ctrl != ctrl_proxy) {
      throw ValidationError(
          "decision and treatment records disagree on the control cell: the "
          "panel violates the lagged determinism A_k = P_{k-s}");
    }
  } else {
    ctrl = std::move(ctrl_proxy);
  }

  if (treated.empty()) {
    throw EstimationError("empty treated cell {A" + std::to_string(g + s) +
                          "=1, Abar" + std::to_string(g + s - 1) + "=0}");
  }
  if (ctrl.empty()) {
    throw EstimationError(std::string("empty control cell (") +
                          (control == ControlGroup::never_treated
                               ? "never treated"
                               : "not yet treated") +
                          ")");
  }

  EstimateReport report;
  report.estimand = "ATT_P_GT";
  report.g = g;
  report.k = k;
  report.s = s;
  report.control_group = control == ControlGroup::never_treated
                             ? "never_treated"
                             : "not_yet_treated";
  const std::string t_name = "A" + std::to_string(g + s) + "=1,Abar" +
                             std::to_string(g + s - 1) + "=0";
  const std::string c_name = "Abar" + std::to_string(horizon) + "=0";
  report.functional = "{E[Y" + std::to_string(k) + "|" + t_name + "]-E[Y" +
                      std::to_string(base) + "|" + t_name + "]} - {E[Y" +
                      std::to_string(k) + "|" + c_name + "]-E[Y" +
                      std::to_string(base) + "|" + c_name + "]}";

  const double t_pre = cell_mean(panel, treated, base);
  const double t_post = cell_mean(panel, treated, k);
  const double c_pre = cell_mean(panel, ctrl, base);
  const double c_post = cell_mean(panel, ctrl, k);
  report.point = (t_post - t_pre) - (c_post - c_pre);
  report.cells.push_back({t_name, static_cast<int>(treated.size()), t_pre, t_post});
  report.cells.push_back({c_name, static_cast<int>(ctrl.size()), c_pre, c_post});
  for (const CellStat& c : report.cells) {
    if (c.size == 1) report.singleton_cells.push_back(c.name);
  }
  return report;
}

BootstrapResult bootstrap_ci(const PanelDataset& panel,
                             const std::function<double(const PanelDataset&)>& estimator,
                             double level, int replicates, std::uint64_t seed) {
  if (replicates < 100) {
    throw ValidationError("bootstrap needs at least 100 replicates, got " +
                          std::to_string(replicates));
  }
  if (level <= 0.0 || level >= 1.0) {
    throw ValidationError("bootstrap level must lie in (0,1)");
  }
  const double point = estimator(panel);  // must succeed on the full panel

  std::vector<double> draws;
  draws.reserve(replicates);
  int degenerate = 0;
  const int max_attempts = 2 * replicates;
  int attempt = 0;
  PanelDataset resample;
  resample.n_units = panel.n_units;
  resample.n_periods = panel.n_periods;
  resample.lag_s = panel.lag_s;
  resample.unit_ids.resize(panel.n_units);
  resample.outcome.resize(panel.outcome.size());
  resample.treatment.resize(panel.treatment.size());
  if (panel.has_decision()) resample.decision.resize(panel.decision.size());

  while (static_cast<int>(draws.size()) < replicates && attempt < max_attempts) {
    rng::Stream stream = rng::substream(seed, static_cast<std::uint64_t>(attempt));
    ++attempt;
    for (int u = 0; u < panel.n_units; ++u) {
      const int src = static_cast<int>(stream.next_u64() %
                                       static_cast<std::uint64_t>(panel.n_units));
      resample.unit_ids[u] = panel.unit_ids[src];
      const std::size_t from = panel.idx(src, 1);
      const std::size_t to = resample.idx(u, 1);
      std::copy_n(panel.outcome.begin() + from, panel.n_periods,
                  resample.outcome.begin() + to);
      std::copy_n(panel.treatment.begin() + from, panel.n_periods,
                  resample.treatment.begin() + to);
      if (panel.has_decision()) {
        std::copy_n(panel.decision.begin() + from, panel.n_periods,
                    resample.decision.begin() + to);
      }
    }
    try {
      draws.push_back(estimator(resample));
    } catch (const EstimationError&) {
      ++degenerate;
    }
  }
  if (static_cast<int>(draws.size()) < replicates) {
    throw EstimationError("more than 50% of bootstrap resamples degenerate (" +
                          std::to_string(degenerate) + " of " +
                          std::to_string(attempt) + " attempts)");
  }

  std::sort(draws.begin(), draws.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    // Linear interpolation between order statistics.
    const double pos = q * (static_cast<double>(draws.size()) - 1.0);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= draws.size()) return draws.back();
    const double w = pos - static_cast<double>(i);
    return draws[i] * (1.0 - w) + draws[i + 1] * w;
  };

  BootstrapResult result;
  result.level = level;
  result.replicates = replicates;
  result.seed = seed;
  result.degenerate_redraws = degenerate;
  result.lo = std::min(quantile(alpha), point);
  result.hi = std::max(quantile(1.0 - alpha), point);
  return result;
}

std::string EstimateReport::to_json() const {
  nlohmann::json j;
  j["estimand"] = estimand;
  j["point"] = point;
  j["functional"] = functional;
  j["control_group"] = control_group;
  nlohmann::json cs = nlohmann::json::array();
  for (const CellStat& c : cells) {
    cs.push_back({{"cell", c.name},
                  {"size", c.size},
                  {"mean_pre", c.mean_pre},
                  {"mean_post", c.mean_post}});
  }
  j["cells"] = cs;
  if (!singleton_cells.empty()) {
    j["diagnostics"]["singleton_cells"] = singleton_cells;
  }
  if (g) j["g"] = *g;
  if (k) j["k"] = *k;
  if (s) j["s"] = *s;
  if (bootstrap) {
    j["bootstrap"] = {{"lo", bootstrap->lo},
                      {"hi", bootstrap->hi},
                      {"level", bootstrap->level},
                      {"replicates", bootstrap->replicates},
                      {"seed", bootstrap->seed},
                      {"degenerate_redraws", bootstrap->degenerate_redraws}};
  }
  return j.dump(2);
}

}  // namespace didp
