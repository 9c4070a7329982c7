#include "didp/scm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "didp/rng.hpp"

namespace didp {

using nlohmann::json;

double LinExpr::eval(const std::vector<double>& values) const {
  double v = intercept;
  for (const Term& t : terms) v += t.coef * values[t.parent];
  for (const MaxTerm& m : max_terms) {
    v += m.coef * std::max(values[m.parent_a], values[m.parent_b]);
  }
  return v;
}

int Scm::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Scm::require_node(const std::string& name) const {
  const int i = node_index(name);
  if (i < 0) throw ValidationError("unknown node name '" + name + "'");
  return i;
}

namespace {

struct Interval {
  double lo;
  double hi;
};

Interval scaled(Interval iv, double coef) {
  if (coef >= 0.0) return {coef * iv.lo, coef * iv.hi};
  return {coef * iv.hi, coef * iv.lo};
}

Interval expr_interval(const LinExpr& e, const std::vector<Interval>& ranges) {
  Interval out{e.intercept, e.intercept};
  for (const LinExpr::Term& t : e.terms) {
    const Interval s = scaled(ranges[t.parent], t.coef);
    out.lo += s.lo;
    out.hi += s.hi;
  }
  for (const LinExpr::MaxTerm& m : e.max_terms) {
    const Interval a = ranges[m.parent_a];
    const Interval b = ranges[m.parent_b];
    const Interval s = scaled({std::max(a.lo, b.lo), std::max(a.hi, b.hi)}, m.coef);
    out.lo += s.lo;
    out.hi += s.hi;
  }
  return out;
}

std::string range_text(const Interval& iv) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "[%g, %g]", iv.lo, iv.hi);
  return buf;
}

std::vector<Interval> propagate_intervals(const Scm& scm, bool check) {
  std::vector<Interval> ranges(scm.nodes.size());
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    const NodeSpec& node = scm.nodes[i];
    const Interval mean = expr_interval(node.mean, ranges);
    switch (node.dist) {
      case Dist::bernoulli:
        if (check && (mean.lo < 0.0 || mean.hi > 1.0)) {
          throw ValidationError("Bernoulli mean out of [0,1] for node '" +
                                node.name + "': reachable mean range " +
                                range_text(mean));
        }
        ranges[i] = {0.0, 1.0};
        break;
      case Dist::poisson:
        if (check && mean.lo < 0.0) {
          throw ValidationError("negative reachable mean for Poisson node '" +
                                node.name + "': reachable mean range " +
                                range_text(mean));
        }
        ranges[i] = {0.0, mean.hi};
        break;
      case Dist::normal:
        ranges[i] = mean;
        break;
      case Dist::none:
        ranges[i] = mean;
        break;
    }
  }
  return ranges;
}

void check_parent_refs(const Scm& scm) {
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    const NodeSpec& node = scm.nodes[i];
    auto check_ref = [&](int p, const char* where) {
      if (p < 0 || p >= static_cast<int>(scm.nodes.size())) {
        throw ValidationError("node '" + node.name + "': " + where +
                              " references a nonexistent node");
      }
      if (p >= static_cast<int>(i)) {
        throw ValidationError("forward reference: node '" + node.name +
                              "' lists '" + scm.nodes[p].name +
                              "' as parent, which does not precede it");
      }
    };
    for (const LinExpr::Term& t : node.mean.terms) check_ref(t.parent, "term");
    for (const LinExpr::MaxTerm& m : node.mean.max_terms) {
      check_ref(m.parent_a, "max term");
      check_ref(m.parent_b, "max term");
    }
  }
}

}  // namespace

void validate(const Scm& scm) {
  if (scm.nodes.empty()) throw ValidationError("SCM has no nodes");
  for (const NodeSpec& node : scm.nodes) {
    if (node.name.empty()) throw ValidationError("SCM node with empty name");
    switch (node.kind) {
      case NodeKind::exogenous:
        if (node.dist == Dist::none) {
          throw ValidationError("exogenous node '" + node.name +
                                "' needs a distribution");
        }
        if (!node.mean.terms.empty() || !node.mean.max_terms.empty()) {
          throw ValidationError("exogenous node '" + node.name +
                                "' must not reference parents");
        }
        break;
      case NodeKind::stochastic:
        if (node.dist == Dist::none) {
          throw ValidationError("stochastic node '" + node.name +
                                "' needs a distribution");
        }
        break;
      case NodeKind::deterministic:
        if (node.dist != Dist::none) {
          throw ValidationError("deterministic node '" + node.name +
                                "' must not declare a distribution");
        }
        break;
    }
    if (node.dist == Dist::normal && node.sd < 0.0) {
      throw ValidationError("negative sd for node '" + node.name + "'");
    }
  }
  std::map<std::string, int> seen;
  for (const NodeSpec& node : scm.nodes) {
    if (++seen[node.name] > 1) {
      throw ValidationError("duplicate node name '" + node.name + "'");
    }
  }
  check_parent_refs(scm);
  propagate_intervals(scm, /*check=*/true);
}

std::vector<std::pair<double, double>> node_intervals(const Scm& scm) {
  check_parent_refs(scm);
  std::vector<std::pair<double, double>> out;
  for (const Interval& iv : propagate_intervals(scm, /*check=*/false)) {
    out.emplace_back(iv.lo, iv.hi);
  }
  return out;
}

void check_intervention(const Scm& scm, const InterventionSpec& spec) {
  const auto ranges = propagate_intervals(scm, /*check=*/false);
  for (const auto& [name, value] : spec.assignments) {
    const int i = scm.require_node(name);
    const NodeSpec& node = scm.nodes[i];
    const bool binary =
        node.dist == Dist::bernoulli ||
        (node.dist == Dist::none && ranges[i].lo >= 0.0 && ranges[i].hi <= 1.0);
    if (binary && value != 0.0 && value != 1.0) {
      throw ValidationError("forced value " + std::to_string(value) +
                            " outside the support of binary node '" + name + "'");
    }
    if (node.dist == Dist::poisson &&
        (value < 0.0 || value != std::floor(value))) {
      throw ValidationError("forced value outside the support of Poisson node '" +
                            name + "'");
    }
  }
}

// ----- node-name <-> panel-column mapping -----

namespace {

// A<k>, Y<k>, P<k>, and the alias "P" for P1. Returns (column, period) with
// column in {'A','Y','P'}; period 0 means "not a panel node".
std::pair<char, int> panel_role(const std::string& name) {
  if (name == "P") return {'P', 1};
  if (name.size() < 2) return {0, 0};
  const char c = name[0];
  if (c != 'A' && c != 'Y' && c != 'P') return {0, 0};
  int k = 0;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return {0, 0};
    k = k * 10 + (name[i] - '0');
  }
  return k >= 1 ? std::make_pair(c, k) : std::make_pair(static_cast<char>(0), 0);
}

struct PanelMap {
  int tau = 0;
  std::vector<int> a_node;    // node index per period, -1 if absent
  std::vector<int> y_node;
  std::vector<int> p_node;
  bool has_decision = false;
  std::vector<int> aux_nodes;  // everything else
};

PanelMap build_panel_map(const Scm& scm) {
  PanelMap map;
  std::vector<std::tuple<char, int, int>> found;
  for (std::size_t i = 0; i < scm.nodes.size(); ++i) {
    const auto [c, k] = panel_role(scm.nodes[i].name);
    if (c == 0) {
      map.aux_nodes.push_back(static_cast<int>(i));
    } else {
      found.emplace_back(c, k, static_cast<int>(i));
      if (c != 'P') map.tau = std::max(map.tau, k);
    }
  }
  if (map.tau == 0) {
    throw ValidationError("SCM defines no outcome/treatment nodes (Y<k>, A<k>)");
  }
  map.a_node.assign(map.tau + 1, -1);
  map.y_node.assign(map.tau + 1, -1);
  map.p_node.assign(map.tau + 1, -1);
  for (const auto& [c, k, i] : found) {
    if (k > map.tau) {
      throw ValidationError("node '" + scm.nodes[i].name +
                            "' indexed past the outcome horizon tau=" +
                            std::to_string(map.tau));
    }
    (c == 'A' ? map.a_node : c == 'Y' ? map.y_node : map.p_node)[k] = i;
    if (c == 'P') map.has_decision = true;
  }
  for (int k = 1; k <= map.tau; ++k) {
    if (map.a_node[k] < 0) {
      throw ValidationError("treatment node A" + std::to_string(k) + " missing");
    }
    if (map.y_node[k] < 0) {
      throw ValidationError("outcome node Y" + std::to_string(k) + " missing");
    }
  }
  if (map.has_decision && map.p_node[1] < 0) {
    throw ValidationError("decision nodes present but P1 (or P) missing");
  }
  return map;
}

std::uint8_t to_binary_cell(double v, const std::string& node, const char* what) {
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw ValidationError("node '" + node + "' produced non-binary " + what +
                        " value " + std::to_string(v));
}

}  // namespace

int scm_tau(const Scm& scm) { return build_panel_map(scm).tau; }

int default_thread_count() {
  if (const char* env = std::getenv("DIDP_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

namespace {

PanelDataset sample_impl(const Scm& scm, const std::vector<double>* forced,
                         std::int64_t n, std::uint64_t seed, SampleOptions opts) {
  validate(scm);
  const PanelMap map = build_panel_map(scm);
  const std::size_t n_nodes = scm.nodes.size();

  PanelDataset panel;
  panel.n_units = static_cast<int>(n);
  panel.n_periods = map.tau;
  panel.lag_s = scm.lag_s;
  panel.unit_ids.resize(n);
  for (std::int64_t u = 0; u < n; ++u) panel.unit_ids[u] = std::to_string(u);
  const std::size_t cells = static_cast<std::size_t>(n) * map.tau;
  panel.outcome.assign(cells, 0.0);
  panel.treatment.assign(cells, 0);
  if (map.has_decision) panel.decision.assign(cells, 0);
  std::vector<std::vector<double>*> aux_store;
  if (opts.keep_exogenous) {
    for (int i : map.aux_nodes) {
      aux_store.push_back(&panel.extra[scm.nodes[i].name]);
      aux_store.back()->assign(n, 0.0);
    }
  }

  auto draw_range = [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> values(n_nodes);
    for (std::int64_t u = lo; u < hi; ++u) {
      rng::Stream stream = rng::substream(seed, static_cast<std::uint64_t>(u));
      for (std::size_t i = 0; i < n_nodes; ++i) {
        const NodeSpec& node = scm.nodes[i];
        if (forced && !std::isnan((*forced)[i])) {
          values[i] = (*forced)[i];
          continue;
        }
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
      for (int k = 1; k <= map.tau; ++k) {
        const std::size_t c = panel.idx(static_cast<int>(u), k);
        panel.outcome[c] = values[map.y_node[k]];
        panel.treatment[c] =
            to_binary_cell(values[map.a_node[k]], scm.nodes[map.a_node[k]].name,
                           "treatment");
        if (map.has_decision) {
          // Carry the last defined decision node forward: admissible paths
          // are constant past the final decision time.
          int src = k;
          while (map.p_node[src] < 0) --src;
          panel.decision[c] = to_binary_cell(
              values[map.p_node[src]], scm.nodes[map.p_node[src]].name, "decision");
        }
      }
      if (opts.keep_exogenous) {
        for (std::size_t j = 0; j < map.aux_nodes.size(); ++j) {
          (*aux_store[j])[u] = values[map.aux_nodes[j]];
        }
      }
    }
  };

  const int threads = opts.threads > 0 ? opts.threads : default_thread_count();
  if (threads <= 1 || n < 2048) {
    draw_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::int64_t lo = t * chunk;
      const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(draw_range, lo, hi);
    }
    for (std::thread& th : pool) th.join();
  }
  return panel;
}

}  // namespace

PanelDataset sample_observational(const Scm& scm, std::int64_t n,
                                  std::uint64_t seed, SampleOptions opts) {
  return sample_impl(scm, nullptr, n, seed, opts);
}

PanelDataset sample_interventional(const Scm& scm, const InterventionSpec& spec,
                                   std::int64_t n, std::uint64_t seed,
                                   SampleOptions opts) {
  check_intervention(scm, spec);
  std::vector<double> forced(scm.nodes.size(),
                             std::numeric_limits<double>::quiet_NaN());
  for (const auto& [name, value] : spec.assignments) {
    forced[scm.require_node(name)] = value;
  }
  return sample_impl(scm, &forced, n, seed, opts);
}

// ----- builtins -----

namespace {

class ScmBuilder {
 public:
  explicit ScmBuilder(std::string name) { scm_.name = std::move(name); }

  ScmBuilder& lag(int s) {
    scm_.lag_s = s;
    return *this;
  }

  int exogenous(const std::string& name, Dist dist, double mean, double sd = 0.0) {
    NodeSpec node;
    node.name = name;
    node.kind = NodeKind::exogenous;
    node.dist = dist;
    node.mean.intercept = mean;
    node.sd = sd;
    return push(std::move(node));
  }

  int deterministic(const std::string& name, LinExpr expr) {
    NodeSpec node;
    node.name = name;
    node.kind = NodeKind::deterministic;
    node.dist = Dist::none;
    node.mean = std::move(expr);
    return push(std::move(node));
  }

  int stochastic(const std::string& name, Dist dist, LinExpr mean, double sd = 0.0) {
    NodeSpec node;
    node.name = name;
    node.kind = NodeKind::stochastic;
    node.dist = dist;
    node.mean = std::move(mean);
    node.sd = sd;
    return push(std::move(node));
  }

  LinExpr expr(double intercept,
               std::initializer_list<std::pair<int, double>> terms = {},
               std::initializer_list<std::tuple<int, int, double>> maxes = {}) {
    LinExpr e;
    e.intercept = intercept;
    for (const auto& [p, c] : terms) e.terms.push_back({p, c});
    for (const auto& [a, b, c] : maxes) e.max_terms.push_back({a, b, c});
    return e;
  }

  Scm take() {
    finalize_parents(scm_);
    return std::move(scm_);
  }

  static void finalize_parents(Scm& scm) {
    for (NodeSpec& node : scm.nodes) {
      node.parents.clear();
      for (const LinExpr::Term& t : node.mean.terms) node.parents.push_back(t.parent);
      for (const LinExpr::MaxTerm& m : node.mean.max_terms) {
        node.parents.push_back(m.parent_a);
        node.parents.push_back(m.parent_b);
      }
      std::sort(node.parents.begin(), node.parents.end());
      node.parents.erase(std::unique(node.parents.begin(), node.parents.end()),
                         node.parents.end());
    }
  }

 private:
  int push(NodeSpec node) {
    scm_.nodes.push_back(std::move(node));
    return static_cast<int>(scm_.nodes.size()) - 1;
  }

  Scm scm_;
};

}  // namespace

Scm builtin_cars_example() {
  ScmBuilder b("cars");
  b.lag(1);
  const int u = b.exogenous("U", Dist::bernoulli, 0.2);
  b.deterministic("A1", b.expr(0.0));
  const int p = b.deterministic("P", b.expr(0.0, {{u, 1.0}}));
  const int y1 = b.stochastic("Y1", Dist::poisson, b.expr(10.0, {{u, 5.0}, {p, -5.0}}));
  const int a2 = b.deterministic("A2", b.expr(0.0, {{p, 1.0}}));
  b.stochastic("Y2", Dist::poisson,
               b.expr(10.0, {{y1, -0.2}, {u, 5.0}}, {{p, a2, -5.0}}));
  return b.take();
}

Scm builtin_prop1_dgp(double alpha) {
  ScmBuilder b("prop1");
  b.lag(1);
  const int u = b.exogenous("U", Dist::bernoulli, 0.2);
  b.deterministic("A1", b.expr(0.0));
  const int p = b.deterministic("P", b.expr(0.0, {{u, 1.0}}));
  b.stochastic("Y1", Dist::poisson, b.expr(10.0, {{u, 5.0}, {p, alpha}}));
  const int a2 = b.deterministic("A2", b.expr(0.0, {{p, 1.0}}));
  b.stochastic("Y2", Dist::poisson, b.expr(12.0, {{u, 5.0}, {a2, -3.0}}));
  return b.take();
}

Scm builtin_prop2_dgp() {
  ScmBuilder b("prop2");
  b.lag(1);
  const int u = b.exogenous("U", Dist::bernoulli, 0.2);
  b.deterministic("A1", b.expr(0.0));
  const int p = b.deterministic("P", b.expr(0.0, {{u, 1.0}}));
  b.stochastic("Y1", Dist::poisson, b.expr(10.0, {{u, 5.0}}));
  const int a2 = b.deterministic("A2", b.expr(0.0, {{p, 1.0}}));
  b.stochastic("Y2", Dist::poisson,
               b.expr(12.0, {{u, 5.0}}, {{p, a2, -3.0}}));
  return b.take();
}

Scm builtin_staggered_dgp(const StaggeredParams& params) {
  const int tau = params.tau;
  const int s = params.s;
  if (s < 1 || tau < s + 1) {
    throw ValidationError("staggered DGP requires tau >= s+1 >= 2");
  }
  StaggeredParams p = params;
  if (p.time_trend.empty()) {
    for (int k = 1; k <= tau; ++k) p.time_trend.push_back(0.5 * (k - 1));
  }
  if (static_cast<int>(p.time_trend.size()) != tau) {
    throw ValidationError("time_trend must have tau entries");
  }
  if (p.exposure_effects.empty()) p.exposure_effects = {1.0, 1.8, 2.4};
  if (p.hazard_base.empty()) p.hazard_base.assign(tau - s, 0.25);
  if (static_cast<int>(p.hazard_base.size()) != tau - s) {
    throw ValidationError("hazard_base must have tau-s entries");
  }
  for (double h : p.hazard_base) {
    if (h <= 0.0 || h + std::max(0.0, p.hazard_u_coef) >= 1.0) {
      throw ValidationError(
          "decision hazards must stay strictly inside (0,1) for every unit "
          "type; otherwise some admissible decision path has zero probability");
    }
  }
  if (p.outcome_sd < 0.0) throw ValidationError("outcome_sd must be nonnegative");

  // Implementation effect after e periods of exposure; profiles shorter than
  // the horizon are extended with their last value.
  auto theta = [&](int e) -> double {
    if (e <= 0) return 0.0;
    const int last = static_cast<int>(p.exposure_effects.size());
    return p.exposure_effects[std::min(e, last) - 1];
  };

  ScmBuilder b("staggered");
  b.lag(s);
  const int u = b.exogenous("U", Dist::bernoulli, p.u_prob);

  std::vector<int> pk(tau + 1, -1);
  for (int k = 1; k <= tau - s; ++k) {
    const int d = b.stochastic("D" + std::to_string(k), Dist::bernoulli,
                               b.expr(p.hazard_base[k - 1], {{u, p.hazard_u_coef}}));
    if (k == 1) {
      pk[k] = b.deterministic("P1", b.expr(0.0, {{d, 1.0}}));
    } else {
      pk[k] = b.deterministic("P" + std::to_string(k),
                              b.expr(0.0, {}, {{pk[k - 1], d, 1.0}}));
    }
  }
  for (int k = tau - s + 1; k <= tau; ++k) {
    pk[k] = b.deterministic("P" + std::to_string(k),
                            b.expr(0.0, {{pk[tau - s], 1.0}}));
  }

  std::vector<int> ak(tau + 1, -1);
  for (int k = 1; k <= tau; ++k) {
    ak[k] = (k <= s)
                ? b.deterministic("A" + std::to_string(k), b.expr(0.0))
                : b.deterministic("A" + std::to_string(k),
                                  b.expr(0.0, {{pk[k - s], 1.0}}));
  }

  for (int k = 1; k <= tau; ++k) {
    LinExpr mean;
    mean.intercept = p.level + p.time_trend[k - 1];
    mean.terms.push_back({u, p.unit_coef});
    // Telescoped exposure effects: a unit first treated at time j0 <= k
    // accumulates sum_j (theta(k-j+1) - theta(k-j)) over its treated periods,
    // which collapses to theta(exposure).
    for (int j = s + 1; j <= k; ++j) {
      const double c = theta(k - j + 1) - theta(k - j);
      if (c != 0.0) mean.terms.push_back({ak[j], c});
    }
    if (p.anticipation != 0.0) {
      // Active exactly while a made decision awaits implementation.
      mean.terms.push_back({pk[k], p.anticipation});
      mean.terms.push_back({ak[k], -p.anticipation});
    }
    b.stochastic("Y" + std::to_string(k), Dist::normal, mean, p.outcome_sd);
  }
  return b.take();
}

Scm builtin_by_name(const std::string& name) {
  if (name == "cars") return builtin_cars_example();
  if (name == "prop2" || name == "prop2-dgp") return builtin_prop2_dgp();
  if (name == "prop1" || name == "prop1-dgp") return builtin_prop1_dgp();
  if (name.rfind("prop1:", 0) == 0) {
    return builtin_prop1_dgp(std::stod(name.substr(6)));
  }
  if (name == "staggered") return builtin_staggered_dgp();
  throw ValidationError("unknown builtin SCM '" + name +
                        "' (expected cars | prop1[:alpha] | prop2 | staggered)");
}

// ----- JSON -----

namespace {

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::exogenous: return "exogenous";
    case NodeKind::deterministic: return "deterministic";
    case NodeKind::stochastic: return "stochastic";
  }
  return "";
}

const char* dist_name(Dist d) {
  switch (d) {
    case Dist::bernoulli: return "bernoulli";
    case Dist::poisson: return "poisson";
    case Dist::normal: return "normal";
    case Dist::none: return "";
  }
  return "";
}

NodeKind kind_from(const std::string& s) {
  if (s == "exogenous") return NodeKind::exogenous;
  if (s == "deterministic") return NodeKind::deterministic;
  if (s == "stochastic") return NodeKind::stochastic;
  throw ValidationError("unknown node kind '" + s + "'");
}

Dist dist_from(const std::string& s) {
  if (s == "bernoulli") return Dist::bernoulli;
  if (s == "poisson") return Dist::poisson;
  if (s == "normal") return Dist::normal;
  throw ValidationError("unknown distribution '" + s + "'");
}

}  // namespace

std::string scm_to_json(const Scm& scm, int indent) {
  json doc;
  doc["name"] = scm.name;
  if (scm.lag_s) doc["lag_s"] = *scm.lag_s;
  json nodes = json::array();
  for (const NodeSpec& node : scm.nodes) {
    json n;
    n["name"] = node.name;
    n["kind"] = kind_name(node.kind);
    if (node.dist != Dist::none) n["dist"] = dist_name(node.dist);
    json mean;
    mean["intercept"] = node.mean.intercept;
    if (!node.mean.terms.empty()) {
      json terms = json::array();
      for (const LinExpr::Term& t : node.mean.terms) {
        terms.push_back({{"parent", scm.nodes[t.parent].name}, {"coef", t.coef}});
      }
      mean["terms"] = terms;
    }
    if (!node.mean.max_terms.empty()) {
      json maxes = json::array();
      for (const LinExpr::MaxTerm& m : node.mean.max_terms) {
        maxes.push_back({{"parents", {scm.nodes[m.parent_a].name,
                                      scm.nodes[m.parent_b].name}},
                         {"coef", m.coef}});
      }
      mean["max_terms"] = maxes;
    }
    n["mean"] = mean;
    if (node.dist == Dist::normal) n["sd"] = node.sd;
    nodes.push_back(n);
  }
  doc["nodes"] = nodes;
  return doc.dump(indent);
}

Scm scm_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid SCM JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw ValidationError("SCM JSON must be an object with a 'nodes' array");
  }
  Scm scm;
  scm.name = doc.value("name", std::string("scm"));
  if (doc.contains("lag_s")) scm.lag_s = doc["lag_s"].get<int>();

  // First pass collects names so parents can be resolved regardless of
  // position; validate() then rejects any forward reference.
  std::map<std::string, int> index;
  for (const auto& n : doc["nodes"]) {
    if (!n.contains("name")) throw ValidationError("SCM node without a name");
    const std::string name = n["name"].get<std::string>();
    index.emplace(name, static_cast<int>(index.size()));
  }
  auto resolve = [&](const std::string& name, const std::string& child) -> int {
    auto it = index.find(name);
    if (it == index.end()) {
      throw ValidationError("unknown parent '" + name + "' for node '" + child + "'");
    }
    return it->second;
  };

  try {
    for (const auto& n : doc["nodes"]) {
      NodeSpec node;
      node.name = n["name"].get<std::string>();
      node.kind = kind_from(n.value("kind", std::string("stochastic")));
      if (n.contains("dist")) node.dist = dist_from(n["dist"].get<std::string>());
      if (n.contains("mean")) {
        const json& mean = n["mean"];
        node.mean.intercept = mean.value("intercept", 0.0);
        for (const auto& t : mean.value("terms", json::array())) {
          node.mean.terms.push_back(
              {resolve(t.at("parent").get<std::string>(), node.name),
               t.at("coef").get<double>()});
        }
        for (const auto& m : mean.value("max_terms", json::array())) {
          LinExpr::MaxTerm term;
          if (m.is_array()) {  // plain pair form, coefficient 1
            if (m.size() != 2) {
              throw ValidationError("max_terms pair must have two parents");
            }
            term.parent_a = resolve(m[0].get<std::string>(), node.name);
            term.parent_b = resolve(m[1].get<std::string>(), node.name);
            term.coef = 1.0;
          } else {
            const auto& parents = m.at("parents");
            if (!parents.is_array() || parents.size() != 2) {
              throw ValidationError("max_terms entry needs exactly two parents");
            }
            term.parent_a = resolve(parents[0].get<std::string>(), node.name);
            term.parent_b = resolve(parents[1].get<std::string>(), node.name);
            term.coef = m.value("coef", 1.0);
          }
          node.mean.max_terms.push_back(term);
        }
      }
      node.sd = n.value("sd", 0.0);
      scm.nodes.push_back(std::move(node));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid SCM JSON: ") + e.what());
  }
  ScmBuilder::finalize_parents(scm);
  return scm;
}

Scm scm_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open SCM file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return scm_from_json(buf.str());
}

std::string scm_hash(const Scm& scm) {
  // Canonical form: parse + minified dump gives sorted keys and normalized
  // number rendering, so formatting differences do not change the hash.
  const std::string canonical = json::parse(scm_to_json(scm, -1)).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace didp
