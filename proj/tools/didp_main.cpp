// didp — panel difference-in-differences with an explicit policy-decision
// variable: simulation, estimation, oracle queries, and proposition
// verification as reproducible batch subcommands.
//
// Exit codes: 0 success/pass, 2 validation error, 3 verification failure,
// 4 vacuous premises.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "didp/estimators.hpp"
#include "didp/oracle.hpp"
#include "didp/panel.hpp"
#include "didp/rng.hpp"
#include "didp/scm.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitVerifyFail = 3;
constexpr int kExitVacuous = 4;

std::uint64_t resolve_seed(std::optional<std::uint64_t> seed) {
  if (seed) return *seed;
  std::random_device dev;
  return (static_cast<std::uint64_t>(dev()) << 32) ^ dev();
}

struct ScmOptions {
  std::string spec = "cars";
  int tau = 4;
  int s = 1;
  double anticipation = 0.0;

  didp::Scm resolve() const {
    std::string name = spec;
    if (name.rfind("file:", 0) == 0) {
      return didp::scm_from_json_file(name.substr(5));
    }
    if (name.rfind("builtin:", 0) == 0) name = name.substr(8);
    if (name == "staggered") {
      didp::StaggeredParams params;
      params.tau = tau;
      params.s = s;
      params.anticipation = anticipation;
      return didp::builtin_staggered_dgp(params);
    }
    return didp::builtin_by_name(name);
  }
};

void add_scm_flags(CLI::App* cmd, ScmOptions& opts) {
  cmd->add_option("--scm", opts.spec,
                  "SCM source: cars | prop1[:alpha] | prop2 | staggered | "
                  "file:PATH (builtin: prefix accepted)");
  cmd->add_option("--tau", opts.tau, "periods for the staggered builtin");
  cmd->add_option("--s", opts.s, "decision-to-implementation lag for the "
                                 "staggered builtin");
  cmd->add_option("--anticipation", opts.anticipation,
                  "anticipation coefficient for the staggered builtin");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw didp::ValidationError("cannot open output file '" + path + "'");
  out << text;
}

didp::PanelSchema parse_schema(const std::string& text) {
  didp::PanelSchema schema;
  if (text.empty()) return schema;
  std::istringstream in(text);
  std::string pair;
  while (std::getline(in, pair, ',')) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos) {
      throw didp::ValidationError("bad --schema entry '" + pair +
                                  "' (expected key=column)");
    }
    const std::string key = pair.substr(0, eq);
    const std::string col = pair.substr(eq + 1);
    if (key == "unit") schema.unit = col;
    else if (key == "time") schema.time = col;
    else if (key == "a") schema.treatment = col;
    else if (key == "y") schema.outcome = col;
    else if (key == "p") schema.decision = col;
    else throw didp::ValidationError("unknown --schema key '" + key + "'");
  }
  return schema;
}

// ----- simulate -----

int cmd_simulate(const ScmOptions& scm_opts, std::int64_t n,
                 std::optional<std::uint64_t> seed_opt, const std::string& out,
                 bool keep_exogenous) {
  const std::uint64_t seed = resolve_seed(seed_opt);
  const didp::Scm scm = scm_opts.resolve();
  didp::SampleOptions opts;
  opts.keep_exogenous = keep_exogenous;
  const didp::PanelDataset panel = didp::sample_observational(scm, n, seed, opts);
  didp::save_panel_file(panel, out);

  json manifest;
  manifest["scm_name"] = scm.name;
  manifest["scm_hash"] = didp::scm_hash(scm);
  manifest["seed"] = seed;
  manifest["n"] = n;
  if (scm.lag_s) manifest["lag_s"] = *scm.lag_s;
  write_file(out + ".manifest.json", manifest.dump(2) + "\n");

  std::cout << "wrote " << panel.n_units << " units x " << panel.n_periods
            << " periods to " << out << " (seed " << seed << ")\n";
  return kExitOk;
}

// ----- estimate -----

int cmd_estimate(const std::string& panel_path, const std::string& schema_text,
                 int g, int k, int s, const std::string& control_name,
                 bool as_att_p, int bootstrap_reps, double level,
                 std::optional<std::uint64_t> boot_seed_opt,
                 const std::string& out) {
  const didp::PanelDataset panel =
      didp::load_panel_file(panel_path, parse_schema(schema_text));
  const didp::AuditReport audit = didp::audit_assumptions(panel);

  didp::EstimateReport report;
  std::function<double(const didp::PanelDataset&)> closure;
  if (g > 0) {
    didp::ControlGroup control;
    if (control_name == "not_yet" || control_name == "not_yet_treated") {
      control = didp::ControlGroup::not_yet_treated;
    } else if (control_name == "never" || control_name == "never_treated") {
      control = didp::ControlGroup::never_treated;
    } else {
      throw didp::ValidationError("--control must be not_yet or never");
    }
    report = didp::group_time_att(panel, g, k, s, control);
    closure = [g, k, s, control](const didp::PanelDataset& pd) {
      return didp::group_time_att(pd, g, k, s, control).point;
    };
  } else {
    const didp::AttReading reading =
        as_att_p ? didp::AttReading::att_p : didp::AttReading::att_a2;
    report = didp::did_classic(panel, reading);
    closure = [reading](const didp::PanelDataset& pd) {
      return didp::did_classic(pd, reading).point;
    };
  }
  std::optional<std::uint64_t> boot_seed;
  if (bootstrap_reps > 0) {
    boot_seed = resolve_seed(boot_seed_opt);
    report.bootstrap =
        didp::bootstrap_ci(panel, closure, level, bootstrap_reps, *boot_seed);
  }

  std::printf("%-14s %14s %8s\n", "estimand", "point", "cells");
  std::string cell_sizes;
  for (const didp::CellStat& c : report.cells) {
    if (!cell_sizes.empty()) cell_sizes += "/";
    cell_sizes += std::to_string(c.size);
  }
  std::printf("%-14s %14.6f %8s\n", report.estimand.c_str(), report.point,
              cell_sizes.c_str());
  if (report.bootstrap) {
    std::printf("%.0f%% CI        [%.6f, %.6f]  (%d replicates)\n",
                report.bootstrap->level * 100.0, report.bootstrap->lo,
                report.bootstrap->hi, report.bootstrap->replicates);
  }

  if (!out.empty()) {
    json j = json::parse(report.to_json());
    j["assertion"] = as_att_p ? "decision-based (Assumptions 1,4,5,6,7)"
                              : "classic (Assumptions 1-3)";
    j["audit"] = json::parse(audit.to_json());
    j["panel"] = panel_path;
    write_file(out, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ----- oracle -----

int cmd_oracle(const ScmOptions& scm_opts, const std::string& kind_name, int g,
               int k, std::int64_t draws, std::optional<std::uint64_t> seed_opt,
               const std::string& out) {
  didp::EstimandKind kind;
  if (kind_name == "att_a2") kind = didp::EstimandKind::att_a2;
  else if (kind_name == "att_p") kind = didp::EstimandKind::att_p;
  else if (kind_name == "psi") kind = didp::EstimandKind::psi;
  else if (kind_name == "att_p_gt") kind = didp::EstimandKind::att_p_gt;
  else if (kind_name == "att_a_gt") kind = didp::EstimandKind::att_a_gt;
  else {
    throw didp::ValidationError(
        "--kind must be att_a2 | att_p | psi | att_p_gt | att_a_gt");
  }
  didp::McConfig mc;
  mc.n_draws = draws;
  mc.seed = resolve_seed(seed_opt);
  const didp::Scm scm = scm_opts.resolve();
  const didp::OracleEstimand estimand = didp::oracle_estimand(scm, kind, mc, g, k);
  std::printf("%s = %.6f  (mc_se %.6f, kept %lld of %lld draws, %s)\n",
              didp::estimand_name(kind).c_str(), estimand.value, estimand.mc_se,
              static_cast<long long>(estimand.kept_draws),
              static_cast<long long>(estimand.n_draws),
              estimand.conditioning.c_str());
  if (!out.empty()) {
    json j = json::parse(estimand.to_json());
    j["seed"] = mc.seed;
    j["scm"] = scm.name;
    j["scm_hash"] = didp::scm_hash(scm);
    write_file(out, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ----- verify -----

int cmd_verify(const ScmOptions& scm_opts, int prop, std::int64_t n, int reps,
               std::optional<std::uint64_t> seed_opt, std::int64_t draws,
               const std::string& sweep_alphas, const std::string& out,
               const std::string& sweep_csv) {
  didp::VerifyConfig config;
  config.n_units = n;
  config.replications = reps;
  config.seed = resolve_seed(seed_opt);
  config.oracle_draws = draws;
  const didp::Scm scm = scm_opts.resolve();
  const didp::VerificationReport report = didp::verify_proposition(prop, scm, config);

  std::printf("Proposition %d on '%s': %s\n", prop, scm.name.c_str(),
              report.status_text().c_str());
  for (const didp::IdentityCheck& c : report.identities) {
    std::string where;
    if (c.g) where = " g=" + std::to_string(*c.g) + " k=" + std::to_string(*c.k) +
                     " control=" + c.control;
    std::printf("  [%s] %s%s: estimator %.5f vs oracle %.5f (tol %.5f)\n",
                c.pass ? "ok" : "FAIL", c.name.c_str(), where.c_str(),
                c.estimator_mean, c.oracle_value, c.tolerance);
  }
  for (const didp::AssumptionCheck& c : report.assumptions) {
    std::printf("  [%s] assumption: %s (%s)\n", c.pass ? "ok" : "VIOLATED",
                c.assumption.c_str(), c.detail.c_str());
  }

  json j = json::parse(report.to_json());
  std::optional<didp::SweepTable> sweep;
  if (!sweep_alphas.empty()) {
    std::vector<double> alphas;
    std::istringstream in(sweep_alphas);
    std::string tok;
    while (std::getline(in, tok, ',')) alphas.push_back(std::stod(tok));
    sweep = didp::bias_sweep(alphas, config);
    j["bias_sweep"] = json::parse(sweep->to_json());
    for (const didp::SweepRow& r : sweep->rows) {
      std::printf("  [%s] sweep alpha=%.2f: psi=%.4f did=%.4f att_a2=%.4f "
                  "residual=%.5f\n",
                  r.pass ? "ok" : "FAIL", r.alpha, r.psi, r.did_mean, r.att_a2,
                  r.residual);
    }
  }
  if (!out.empty()) write_file(out, j.dump(2) + "\n");
  if (sweep && !sweep_csv.empty()) write_file(sweep_csv, sweep->to_csv());

  switch (report.status) {
    case didp::VerificationReport::Status::pass: break;
    case didp::VerificationReport::Status::fail: return kExitVerifyFail;
    case didp::VerificationReport::Status::vacuous: return kExitVacuous;
  }
  if (sweep) {
    for (const didp::SweepRow& r : sweep->rows) {
      if (!r.pass) return kExitVerifyFail;
    }
  }
  return kExitOk;
}

// ----- replicate-example -----

int cmd_replicate_example(std::int64_t n, std::optional<std::uint64_t> seed_opt,
                          const std::string& out) {
  const std::uint64_t seed = resolve_seed(seed_opt);
  const didp::Scm scm = didp::builtin_cars_example();
  didp::McConfig mc;
  mc.n_draws = n;
  mc.seed = seed;

  struct Check {
    std::string name;
    double paper_value;
    double estimate;
    double mc_se;
  };
  std::vector<Check> checks;

  const int y1 = scm.require_node("Y1");
  const int y2 = scm.require_node("Y2");
  const int a2 = scm.require_node("A2");
  const didp::InterventionSpec do_a2_0 = didp::InterventionSpec::on({{"A2", 0.0}});
  const auto trend = [&](double arm, std::uint64_t salt) {
    didp::McConfig sub = mc;
    sub.seed = didp::rng::stream_key(seed, salt, 0);
    return didp::oracle_contrast(scm, y2, do_a2_0, y1, didp::InterventionSpec{},
                                 {{a2, arm}}, sub);
  };
  const didp::OracleContrast t1 = trend(1.0, 11);
  const didp::OracleContrast t0 = trend(0.0, 12);
  checks.push_back({"trend_treated E[Y2^{a2=0}-Y1|A2=1]", -2.0, t1.value, t1.mc_se});
  checks.push_back({"trend_control E[Y2^{a2=0}-Y1|A2=0]", -2.0, t0.value, t0.mc_se});
  const didp::OracleEstimand att_a2 =
      didp::oracle_estimand(scm, didp::EstimandKind::att_a2, mc);
  checks.push_back({"ATT_A2", 0.0, att_a2.value, att_a2.mc_se});
  const didp::OracleEstimand att_p =
      didp::oracle_estimand(scm, didp::EstimandKind::att_p, mc);
  checks.push_back({"ATT_P", -4.0, att_p.value, att_p.mc_se});
  const didp::OracleEstimand psi = didp::oracle_estimand(scm, didp::EstimandKind::psi, mc);
  checks.push_back({"psi (anticipation effect)", -5.0, psi.value, psi.mc_se});

  const double margin = 0.03;
  json rows = json::array();
  bool all_pass = true;
  bool any_decisive_fail = false;
  std::printf("%-36s %8s %10s %10s  %s\n", "quantity", "paper", "estimate",
              "mc_se", "status");
  for (const Check& c : checks) {
    const double halfwidth = 1.96 * c.mc_se;
    const bool pass = std::fabs(c.estimate - c.paper_value) <= margin;
    const bool inconclusive = halfwidth > margin;
    all_pass = all_pass && pass;
    any_decisive_fail = any_decisive_fail || (!pass && !inconclusive);
    const char* status = pass ? "pass" : (inconclusive ? "inconclusive" : "FAIL");
    std::printf("%-36s %8.2f %10.4f %10.4f  %s\n", c.name.c_str(), c.paper_value,
                c.estimate, c.mc_se, status);
    rows.push_back({{"name", c.name},
                    {"paper_value", c.paper_value},
                    {"estimate", c.estimate},
                    {"mc_se", c.mc_se},
                    {"ci95", {c.estimate - halfwidth, c.estimate + halfwidth}},
                    {"margin", margin},
                    {"pass", pass},
                    {"inconclusive", inconclusive}});
  }

  if (!out.empty()) {
    json j;
    j["example"] = "car recall (two-period decision model)";
    j["scm_hash"] = didp::scm_hash(scm);
    j["n_draws"] = n;
    j["seed"] = seed;
    j["checks"] = rows;
    j["all_pass"] = all_pass;
    write_file(out, j.dump(2) + "\n");
  }
  return any_decisive_fail ? kExitVerifyFail : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"didp: difference-in-differences with an explicit policy "
               "decision variable"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample a panel CSV from an SCM");
  ScmOptions sim_scm;
  add_scm_flags(sim, sim_scm);
  std::int64_t sim_n = 1000;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out = "panel.csv";
  bool sim_keep_exo = false;
  sim->add_option("--n", sim_n, "number of units");
  sim->add_option("--seed", sim_seed, "RNG seed (entropy if omitted)");
  sim->add_option("--out", sim_out, "output CSV path");
  sim->add_flag("--keep-exogenous", sim_keep_exo,
                "retain non-panel nodes (written to the manifest only)");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate from a panel CSV");
  std::string est_panel, est_schema, est_control = "not_yet", est_out;
  int est_g = 0, est_k = 0, est_s = 0, est_boot = 0;
  double est_level = 0.95;
  bool est_as_p = false;
  std::optional<std::uint64_t> est_boot_seed;
  est->add_option("--panel", est_panel, "panel CSV path")->required();
  est->add_option("--schema", est_schema,
                  "column renames, e.g. unit=state,time=year,a=treated,y=cov");
  est->add_option("--g", est_g, "first-decision time (group-time estimator)");
  est->add_option("--k", est_k, "outcome time (group-time estimator)");
  est->add_option("--s", est_s, "decision-to-implementation lag");
  est->add_option("--control", est_control, "not_yet | never");
  est->add_flag("--as-att-p", est_as_p,
                "label the two-period contrast as the decision effect ATT_P "
                "(asserts the decision-based assumption set)");
  est->add_option("--bootstrap", est_boot, "bootstrap replicates (0 = none)");
  est->add_option("--level", est_level, "bootstrap confidence level");
  est->add_option("--boot-seed", est_boot_seed, "bootstrap seed");
  est->add_option("--out", est_out, "report JSON path");

  // oracle
  auto* ora = app.add_subcommand("oracle", "ground-truth estimand on an SCM");
  ScmOptions ora_scm;
  add_scm_flags(ora, ora_scm);
  std::string ora_kind = "att_p", ora_out;
  int ora_g = -1, ora_k = -1;
  std::int64_t ora_draws = 1000000;
  std::optional<std::uint64_t> ora_seed;
  ora->add_option("--kind", ora_kind, "att_a2 | att_p | psi | att_p_gt | att_a_gt");
  ora->add_option("--g", ora_g, "group time (group-time kinds)");
  ora->add_option("--k", ora_k, "outcome time (group-time kinds)");
  ora->add_option("--draws", ora_draws, "Monte Carlo draws");
  ora->add_option("--seed", ora_seed, "RNG seed (entropy if omitted)");
  ora->add_option("--out", ora_out, "report JSON path");

  // verify
  auto* ver = app.add_subcommand("verify", "verify a proposition on an SCM");
  ScmOptions ver_scm;
  add_scm_flags(ver, ver_scm);
  int ver_prop = 2;
  std::int64_t ver_n = 10000, ver_draws = 400000;
  int ver_reps = 200;
  std::optional<std::uint64_t> ver_seed;
  std::string ver_out, ver_sweep, ver_sweep_csv;
  ver->add_option("--prop", ver_prop, "proposition: 1 | 2 | 3")->required();
  ver->add_option("--n", ver_n, "units per replication");
  ver->add_option("--reps", ver_reps, "simulate-then-estimate replications");
  ver->add_option("--seed", ver_seed, "RNG seed (entropy if omitted)");
  ver->add_option("--draws", ver_draws, "oracle Monte Carlo draws");
  ver->add_option("--sweep-alphas", ver_sweep,
                  "also run the anticipation bias sweep over these "
                  "comma-separated coefficients (prop 1 family)");
  ver->add_option("--out", ver_out, "report JSON path");
  ver->add_option("--sweep-csv", ver_sweep_csv, "sweep table CSV path");

  // replicate-example
  auto* rep = app.add_subcommand("replicate-example",
                                 "reproduce the car-recall example numbers");
  std::int64_t rep_n = 1000000;
  std::optional<std::uint64_t> rep_seed;
  std::string rep_out;
  rep->add_option("--n", rep_n, "Monte Carlo draws");
  rep->add_option("--seed", rep_seed, "RNG seed (entropy if omitted)");
  rep->add_option("--out", rep_out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_scm, sim_n, sim_seed, sim_out, sim_keep_exo);
    }
    if (est->parsed()) {
      return cmd_estimate(est_panel, est_schema, est_g, est_k, est_s,
                          est_control, est_as_p, est_boot, est_level,
                          est_boot_seed, est_out);
    }
    if (ora->parsed()) {
      return cmd_oracle(ora_scm, ora_kind, ora_g, ora_k, ora_draws, ora_seed,
                        ora_out);
    }
    if (ver->parsed()) {
      return cmd_verify(ver_scm, ver_prop, ver_n, ver_reps, ver_seed, ver_draws,
                        ver_sweep, ver_out, ver_sweep_csv);
    }
    if (rep->parsed()) {
      return cmd_replicate_example(rep_n, rep_seed, rep_out);
    }
  } catch (const didp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const didp::EstimationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
