#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "didp/estimators.hpp"
#include "didp/oracle.hpp"
#include "didp/panel.hpp"
#include "didp/scm.hpp"

namespace py = pybind11;

namespace {

didp::ControlGroup control_from(const std::string& name) {
  if (name == "not_yet" || name == "not_yet_treated") {
    return didp::ControlGroup::not_yet_treated;
  }
  if (name == "never" || name == "never_treated") {
    return didp::ControlGroup::never_treated;
  }
  throw didp::ValidationError("control must be 'not_yet' or 'never'");
}

didp::EstimandKind kind_from(const std::string& name) {
  if (name == "att_a2") return didp::EstimandKind::att_a2;
  if (name == "att_p") return didp::EstimandKind::att_p;
  if (name == "psi") return didp::EstimandKind::psi;
  if (name == "att_p_gt") return didp::EstimandKind::att_p_gt;
  if (name == "att_a_gt") return didp::EstimandKind::att_a_gt;
  throw didp::ValidationError("unknown estimand kind '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_didp, m) {
  m.doc() = "didp core: panel DiD with an explicit policy-decision variable";

  py::register_exception<didp::ValidationError>(m, "ValidationError",
                                                PyExc_ValueError);
  py::register_exception<didp::EstimationError>(m, "EstimationError",
                                                PyExc_RuntimeError);

  py::class_<didp::PanelDataset>(m, "PanelDataset")
      .def_readonly("n_units", &didp::PanelDataset::n_units)
      .def_readonly("n_periods", &didp::PanelDataset::n_periods)
      .def_readonly("unit_ids", &didp::PanelDataset::unit_ids)
      .def_property_readonly("lag_s",
                             [](const didp::PanelDataset& p) {
                               return p.lag_s ? py::cast(*p.lag_s)
                                              : py::none().cast<py::object>();
                             })
      .def("has_decision", &didp::PanelDataset::has_decision)
      .def("y", &didp::PanelDataset::y, py::arg("unit"), py::arg("k"))
      .def("a", &didp::PanelDataset::a, py::arg("unit"), py::arg("k"))
      .def("p", &didp::PanelDataset::p, py::arg("unit"), py::arg("k"))
      .def("__eq__", [](const didp::PanelDataset& a, const didp::PanelDataset& b) {
        return a == b;
      });

  m.def(
      "load_panel",
      [](const std::string& path) { return didp::load_panel_file(path); },
      py::arg("path"));
  m.def(
      "load_panel_text",
      [](const std::string& text) {
        std::istringstream in(text);
        return didp::load_panel(in);
      },
      py::arg("text"));
  m.def(
      "save_panel",
      [](const didp::PanelDataset& panel, const std::string& path) {
        didp::save_panel_file(panel, path);
      },
      py::arg("panel"), py::arg("path"));
  m.def(
      "save_panel_text",
      [](const didp::PanelDataset& panel) {
        std::ostringstream out;
        didp::save_panel(panel, out);
        return out.str();
      },
      py::arg("panel"));
  m.def(
      "infer_groups",
      [](const didp::PanelDataset& panel, int s) {
        const didp::GroupAssignment ga = didp::infer_groups(panel, s);
        py::list labels;
        for (const auto& g : ga.group) {
          labels.append(g ? py::cast(*g) : py::none().cast<py::object>());
        }
        return labels;
      },
      py::arg("panel"), py::arg("s"));
  m.def(
      "audit_assumptions",
      [](const didp::PanelDataset& panel) {
        return didp::audit_assumptions(panel).to_json();
      },
      py::arg("panel"), "observational assumption audit as a JSON string");

  py::class_<didp::Scm>(m, "Scm")
      .def_readonly("name", &didp::Scm::name)
      .def("to_json", [](const didp::Scm& scm) { return didp::scm_to_json(scm); })
      .def("hash", [](const didp::Scm& scm) { return didp::scm_hash(scm); });

  m.def("builtin_scm", &didp::builtin_by_name, py::arg("name"),
        "cars | prop1[:alpha] | prop2 | staggered");
  m.def(
      "staggered_scm",
      [](int tau, int s, double anticipation) {
        didp::StaggeredParams params;
        params.tau = tau;
        params.s = s;
        params.anticipation = anticipation;
        return didp::builtin_staggered_dgp(params);
      },
      py::arg("tau") = 4, py::arg("s") = 1, py::arg("anticipation") = 0.0);
  m.def("scm_from_json", &didp::scm_from_json, py::arg("text"));
  m.def("validate_scm", [](const didp::Scm& scm) { didp::validate(scm); });

  m.def(
      "sample_observational",
      [](const didp::Scm& scm, std::int64_t n, std::uint64_t seed,
         bool keep_exogenous) {
        didp::SampleOptions opts;
        opts.keep_exogenous = keep_exogenous;
        return didp::sample_observational(scm, n, seed, opts);
      },
      py::arg("scm"), py::arg("n"), py::arg("seed"),
      py::arg("keep_exogenous") = false);
  m.def(
      "sample_interventional",
      [](const didp::Scm& scm, const std::map<std::string, double>& assignments,
         std::int64_t n, std::uint64_t seed) {
        didp::InterventionSpec spec;
        spec.assignments = assignments;
        return didp::sample_interventional(scm, spec, n, seed);
      },
      py::arg("scm"), py::arg("do"), py::arg("n"), py::arg("seed"));

  m.def(
      "did_classic",
      [](const didp::PanelDataset& panel, bool as_att_p) {
        return didp::did_classic(panel, as_att_p ? didp::AttReading::att_p
                                                 : didp::AttReading::att_a2)
            .to_json();
      },
      py::arg("panel"), py::arg("as_att_p") = false,
      "EstimateReport as a JSON string");
  m.def(
      "did_classic_point",
      [](const didp::PanelDataset& panel) {
        return didp::did_classic(panel).point;
      },
      py::arg("panel"));
  m.def(
      "group_time_att",
      [](const didp::PanelDataset& panel, int g, int k, int s,
         const std::string& control) {
        return didp::group_time_att(panel, g, k, s, control_from(control))
            .to_json();
      },
      py::arg("panel"), py::arg("g"), py::arg("k"), py::arg("s"),
      py::arg("control") = "not_yet");
  m.def(
      "group_time_att_point",
      [](const didp::PanelDataset& panel, int g, int k, int s,
         const std::string& control) {
        return didp::group_time_att(panel, g, k, s, control_from(control)).point;
      },
      py::arg("panel"), py::arg("g"), py::arg("k"), py::arg("s"),
      py::arg("control") = "not_yet");
  m.def(
      "bootstrap_ci",
      [](const didp::PanelDataset& panel,
         const std::function<double(const didp::PanelDataset&)>& estimator,
         double level, int replicates, std::uint64_t seed) {
        const didp::BootstrapResult r =
            didp::bootstrap_ci(panel, estimator, level, replicates, seed);
        return py::make_tuple(r.lo, r.hi);
      },
      py::arg("panel"), py::arg("estimator"), py::arg("level") = 0.95,
      py::arg("replicates") = 999, py::arg("seed") = 1);

  m.def(
      "oracle_estimand",
      [](const didp::Scm& scm, const std::string& kind, std::int64_t draws,
         std::uint64_t seed, int g, int k) {
        didp::McConfig mc;
        mc.n_draws = draws;
        mc.seed = seed;
        return didp::oracle_estimand(scm, kind_from(kind), mc, g, k).to_json();
      },
      py::arg("scm"), py::arg("kind"), py::arg("draws") = 200000,
      py::arg("seed") = 1, py::arg("g") = -1, py::arg("k") = -1,
      "OracleEstimand as a JSON string");
  m.def(
      "verify_proposition",
      [](int proposition, const didp::Scm& scm, std::int64_t n_units,
         int replications, std::uint64_t seed, std::int64_t oracle_draws) {
        didp::VerifyConfig config;
        config.n_units = n_units;
        config.replications = replications;
        config.seed = seed;
        config.oracle_draws = oracle_draws;
        return didp::verify_proposition(proposition, scm, config).to_json();
      },
      py::arg("proposition"), py::arg("scm"), py::arg("n_units") = 10000,
      py::arg("replications") = 100, py::arg("seed") = 1,
      py::arg("oracle_draws") = 200000,
      "VerificationReport as a JSON string");

  m.attr("__version__") = didp::kVersion;
}
