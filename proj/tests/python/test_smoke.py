"""Smoke tests for the didp Python module (built in-tree or via pip)."""

import json
import math

import pytest

didp = pytest.importorskip("didp")


def test_cars_panel_shape_and_determinism():
    scm = didp.builtin_scm("cars")
    a = didp.sample_observational(scm, 500, seed=7)
    b = didp.sample_observational(scm, 500, seed=7)
    assert a.n_units == 500
    assert a.n_periods == 2
    assert a.has_decision()
    assert a == b
    assert a.a(0, 1) == 0  # nobody treated at time 1


def test_classic_contrast_near_zero_on_cars():
    scm = didp.builtin_scm("cars")
    panel = didp.sample_observational(scm, 200000, seed=1)
    report = didp.did_classic_report(panel)
    assert report["estimand"] == "ATT_A2"
    assert abs(report["point"]) < 0.1
    assert {c["cell"] for c in report["cells"]} == {"A2=1", "A2=0"}


def test_oracle_hits_the_example_values():
    scm = didp.builtin_scm("cars")
    att_p = didp.oracle(scm, "att_p", draws=100000, seed=3)
    assert att_p["value"] == pytest.approx(-4.0, abs=1e-6)
    psi = didp.oracle(scm, "psi", draws=100000, seed=3)
    assert psi["value"] == pytest.approx(-5.0, abs=1e-6)


def test_group_time_estimator_runs_on_staggered_panel():
    scm = didp.staggered_scm(tau=4, s=1)
    panel = didp.sample_observational(scm, 20000, seed=5)
    report = didp.group_time_att_report(panel, g=2, k=4, s=1, control="never")
    assert report["point"] == pytest.approx(1.8, abs=0.15)
    groups = didp.infer_groups(panel, 1)
    assert set(g for g in groups if g is not None) == {1, 2, 3}


def test_csv_round_trip(tmp_path):
    scm = didp.builtin_scm("cars")
    panel = didp.sample_observational(scm, 200, seed=11)
    path = str(tmp_path / "panel.csv")
    didp.save_panel(panel, path)
    assert didp.load_panel(path) == panel


def test_verify_prop2_passes_and_reports_json():
    scm = didp.builtin_scm("prop2")
    report = didp.verify(2, scm, n_units=2000, replications=20,
                         seed=3, oracle_draws=60000)
    assert report["status"] == "pass"
    assert report["identities"][0]["oracle_value"] == pytest.approx(-3.0)


def test_validation_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        didp.load_panel_text("unit,time,a,y\n1,1,2,0\n")  # non-binary a
    with pytest.raises(ValueError):
        didp.builtin_scm("nonexistent")


def test_audit_report_is_json():
    scm = didp.builtin_scm("cars")
    panel = didp.sample_observational(scm, 500, seed=2)
    audit = json.loads(didp.audit_assumptions(panel))
    assert audit["determinism"]["status"] == "passed"
    assert math.isclose(sum(a["count"] for a in audit["positivity"]["arms"]), 500)
