import json

import numpy as np
import pytest

from errors import SchemaError
from verify import CheckResult, VerifySettings, print_report, report_to_json, run_verify, vertex_max, vertices

SMALL = VerifySettings(
    exact_instances=5,
    monte_carlo_instances=2,
    monte_carlo_samples=2000,
    matrix_instances=3,
    matrix_samples=500,
    duality_instances=3,
    lp_instances=5,
    aro_instances=3,
    dro_instances=2,
)

SQUARE_H = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
SQUARE_h = np.array([0.0, 0.0, -1.0, -1.0])


def test_vertices_of_unit_square():
    V = vertices(SQUARE_H, SQUARE_h)
    assert sorted(map(tuple, V.round(12))) == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    assert vertex_max([1.0, 2.0], SQUARE_H, SQUARE_h) == pytest.approx(3.0)


def test_empty_polytope():
    H = np.array([[1.0], [-1.0]])
    h = np.array([1.0, 0.0])
    assert vertices(H, h).shape == (0, 1)
    with pytest.raises(SchemaError):
        vertex_max([1.0], H, h)


def test_check_result():
    check = CheckResult("gap", 1e-6)
    check.record(1e-8)
    assert check.passed
    check.record(float("nan"))
    assert not check.passed
    assert check.to_dict()["violations"] == 1
    other = CheckResult("gap", 1e-6)
    other.record_error("case 0", SchemaError("bad"))
    assert not other.passed
    assert other.to_dict()["first_error"] == "case 0: bad"


def test_settings_from_dict():
    assert VerifySettings.from_dict({"lp_instances": 4}).lp_instances == 4
    with pytest.raises(SchemaError):
        VerifySettings.from_dict({"lp": 4})
    with pytest.raises(SchemaError):
        VerifySettings.from_dict({"lp_instances": -1})


@pytest.mark.parametrize("suite", ["theorem1", "duality", "aro", "dro"])
def test_small_suites_pass(suite):
    report = run_verify(suite, seed=7, settings=SMALL)
    assert list(report["suites"]) == [suite]
    failed = [c for c in report["suites"][suite]["checks"] if not c["passed"]]
    assert failed == []
    assert report["passed"]


def test_report_is_thread_independent():
    a = report_to_json(run_verify("duality", seed=3, threads=1, settings=SMALL))
    b = report_to_json(run_verify("duality", seed=3, threads=2, settings=SMALL))
    assert a == b
    assert json.loads(a)["seed"] == 3


def test_unknown_suite():
    with pytest.raises(SchemaError):
        run_verify("everything", settings=SMALL)


def test_print_report(capsys):
    print_report(run_verify("dro", seed=1, settings=SMALL))
    out = capsys.readouterr().out
    assert "VERIFY REPORT (seed 1)" in out
    assert "Overall: PASS" in out


@pytest.mark.slow
def test_full_acceptance_run():
    report = run_verify("all", threads=4)
    assert report["passed"]
