import json

import pytest

from errors import BadOverride, MissingInput, UnknownVerb, UsageError
from lp_core import read_lp_text
from main import Command, main, parse_args


def _error(capsys):
    lines = capsys.readouterr().err.strip().splitlines()
    return json.loads(lines[-1])


def test_parse_args_defaults(fixture_path):
    cmd = parse_args(["export", str(fixture_path("polyhedral_rhs.json"))])
    assert isinstance(cmd, Command)
    assert cmd.output_format == "lp"
    assert parse_args(["run-knapsack"]).output_format == "csv"
    assert parse_args(["worst-case", str(fixture_path("moment.json"))]).output_format == "json"


def test_parse_args_errors(fixture_path):
    with pytest.raises(UsageError):
        parse_args([])
    with pytest.raises(UnknownVerb):
        parse_args(["frobnicate"])
    with pytest.raises(MissingInput):
        parse_args(["reformulate"])
    with pytest.raises(MissingInput):
        parse_args(["worst-case", "no/such/file.json"])
    with pytest.raises(UsageError):
        parse_args(["run-knapsack", "--threads", "0"])
    with pytest.raises(UsageError):
        parse_args(["export", str(fixture_path("moment.json")), "--format", "csv"])
    with pytest.raises(UsageError):
        parse_args(["verify", "--bogus"])
    with pytest.raises(BadOverride):
        parse_args(["run-knapsack", "--set", "budget"])


@pytest.mark.parametrize(
    "argv, code",
    [
        ([], "usage_error"),
        (["frobnicate"], "unknown_verb"),
        (["export"], "missing_input"),
        (["solve-knapsack", "--set", "=1"], "bad_override"),
    ],
)
def test_usage_errors_exit_2(capsys, argv, code):
    assert main(argv) == 2
    assert _error(capsys)["error"] == code


def test_reformulate_golden(capsys, fixture_path):
    assert main(["reformulate", str(fixture_path("polyhedral_rhs.json"))]) == 0
    assert capsys.readouterr().out == fixture_path("polyhedral_rhs.reformulate.json").read_text()


def test_reformulate_unsupported(capsys, fixture_path):
    assert main(["reformulate", str(fixture_path("moment.json"))]) == 1
    assert _error(capsys)["error"] == "reformulation_unsupported"


def test_worst_case_center(capsys, fixture_path):
    assert main(["worst-case", str(fixture_path("ellipsoidal_center.json"))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["counterpart"] == pytest.approx(1.669)
    assert doc["oracle"]["mode"] == "exact1d"
    assert abs(doc["gap"]) < 1e-9
    assert doc["feasible"] is True


def test_worst_case_polyhedral(capsys, fixture_path):
    assert main(["worst-case", str(fixture_path("polyhedral_rhs.json"))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["counterpart"] == pytest.approx(2.3)
    assert doc["oracle"]["value"] == pytest.approx(2.3)
    assert doc["worst_path"] == [pytest.approx([1.0]), pytest.approx([1.3])]
    assert doc["feasible"] is True


def test_worst_case_moment(capsys, fixture_path):
    assert main(["worst-case", str(fixture_path("moment.json"))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["primal"] <= doc["exact_dual"] + 1e-4
    assert doc["exact_dual"] <= doc["conservative_dual"] + 1e-7


def test_worst_case_fitted_moment(capsys, fixture_path):
    path = str(fixture_path("moment_fitted.json"))
    assert main(["worst-case", path]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["primal"] <= doc["exact_dual"] + 1e-4
    assert doc["exact_dual"] <= doc["conservative_dual"] + 1e-7
    assert main(["export", path, "--format", "lp"]) == 0
    assert capsys.readouterr().out.strip()


def test_worst_case_bad_instance(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema_version": 1, "kind": "box"}))
    assert main(["worst-case", str(path)]) == 1
    assert _error(capsys)["error"] == "schema_error"


def test_run_knapsack_is_deterministic(tmp_path, fixture_path, capsys):
    config = str(fixture_path("knapsack_small.json"))
    one, two = tmp_path / "one.csv", tmp_path / "two.csv"
    assert main(["run-knapsack", config, "--seed", "5", "--threads", "1", "--out", str(one)]) == 0
    assert main(["run-knapsack", config, "--seed", "5", "--threads", "2", "--out", str(two)]) == 0
    assert one.read_text() == two.read_text()
    lines = one.read_text().splitlines()
    assert lines[0].startswith("sweep,r,lambda,model,")
    assert len(lines) == 1 + (3 + 3) * 2
    assert "KNAPSACK SUMMARY" in capsys.readouterr().out


def test_run_knapsack_json(capsys, fixture_path):
    argv = ["run-knapsack", str(fixture_path("knapsack_small.json")), "--format", "json", "--set", "replications=1"]
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["experiment"] == "knapsack"
    assert doc["metadata"]["replications"] == 1


def test_solve_knapsack(capsys, fixture_path):
    assert main(["solve-knapsack", str(fixture_path("knapsack_small.json"))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["CU"]) >= {"x1", "x2", "objective", "satisfaction"}
    assert doc["budget"] == 8.0


def test_config_error_exits_1(capsys, fixture_path):
    assert main(["run-knapsack", str(fixture_path("knapsack_small.json")), "--set", "budgett=3"]) == 1
    assert _error(capsys)["error"] == "schema_error"


def test_export_formats(capsys, fixture_path):
    path = fixture_path("polyhedral_rhs.json")
    assert main(["export", str(path)]) == 0
    problem = read_lp_text(capsys.readouterr().out)
    assert problem.num_vars >= 2
    assert main(["export", str(path), "--format", "json"]) == 0
    assert capsys.readouterr().out == path.read_text()
    assert main(["export", str(fixture_path("ellipsoidal_matrix.json"))]) == 1
    assert _error(capsys)["error"] == "reformulation_unsupported"


def test_verify_verb(capsys):
    argv = ["verify", "--suite", "duality", "--set", "verify.duality_instances=2", "--set", "verify.lp_instances=3"]
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is True
    assert list(doc["suites"]) == ["duality"]
    assert main(["verify", "--set", "budget=1"]) == 1
    assert _error(capsys)["error"] == "schema_error"
