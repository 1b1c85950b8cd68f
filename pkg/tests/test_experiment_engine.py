import json
import threading

import numpy as np
import pytest

from experiment_engine import (
    ExperimentResult,
    GridSpace,
    binomial_margin,
    load_results,
    print_summary,
    run_grid,
    save_results,
)


def _result():
    return ExperimentResult(
        "demo",
        ["r", "model", "value"],
        [
            {"r": 0.0, "model": "CU", "value": 1.0 / 3.0},
            {"r": 0.0, "model": "NC", "value": float("nan")},
        ],
        {"seed": 1},
    )


def test_grid_order_first_axis_slowest():
    grid = GridSpace({"omega": [0.0, 1.0], "rho": [-1.0, 0.0, 1.0]})
    cells = grid.get_grid()
    assert len(grid) == 6
    assert cells[0] == {"omega": 0.0, "rho": -1.0}
    assert cells[1] == {"omega": 0.0, "rho": 0.0}
    assert cells[3] == {"omega": 1.0, "rho": -1.0}


def test_run_grid_keeps_index_order():
    seen = set()
    lock = threading.Lock()

    def work(i, item):
        with lock:
            seen.add(threading.get_ident())
        return i * 10 + item

    items = list(range(20))
    assert run_grid(items, work, threads=4) == run_grid(items, work, threads=1)
    assert run_grid(items, work, threads=4)[3] == 33


def test_binomial_margin():
    assert binomial_margin(0.5, 100) == pytest.approx(1.959964 * 0.05, rel=1e-5)
    assert binomial_margin(1.0, 100) == 0.0
    assert np.isnan(binomial_margin(0.5, 0))


def test_csv_format():
    text = _result().to_csv_text()
    lines = text.split("\n")
    assert lines[0] == "r,model,value"
    assert lines[1] == "0,CU,0.333333333"
    assert lines[2] == "0,NC,"
    assert text.endswith("\n")
    assert "\r" not in text


def test_json_maps_nan_to_null():
    doc = json.loads(_result().to_json_text())
    assert doc["records"][1]["value"] is None
    assert doc["metadata"] == {"seed": 1}
    assert doc["failures"] == []


def test_save_and_load(tmp_path):
    path = save_results(_result(), tmp_path / "out" / "demo.csv")
    rows = load_results(path)
    assert rows[0]["model"] == "CU"
    assert rows[0]["value"] == pytest.approx(1.0 / 3.0)
    path = save_results(_result(), tmp_path / "demo.json", fmt="json")
    assert json.loads(path.read_text())["experiment"] == "demo"


def test_rows_filter():
    assert len(_result().rows(model="CU")) == 1


def test_print_summary(capsys):
    print_summary(_result(), ["value"], ["r", "model"])
    out = capsys.readouterr().out
    assert "DEMO SUMMARY" in out
    assert "seed: 1" in out
    print_summary(ExperimentResult("empty", ["a"]), ["a"], [])
    assert "No results" in capsys.readouterr().out
