import json

import numpy as np
import pytest

from dro_counterpart import SUP
from errors import InvalidProcess, NotPsd, SchemaError
from instances import dump_instance, instance_from_dict, instance_to_dict, load_instance, save_instance
from synthetic_market import fit_var1, generate_var1_returns, moment_process_from_fit

CANONICAL = ["polyhedral_rhs.json", "ellipsoidal_center.json", "ellipsoidal_matrix.json", "moment.json"]


@pytest.mark.parametrize("name", CANONICAL)
def test_canonical_fixtures_are_byte_stable(fixture_path, name):
    text = fixture_path(name).read_text()
    assert dump_instance(load_instance(fixture_path(name))) == text


def test_save_and_reload(tmp_path, fixture_path):
    inst = load_instance(fixture_path("moment.json"))
    out = save_instance(inst, tmp_path / "copy.json")
    again = load_instance(out)
    assert again.direction == SUP
    assert again.costs == inst.costs
    assert instance_to_dict(again) == instance_to_dict(inst)


def _doc(fixture_path, name):
    return json.loads(fixture_path(name).read_text())


def test_schema_version_and_kind(fixture_path):
    doc = _doc(fixture_path, "polyhedral_rhs.json")
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "schema_version": 2})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "kind": "box"})
    with pytest.raises(SchemaError):
        instance_from_dict([doc])


def test_missing_key_and_declared_sizes(fixture_path):
    doc = _doc(fixture_path, "polyhedral_rhs.json")
    partial = dict(doc)
    del partial["Delta"]
    with pytest.raises(SchemaError):
        instance_from_dict(partial)
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "periods": 3})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "decision": [[1.0]]})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "decision": [[1.0, 2.0], [1.0, 2.0]]})


def test_process_errors_pass_through(fixture_path):
    doc = _doc(fixture_path, "ellipsoidal_matrix.json")
    with pytest.raises(NotPsd):
        instance_from_dict({**doc, "sigma1": [[-1.0]]})
    doc = _doc(fixture_path, "ellipsoidal_center.json")
    with pytest.raises(InvalidProcess):
        instance_from_dict({**doc, "radii": [1.0, -0.5, 0.8]})


def test_moment_defaults(fixture_path):
    doc = _doc(fixture_path, "moment.json")
    del doc["costs"]
    del doc["direction"]
    inst = instance_from_dict(doc)
    assert [c.kind for c in inst.costs] == ["linear", "linear"]
    assert inst.direction == SUP
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "direction": "max"})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "costs": [{"kind": "linear"}]})


def test_require_decision_and_budget(fixture_path):
    doc = _doc(fixture_path, "moment.json")
    inst = instance_from_dict(doc)
    assert inst.budget is None
    with pytest.raises(SchemaError):
        inst.require_budget()
    del doc["decision"]
    with pytest.raises(SchemaError):
        instance_from_dict(doc).require_decision()


def test_load_errors(tmp_path):
    with pytest.raises(SchemaError):
        load_instance(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(SchemaError):
        load_instance(broken)


def test_properties(fixture_path):
    inst = load_instance(fixture_path("ellipsoidal_center.json"))
    assert inst.periods == 3
    assert inst.dimension == 1
    assert np.allclose(inst.decision[1], [-0.5])


def test_moment_source_fits_synthetic_returns(fixture_path):
    inst = load_instance(fixture_path("moment_fitted.json"))
    frame = generate_var1_returns([[0.5]], [0.01], [[0.004]], 120, 7)
    expected = moment_process_from_fit(fit_var1(frame), frame, 0.5, 6)

    assert inst.kind == "moment"
    assert inst.periods == 2
    assert inst.dimension == 1
    assert inst.process.supports[0].shape[0] <= 6
    for got, want in zip(inst.process.supports, expected.supports):
        assert np.allclose(got, want)
    assert np.allclose(inst.process.A[1], expected.A[1])
    assert np.allclose(inst.process.b[1], expected.b[1])
    assert [c.kind for c in inst.costs] == ["linear", "piecewise_min"]


def test_moment_source_dumps_explicit_process(fixture_path, tmp_path):
    inst = load_instance(fixture_path("moment_fitted.json"))
    doc = instance_to_dict(inst)
    assert "source" not in doc
    again = load_instance(save_instance(inst, tmp_path / "explicit.json"))
    assert instance_to_dict(again) == doc


def test_moment_source_from_return_rows(fixture_path):
    frame = generate_var1_returns([[0.3]], [0.02], [[0.002]], 60, 3)
    doc = _doc(fixture_path, "moment_fitted.json")
    doc["source"] = {"returns": frame.to_numpy().tolist(), "max_points": 5}
    inst = instance_from_dict(doc)
    fit = fit_var1(frame)
    assert np.allclose(inst.process.A[1], fit.A)
    assert inst.process.supports[0].shape[0] <= 5


def test_moment_source_errors(fixture_path):
    doc = _doc(fixture_path, "moment_fitted.json")
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "source": {**doc["source"], "returns": [[0.1], [0.2]]}})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "source": {"max_points": 4}})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "source": {**doc["source"], "window": 3}})
    with pytest.raises(SchemaError):
        instance_from_dict({**doc, "source": {"synthetic": [0.5]}})
    with pytest.raises(InvalidProcess):
        instance_from_dict({**doc, "source": {"returns": [[0.1], [0.2], [0.3]]}})
