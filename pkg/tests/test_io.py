import json

import pytest

from dynsampler.factor_graph import GraphicalModel, UpdateRequest
from dynsampler.io import (
    LoadedModel,
    ParseError,
    load_model,
    load_updates,
    model_from_json,
    model_to_json,
    update_to_json,
    updates_from_json,
)
from dynsampler.spin_models import HardcoreModel, HardcoreUpdate, IsingModel, PottsModel, SpinUpdate

GENERIC = {
    "variables": [{"q": 2, "phi": [0.3, 0.7]}, {"q": 3, "phi": [0.2, 0.3, 0.5]}],
    "constraints": [{"scope": [0, 1], "table": [1.0, 0.5, 0.2, 0.4, 1.0, 0.9]}],
}


def test_generic_roundtrip():
    loaded = model_from_json(GENERIC)
    assert loaded.kind == "generic" and loaded.model.n == 2
    again = model_from_json(json.loads(json.dumps(model_to_json(loaded))))
    assert model_to_json(again) == model_to_json(loaded)


def test_generic_update_roundtrip():
    loaded = model_from_json(GENERIC)
    ups = [{"variables": [{"id": 1, "phi": [0.1, 0.1, 0.8]}], "constraints": [{"scope": [0, 1], "table": [1.0] * 6}]}]
    parsed = updates_from_json(ups, loaded)
    assert isinstance(parsed[0], UpdateRequest)
    assert [update_to_json("generic", u) for u in parsed] == ups


@pytest.mark.parametrize(
    "bad",
    [
        {**GENERIC, "extra": 1},
        {"variables": [{"q": 2, "phi": [0.5, 0.5], "name": "x"}], "constraints": []},
        {"variables": [{"q": 3, "phi": [0.5, 0.5]}], "constraints": []},
        {"variables": [{"q": 2, "phi": [0.5, "a"]}], "constraints": []},
        {"variables": [{"q": True, "phi": [0.5, 0.5]}], "constraints": []},
        {"variables": [{"q": 2, "phi": [0.5, 0.5]}], "constraints": [{"scope": [0, 4], "table": [1.0] * 4}]},
        {"type": "lattice"},
        [],
    ],
)
def test_generic_rejects(bad):
    with pytest.raises(ValueError):
        model_from_json(bad)


def test_parse_error_is_value_error():
    assert issubclass(ParseError, ValueError)


def test_ising_roundtrip():
    obj = {"type": "ising", "n": 3, "edges": [[0, 1, 0.5], [1, 2, -0.2]], "fields": [[0.4, 0.6]] * 3}
    loaded = model_from_json(obj)
    assert isinstance(loaded.model, IsingModel)
    assert model_from_json(model_to_json(loaded)).model.couplings == loaded.model.couplings


def test_potts_needs_q():
    with pytest.raises(ParseError):
        model_from_json({"type": "potts", "n": 3, "edges": []})
    loaded = model_from_json({"type": "potts", "n": 3, "q": 3, "edges": [[0, 2, 0.1]]})
    assert isinstance(loaded.model, PottsModel) and loaded.model.q == 3


def test_ising_rejects_q_other_than_two():
    with pytest.raises(ParseError):
        model_from_json({"type": "ising", "n": 2, "q": 3})


def test_spin_update_roundtrip():
    loaded = model_from_json({"type": "ising", "n": 3, "edges": [[0, 1, 0.5]]})
    ups = updates_from_json([{"edges": [[1, 2, 0.3]], "fields": [[0, [0.2, 0.8]]]}], loaded)
    assert isinstance(ups[0], SpinUpdate)
    assert updates_from_json([update_to_json("ising", ups[0])], loaded) == ups


def test_spin_update_vertex_range():
    loaded = model_from_json({"type": "ising", "n": 3})
    with pytest.raises(ParseError):
        updates_from_json([{"edges": [[1, 5, 0.3]]}], loaded)


def test_hardcore_scalar_lambda():
    loaded = model_from_json({"type": "hardcore", "n": 4, "lambda": 0.25, "edges": [[0, 1], [2, 1]]})
    assert loaded.model.fugacity == (0.25,) * 4
    assert (1, 2) in loaded.model.edges
    with pytest.raises(ParseError):
        model_from_json({"type": "hardcore", "lambda": 0.25})
    with pytest.raises(ParseError):
        model_from_json({"type": "hardcore", "n": 3, "lambda": [0.1, 0.2]})


def test_hardcore_update_roundtrip():
    loaded = LoadedModel("hardcore", HardcoreModel(4, frozenset({(0, 1)}), (0.2,) * 4))
    ups = updates_from_json([{"edges": [[2, 3]], "remove": [[0, 1]], "lambda": [[1, 0.5]]}], loaded)
    assert ups == [HardcoreUpdate(frozenset({(2, 3)}), frozenset({(0, 1)}), {1: 0.5})]
    assert updates_from_json([update_to_json("hardcore", ups[0])], loaded) == ups
    with pytest.raises(ParseError):
        updates_from_json([{"lambda": [[1, 0.0]]}], loaded)
    with pytest.raises(ParseError):
        updates_from_json([{"add": [[1, 2]]}], loaded)


def test_file_loading(tmp_path):
    m = tmp_path / "m.json"
    u = tmp_path / "u.json"
    m.write_text(json.dumps(GENERIC))
    u.write_text("[]")
    loaded = load_model(m)
    assert isinstance(loaded.model, GraphicalModel)
    assert load_updates(u, loaded) == []
    with pytest.raises(ParseError):
        load_model(tmp_path / "missing.json")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(ParseError):
        load_model(tmp_path / "broken.json")
