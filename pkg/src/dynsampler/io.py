"""JSON model and update-stream formats.

Generic factor graphs::

    {"variables": [{"q": 2, "phi": [0.5, 0.5]}, ...],
     "constraints": [{"scope": [0, 1], "table": [1.0, 0.5, 0.5, 1.0]}, ...]}

with updates given as a list of
``{"variables": [{"id": 0, "phi": [...]}], "constraints": [{"scope": [...], "table": [...]}]}``.

Spin systems::

    {"type": "ising", "n": 3, "edges": [[0, 1, 0.5], ...], "fields": [[0.5, 0.5], ...]}
    {"type": "potts", "n": 4, "q": 3, "edges": [[u, v, beta], ...]}
    {"type": "hardcore", "n": 4, "edges": [[0, 1], ...], "lambda": [0.3, ...]}

Spin updates are ``{"edges": [[u, v, beta]], "fields": [[v, [w, ...]]]}``;
hardcore updates are ``{"edges": [[u, v]], "remove": [[u, v]], "lambda": [[v, lam]]}``.
Unknown keys are rejected everywhere.
"""
from __future__ import annotations

import json
import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

from .factor_graph import GraphicalModel, ModelError, UpdateRequest
from .spin_models import HardcoreModel, HardcoreUpdate, IsingModel, PottsModel, SpinUpdate

KINDS = ("generic", "ising", "potts", "hardcore")


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class LoadedModel:
    kind: str
    model: Union[GraphicalModel, PottsModel, HardcoreModel]


def _keys(obj: Any, where: str, required: tuple = (), optional: tuple = ()) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ParseError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ParseError(f"{where}: missing keys {missing}")
    return obj


def _int(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{where}: expected an integer, got {x!r}")
    return x


def _float(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise ParseError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _list(x, where: str) -> list:
    if not isinstance(x, list):
        raise ParseError(f"{where}: expected a list")
    return x


def _floats(x, where: str) -> tuple[float, ...]:
    return tuple(_float(v, where) for v in _list(x, where))


def _ints(x, where: str) -> tuple[int, ...]:
    return tuple(_int(v, where) for v in _list(x, where))


# --- generic ------------------------------------------------------------------


def parse_generic_model(obj: dict) -> GraphicalModel:
    _keys(obj, "model", ("variables",), ("constraints", "type"))
    variables = []
    for i, v in enumerate(_list(obj["variables"], "variables")):
        _keys(v, f"variables[{i}]", ("phi",), ("q",))
        phi = _floats(v["phi"], f"variables[{i}].phi")
        if "q" in v and _int(v["q"], f"variables[{i}].q") != len(phi):
            raise ParseError(f"variables[{i}]: q does not match the length of phi")
        variables.append(phi)
    constraints = []
    for i, c in enumerate(_list(obj.get("constraints", []), "constraints")):
        _keys(c, f"constraints[{i}]", ("scope", "table"))
        constraints.append((_ints(c["scope"], f"constraints[{i}].scope"), _floats(c["table"], f"constraints[{i}].table")))
    try:
        return GraphicalModel.from_factors(variables, constraints)
    except ModelError as exc:
        raise ParseError(str(exc)) from exc


def parse_generic_update(obj: dict, where: str = "update") -> UpdateRequest:
    _keys(obj, where, (), ("variables", "constraints"))
    var_updates = []
    for i, v in enumerate(_list(obj.get("variables", []), f"{where}.variables")):
        _keys(v, f"{where}.variables[{i}]", ("id", "phi"))
        var_updates.append((_int(v["id"], f"{where}.variables[{i}].id"), _floats(v["phi"], f"{where}.variables[{i}].phi")))
    con_updates = []
    for i, c in enumerate(_list(obj.get("constraints", []), f"{where}.constraints")):
        _keys(c, f"{where}.constraints[{i}]", ("scope", "table"))
        con_updates.append(
            (_ints(c["scope"], f"{where}.constraints[{i}].scope"), _floats(c["table"], f"{where}.constraints[{i}].table"))
        )
    return UpdateRequest(tuple(var_updates), tuple(con_updates))


def generic_model_to_json(model: GraphicalModel) -> dict:
    return {
        "variables": [{"q": v.q, "phi": list(v.weights)} for v in model.variables],
        "constraints": [
            {"scope": list(c.scope), "table": list(c.table)} for _, c in sorted(model.constraints.items())
        ],
    }


def generic_update_to_json(update: UpdateRequest) -> dict:
    return {
        "variables": [{"id": v, "phi": list(w)} for v, w in update.variable_updates],
        "constraints": [{"scope": list(s), "table": list(t)} for s, t in update.constraint_updates],
    }


# --- spin systems ---------------------------------------------------------------


def _edge_triples(x, where: str) -> dict:
    out = {}
    for i, e in enumerate(_list(x, where)):
        if not isinstance(e, list) or len(e) != 3:
            raise ParseError(f"{where}[{i}]: expected [u, v, beta]")
        key = (_int(e[0], where), _int(e[1], where))
        if key in out or key[::-1] in out:
            raise ParseError(f"{where}[{i}]: duplicate edge {key}")
        out[key] = _float(e[2], where)
    return out


def _edge_pairs(x, where: str) -> list:
    out = []
    for i, e in enumerate(_list(x, where)):
        if not isinstance(e, list) or len(e) != 2:
            raise ParseError(f"{where}[{i}]: expected [u, v]")
        out.append((_int(e[0], where), _int(e[1], where)))
    return out


def _check_vertices(n: int, vertices, where: str) -> None:
    for v in vertices:
        if not 0 <= v < n:
            raise ParseError(f"{where}: vertex {v} out of range for n={n}")


def parse_spin_model(obj: dict) -> PottsModel:
    kind = obj.get("type")
    required = ("type", "n", "q") if kind == "potts" else ("type", "n")
    _keys(obj, "model", required, ("edges", "fields", "q"))
    n = _int(obj["n"], "n")
    couplings = _edge_triples(obj.get("edges", []), "edges")
    _check_vertices(n, [v for e in couplings for v in e], "edges")
    fields = obj.get("fields")
    if fields is not None:
        fields = [_floats(f, "fields") for f in _list(fields, "fields")]
    try:
        if kind == "ising":
            if obj.get("q", 2) != 2:
                raise ParseError("ising models have q = 2")
            return IsingModel(n, couplings, fields)
        return PottsModel(n, _int(obj["q"], "q"), couplings, fields)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def parse_spin_update(obj: dict, n: int, where: str = "update") -> SpinUpdate:
    _keys(obj, where, (), ("edges", "fields"))
    couplings = _edge_triples(obj.get("edges", []), f"{where}.edges")
    _check_vertices(n, [v for e in couplings for v in e], f"{where}.edges")
    fields = {}
    for i, f in enumerate(_list(obj.get("fields", []), f"{where}.fields")):
        if not isinstance(f, list) or len(f) != 2:
            raise ParseError(f"{where}.fields[{i}]: expected [v, [w, ...]]")
        v = _int(f[0], f"{where}.fields[{i}]")
        _check_vertices(n, [v], f"{where}.fields[{i}]")
        fields[v] = _floats(f[1], f"{where}.fields[{i}]")
    try:
        return SpinUpdate(couplings, fields)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def parse_hardcore_model(obj: dict) -> HardcoreModel:
    _keys(obj, "model", ("type", "lambda"), ("n", "edges"))
    lam = obj["lambda"]
    if isinstance(lam, list):
        lam = _floats(lam, "lambda")
        n = _int(obj.get("n", len(lam)), "n")
        if n != len(lam):
            raise ParseError("n does not match the length of lambda")
    else:
        if "n" not in obj:
            raise ParseError("a scalar lambda needs n")
        n = _int(obj["n"], "n")
        lam = (_float(lam, "lambda"),) * n
    edges = _edge_pairs(obj.get("edges", []), "edges")
    _check_vertices(n, [v for e in edges for v in e], "edges")
    try:
        return HardcoreModel(n, frozenset(edges), lam)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def parse_hardcore_update(obj: dict, n: int, where: str = "update") -> HardcoreUpdate:
    _keys(obj, where, (), ("edges", "remove", "lambda"))
    add = _edge_pairs(obj.get("edges", []), f"{where}.edges")
    remove = _edge_pairs(obj.get("remove", []), f"{where}.remove")
    _check_vertices(n, [v for e in add + remove for v in e], where)
    fugacity = {}
    for i, f in enumerate(_list(obj.get("lambda", []), f"{where}.lambda")):
        if not isinstance(f, list) or len(f) != 2:
            raise ParseError(f"{where}.lambda[{i}]: expected [v, lambda]")
        v = _int(f[0], where)
        _check_vertices(n, [v], where)
        fugacity[v] = _float(f[1], where)
        if not fugacity[v] > 0:
            raise ParseError(f"{where}.lambda[{i}]: fugacity must be positive")
    try:
        return HardcoreUpdate(frozenset(add), frozenset(remove), fugacity)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def spin_model_to_json(model: PottsModel) -> dict:
    out = {"type": "ising" if isinstance(model, IsingModel) else "potts", "n": model.n}
    if out["type"] == "potts":
        out["q"] = model.q
    out["edges"] = [[u, v, b] for (u, v), b in model.couplings.items()]
    if model.fields is not None:
        out["fields"] = [list(f) for f in model.fields]
    return out


def spin_update_to_json(update: SpinUpdate) -> dict:
    return {
        "edges": [[u, v, b] for (u, v), b in update.couplings.items()],
        "fields": [[v, list(f)] for v, f in update.fields.items()],
    }


def hardcore_model_to_json(model: HardcoreModel) -> dict:
    return {
        "type": "hardcore",
        "n": model.n,
        "edges": [list(e) for e in sorted(model.edges)],
        "lambda": list(model.fugacity),
    }


def hardcore_update_to_json(update: HardcoreUpdate) -> dict:
    return {
        "edges": [list(e) for e in sorted(update.add_edges)],
        "remove": [list(e) for e in sorted(update.remove_edges)],
        "lambda": [[v, lam] for v, lam in sorted(update.fugacity.items())],
    }


# --- entry points ------------------------------------------------------------------


def model_from_json(obj: Any) -> LoadedModel:
    if not isinstance(obj, dict):
        raise ParseError("model: expected an object")
    kind = obj.get("type", "generic")
    if kind == "generic":
        return LoadedModel("generic", parse_generic_model(obj))
    if kind in ("ising", "potts"):
        return LoadedModel(kind, parse_spin_model(obj))
    if kind == "hardcore":
        return LoadedModel(kind, parse_hardcore_model(obj))
    raise ParseError(f"unknown model type {kind!r}")


def updates_from_json(obj: Any, loaded: LoadedModel) -> list:
    items = _list(obj, "updates")
    out = []
    for i, u in enumerate(items):
        where = f"updates[{i}]"
        if loaded.kind == "generic":
            out.append(parse_generic_update(u, where))
        elif loaded.kind == "hardcore":
            out.append(parse_hardcore_update(u, loaded.model.n, where))
        else:
            out.append(parse_spin_update(u, loaded.model.n, where))
    return out


def model_to_json(loaded: LoadedModel) -> dict:
    if loaded.kind == "generic":
        return generic_model_to_json(loaded.model)
    if loaded.kind == "hardcore":
        return hardcore_model_to_json(loaded.model)
    return spin_model_to_json(loaded.model)


def update_to_json(kind: str, update) -> dict:
    if kind == "generic":
        return generic_update_to_json(update)
    if kind == "hardcore":
        return hardcore_update_to_json(update)
    return spin_update_to_json(update)


def _read_json(path: Union[str, Path]) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_model(path: Union[str, Path]) -> LoadedModel:
    return model_from_json(_read_json(path))


def load_updates(path: Union[str, Path], loaded: LoadedModel) -> list:
    return updates_from_json(_read_json(path), loaded)
