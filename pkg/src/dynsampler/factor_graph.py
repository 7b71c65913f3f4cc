"""Discrete graphical models: factors, Gibbs weights, incidence and updates.

Conventions used throughout the package:

* Variables are dense ids ``0..n-1``; variable ``v`` takes values in ``range(q_v)``.
* A constraint table is a flat row-major vector over its scope, the first
  scope variable being the most significant digit.
* Constraint ids are stable across updates. A constraint is identified for
  update purposes by its scope taken as a set.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-9

Configuration = tuple[int, ...]


class ModelError(ValueError):
    """Base class for malformed models and updates."""


class ZeroFactor(ModelError):
    """A weight vector sums to zero or a table is identically zero."""


class ScopeArity(ModelError):
    """A constraint scope has fewer than two distinct variables."""


class InvalidUpdate(ModelError):
    """An update references unknown variables or repeats a target."""


class DuplicateScope(ModelError):
    """Two active constraints share the same scope (as a set)."""


@dataclass(frozen=True)
class VariableFactor:
    q: int
    weights: tuple[float, ...]
    _cumulative: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if self.q < 1 or len(weights) != self.q:
            raise ModelError(f"weight vector of length {len(weights)} for q={self.q}")
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise ModelError("variable weights must be finite and non-negative")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cumulative", tuple(itertools.accumulate(weights)))

    def sample(self, rng) -> int:
        """Draw a value proportionally to the weights."""
        cum = self._cumulative
        i = bisect.bisect_right(cum, rng.random() * cum[-1])
        # guard the u*total == total rounding edge
        return min(i, self.q - 1)


@dataclass(frozen=True)
class ConstraintFactor:
    scope: tuple[int, ...]
    table: tuple[float, ...]
    shape: tuple[int, ...]
    _strides: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _slice_min: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        if len(set(scope)) != len(scope) or len(scope) < 2:
            raise ScopeArity(f"constraint scope {scope} needs >= 2 distinct variables")
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != len(scope):
            raise ModelError("shape and scope lengths differ")
        table = tuple(float(x) for x in self.table)
        if len(table) != math.prod(shape):
            raise ModelError(
                f"table for scope {scope} has {len(table)} entries, expected {math.prod(shape)}"
            )
        if any(x < 0 or not math.isfinite(x) for x in table):
            raise ModelError("constraint tables must be finite and non-negative")
        strides = []
        acc = 1
        for s in reversed(shape):
            strides.append(acc)
            acc *= s
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "_strides", tuple(reversed(strides)))

    @property
    def lower_bound(self) -> float:
        return min(self.table)

    @property
    def is_soft(self) -> bool:
        return self.lower_bound > 0

    @property
    def is_trivial(self) -> bool:
        """True for an all-ones table (a deleted constraint)."""
        return all(x == 1.0 for x in self.table)

    def index(self, config: Sequence[int]) -> int:
        """Flat table index of ``config`` restricted to the scope."""
        idx = 0
        for v, s in zip(self.scope, self._strides):
            idx += config[v] * s
        return idx

    def value(self, config: Sequence[int]) -> float:
        return self.table[self.index(config)]

    def slice_minima(self, fixed_mask: int) -> list[float]:
        """For every table index, the minimum over entries agreeing with it on
        the scope positions flagged in ``fixed_mask`` (bit i = position i)."""
        cached = self._slice_min.get(fixed_mask)
        if cached is None:
            arr = np.asarray(self.table).reshape(self.shape)
            free = tuple(i for i in range(len(self.scope)) if not fixed_mask >> i & 1)
            if free:
                arr = np.broadcast_to(arr.min(axis=free, keepdims=True), self.shape)
            cached = arr.ravel().tolist()
            self._slice_min[fixed_mask] = cached
        return cached


@dataclass(frozen=True)
class UpdateRequest:
    """An update ``(D, Phi_D)``.

    ``constraint_updates`` whose scope matches an existing constraint (as a
    set) modify it; fresh scopes add a constraint. An all-ones table deletes.
    """

    variable_updates: tuple[tuple[int, tuple[float, ...]], ...] = ()
    constraint_updates: tuple[tuple[tuple[int, ...], tuple[float, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "variable_updates",
            tuple((int(v), tuple(float(x) for x in w)) for v, w in self.variable_updates),
        )
        object.__setattr__(
            self,
            "constraint_updates",
            tuple(
                (tuple(int(v) for v in s), tuple(float(x) for x in t))
                for s, t in self.constraint_updates
            ),
        )

    @property
    def size(self) -> int:
        """|D|, the number of updated variables and constraints."""
        return len(self.variable_updates) + len(self.constraint_updates)

    def is_empty(self) -> bool:
        return self.size == 0


@dataclass(frozen=True)
class GraphicalModel:
    variables: tuple[VariableFactor, ...]
    constraints: Mapping[int, ConstraintFactor]
    incidence: tuple[tuple[int, ...], ...] = field(default=None)
    _by_scope: Mapping[frozenset, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        constraints = dict(sorted(self.constraints.items()))
        n = len(variables)
        by_scope = {}
        for cid, c in constraints.items():
            if cid < 0:
                raise ModelError("constraint ids must be non-negative")
            for v in c.scope:
                if not 0 <= v < n:
                    raise ModelError(f"constraint {cid} references unknown variable {v}")
                if c.shape[c.scope.index(v)] != variables[v].q:
                    raise ModelError(f"constraint {cid} shape disagrees with q of variable {v}")
            key = frozenset(c.scope)
            if key in by_scope:
                raise DuplicateScope(f"constraints {by_scope[key]} and {cid} share scope {sorted(key)}")
            by_scope[key] = cid
        if self.incidence is None:
            inc = [[] for _ in range(n)]
            for cid, c in constraints.items():
                for v in c.scope:
                    inc[v].append(cid)
            incidence = tuple(tuple(x) for x in inc)
        else:
            incidence = tuple(tuple(x) for x in self.incidence)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "constraints", MappingProxyType(constraints))
        object.__setattr__(self, "incidence", incidence)
        object.__setattr__(self, "_by_scope", MappingProxyType(by_scope))

    @classmethod
    def from_factors(
        cls,
        variable_weights: Sequence[Sequence[float]],
        constraints: Iterable[tuple[Sequence[int], Sequence[float]]] = (),
    ) -> "GraphicalModel":
        """Build a model with constraint ids assigned in the order given."""
        variables = tuple(VariableFactor(len(w), tuple(w)) for w in variable_weights)
        cons = {}
        for cid, (scope, table) in enumerate(constraints):
            if not all(0 <= v < len(variables) for v in scope):
                raise ModelError(f"constraint scope {tuple(scope)} references unknown variables")
            shape = tuple(variables[v].q for v in scope)
            cons[cid] = ConstraintFactor(tuple(scope), tuple(table), shape)
        return cls(variables, cons)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(v.q for v in self.variables)

    @property
    def state_space_size(self) -> int:
        return math.prod(self.domain_sizes)

    def constraint_id(self, scope: Iterable[int]) -> int | None:
        return self._by_scope.get(frozenset(scope))

    def next_constraint_id(self) -> int:
        return max(self.constraints, default=-1) + 1

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for cid in self.incidence[v]:
            out.update(self.constraints[cid].scope)
        out.discard(v)
        return out

    def validate(self) -> None:
        """Check that the incidence lists agree with the constraint scopes."""
        expected = [set() for _ in range(self.n)]
        for cid, c in self.constraints.items():
            for v in c.scope:
                expected[v].add(cid)
        for v, inc in enumerate(self.incidence):
            if set(inc) != expected[v] or len(inc) != len(set(inc)):
                raise ModelError(f"incidence of variable {v} is inconsistent")

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return all(abs(sum(v.weights) - 1.0) <= tol for v in self.variables) and all(
            max(c.table) == 1.0 for c in self.constraints.values()
        )

    def check_config(self, config: Sequence[int]) -> None:
        if len(config) != self.n:
            raise ModelError(f"configuration has length {len(config)}, expected {self.n}")
        for v, (x, var) in enumerate(zip(config, self.variables)):
            if not 0 <= x < var.q:
                raise ModelError(f"value {x} out of range for variable {v} (q={var.q})")


def _normalize_weights(weights: tuple[float, ...]) -> tuple[float, ...]:
    total = sum(weights)
    if total <= 0:
        raise ZeroFactor("variable weight vector sums to zero")
    if abs(total - 1.0) <= NORMALIZATION_TOL:
        return weights
    return tuple(w / total for w in weights)


def _normalize_table(table: tuple[float, ...]) -> tuple[float, ...]:
    top = max(table)
    if top <= 0:
        raise ZeroFactor("constraint table is identically zero")
    if top == 1.0:
        return table
    return tuple(x / top for x in table)


def normalize(model: GraphicalModel) -> GraphicalModel:
    """Rescale every variable weight vector to a distribution and every
    table to maximum 1. The Gibbs distribution is unchanged. Idempotent."""
    variables = tuple(
        VariableFactor(v.q, _normalize_weights(v.weights)) for v in model.variables
    )
    constraints = {
        cid: ConstraintFactor(c.scope, _normalize_table(c.table), c.shape)
        for cid, c in model.constraints.items()
    }
    return GraphicalModel(variables, constraints, model.incidence)


def weight(model: GraphicalModel, config: Sequence[int]) -> float:
    """Unnormalized Gibbs weight of a full configuration."""
    w = 1.0
    for var, x in zip(model.variables, config):
        w *= var.weights[x]
    for c in model.constraints.values():
        w *= c.value(config)
    return w


def vbl(model: GraphicalModel, update: UpdateRequest) -> frozenset[int]:
    """Variables touched by an update: updated variables plus all scope members."""
    out = {v for v, _ in update.variable_updates}
    for scope, _ in update.constraint_updates:
        out.update(scope)
    return frozenset(out)


def incident_constraints(model: GraphicalModel, S: Iterable[int]) -> set[int]:
    out = set()
    inc = model.incidence
    for v in S:
        out.update(inc[v])
    return out


def constraint_partition(
    model: GraphicalModel, S: Iterable[int]
) -> tuple[frozenset[int], frozenset[int], frozenset[int]]:
    """Split the constraints touching ``S`` into (internal, boundary, incident)."""
    S = set(S)
    incident = incident_constraints(model, S)
    internal = {cid for cid in incident if S.issuperset(model.constraints[cid].scope)}
    return frozenset(internal), frozenset(incident - internal), frozenset(incident)


def dependency_degree(model: GraphicalModel) -> int:
    """Maximum degree of the dependency graph (constraints adjacent iff they share a variable)."""
    d = 0
    for cid, c in model.constraints.items():
        nbrs = incident_constraints(model, c.scope)
        d = max(d, len(nbrs) - 1)
    return d


def validate_update(model: GraphicalModel, update: UpdateRequest) -> None:
    seen_vars = set()
    for v, w in update.variable_updates:
        if not 0 <= v < model.n:
            raise InvalidUpdate(f"unknown variable {v}")
        if v in seen_vars:
            raise InvalidUpdate(f"variable {v} updated twice")
        seen_vars.add(v)
        if len(w) != model.variables[v].q:
            raise InvalidUpdate(f"variable {v} update has {len(w)} weights, q={model.variables[v].q}")
    seen_scopes = set()
    for scope, table in update.constraint_updates:
        if len(set(scope)) != len(scope) or len(scope) < 2:
            raise ScopeArity(f"constraint scope {scope} needs >= 2 distinct variables")
        for v in scope:
            if not 0 <= v < model.n:
                raise InvalidUpdate(f"unknown variable {v} in scope {scope}")
        key = frozenset(scope)
        if key in seen_scopes:
            raise InvalidUpdate(f"scope {sorted(key)} updated twice")
        seen_scopes.add(key)
        expected = math.prod(model.variables[v].q for v in scope)
        if len(table) != expected:
            raise InvalidUpdate(f"table for scope {scope} has {len(table)} entries, expected {expected}")


def apply_update(model: GraphicalModel, update: UpdateRequest) -> GraphicalModel:
    """Return the updated model. Untouched factor objects are shared; new
    factors are normalized."""
    validate_update(model, update)
    if update.is_empty():
        return model
    variables = list(model.variables)
    for v, w in update.variable_updates:
        variables[v] = VariableFactor(len(w), _normalize_weights(tuple(w)))
    constraints = dict(model.constraints)
    incidence = [list(x) for x in model.incidence]
    next_id = model.next_constraint_id()
    for scope, table in update.constraint_updates:
        shape = tuple(variables[v].q for v in scope)
        factor = ConstraintFactor(scope, _normalize_table(tuple(table)), shape)
        cid = model.constraint_id(scope)
        if cid is None:
            cid = next_id
            next_id += 1
            for v in scope:
                incidence[v].append(cid)
        constraints[cid] = factor
    return GraphicalModel(tuple(variables), constraints, tuple(tuple(x) for x in incidence))


def compact(model: GraphicalModel) -> GraphicalModel:
    """Drop deleted (all-ones) constraints. Remaining ids are kept."""
    constraints = {cid: c for cid, c in model.constraints.items() if not c.is_trivial}
    if len(constraints) == len(model.constraints):
        return model
    return GraphicalModel(model.variables, constraints)


def inverse_update(model: GraphicalModel, update: UpdateRequest) -> UpdateRequest:
    """The update that undoes ``update`` when applied to ``apply_update(model, update)``.

    Added constraints are reverted to all-ones tables.
    """
    var_updates = tuple((v, model.variables[v].weights) for v, _ in update.variable_updates)
    con_updates = []
    for scope, table in update.constraint_updates:
        cid = model.constraint_id(scope)
        if cid is None:
            con_updates.append((scope, (1.0,) * len(table)))
        else:
            old = model.constraints[cid]
            con_updates.append((old.scope, old.table))
    return UpdateRequest(var_updates, tuple(con_updates))


def all_configurations(domain_sizes: Sequence[int]) -> Iterable[Configuration]:
    """All configurations in state-index order (first variable most significant)."""
    return itertools.product(*(range(q) for q in domain_sizes))
