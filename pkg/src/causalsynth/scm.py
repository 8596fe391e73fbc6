"""Discrete structural causal models.

A model is a list of variables, each carrying a categorical
conditional probability table over its parents.  Mechanisms are the
inverse-CDF form of those tables over a single uniform noise value
per variable: state intervals are right-open and follow declared
state order, so replaying a stored noise vector reproduces the same
values exactly.  That replay property is what makes interventions and
counterfactuals well-defined here.

State order is part of the model identity: reordering states changes
which counterfactual a given noise value maps to, even though the
observational law is unchanged.
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from . import _kernels
from .errors import (
    CycleError,
    IncompleteNoiseError,
    InvalidModelError,
    MissingParentStateError,
    NoiseOutOfRangeError,
    UnknownStateError,
    UnknownVariableError,
)
from .graph import Dag, topological_sort
from .rng import RngStream

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Variable:
    """One endogenous variable: states, parents and a CPT.

    ``cpt`` holds one probability row per parent state combination,
    row-major over the declared parent order and declared state
    orders; a parentless variable has exactly one row.
    """

    name: str
    states: Tuple[str, ...]
    parents: Tuple[str, ...] = ()
    cpt: Tuple[Tuple[float, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(
            self, "cpt", tuple(tuple(float(p) for p in row) for row in self.cpt)
        )


@dataclass(frozen=True)
class Scm:
    """Immutable model: a tuple of variables in declaration order."""

    variables: Tuple[Variable, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def dag(self) -> Dag:
        """The graph induced by the parent lists."""
        edges = set()
        for var in self.variables:
            for parent in var.parents:
                edges.add((parent, var.name))
        return Dag(self.names, frozenset(edges))

    def variable(self, name: str) -> Variable:
        for var in self.variables:
            if var.name == name:
                return var
        raise UnknownVariableError(f"unknown variable {name!r}")


@dataclass(frozen=True)
class Skeleton:
    """A sampled record: values plus the noise that produced them."""

    v: Dict[str, str]
    u: Dict[str, float]


@dataclass(frozen=True)
class Violation:
    """One validation finding: the broken rule, where, and why."""

    rule: str
    variable: Optional[str]
    message: str

    def __str__(self):
        where = f" [{self.variable}]" if self.variable else ""
        return f"{self.rule}{where}: {self.message}"


def validate(scm: Scm) -> List[Violation]:
    """Check every model invariant; an empty list means valid.

    Findings are returned as data rather than raised, so callers can
    lint a model file and report everything at once.

    Examples
    --------
    >>> v = Variable("A", ("yes", "no"), (), ((0.5, 0.5),))
    >>> validate(Scm((v,)))
    []
    """
    out = []
    names = [v.name for v in scm.variables]
    seen = set()
    for name in names:
        if not isinstance(name, str) or not name:
            out.append(Violation("name", name, "variable names must be nonempty strings"))
        elif name in seen:
            out.append(Violation("name", name, "duplicate variable name"))
        seen.add(name)
    declared = set(names)

    resolvable = True
    for var in scm.variables:
        if len(var.states) < 2:
            out.append(Violation("states", var.name, "needs at least 2 states"))
        if len(set(var.states)) != len(var.states) or any(not s for s in var.states):
            out.append(Violation("states", var.name, "state labels must be unique and nonempty"))
        if len(set(var.parents)) != len(var.parents):
            out.append(Violation("parents", var.name, "duplicate parent"))
            resolvable = False
        for parent in var.parents:
            if parent == var.name:
                out.append(Violation("parents", var.name, "variable lists itself as a parent"))
                resolvable = False
            elif parent not in declared:
                out.append(Violation("parents", var.name, f"unknown parent {parent!r}"))
                resolvable = False

    if resolvable and len(declared) == len(names):
        try:
            topological_sort(scm.dag)
        except CycleError as exc:
            out.append(Violation("cycle", None, str(exc)))

    cards = {v.name: len(v.states) for v in scm.variables}
    for var in scm.variables:
        if any(p not in cards for p in var.parents):
            continue
        expected_rows = 1
        for parent in var.parents:
            expected_rows *= cards[parent]
        if len(var.cpt) != expected_rows:
            out.append(Violation(
                "row-count", var.name,
                f"expected {expected_rows} rows, found {len(var.cpt)}"))
            continue
        for r, row in enumerate(var.cpt):
            if len(row) != len(var.states):
                out.append(Violation(
                    "row-length", var.name,
                    f"row {r} has {len(row)} entries, expected {len(var.states)}"))
                continue
            if any(p < 0.0 or p > 1.0 for p in row):
                out.append(Violation("range", var.name, f"row {r} has entries outside [0, 1]"))
            if abs(sum(row) - 1.0) > ROW_SUM_TOL:
                out.append(Violation(
                    "normalization", var.name,
                    f"row {r} sums to {sum(row)!r}, expected 1"))
    return out


@lru_cache(maxsize=128)
def _validated(scm: Scm) -> Tuple[Violation, ...]:
    return tuple(validate(scm))


def ensure_valid(scm: Scm):
    """Raise :class:`InvalidModelError` if the model fails validation."""
    violations = _validated(scm)
    if violations:
        raise InvalidModelError(violations)


@dataclass(frozen=True)
class CompiledModel:
    """Array form of a model, shared by both sampling backends.

    ``cum`` rows are cumulative CPT rows with the last entry forced to
    exactly 1.0, which removes accumulated rounding at the top end and
    keeps state indices well-defined for any u < 1.  The ``*_flat``
    arrays are the same content flattened for the compiled kernel.
    """

    names: Tuple[str, ...]
    states: Tuple[Tuple[str, ...], ...]
    cards: np.ndarray
    order: np.ndarray
    parent_idx: Tuple[np.ndarray, ...]
    strides: Tuple[np.ndarray, ...]
    cpt: Tuple[np.ndarray, ...]
    cum: Tuple[np.ndarray, ...]
    par_flat: np.ndarray = field(repr=False)
    par_off: np.ndarray = field(repr=False)
    stride_flat: np.ndarray = field(repr=False)
    cum_flat: np.ndarray = field(repr=False)
    cum_off: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariableError(f"unknown variable {name!r}") from None


@lru_cache(maxsize=64)
def compile_model(scm: Scm) -> CompiledModel:
    """Validate a model and lower it to arrays for the kernels."""
    ensure_valid(scm)
    names = scm.names
    index = {name: i for i, name in enumerate(names)}
    states = tuple(v.states for v in scm.variables)
    cards = np.array([len(v.states) for v in scm.variables], dtype=np.int32)
    order = np.array([index[n] for n in topological_sort(scm.dag)], dtype=np.int32)

    parent_idx, strides, cpts, cums = [], [], [], []
    for var in scm.variables:
        pidx = np.array([index[p] for p in var.parents], dtype=np.int32)
        stride = np.ones(len(var.parents), dtype=np.int64)
        for t in range(len(var.parents) - 2, -1, -1):
            stride[t] = stride[t + 1] * cards[pidx[t + 1]]
        table = np.array(var.cpt, dtype=np.float64).reshape(len(var.cpt), len(var.states))
        cum = np.cumsum(table, axis=1)
        cum[:, -1] = 1.0
        parent_idx.append(pidx)
        strides.append(stride)
        cpts.append(table)
        cums.append(cum)

    par_off = np.zeros(len(names) + 1, dtype=np.int64)
    for i, pidx in enumerate(parent_idx):
        par_off[i + 1] = par_off[i] + len(pidx)
    par_flat = (np.concatenate(parent_idx) if par_off[-1] else np.zeros(0, dtype=np.int32)).astype(np.int32)
    stride_flat = (np.concatenate(strides) if par_off[-1] else np.zeros(0, dtype=np.int64)).astype(np.int64)
    cum_off = np.zeros(len(names), dtype=np.int64)
    total = 0
    for i, cum in enumerate(cums):
        cum_off[i] = total
        total += cum.size
    cum_flat = np.concatenate([c.ravel() for c in cums])

    return CompiledModel(
        names=names, states=states, cards=cards, order=order,
        parent_idx=tuple(parent_idx), strides=tuple(strides),
        cpt=tuple(cpts), cum=tuple(cums),
        par_flat=par_flat, par_off=par_off, stride_flat=stride_flat,
        cum_flat=cum_flat, cum_off=cum_off,
    )


def mechanism(scm: Scm, var, parent_states: Mapping[str, str], u: float) -> str:
    """Evaluate one structural equation.

    Returns the state whose right-open cumulative interval (declared
    state order) contains ``u``.  ``var`` may be a variable name or a
    :class:`Variable` belonging to ``scm``; the model is needed to
    resolve parent state indices.

    Examples
    --------
    >>> a = Variable("A", ("x", "y"), (), ((0.3, 0.7),))
    >>> m = Scm((a,))
    >>> mechanism(m, "A", {}, 0.1), mechanism(m, "A", {}, 0.3)
    ('x', 'y')
    """
    if isinstance(var, Variable):
        name = var.name
    else:
        name = var
    variable = scm.variable(name)
    if not 0.0 <= u < 1.0:
        raise NoiseOutOfRangeError(f"u={u!r} outside [0, 1)")

    row_index = 0
    stride = 1
    for parent in reversed(variable.parents):
        if parent not in parent_states:
            raise MissingParentStateError(f"no state given for parent {parent!r}")
        pstates = scm.variable(parent).states
        value = parent_states[parent]
        if value not in pstates:
            raise UnknownStateError(f"{value!r} is not a state of {parent!r}")
        row_index += pstates.index(value) * stride
        stride *= len(pstates)

    row = variable.cpt[row_index]
    cum = list(itertools.accumulate(row))
    cum[-1] = 1.0
    return variable.states[bisect_right(cum, u)]


def sample_skeleton(scm: Scm, stream: RngStream) -> Skeleton:
    """Draw one skeleton: fresh noise per variable, values by replay.

    The i-th draw of ``stream`` is the noise of the i-th declared
    variable, which keeps scalar sampling bit-identical to row i of
    the batch samplers.
    """
    ensure_valid(scm)
    u = {var.name: stream.uniform() for var in scm.variables}
    return replay(scm, u)


def replay(scm: Scm, u: Mapping[str, float]) -> Skeleton:
    """Evaluate all mechanisms under a complete noise vector."""
    ensure_valid(scm)
    for var in scm.variables:
        if var.name not in u:
            raise IncompleteNoiseError(f"no noise value for {var.name!r}")
    v: Dict[str, str] = {}
    for name in topological_sort(scm.dag):
        var = scm.variable(name)
        parent_states = {p: v[p] for p in var.parents}
        v[name] = mechanism(scm, var, parent_states, u[name])
    ordered = {var.name: v[var.name] for var in scm.variables}
    return Skeleton(ordered, {var.name: float(u[var.name]) for var in scm.variables})


def sample_codes(scm: Scm, m: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Batch sample: (state-index matrix, noise matrix), both (m, n).

    This is the array fast path behind :func:`sample_dataset`; columns
    follow declaration order.
    """
    model = compile_model(scm)
    u = _kernels.noise_block(seed, 0, m, model.n)
    codes = _kernels.ancestral_codes(
        model.order, model.par_flat, model.par_off, model.stride_flat,
        model.cum_flat, model.cum_off, model.cards, u)
    return codes, u


def replay_codes(scm: Scm, u: np.ndarray) -> np.ndarray:
    """Evaluate all mechanisms over an explicit noise matrix (m, n)."""
    model = compile_model(scm)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != model.n:
        raise IncompleteNoiseError(
            f"noise matrix must have shape (m, {model.n}), got {u.shape}")
    if u.size and (u.min() < 0.0 or u.max() >= 1.0):
        raise NoiseOutOfRangeError("noise entries must lie in [0, 1)")
    return _kernels.ancestral_codes(
        model.order, model.par_flat, model.par_off, model.stride_flat,
        model.cum_flat, model.cum_off, model.cards, u)


def skeletons_from_codes(scm: Scm, codes: np.ndarray, u: np.ndarray) -> List[Skeleton]:
    """Materialize skeleton values from coded sample arrays."""
    model = compile_model(scm)
    out = []
    names = model.names
    states = model.states
    for j in range(codes.shape[0]):
        row_v = {names[i]: states[i][codes[j, i]] for i in range(model.n)}
        row_u = {names[i]: float(u[j, i]) for i in range(model.n)}
        out.append(Skeleton(row_v, row_u))
    return out


def sample_dataset(scm: Scm, m: int, seed: int) -> List[Skeleton]:
    """Sample ``m`` skeletons deterministically from ``seed``.

    Skeleton j depends only on (seed, j), never on execution order,
    so datasets are reproducible and independent of batching.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    codes, u = sample_codes(scm, m, seed)
    return skeletons_from_codes(scm, codes, u)


def encode_skeletons(scm: Scm, skeletons) -> np.ndarray:
    """State-index matrix for a list of skeletons (declaration order)."""
    model = compile_model(scm)
    lookup = [
        {state: k for k, state in enumerate(states)} for states in model.states
    ]
    codes = np.empty((len(skeletons), model.n), dtype=np.int64)
    for j, skel in enumerate(skeletons):
        for i, name in enumerate(model.names):
            try:
                codes[j, i] = lookup[i][skel.v[name]]
            except KeyError:
                missing = skel.v.get(name, "<absent>")
                raise UnknownStateError(
                    f"record {j}: {missing!r} is not a state of {name!r}") from None
    return codes


def intervene(scm: Scm, assignments: Mapping[str, str]) -> Scm:
    """Model with each target's equation replaced by a constant.

    Targets lose their parents and get a deterministic one-row CPT
    selecting the assigned state; declaration and state order are
    preserved.  An empty assignment map returns the model unchanged.
    """
    if not assignments:
        return scm
    for name, state in assignments.items():
        var = scm.variable(name)
        if state not in var.states:
            raise UnknownStateError(f"{state!r} is not a state of {name!r}")
    new_vars = []
    for var in scm.variables:
        if var.name in assignments:
            row = tuple(
                1.0 if s == assignments[var.name] else 0.0 for s in var.states
            )
            new_vars.append(Variable(var.name, var.states, (), (row,)))
        else:
            new_vars.append(var)
    return Scm(tuple(new_vars))


def counterfactual(scm: Scm, factual: Skeleton, assignments: Mapping[str, str]) -> Skeleton:
    """What the factual record would have been under an intervention.

    Three steps: take the stored noise as-is, mutilate the model per
    ``assignments``, replay.  The result carries the original noise,
    including entries for intervened variables (carried through
    unused), so it can itself be replayed or intervened on again.

    Examples
    --------
    >>> a = Variable("A", ("x", "y"), (), ((0.5, 0.5),))
    >>> b = Variable("B", ("x", "y"), ("A",), ((1.0, 0.0), (0.0, 1.0)))
    >>> m = Scm((a, b))
    >>> s = replay(m, {"A": 0.7, "B": 0.2})
    >>> counterfactual(m, s, {"A": "x"}).v
    {'A': 'x', 'B': 'x'}
    """
    for var in scm.variables:
        if var.name not in factual.u:
            raise IncompleteNoiseError(f"factual skeleton lacks noise for {var.name!r}")
    mutated = intervene(scm, assignments)
    result = replay(mutated, factual.u)
    return Skeleton(result.v, {var.name: float(factual.u[var.name]) for var in scm.variables})
