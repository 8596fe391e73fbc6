"""Evaluation mathematics.

Everything here is a pure function over data and model values:
stratified chi-square conditional-independence tests and the
structural false-positive rate built on them, two-sample KS,
divergences (total variation, chi-square), entropy bounds for noisy
extraction, typicality stratification, and exact joint distributions
for enumerable networks.

Conditional independence is tested with stratified Pearson chi-square
statistics rather than a kernel test: every variable here is discrete
with known state spaces, where the chi-square family is the standard
choice and needs no tuning.  Reports produced downstream carry a note
to that effect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import ks_2samp as _ks_2samp

from .errors import EmptySampleError, StateSpaceTooLargeError, StatsError
from .graph import Dag, enumerate_d_separations
from .rng import draw_stream
from .scm import Scm, compile_model

EXPECTED_CELL_MIN = 5.0
JOINT_STATE_CAP = 2 ** 20


# --------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class DiscreteDist:
    """A finite distribution: ordered support keys + parallel probs."""

    support: Tuple
    probs: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.support) != len(self.probs):
            raise StatsError("support and probs must have equal length")
        if any(p < -1e-12 for p in self.probs):
            raise StatsError("probabilities must be nonnegative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise StatsError(f"probabilities sum to {total!r}, expected 1")

    def as_dict(self) -> Dict:
        return dict(zip(self.support, self.probs))


def _aligned(p: DiscreteDist, q: DiscreteDist):
    """Parallel prob arrays over the union support (zero-filled)."""
    if p.support == q.support:
        return np.array(p.probs), np.array(q.probs)
    pd, qd = p.as_dict(), q.as_dict()
    union = list(p.support) + [k for k in q.support if k not in pd]
    return (np.array([pd.get(k, 0.0) for k in union]),
            np.array([qd.get(k, 0.0) for k in union]))


def tvd(p: DiscreteDist, q: DiscreteDist) -> float:
    """Total variation distance, ½ Σ|p−q|.

    Examples
    --------
    >>> a = DiscreteDist(("x", "y"), (0.5, 0.5))
    >>> b = DiscreteDist(("x", "y"), (0.8, 0.2))
    >>> round(tvd(a, b), 12)
    0.3
    """
    pa, qa = _aligned(p, q)
    return 0.5 * float(np.abs(pa - qa).sum())


def chi2_divergence(p: DiscreteDist, q: DiscreteDist) -> float:
    """Chi-square divergence Σ (p−q)²/q.

    Returns ``inf`` when p puts mass where q has none (support
    violation); check with ``math.isinf``.
    """
    pa, qa = _aligned(p, q)
    bad = (qa <= 0.0) & (pa > 0.0)
    if bad.any():
        return float("inf")
    keep = qa > 0.0
    diff = pa[keep] - qa[keep]
    return float(np.sum(diff * diff / qa[keep]))


def exact_joint(scm: Scm, cap: int = JOINT_STATE_CAP) -> DiscreteDist:
    """Exact joint law by full enumeration.

    Support keys are tuples of state labels in declaration order,
    enumerated with the first variable slowest (odometer order).

    Raises
    ------
    StateSpaceTooLargeError
        If the number of joint states exceeds ``cap``.
    """
    model = compile_model(scm)
    total = 1
    for card in model.cards:
        total *= int(card)
        if total > cap:
            raise StateSpaceTooLargeError(
                f"joint has more than {cap} states")

    # idx[:, i] = state index of variable i in each enumerated assignment
    suffix = np.ones(model.n, dtype=np.int64)
    for i in range(model.n - 2, -1, -1):
        suffix[i] = suffix[i + 1] * int(model.cards[i + 1])
    flat = np.arange(total, dtype=np.int64)
    idx = (flat[:, None] // suffix[None, :]) % model.cards[None, :].astype(np.int64)

    probs = np.ones(total, dtype=np.float64)
    for i in range(model.n):
        pidx = model.parent_idx[i]
        if len(pidx):
            rows = (idx[:, pidx] * model.strides[i]).sum(axis=1)
        else:
            rows = np.zeros(total, dtype=np.int64)
        probs *= model.cpt[i][rows, idx[:, i]]

    support = []
    for j in range(total):
        support.append(tuple(model.states[i][idx[j, i]] for i in range(model.n)))
    return DiscreteDist(tuple(support), tuple(probs))


def joint_index(scm: Scm, codes: np.ndarray) -> np.ndarray:
    """Flat joint-state index per row, matching exact_joint's order."""
    model = compile_model(scm)
    suffix = np.ones(model.n, dtype=np.int64)
    for i in range(model.n - 2, -1, -1):
        suffix[i] = suffix[i + 1] * int(model.cards[i + 1])
    return (codes * suffix[None, :]).sum(axis=1)


def empirical_joint(scm: Scm, codes: np.ndarray, cap: int = JOINT_STATE_CAP) -> DiscreteDist:
    """Empirical joint over the full enumerated support of the model."""
    model = compile_model(scm)
    total = 1
    for card in model.cards:
        total *= int(card)
        if total > cap:
            raise StateSpaceTooLargeError(f"joint has more than {cap} states")
    if codes.shape[0] == 0:
        raise EmptySampleError("no records")
    counts = np.bincount(joint_index(scm, codes), minlength=total)
    probs = counts / codes.shape[0]
    return DiscreteDist(exact_joint(scm, cap).support, tuple(probs))


def exact_marginal(scm: Scm, name: str, cap: int = JOINT_STATE_CAP) -> DiscreteDist:
    """Exact marginal law of one variable, by joint enumeration."""
    model = compile_model(scm)
    i = model.index_of(name)
    joint = exact_joint(scm, cap)
    acc = {state: 0.0 for state in model.states[i]}
    for key, prob in zip(joint.support, joint.probs):
        acc[key[i]] += prob
    return DiscreteDist(tuple(model.states[i]), tuple(acc.values()))


def accepted_dist(p_skel: DiscreteDist, phi: Sequence[float]) -> DiscreteDist:
    """The accepted-record law: p(v)·φ(v) renormalized."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (len(p_skel.support),):
        raise StatsError("phi must align with the skeleton support")
    if (phi < 0).any() or (phi > 1 + 1e-12).any():
        raise StatsError("phi entries must lie in [0, 1]")
    weighted = np.array(p_skel.probs) * phi
    z = weighted.sum()
    if z <= 0.0:
        raise StatsError("acceptance probability is zero everywhere")
    return DiscreteDist(p_skel.support, tuple(weighted / z))


def draw_from(dist: DiscreteDist, n: int, stream) -> np.ndarray:
    """Draw ``n`` support indices by inverse CDF over the stream."""
    cum = np.cumsum(np.array(dist.probs))
    cum[-1] = 1.0
    return np.searchsorted(cum, stream.uniforms(n), side="right")


# --------------------------------------------------------------------------
# conditional independence


@dataclass(frozen=True)
class CITestResult:
    """Outcome of one stratified chi-square independence test."""

    statistic: float
    dof: int
    p_value: float
    rejected: bool
    skipped: bool
    reason: Optional[str] = None


def _skipped(reason: str) -> CITestResult:
    return CITestResult(0.0, 0, 1.0, False, True, reason)


def _factorize(values) -> Tuple[np.ndarray, int]:
    """Codes plus cardinality for one column, categories sorted."""
    arr = np.asarray(values)
    cats, codes = np.unique(arr, return_inverse=True)
    return codes.astype(np.int64), len(cats)


def _ci_core(xc, nx, yc, ny, zcode, alpha) -> CITestResult:
    """Sum per-stratum Pearson statistics; drop thin strata."""
    if nx < 2 or ny < 2:
        return _skipped("insufficient-data")
    statistic = 0.0
    dof = 0
    for stratum in np.unique(zcode):
        mask = zcode == stratum
        table = np.bincount(
            xc[mask] * ny + yc[mask], minlength=nx * ny
        ).reshape(nx, ny).astype(np.float64)
        n_s = table.sum()
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n_s
        if expected.min() < EXPECTED_CELL_MIN:
            continue
        statistic += float(((table - expected) ** 2 / expected).sum())
        dof += (nx - 1) * (ny - 1)
    if dof == 0:
        return _skipped("all-strata-dropped")
    p_value = float(_chi2.sf(statistic, dof))
    return CITestResult(statistic, dof, p_value, p_value < alpha, False)


def _value_map(record) -> Mapping:
    return record.v if hasattr(record, "v") else record


def ci_test_chi2(data, x, y, z=(), alpha: float = 0.05) -> CITestResult:
    """Test x ⟂ y | z on records of variable assignments.

    Data is partitioned by z-configuration; per-stratum Pearson
    chi-square statistics and degrees of freedom are summed, skipping
    strata with any expected cell below 5.  If every stratum is
    dropped, or x or y shows fewer than 2 distinct values overall,
    the result is skipped instead of rejected.

    Examples
    --------
    >>> recs = [{"x": 0, "y": 0}] * 10 + [{"x": 0, "y": 1}] * 20 \
             + [{"x": 1, "y": 0}] * 20 + [{"x": 1, "y": 1}] * 10
    >>> r = ci_test_chi2(recs, "x", "y")
    >>> round(r.statistic, 3), r.dof, r.rejected
    (6.667, 1, True)
    """
    if not 0.0 < alpha < 1.0:
        raise StatsError("alpha must lie in (0, 1)")
    if not data:
        return _skipped("insufficient-data")
    z = tuple(z)
    xc, nx = _factorize([_value_map(r)[x] for r in data])
    yc, ny = _factorize([_value_map(r)[y] for r in data])
    zcode = np.zeros(len(data), dtype=np.int64)
    for name in z:
        col, card = _factorize([_value_map(r)[name] for r in data])
        zcode = zcode * card + col
    return _ci_core(xc, nx, yc, ny, zcode, alpha)


@dataclass(frozen=True)
class FprReport:
    """Structural false-positive-rate summary over CI triples."""

    results: Tuple
    n_candidates: int
    n_tested: int
    n_skipped: int
    n_rejected: int

    @property
    def rate(self) -> Optional[float]:
        effective = self.n_tested - self.n_skipped
        if effective <= 0:
            return None
        return self.n_rejected / effective


def _coded_columns(data, names) -> Dict[str, Tuple[np.ndarray, int]]:
    columns = {}
    for name in names:
        columns[name] = _factorize([_value_map(r)[name] for r in data])
    return columns


def fpr(data, dag: Dag, alpha: float = 0.05, max_cond_size: int = 2,
        max_tests: Optional[int] = None, subsample_seed: int = 0) -> FprReport:
    """False-positive rate of CI tests over implied d-separations.

    Runs :func:`ci_test_chi2` for every d-separated triple of the
    graph (conditioning sets up to ``max_cond_size``); the rate is
    rejected / (tested − skipped).  When the triple list exceeds
    ``max_tests``, a seeded uniform subsample keeps runs reproducible.
    """
    triples = enumerate_d_separations(dag, max_cond_size)
    n_candidates = len(triples)
    if max_tests is not None and len(triples) > max_tests:
        keys = draw_stream(subsample_seed).uniforms(len(triples))
        chosen = np.sort(np.argsort(keys, kind="stable")[:max_tests])
        triples = [triples[i] for i in chosen]

    results = []
    n_skipped = n_rejected = 0
    if triples:
        columns = _coded_columns(data, dag.nodes) if data else None
        for x, y, zset in triples:
            z = tuple(n for n in dag.nodes if n in zset)
            if not data:
                res = _skipped("insufficient-data")
            else:
                xc, nx = columns[x]
                yc, ny = columns[y]
                zcode = np.zeros(len(data), dtype=np.int64)
                for name in z:
                    col, card = columns[name]
                    zcode = zcode * card + col
                res = _ci_core(xc, nx, yc, ny, zcode, alpha)
            results.append(((x, y, frozenset(z)), res))
            n_skipped += res.skipped
            n_rejected += res.rejected
    return FprReport(tuple(results), n_candidates, len(results), n_skipped, n_rejected)


def detection_rate(data, dag: Dag, alpha: float = 0.05) -> FprReport:
    """Companion spot check: rejection rate over adjacent pairs.

    Every edge of the graph gives a d-connected, unconditioned pair;
    on faithful data these should be detected as dependent at a rate
    near 1, which complements the false-positive rate on d-separated
    triples.
    """
    pairs = sorted({tuple(sorted(e)) for e in dag.edges})
    results = []
    n_skipped = n_rejected = 0
    columns = _coded_columns(data, dag.nodes) if data else None
    for x, y in pairs:
        if not data:
            res = _skipped("insufficient-data")
        else:
            xc, nx = columns[x]
            yc, ny = columns[y]
            res = _ci_core(xc, nx, yc, ny, np.zeros(len(data), dtype=np.int64), alpha)
        results.append(((x, y, frozenset()), res))
        n_skipped += res.skipped
        n_rejected += res.rejected
    return FprReport(tuple(results), len(pairs), len(results), n_skipped, n_rejected)


# --------------------------------------------------------------------------
# two-sample and entropy


def ks_two_sample(a, b) -> Tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value.

    Ordinal state codes are compared in declared state order; callers
    encode labels before testing.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("both samples must be nonempty")
    res = _ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(min(1.0, max(0.0, res.pvalue)))


def binary_entropy(eps: float) -> float:
    """H_b(ε) in nats; 0 at both endpoints.

    Examples
    --------
    >>> binary_entropy(0.0)
    0.0
    >>> round(binary_entropy(0.5), 4)
    0.6931
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if eps in (0.0, 1.0):
        return 0.0
    return float(-eps * math.log(eps) - (1.0 - eps) * math.log(1.0 - eps))


def fano_bound(eps: float, cardinality: int) -> float:
    """Upper bound ε·ln(cardinality−1) + H_b(ε) in nats.

    Examples
    --------
    >>> fano_bound(0.0, 4)
    0.0
    >>> round(fano_bound(0.1, 4), 4)
    0.435
    """
    if cardinality < 2:
        raise ValueError("cardinality must be at least 2")
    return eps * math.log(cardinality - 1) + binary_entropy(eps)


def typicality_split(skeletons, scm: Scm, q: float = 0.06):
    """Split records into (typical, atypical) by log-likelihood.

    The atypical set is the bottom ``ceil(q*m)`` records by skeleton
    log-likelihood under the model, ties broken by record index.
    Likelihood is a streamed product of CPT entries, so arbitrarily
    large networks are fine.
    """
    if not 0.0 < q < 1.0:
        raise StatsError("q must lie in (0, 1)")
    skeletons = list(skeletons)
    if not skeletons:
        return [], []
    loglik = []
    for idx, skel in enumerate(skeletons):
        values = _value_map(skel)
        ll = 0.0
        for var in scm.variables:
            row_index = 0
            stride = 1
            for parent in reversed(var.parents):
                pstates = scm.variable(parent).states
                row_index += pstates.index(values[parent]) * stride
                stride *= len(pstates)
            p = var.cpt[row_index][var.states.index(values[var.name])]
            ll = ll + math.log(p) if p > 0.0 else float("-inf")
        loglik.append((ll, idx))
    loglik.sort()
    n_atypical = math.ceil(q * len(skeletons))
    atypical_idx = sorted(idx for _, idx in loglik[:n_atypical])
    atypical_set = set(atypical_idx)
    typical = [s for i, s in enumerate(skeletons) if i not in atypical_set]
    atypical = [skeletons[i] for i in atypical_idx]
    return typical, atypical


def coverage_failure_rate(records, coverage) -> float:
    """Fraction of skeletons left unrealized: |ℒ| / (accepted + |ℒ|)."""
    n_failed = len(coverage)
    total = len(records) + n_failed
    if total == 0:
        return 0.0
    return n_failed / total
