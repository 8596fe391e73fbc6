"""The generation loop: realize, verify, repair, log.

For each index j a skeleton is sampled once and never resampled; on
verification failure only the candidate text is discarded and the
prompt gains a feedback block.  After ``k_max`` inconsistent attempts
the skeleton goes to the coverage log with its full mismatch history.
Accepted records keep the skeleton (values and noise) alongside the
accepted document, so the dataset remains replayable.

Extraction lives here too: the exact extractor parses canonical
``name = STATE`` lines, and an ε-noisy variant corrupts recovered
values for information-theoretic experiments only.

Documents with extra assignment lines for unknown variables are not
failed for it: such lines land in ``unparsed_lines`` and are ignored
by verification, which checks the schema variables only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .channel import Mismatch, append_feedback, construct_prompt
from .errors import AuthError, EmptyLogError, RealizationError
from .rng import RngStream, channel_stream
from .scm import Scm, Skeleton, sample_dataset

K_MAX_DEFAULT = 10

OUTCOME_ACCEPTED = "accepted"
OUTCOME_REJECTED = "rejected"
OUTCOME_ERROR = "error"


@dataclass(frozen=True)
class ExtractionResult:
    """Values recovered from a document, plus lines nobody claimed."""

    v_hat: Dict[str, str]
    unparsed_lines: Tuple[str, ...]


@dataclass(frozen=True)
class SynthRecord:
    """One accepted synthesis: skeleton, document, and provenance."""

    skeleton: Skeleton
    document: str
    attempts_used: int
    realizer_id: str


@dataclass(frozen=True)
class AttemptFailure:
    """One failed attempt inside a coverage entry."""

    kind: str  # "mismatch" or "error"
    mismatches: Tuple[Mismatch, ...] = ()
    error: Optional[str] = None


@dataclass(frozen=True)
class CoverageEntry:
    """A skeleton that stayed unrealized after every attempt."""

    index: int
    skeleton: Skeleton
    attempts: Tuple[AttemptFailure, ...]


@dataclass(frozen=True)
class AttemptRecord:
    """Per-skeleton attempt outcomes for realizability estimation."""

    index: int
    outcomes: Tuple[str, ...]
    accepted_at: Optional[int]


def _schema_variables(schema):
    return schema.variables if isinstance(schema, Scm) else tuple(schema)


def extract_exact(document: str, schema) -> ExtractionResult:
    """Parse canonical assignment lines out of a document.

    A line binds when its left side matches a schema variable name
    case-insensitively; the right side is trimmed and kept verbatim
    (state labels compare case-sensitively downstream).  The last
    binding of a variable wins, so documents that restate assignments
    in a closing block are read by their final word.  Everything else
    goes to ``unparsed_lines``.
    """
    variables = _schema_variables(schema)
    by_lower = {var.name.lower(): var.name for var in variables}
    v_hat: Dict[str, str] = {}
    unparsed = []
    for raw in document.splitlines():
        line = raw.strip()
        if not line:
            continue
        name, eq, value = line.partition("=")
        key = name.strip().lower()
        if eq and key in by_lower:
            v_hat[by_lower[key]] = value.strip()
        else:
            unparsed.append(raw)
    return ExtractionResult(v_hat, tuple(unparsed))


def extract_noisy(document: str, schema, epsilon: float,
                  stream: RngStream) -> ExtractionResult:
    """Exact extraction, then ε-corruption of recovered values.

    Each recovered value is independently replaced, with probability
    ``epsilon``, by a uniformly random different state of its
    variable.  This models an imperfect extractor for entropy
    experiments; the acceptance pipeline never uses it.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    result = extract_exact(document, schema)
    if epsilon == 0.0:
        return result
    variables = _schema_variables(schema)
    states = {var.name: var.states for var in variables}
    corrupted = dict(result.v_hat)
    for name in corrupted:
        if stream.uniform() < epsilon:
            wrong = [s for s in states[name] if s != corrupted[name]]
            if wrong:
                corrupted[name] = wrong[int(stream.uniform() * len(wrong))]
    return ExtractionResult(corrupted, result.unparsed_lines)


def verify(document: str, skeleton: Skeleton, schema) -> Tuple[bool, List[Mismatch]]:
    """Check a document against its skeleton, variable by variable.

    Returns (consistent, mismatches); mismatches follow declaration
    order and a missing variable counts as a mismatch with extracted
    value ``None``.
    """
    variables = _schema_variables(schema)
    extracted = extract_exact(document, schema).v_hat
    mismatches = []
    for var in variables:
        expected = skeleton.v[var.name]
        got = extracted.get(var.name)
        if got != expected:
            mismatches.append(Mismatch(var.name, expected, got))
    return (not mismatches), mismatches


@dataclass(frozen=True)
class PipelineResult:
    """Everything a generation run produces, in index order."""

    records: Tuple[SynthRecord, ...]
    coverage: Tuple[CoverageEntry, ...]
    attempt_log: Tuple[AttemptRecord, ...]


def run_pipeline(scm: Scm, realizer, m: int, k_max: int = K_MAX_DEFAULT,
                 seed: int = 0) -> PipelineResult:
    """Generate ``m`` verified records through a realizer.

    Skeleton j comes from the (seed, j) stream and is kept through
    every repair attempt; its channel randomness comes from an
    independent (seed, j) stream, so the whole run is deterministic
    for a deterministic realizer and independent of execution order.

    A realization attempt can fail two ways: the document disagrees
    with the skeleton (verification failure — triggers feedback), or
    the realizer raises a transport error (no feedback; an error says
    nothing about the constraints).  Either way the attempt is spent.
    Credential rejection is the exception: it aborts the run, since
    no later request would fare better.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    skeletons = sample_dataset(scm, m, seed)
    records: List[SynthRecord] = []
    coverage: List[CoverageEntry] = []
    attempt_log: List[AttemptRecord] = []

    for j, skeleton in enumerate(skeletons):
        stream = channel_stream(seed, j)
        prompt = construct_prompt(skeleton, scm)
        outcomes: List[str] = []
        failures: List[AttemptFailure] = []
        accepted_at: Optional[int] = None
        for k in range(1, k_max + 1):
            try:
                candidate = realizer.realize(prompt, stream)
            except AuthError:
                raise
            except RealizationError as exc:
                outcomes.append(OUTCOME_ERROR)
                failures.append(AttemptFailure("error", (), str(exc)))
                continue
            consistent, mismatches = verify(candidate.text, skeleton, scm)
            if consistent:
                outcomes.append(OUTCOME_ACCEPTED)
                accepted_at = k
                records.append(SynthRecord(
                    skeleton, candidate.text, k, candidate.realizer_id))
                break
            outcomes.append(OUTCOME_REJECTED)
            failures.append(AttemptFailure("mismatch", tuple(mismatches)))
            prompt = append_feedback(prompt, mismatches)
        if accepted_at is None:
            coverage.append(CoverageEntry(j, skeleton, tuple(failures)))
        attempt_log.append(AttemptRecord(j, tuple(outcomes), accepted_at))

    return PipelineResult(tuple(records), tuple(coverage), tuple(attempt_log))


@dataclass(frozen=True)
class PhiEstimate:
    """Realizability curves: φ̂_k by attempt budget, pooled and split."""

    overall: Tuple[float, ...]
    per_stratum: Dict[str, Tuple[float, ...]]
    counts: Dict[str, int]

    @property
    def k_max(self) -> int:
        return len(self.overall)


def estimate_phi(attempt_log: Sequence[AttemptRecord],
                 strata: Optional[Sequence] = None) -> PhiEstimate:
    """Fraction of skeletons accepted within k attempts, k = 1..K.

    ``strata`` optionally labels each log entry (a parallel sequence);
    per-stratum curves are returned alongside the pooled one.  Curves
    are non-decreasing in k by construction.
    """
    entries = list(attempt_log)
    if not entries:
        raise EmptyLogError("attempt log is empty")
    if strata is not None and len(strata) != len(entries):
        raise ValueError("strata must label every attempt-log entry")
    k_max = max(len(e.outcomes) for e in entries)

    def curve(rows) -> Tuple[float, ...]:
        n = len(rows)
        return tuple(
            sum(1 for e in rows if e.accepted_at is not None and e.accepted_at <= k) / n
            for k in range(1, k_max + 1)
        )

    per_stratum: Dict[str, Tuple[float, ...]] = {}
    counts: Dict[str, int] = {}
    if strata is not None:
        groups: Dict[str, list] = {}
        for entry, label in zip(entries, strata):
            groups.setdefault(str(label), []).append(entry)
        for label in sorted(groups):
            per_stratum[label] = curve(groups[label])
            counts[label] = len(groups[label])
    return PhiEstimate(curve(entries), per_stratum, counts)
