"""File formats: network definitions, datasets, logs, run configs.

Network models load from two formats: a discrete subset of the
Bayesian Interchange Format (``.bif``) covering ``network``,
``variable`` and ``probability`` blocks, and a native canonical JSON
format whose printer is byte-stable (sorted keys, fixed layout) so
round-trips are exact.

Datasets and logs are JSON Lines with a versioned header line.
Noise values are serialized as JSON floats in Python's shortest
round-trip decimal form, which parses back to the identical bit
pattern; replaying a dataset read from disk therefore reproduces its
values exactly.
"""

from __future__ import annotations

import hashlib
import json
import re
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .channel import Mismatch
from .errors import (
    BifSemanticError,
    BifSyntaxError,
    ConfigError,
    DatasetFormatError,
    NativeFormatError,
)
from .pipeline import AttemptFailure, AttemptRecord, CoverageEntry, SynthRecord
from .scm import Scm, Skeleton, Variable

FORMAT_VERSION = 1
ROW_RENORM_TOL = 1e-6


# --------------------------------------------------------------------------
# BIF subset


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int
    quoted: bool = False


_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.S)
_TOKEN_RE = re.compile(r'"[^"\n]*"|[A-Za-z0-9_.+\-]+|\S')


def _strip_comments(text: str) -> str:
    return _COMMENT_RE.sub(lambda m: re.sub(r"[^\n]", " ", m.group(0)), text)


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    for lineno, line in enumerate(_strip_comments(text).split("\n"), start=1):
        for match in _TOKEN_RE.finditer(line):
            raw = match.group(0)
            if raw.startswith('"'):
                tokens.append(_Token(raw[1:-1], lineno, match.start() + 1, True))
            else:
                tokens.append(_Token(raw, lineno, match.start() + 1))
    return tokens


class _BifParser:
    """Recursive-descent parser for the discrete BIF subset."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        last_line = self.tokens[-1].line if self.tokens else 1
        self._eof = _Token("<end of input>", last_line + 1, 1)

    def _peek(self) -> _Token:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else self._eof

    def _next(self) -> _Token:
        token = self._peek()
        self.pos += 1
        return token

    def _fail(self, expected: str, token: Optional[_Token] = None):
        token = token or self._peek()
        raise BifSyntaxError(token.line, token.col, expected, token.text)

    def _expect(self, text: str) -> _Token:
        token = self._peek()
        if token.quoted or token.text != text:
            self._fail(f"'{text}'")
        return self._next()

    def _word(self, expected: str = "a name") -> _Token:
        token = self._peek()
        if not token.quoted and not re.fullmatch(r"[A-Za-z0-9_.+\-]+", token.text):
            self._fail(expected)
        return self._next()

    def _number(self) -> float:
        token = self._word("a number")
        try:
            return float(token.text)
        except ValueError:
            self._fail("a number", token)

    def _skip_property(self):
        # opaque: consume everything through the closing semicolon
        while True:
            token = self._next()
            if token is self._eof or token.text == "<end of input>":
                self._fail("';' closing the property", token)
            if token.text == ";" and not token.quoted:
                return

    def parse(self) -> Scm:
        names: List[str] = []
        states: Dict[str, Tuple[str, ...]] = {}
        blocks: Dict[str, Tuple[Tuple[str, ...], Tuple[Tuple[float, ...], ...]]] = {}
        while self._peek() is not self._eof:
            keyword = self._word("'network', 'variable' or 'probability'")
            if keyword.text == "network" and not keyword.quoted:
                self._word()
                self._block_of_properties()
            elif keyword.text == "variable" and not keyword.quoted:
                name, labels = self._variable_block()
                if name in states:
                    raise BifSemanticError(f"variable {name!r} declared twice")
                names.append(name)
                states[name] = labels
            elif keyword.text == "probability" and not keyword.quoted:
                child, parents, cpt = self._probability_block(states)
                if child in blocks:
                    raise BifSemanticError(f"duplicate probability block for {child!r}")
                blocks[child] = (parents, cpt)
            else:
                self._fail("'network', 'variable' or 'probability'", keyword)

        variables = []
        for name in names:
            if name not in blocks:
                raise BifSemanticError(f"no probability block for variable {name!r}")
            parents, cpt = blocks[name]
            variables.append(Variable(name, states[name], parents, cpt))
        for child in blocks:
            if child not in states:
                raise BifSemanticError(f"probability block for undeclared variable {child!r}")
        return Scm(tuple(variables))

    def _block_of_properties(self):
        self._expect("{")
        while self._peek().text != "}" or self._peek().quoted:
            token = self._word("'property' or '}'")
            if token.text != "property" or token.quoted:
                self._fail("'property' or '}'", token)
            self._skip_property()
        self._expect("}")

    def _variable_block(self) -> Tuple[str, Tuple[str, ...]]:
        name = self._word().text
        self._expect("{")
        labels: Optional[Tuple[str, ...]] = None
        while self._peek().text != "}" or self._peek().quoted:
            token = self._word("'type', 'property' or '}'")
            if token.text == "property" and not token.quoted:
                self._skip_property()
                continue
            if token.text != "type" or token.quoted:
                self._fail("'type', 'property' or '}'", token)
            self._expect("discrete")
            self._expect("[")
            count_token = self._word("a state count")
            try:
                declared = int(count_token.text)
            except ValueError:
                self._fail("a state count", count_token)
            self._expect("]")
            self._expect("{")
            found = [self._word("a state label").text]
            while self._peek().text == ",":
                self._next()
                found.append(self._word("a state label").text)
            self._expect("}")
            self._expect(";")
            if len(found) != declared:
                raise BifSemanticError(
                    f"variable {name!r} declares {declared} states but lists {len(found)}")
            labels = tuple(found)
        self._expect("}")
        if labels is None:
            raise BifSemanticError(f"variable {name!r} has no type declaration")
        return name, labels

    def _probability_block(self, states) -> Tuple[str, Tuple[str, ...], Tuple]:
        self._expect("(")
        child = self._word().text
        if child not in states:
            raise BifSemanticError(f"probability block for undeclared variable {child!r}")
        parents: List[str] = []
        if self._peek().text == "|" and not self._peek().quoted:
            self._next()
            parents.append(self._word().text)
            while self._peek().text == ",":
                self._next()
                parents.append(self._word().text)
        self._expect(")")
        for parent in parents:
            if parent not in states:
                raise BifSemanticError(
                    f"probability block for {child!r} references undeclared parent {parent!r}")

        child_card = len(states[child])
        n_rows = 1
        for parent in parents:
            n_rows *= len(states[parent])

        self._expect("{")
        rows: Dict[int, Tuple[float, ...]] = {}
        while self._peek().text != "}" or self._peek().quoted:
            token = self._peek()
            if token.text == "property" and not token.quoted:
                self._next()
                self._skip_property()
            elif token.text == "table" and not token.quoted:
                self._next()
                values = [self._number()]
                while self._peek().text == ",":
                    self._next()
                    values.append(self._number())
                self._expect(";")
                if len(values) != n_rows * child_card:
                    raise BifSemanticError(
                        f"table for {child!r} lists {len(values)} values, "
                        f"expected {n_rows * child_card}")
                # values run over parent configurations row-major,
                # child state fastest: one CPT row after another
                for r in range(n_rows):
                    rows[r] = tuple(values[r * child_card:(r + 1) * child_card])
            elif token.text == "(" and not token.quoted:
                self._next()
                config = [self._word("a parent state").text]
                while self._peek().text == ",":
                    self._next()
                    config.append(self._word("a parent state").text)
                self._expect(")")
                if len(config) != len(parents):
                    raise BifSemanticError(
                        f"row for {child!r} gives {len(config)} parent states, "
                        f"expected {len(parents)}")
                row_index = 0
                for parent, value in zip(parents, config):
                    if value not in states[parent]:
                        raise BifSemanticError(
                            f"{value!r} is not a state of parent {parent!r} "
                            f"(in block for {child!r})")
                    row_index = row_index * len(states[parent]) + states[parent].index(value)
                if row_index in rows:
                    raise BifSemanticError(
                        f"duplicate row for parent configuration {tuple(config)!r} "
                        f"of {child!r}")
                values = [self._number()]
                while self._peek().text == ",":
                    self._next()
                    values.append(self._number())
                self._expect(";")
                if len(values) != child_card:
                    raise BifSemanticError(
                        f"row for {child!r} lists {len(values)} values, "
                        f"expected {child_card}")
                rows[row_index] = tuple(values)
            else:
                self._fail("'table', a parent configuration, 'property' or '}'")
        self._expect("}")

        if len(rows) != n_rows:
            raise BifSemanticError(
                f"probability block for {child!r} covers {len(rows)} of "
                f"{n_rows} parent configurations")
        cpt = tuple(_normalize_row(rows[r], child) for r in range(n_rows))
        return child, tuple(parents), cpt


def _normalize_row(row: Tuple[float, ...], child: str) -> Tuple[float, ...]:
    for p in row:
        if p < 0.0 or p > 1.0:
            raise BifSemanticError(f"probability {p!r} for {child!r} outside [0, 1]")
    total = sum(row)
    if abs(total - 1.0) > ROW_RENORM_TOL:
        raise BifSemanticError(
            f"row for {child!r} sums to {total!r}, beyond tolerance {ROW_RENORM_TOL}")
    if total != 1.0:
        warnings.warn(
            f"renormalizing a CPT row of {child!r} (sum {total!r})",
            stacklevel=3)
        return tuple(p / total for p in row)
    return row


def parse_bif(text: str) -> Scm:
    """Parse the discrete BIF subset into a model.

    Grammar: ``network`` blocks (skipped), ``variable`` blocks with
    ``type discrete [k] { states };`` and ``probability`` blocks with
    either per-parent-configuration rows or a ``table`` whose values
    run over parent configurations row-major with the child state
    fastest.  ``//`` and ``/* */`` comments are stripped; ``property``
    lines are skipped (they stay available in the source text).

    Rows must sum to 1 within 1e-6; inexact rows are renormalized
    with a warning, worse ones rejected.
    """
    return _BifParser(text).parse()


# --------------------------------------------------------------------------
# native JSON format

NATIVE_FORMAT = "causalsynth/network"


def _need(obj, key, kind, path):
    if not isinstance(obj, dict):
        raise NativeFormatError(path, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise NativeFormatError(path, f"missing key {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise NativeFormatError(
            f"{path}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def parse_native(text: str) -> Scm:
    """Parse the native JSON network format.

    Structural problems are reported with JSON-path diagnostics;
    numeric semantics (normalization, acyclicity) are left to model
    validation so a linter can list them all.
    """
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise NativeFormatError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise NativeFormatError("$", "top level must be an object")
    fmt = doc.get("format", NATIVE_FORMAT)
    if fmt != NATIVE_FORMAT:
        raise NativeFormatError("$.format", f"unknown format {fmt!r}")
    entries = _need(doc, "variables", list, "$")
    variables = []
    for i, entry in enumerate(entries):
        path = f"$.variables[{i}]"
        name = _need(entry, "name", str, path)
        states = _need(entry, "states", list, path)
        parents = entry.get("parents", [])
        if not isinstance(parents, list):
            raise NativeFormatError(f"{path}.parents", "expected a list")
        cpt = _need(entry, "cpt", list, path)
        for k, s in enumerate(states):
            if not isinstance(s, str):
                raise NativeFormatError(f"{path}.states[{k}]", "expected a string")
        for k, p in enumerate(parents):
            if not isinstance(p, str):
                raise NativeFormatError(f"{path}.parents[{k}]", "expected a string")
        rows = []
        for r, row in enumerate(cpt):
            if not isinstance(row, list):
                raise NativeFormatError(f"{path}.cpt[{r}]", "expected a list of numbers")
            if len(row) != len(states):
                raise NativeFormatError(
                    f"{path}.cpt[{r}]",
                    f"variable {name!r}: row length {len(row)}, expected {len(states)}")
            for c, p in enumerate(row):
                if not isinstance(p, (int, float)) or isinstance(p, bool):
                    raise NativeFormatError(f"{path}.cpt[{r}][{c}]", "expected a number")
            rows.append(tuple(float(p) for p in row))
        variables.append(Variable(name, tuple(states), tuple(parents), tuple(rows)))
    return Scm(tuple(variables))


def print_native(scm: Scm) -> str:
    """Canonical JSON text for a model; byte-stable under round-trip."""
    doc = {
        "format": NATIVE_FORMAT,
        "version": FORMAT_VERSION,
        "variables": [
            {
                "name": var.name,
                "states": list(var.states),
                "parents": list(var.parents),
                "cpt": [list(row) for row in var.cpt],
            }
            for var in scm.variables
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class NetworkFile:
    """A loaded network: source text kept alongside the parsed model."""

    path: str
    source: str
    scm: Scm


def load_network(path: str) -> NetworkFile:
    """Load a model from a ``.bif`` or native ``.json`` file."""
    with open(path, "r", encoding="utf-8") as handle:
        source = handle.read()
    if str(path).lower().endswith(".bif"):
        scm = parse_bif(source)
    else:
        scm = parse_native(source)
    return NetworkFile(str(path), source, scm)


# --------------------------------------------------------------------------
# JSON-Lines datasets and logs

_KINDS = ("skeletons", "dataset", "coverage", "attempts")


def _write_jsonl(path: str, kind: str, meta: Optional[dict], rows: Iterable[dict]):
    header = {"format": f"causalsynth/{kind}", "version": FORMAT_VERSION}
    header.update(meta or {})
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def _read_jsonl(path: str, kind: str) -> Tuple[dict, List[dict]]:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise DatasetFormatError("empty file, expected a header line", lineno=1)
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rows.append((lineno, json.loads(line)))
        except ValueError as exc:
            raise DatasetFormatError(f"invalid JSON: {exc}", lineno=lineno) from None
    if not rows:
        raise DatasetFormatError("missing header line", lineno=1)
    header_line, header = rows[0]
    fmt = header.get("format") if isinstance(header, dict) else None
    if fmt != f"causalsynth/{kind}":
        raise DatasetFormatError(
            f"expected format 'causalsynth/{kind}', found {fmt!r}", lineno=header_line)
    if header.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported version {header.get('version')!r}", lineno=header_line)
    return header, [
        _checked_row(row, lineno) for lineno, row in rows[1:]
    ]


def _checked_row(row, lineno: int) -> dict:
    if not isinstance(row, dict):
        raise DatasetFormatError("expected a JSON object", lineno=lineno)
    row["__line__"] = lineno
    return row


def _row_skeleton(row: dict) -> Skeleton:
    lineno = row["__line__"]
    v = row.get("v")
    u = row.get("u")
    if not isinstance(v, dict) or not isinstance(u, dict):
        raise DatasetFormatError("record needs 'v' and 'u' objects", lineno=lineno)
    if set(v) != set(u):
        raise DatasetFormatError("'v' and 'u' cover different variables", lineno=lineno)
    for name, value in u.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not 0.0 <= float(value) < 1.0:
            raise DatasetFormatError(
                f"noise for {name!r} must be a float in [0, 1)", lineno=lineno)
    return Skeleton({k: str(s) for k, s in v.items()},
                    {k: float(x) for k, x in u.items()})


def write_skeletons(path: str, skeletons: Sequence[Skeleton],
                    meta: Optional[dict] = None,
                    ids: Optional[Sequence[int]] = None):
    """Write a skeleton dataset (no documents)."""
    if ids is None:
        ids = range(len(skeletons))
    rows = (
        {"id": int(i), "v": s.v, "u": s.u}
        for i, s in zip(ids, skeletons)
    )
    _write_jsonl(path, "skeletons", meta, rows)


def read_skeletons(path: str) -> Tuple[dict, List[Tuple[int, Skeleton]]]:
    """Read a skeleton dataset; returns (header, [(id, skeleton)])."""
    header, rows = _read_jsonl(path, "skeletons")
    out = []
    for row in rows:
        if "id" not in row:
            raise DatasetFormatError("record needs an 'id'", lineno=row["__line__"])
        out.append((int(row["id"]), _row_skeleton(row)))
    return header, out


def write_dataset(path: str, records: Sequence[SynthRecord],
                  meta: Optional[dict] = None,
                  ids: Optional[Sequence[int]] = None):
    """Write accepted synthesis records."""
    if ids is None:
        ids = range(len(records))
    rows = (
        {
            "id": int(i),
            "v": r.skeleton.v,
            "u": r.skeleton.u,
            "document": r.document,
            "attempts_used": r.attempts_used,
            "realizer_id": r.realizer_id,
        }
        for i, r in zip(ids, records)
    )
    _write_jsonl(path, "dataset", meta, rows)


def read_dataset(path: str) -> Tuple[dict, List[Tuple[int, SynthRecord]]]:
    """Read synthesis records; returns (header, [(id, record)])."""
    header, rows = _read_jsonl(path, "dataset")
    out = []
    for row in rows:
        lineno = row["__line__"]
        for key in ("id", "document", "attempts_used", "realizer_id"):
            if key not in row:
                raise DatasetFormatError(f"record needs {key!r}", lineno=lineno)
        skeleton = _row_skeleton(row)
        record = SynthRecord(
            skeleton, str(row["document"]),
            int(row["attempts_used"]), str(row["realizer_id"]))
        if record.attempts_used < 1:
            raise DatasetFormatError("attempts_used must be >= 1", lineno=lineno)
        out.append((int(row["id"]), record))
    return header, out


def read_values(path: str) -> Tuple[dict, List[Tuple[int, Skeleton]]]:
    """Read either a skeleton file or a dataset, keeping (id, skeleton)."""
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline()
    try:
        fmt = json.loads(first).get("format", "")
    except ValueError:
        fmt = ""
    if fmt == "causalsynth/dataset":
        header, rows = read_dataset(path)
        return header, [(i, r.skeleton) for i, r in rows]
    return read_skeletons(path)


def write_coverage(path: str, entries: Sequence[CoverageEntry],
                   meta: Optional[dict] = None):
    """Write the coverage-failure log with full mismatch history."""
    def attempt_row(k: int, failure: AttemptFailure) -> dict:
        if failure.kind == "error":
            return {"k": k, "error": failure.error or ""}
        return {
            "k": k,
            "mismatches": [
                {"variable": m.variable, "expected": m.expected, "extracted": m.extracted}
                for m in failure.mismatches
            ],
        }

    rows = (
        {
            "id": entry.index,
            "v": entry.skeleton.v,
            "u": entry.skeleton.u,
            "attempt_history": [
                attempt_row(k, failure)
                for k, failure in enumerate(entry.attempts, start=1)
            ],
        }
        for entry in entries
    )
    _write_jsonl(path, "coverage", meta, rows)


def read_coverage(path: str) -> Tuple[dict, List[CoverageEntry]]:
    header, rows = _read_jsonl(path, "coverage")
    out = []
    for row in rows:
        lineno = row["__line__"]
        skeleton = _row_skeleton(row)
        history = row.get("attempt_history")
        if not isinstance(history, list):
            raise DatasetFormatError("record needs 'attempt_history'", lineno=lineno)
        attempts = []
        for item in history:
            if "error" in item:
                attempts.append(AttemptFailure("error", (), str(item["error"])))
            else:
                mismatches = tuple(
                    Mismatch(m["variable"], m["expected"], m["extracted"])
                    for m in item.get("mismatches", ())
                )
                attempts.append(AttemptFailure("mismatch", mismatches))
        out.append(CoverageEntry(int(row.get("id", len(out))), skeleton, tuple(attempts)))
    return header, out


def write_attempt_log(path: str, entries: Sequence[AttemptRecord],
                      meta: Optional[dict] = None):
    """Write per-skeleton attempt outcomes."""
    rows = (
        {"id": e.index, "outcomes": list(e.outcomes), "accepted_at": e.accepted_at}
        for e in entries
    )
    _write_jsonl(path, "attempts", meta, rows)


def read_attempt_log(path: str) -> Tuple[dict, List[AttemptRecord]]:
    header, rows = _read_jsonl(path, "attempts")
    out = []
    for row in rows:
        lineno = row["__line__"]
        outcomes = row.get("outcomes")
        if not isinstance(outcomes, list) or not all(isinstance(o, str) for o in outcomes):
            raise DatasetFormatError("record needs 'outcomes' strings", lineno=lineno)
        accepted_at = row.get("accepted_at")
        if accepted_at is not None:
            accepted_at = int(accepted_at)
        out.append(AttemptRecord(int(row.get("id", len(out))), tuple(outcomes), accepted_at))
    return header, out


# --------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """A validated generation run: model, channel, sizes, outputs."""

    network: str
    realizer: Dict
    m: int
    k_max: int = 10
    seed: int = 0
    alpha: float = 0.05
    max_cond_size: int = 2
    typicality_quantile: float = 0.06
    outputs: Dict[str, str] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "network": self.network,
            "realizer": self.realizer,
            "m": self.m,
            "k_max": self.k_max,
            "seed": self.seed,
            "alpha": self.alpha,
            "max_cond_size": self.max_cond_size,
            "typicality_quantile": self.typicality_quantile,
            "outputs": self.outputs,
        }


_REALIZER_KINDS = ("template", "backdoor", "http")


def load_config(path: str) -> RunConfig:
    """Load and validate a run configuration (JSON document).

    Numeric ranges are enforced here so commands can trust the
    values; secrets are never read from the file (the API key comes
    from the environment).
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.loads(handle.read())
        except ValueError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    def pick(key, kind, default=None, required=False):
        if key not in doc:
            if required:
                raise ConfigError(f"config needs {key!r}")
            return default
        value = doc[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool):
            raise ConfigError(f"config {key!r} must be {kind.__name__}")
        return value

    network = pick("network", str, required=True)
    realizer = pick("realizer", dict, default={"kind": "template"})
    kind = realizer.get("kind")
    if kind not in _REALIZER_KINDS:
        raise ConfigError(f"realizer kind must be one of {_REALIZER_KINDS}, got {kind!r}")
    if kind == "backdoor":
        if not isinstance(realizer.get("prior"), dict):
            raise ConfigError("backdoor realizer needs a 'prior' object")
    if kind == "http":
        for key in ("url", "model"):
            if not isinstance(realizer.get(key), str):
                raise ConfigError(f"http realizer needs a string {key!r}")

    m = pick("m", int, required=True)
    if m < 0:
        raise ConfigError("m must be nonnegative")
    k_max = pick("k_max", int, default=10)
    if k_max < 1:
        raise ConfigError("k_max must be at least 1")
    seed = pick("seed", int, default=0)
    alpha = pick("alpha", float, default=0.05)
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    max_cond_size = pick("max_cond_size", int, default=2)
    if max_cond_size < 0:
        raise ConfigError("max_cond_size must be nonnegative")
    quantile = pick("typicality_quantile", float, default=0.06)
    if not 0.0 < quantile < 1.0:
        raise ConfigError("typicality_quantile must lie in (0, 1)")
    outputs = pick("outputs", dict, default={})
    for key, value in outputs.items():
        if not isinstance(value, str):
            raise ConfigError(f"output path {key!r} must be a string")

    return RunConfig(network=network, realizer=dict(realizer), m=m, k_max=k_max,
                     seed=seed, alpha=alpha, max_cond_size=max_cond_size,
                     typicality_quantile=quantile, outputs=dict(outputs))


def config_hash(config) -> str:
    """Stable hash of a config (RunConfig or plain dict) for provenance."""
    doc = config.as_dict() if isinstance(config, RunConfig) else config
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def file_sha256(path: str) -> str:
    """Content hash of an input file, for report traceability."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]
