"""Command-line interface.

Subcommands wire the library into the full workflows: validate a
network file, sample skeletons, generate verified records through a
realizer, answer counterfactual queries over a dataset, evaluate
structural fidelity, and summarize attempt logs.  Every command is
deterministic given its inputs and seed (the HTTP realizer excepted),
and outputs embed a config hash plus input hashes for traceability.

Exit codes: 0 success, 1 runtime error, 2 validation error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import __version__
from .channel import (
    BackdoorChannelConfig,
    BackdoorRealizer,
    HttpEndpointConfig,
    HttpRealizer,
    TemplateRealizer,
)
from .errors import (
    CausalSynthError,
    ConfigError,
    DatasetFormatError,
    EmptySampleError,
    FormatError,
    InvalidModelError,
    SchemaMismatchError,
    UnknownStateError,
    UnknownVariableError,
)
from .io import (
    config_hash,
    file_sha256,
    load_config,
    load_network,
    read_attempt_log,
    read_coverage,
    read_dataset,
    read_values,
    write_attempt_log,
    write_coverage,
    write_dataset,
    write_skeletons,
)
from .pipeline import estimate_phi, run_pipeline
from .rng import draw_stream
from .scm import counterfactual, encode_skeletons, sample_dataset, validate
from .stats import (
    StateSpaceTooLargeError,
    coverage_failure_rate,
    detection_rate,
    draw_from,
    empirical_joint,
    exact_joint,
    exact_marginal,
    fpr,
    ks_two_sample,
    tvd,
    typicality_split,
)
from .stats import chi2_divergence as _chi2_div

CI_NOTE = "conditional independence tested with stratified chi-square statistics"

_VALIDATION_ERRORS = (
    FormatError,
    ConfigError,
    InvalidModelError,
    UnknownStateError,
    UnknownVariableError,
    SchemaMismatchError,
    EmptySampleError,
)


@dataclass
class ReportBundle:
    """Evaluation output: metric sections plus run metadata."""

    sections: Dict[str, Dict[str, object]] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = []
        for section, metrics in self.sections.items():
            lines.append(section)
            for name, value in metrics.items():
                lines.append(f"  {name:<28} {_fmt(value)}")
        lines.append("metadata")
        for name, value in self.metadata.items():
            lines.append(f"  {name:<28} {value}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["section,name,value"]
        for section, metrics in self.sections.items():
            for name, value in metrics.items():
                rows.append(f"{section},{name},{_fmt(value)}")
        for name, value in self.metadata.items():
            rows.append(f"metadata,{name},{value}")
        return "\n".join(rows) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _emit_report(bundle: ReportBundle, out: Optional[str]):
    text = bundle.to_text()
    sys.stdout.write(text)
    if out:
        with open(out + ".txt", "w", encoding="utf-8") as handle:
            handle.write(text)
        with open(out + ".csv", "w", encoding="utf-8") as handle:
            handle.write(bundle.to_csv())


def build_realizer(spec: Dict):
    """Construct a realizer from its config mapping."""
    kind = spec.get("kind")
    if kind == "template":
        return TemplateRealizer()
    if kind == "backdoor":
        cfg = BackdoorChannelConfig(
            prior=spec["prior"],
            base_compliance=spec.get("base_compliance", 0.6),
            feedback_gain=spec.get("feedback_gain", 0.2),
            compliance_cap=spec.get("compliance_cap", 0.99),
        )
        return BackdoorRealizer(cfg)
    if kind == "http":
        cfg = HttpEndpointConfig(
            url=spec["url"],
            model=spec["model"],
            temperature=spec.get("temperature", 0.7),
            top_p=spec.get("top_p", 0.95),
            max_tokens=spec.get("max_tokens"),
            timeout=spec.get("timeout", 30.0),
            max_retries=spec.get("max_retries", 3),
            backoff_base=spec.get("backoff_base", 0.5),
            max_in_flight=spec.get("max_in_flight", 4),
            rate_per_sec=spec.get("rate_per_sec"),
        )
        return HttpRealizer(cfg)
    raise ConfigError(f"unknown realizer kind {kind!r}")


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    network = load_network(args.network)
    violations = validate(network.scm)
    if not violations:
        print(f"{args.network}: valid ({len(network.scm.variables)} variables, "
              f"{len(network.scm.dag.edges)} edges)")
        return 0
    for violation in violations:
        print(str(violation), file=sys.stderr)
    return 2


def cmd_sample(args) -> int:
    network = load_network(args.network)
    skeletons = sample_dataset(network.scm, args.m, args.seed)
    meta = {
        "network": args.network,
        "network_hash": file_sha256(args.network),
        "m": args.m,
        "seed": args.seed,
        "config_hash": config_hash({
            "command": "sample", "network": args.network,
            "m": args.m, "seed": args.seed,
        }),
    }
    write_skeletons(args.out, skeletons, meta)
    print(f"wrote {len(skeletons)} skeletons to {args.out}")
    return 0


def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = type(config)(**{**config.as_dict(), "seed": args.seed})
    if args.k_max is not None:
        config = type(config)(**{**config.as_dict(), "k_max": args.k_max})
    outputs = config.outputs
    if "dataset" not in outputs:
        raise ConfigError("config outputs must include a 'dataset' path")
    network = load_network(config.network)
    realizer = build_realizer(config.realizer)
    result = run_pipeline(network.scm, realizer, config.m, config.k_max, config.seed)

    meta = {
        "network": config.network,
        "network_hash": file_sha256(config.network),
        "seed": config.seed,
        "k_max": config.k_max,
        "config_hash": config_hash(config),
    }
    ids = [r.index for r in result.attempt_log if r.accepted_at is not None]
    write_dataset(outputs["dataset"], list(result.records), meta, ids=ids)
    if "coverage" in outputs:
        write_coverage(outputs["coverage"], list(result.coverage), meta)
    if "attempts" in outputs:
        write_attempt_log(outputs["attempts"], list(result.attempt_log), meta)

    rate = coverage_failure_rate(result.records, result.coverage)
    print(f"accepted {len(result.records)} of {config.m} skeletons "
          f"(coverage failure rate {rate:.4f})")
    if result.attempt_log:
        phi = estimate_phi(result.attempt_log)
        print("phi-hat by attempt budget: "
              + " ".join(f"{v:.4f}" for v in phi.overall))
    return 0


def _parse_assignments(pairs: List[str]) -> Dict[str, str]:
    assignments = {}
    for pair in pairs:
        name, eq, state = pair.partition("=")
        if not eq or not name or not state:
            raise ConfigError(f"assignment {pair!r} is not of the form VAR=STATE")
        assignments[name.strip()] = state.strip()
    return assignments


def cmd_counterfactual(args) -> int:
    network = load_network(args.network)
    assignments = _parse_assignments(args.set)
    _, rows = read_values(args.dataset)
    results = [counterfactual(network.scm, skeleton, assignments)
               for _, skeleton in rows]
    meta = {
        "network": args.network,
        "network_hash": file_sha256(args.network),
        "source": args.dataset,
        "source_hash": file_sha256(args.dataset),
        "assignments": assignments,
        "config_hash": config_hash({
            "command": "counterfactual", "network": args.network,
            "dataset": args.dataset, "assignments": assignments,
        }),
    }
    write_skeletons(args.out, results, meta, ids=[i for i, _ in rows])
    print(f"wrote {len(results)} counterfactual skeletons to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    network = load_network(args.network)
    scm = network.scm
    _, rows = read_values(args.dataset)
    if not rows:
        raise EmptySampleError(f"{args.dataset} holds no records")
    skeletons = [s for _, s in rows]
    codes = encode_skeletons(scm, skeletons)

    bundle = ReportBundle()
    report = fpr(skeletons, scm.dag, args.alpha, args.max_cond_size,
                 max_tests=args.max_tests, subsample_seed=args.seed)
    bundle.sections["conditional-independence"] = {
        "fpr": report.rate if report.rate is not None else "skipped-all",
        "triples_candidates": report.n_candidates,
        "triples_tested": report.n_tested,
        "triples_skipped": report.n_skipped,
        "triples_rejected": report.n_rejected,
    }
    spot = detection_rate(skeletons, scm.dag, args.alpha)
    bundle.sections["dependence-detection"] = {
        "rate": spot.rate if spot.rate is not None else "skipped-all",
        "pairs_tested": spot.n_tested,
        "pairs_skipped": spot.n_skipped,
    }

    ks_section: Dict[str, object] = {}
    try:
        pvals = []
        for i, name in enumerate(scm.names):
            reference = draw_from(exact_marginal(scm, name), codes.shape[0],
                                  draw_stream(args.seed, i))
            stat, pval = ks_two_sample(codes[:, i], reference)
            ks_section[f"p[{name}]"] = pval
            pvals.append(pval)
        pvals.sort()
        ks_section["p_min"] = pvals[0]
        ks_section["p_median"] = pvals[len(pvals) // 2]
    except StateSpaceTooLargeError:
        ks_section["skipped"] = "joint too large for exact marginals"
    bundle.sections["marginal-ks"] = ks_section

    joint_section: Dict[str, object] = {}
    try:
        target = exact_joint(scm)
        empirical = empirical_joint(scm, codes)
        joint_section["tvd"] = tvd(empirical, target)
        joint_section["chi2_divergence"] = _chi2_div(empirical, target)
    except StateSpaceTooLargeError:
        joint_section["skipped"] = "joint too large for enumeration"
    bundle.sections["joint-fidelity"] = joint_section

    if args.coverage:
        _, coverage = read_coverage(args.coverage)
        bundle.sections["coverage"] = {
            "failure_rate": coverage_failure_rate(rows, coverage),
            "failures": len(coverage),
        }
    if args.attempts:
        _, log = read_attempt_log(args.attempts)
        if log:
            phi = estimate_phi(log)
            bundle.sections["realizability"] = {
                "phi_hat": tuple(phi.overall),
            }

    bundle.metadata = {
        "network": args.network,
        "network_hash": file_sha256(args.network),
        "dataset": args.dataset,
        "dataset_hash": file_sha256(args.dataset),
        "records": len(rows),
        "alpha": args.alpha,
        "max_cond_size": args.max_cond_size,
        "seed": args.seed,
        "config_hash": config_hash({
            "command": "evaluate", "network": args.network,
            "dataset": args.dataset, "alpha": args.alpha,
            "max_cond_size": args.max_cond_size, "seed": args.seed,
        }),
        "version": __version__,
        "method_note": CI_NOTE,
    }
    _emit_report(bundle, args.out)
    return 0


def _load_strata(args, log) -> Optional[Dict[int, str]]:
    """Labels per skeleton id, from a strata file or typicality split."""
    import json

    if args.strata_file:
        with open(args.strata_file, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
        strata = doc.get("strata") if isinstance(doc, dict) else None
        if not isinstance(strata, dict) or not strata:
            raise ConfigError("strata file needs a nonempty 'strata' object")
        by_id: Dict[int, str] = {}
        log_ids = {entry.index for entry in log}
        for label, ids in strata.items():
            members = [int(i) for i in ids]
            if not any(i in log_ids for i in members):
                raise ConfigError(f"stratum {label!r} covers no log entries")
            for i in members:
                by_id[i] = label
        missing = sorted(log_ids - set(by_id))
        if missing:
            raise ConfigError(f"log entries without a stratum: {missing[:5]}...")
        return by_id

    if args.network and args.dataset:
        network = load_network(args.network)
        skeletons_by_id = {}
        _, rows = read_values(args.dataset)
        for i, skeleton in rows:
            skeletons_by_id[i] = skeleton
        if args.coverage:
            _, coverage = read_coverage(args.coverage)
            for entry in coverage:
                skeletons_by_id[entry.index] = entry.skeleton
        ids = sorted(skeletons_by_id)
        ordered = [skeletons_by_id[i] for i in ids]
        typical, atypical = typicality_split(ordered, network.scm, args.quantile)
        atypical_ids = {id(s) for s in atypical}
        return {
            i: ("atypical" if id(s) in atypical_ids else "typical")
            for i, s in zip(ids, ordered)
        }
    return None


def cmd_report(args) -> int:
    _, log = read_attempt_log(args.attempts)
    if not log:
        raise DatasetFormatError(f"{args.attempts} holds no attempt records")
    by_id = _load_strata(args, log)
    strata = None
    if by_id is not None:
        try:
            strata = [by_id[entry.index] for entry in log]
        except KeyError as exc:
            raise ConfigError(f"no stratum for log entry {exc}") from None
    phi = estimate_phi(log, strata)

    bundle = ReportBundle()
    bundle.sections["realizability"] = {"phi_hat_pooled": tuple(phi.overall)}
    for label, curve in phi.per_stratum.items():
        bundle.sections["realizability"][f"phi_hat[{label}]"] = tuple(curve)
        bundle.sections["realizability"][f"count[{label}]"] = phi.counts[label]

    if args.network and args.dataset:
        network = load_network(args.network)
        _, rows = read_dataset(args.dataset)
        try:
            target = exact_joint(network.scm)
            trajectory = []
            for k in range(1, phi.k_max + 1):
                subset = [r.skeleton for _, r in rows if r.attempts_used <= k]
                if subset:
                    empirical = empirical_joint(
                        network.scm, encode_skeletons(network.scm, subset))
                    trajectory.append(tvd(empirical, target))
                else:
                    trajectory.append(1.0)
            bundle.sections["accepted-law"] = {"tvd_by_k": tuple(trajectory)}
        except StateSpaceTooLargeError:
            bundle.sections["accepted-law"] = {
                "skipped": "joint too large for enumeration"}

    bundle.metadata = {
        "attempts": args.attempts,
        "attempts_hash": file_sha256(args.attempts),
        "entries": len(log),
        "version": __version__,
    }
    _emit_report(bundle, args.out)
    return 0


# --------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalsynth",
        description="Structurally valid synthetic data from discrete SCMs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="sample skeletons (no realization)")
    p.add_argument("network")
    p.add_argument("-m", type=int, required=True, help="number of skeletons")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("generate", help="run the full generation loop")
    p.add_argument("config", help="run configuration (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--k-max", type=int, default=None, help="override config k_max")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("counterfactual", help="replay a dataset under interventions")
    p.add_argument("network")
    p.add_argument("dataset")
    p.add_argument("--set", action="append", required=True, metavar="VAR=STATE")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_counterfactual)

    p = sub.add_parser("evaluate", help="structural fidelity report")
    p.add_argument("network")
    p.add_argument("dataset")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-cond-size", type=int, default=2)
    p.add_argument("--max-tests", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coverage", default=None, help="coverage log to fold in")
    p.add_argument("--attempts", default=None, help="attempt log to fold in")
    p.add_argument("-o", "--out", default=None, help="report path prefix")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="realizability and accepted-law tables")
    p.add_argument("attempts", help="attempt log path")
    p.add_argument("--network", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--coverage", default=None)
    p.add_argument("--quantile", type=float, default=0.06)
    p.add_argument("--strata-file", default=None)
    p.add_argument("-o", "--out", default=None, help="report path prefix")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CausalSynthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
