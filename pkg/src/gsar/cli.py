"""Command-line front end.

Exit codes: 0 ok, 2 usage or parse error, 3 audit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import harness
from .corpus import DEFAULT_DIM, DatasetError, build_store, load_dataset, write_dataset
from .domain import (
    PARTITION_CLASSES,
    Claim,
    ConfigError,
    GsarConfig,
    GsarError,
    JudgeVerdict,
    Partition,
    Report,
    load_config,
)
from .judge import DEFAULT_KAPPA, JudgeBackend, RuleBasedJudge, http_judge, parse_judge_output, replay_judge, trace_line
from .replan import Plan, run_investigation
from .scoring import decide, gsar_score
from .synthetic import make_records

EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 2, 3

log = logging.getLogger("gsar")


class UsageError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def _config(args: argparse.Namespace) -> GsarConfig:
    cfg = load_config(args.config)
    if getattr(args, "k_max", None) is not None:
        cfg = GsarConfig(cfg.weights, cfg.rho, cfg.thresholds, args.k_max, cfg.empty_partition_score)
    return cfg


def read_partition(path: str | Path) -> Partition:
    """Partition file: an object with ``<class>_claims`` lists (a full verdict also works)."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read partition file {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise UsageError(f"partition file {path} must hold a JSON object")
    lists = {}
    try:
        for name in PARTITION_CLASSES:
            raw = obj.get(f"{name}_claims", obj.get(name, []))
            if not isinstance(raw, list):
                raise UsageError(f"{name}_claims must be a list")
            lists[name] = tuple(Claim.from_wire(c) for c in raw)
        return Partition(**lists)
    except GsarError as exc:
        raise UsageError(f"bad partition file {path}: {exc}") from None


def make_judge(spec: str, records, kappa: float, config: GsarConfig) -> JudgeBackend:
    kind, _, target = spec.partition(":")
    if kind == "rule" and not target:
        return RuleBasedJudge(records, kappa, config)
    if kind == "replay" and target:
        return replay_judge(target)
    if kind == "http" and target:
        return http_judge(target)
    raise UsageError(f"unknown judge backend {spec!r}; use rule, replay:<path> or http:<url>")


def _records(args: argparse.Namespace):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    return load_dataset(args.dataset, args.n, args.seed)


# --- subcommands ---------------------------------------------------------


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _config(args)
    partition = read_partition(args.partition_file)
    breakdown = gsar_score(partition, cfg)
    out = breakdown.to_json()
    out["decision"] = decide(breakdown.score, cfg.thresholds).value
    out["counts"] = list(partition.counts)
    print(_dump(out))
    return EXIT_OK


def cmd_judge(args: argparse.Namespace) -> int:
    cfg = _config(args)
    records = _records(args)
    store = build_store(records, args.dim)
    backend = make_judge(args.judge, records, args.kappa, cfg)
    lines = []
    for record in records:
        request = harness.build_request(record, store, args.k)
        lines.append(trace_line(request, backend.evaluate(request), record_id=record.id))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        variants = harness.parse_variants(args.variants)
    except ValueError as exc:
        raise UsageError(f"bad --variants: {exc}") from None
    cfg = _config(args)
    records = _records(args)
    store = build_store(records, args.dim)
    backend = make_judge(args.judge, records, args.kappa, cfg)
    traces, summary = harness.run_pipeline(
        records,
        store,
        backend,
        cfg,
        variants,
        seed=args.seed,
        k=args.k,
        bootstrap_resamples=args.bootstrap,
        merge_complementary_into=args.merge_k_into,
        workers=args.workers,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "traces.jsonl", "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
    summary["dataset"] = str(args.dataset)
    summary["metadata"] = {"generated_at": datetime.now(timezone.utc).isoformat()}
    audit = summary["audit"]
    summary_path = out / "summary.json"
    if not audit["passed"]:
        if summary_path.exists():
            summary_path.unlink()
        (out / "audit.json").write_text(_dump(audit) + "\n", encoding="utf-8")
        print("audit FAILED; summary withheld:", file=sys.stderr)
        for line in audit["details"]:
            print(f"  {line}", file=sys.stderr)
        return EXIT_AUDIT
    summary_path.write_text(_dump(summary) + "\n", encoding="utf-8")
    print(harness.format_table(summary))
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    try:
        traces = [
            harness.RunTrace.from_json(json.loads(line))
            for line in Path(args.traces).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read traces {args.traces}: {exc}") from None
    result = harness.fingerprint_audit(traces)
    print(_dump(result.to_json()))
    return EXIT_OK if result.passed else EXIT_AUDIT


class ScriptExhausted(RuntimeError):
    pass


class ScriptedJudge:
    """Returns pre-recorded verdicts in order; raises once the script runs out."""

    name = "scripted"

    def __init__(self, verdicts: list[JudgeVerdict]):
        self.verdicts = list(verdicts)
        self.calls = 0

    def evaluate(self, request) -> JudgeVerdict:
        if self.calls >= len(self.verdicts):
            raise ScriptExhausted(f"judge script exhausted after {self.calls} verdicts")
        self.calls += 1
        return self.verdicts[self.calls - 1]


class ScriptedHooks:
    """Hooks that only track plan revisions; the scripted judge decides outcomes."""

    def initial_plan(self, signal: str) -> Plan:
        return Plan(f"investigate {signal}")

    def dispatch_and_synthesize(self, plan: Plan) -> Report:
        return Report((), f"synthesis for plan revision {plan.revision}", "scripted")

    def revise_plan(self, plan: Plan, report: Report, explanation: str) -> Plan:
        return plan.revised(f"{plan.payload} | {explanation}")

    def regenerate_summary(self, report: Report, explanation: str) -> Report:
        return Report(report.claims, report.synthesis_text + " (regenerated)", report.signal_id, report.evidence)


def load_script(path: str | Path) -> list[JudgeVerdict]:
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read judge script {path}: {exc}") from None
    if isinstance(items, dict):
        items = items.get("verdicts")
    if not isinstance(items, list):
        raise UsageError("judge script must be a JSON list of verdicts")
    return [parse_judge_output(i if isinstance(i, str) else json.dumps(i)).verdict for i in items]


def cmd_loop(args: argparse.Namespace) -> int:
    cfg = _config(args)
    judge = ScriptedJudge(load_script(args.script))
    result = run_investigation(args.signal, ScriptedHooks(), judge, cfg)
    out = result.to_json()
    out["judge_calls"] = judge.calls
    print(_dump(out))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    write_dataset(args.out, make_records(args.n, args.seed))
    return EXIT_OK


# --- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsar", description="Grounding evaluation and replanning toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file (default: $GSAR_CONFIG, then built-in defaults)")

    def with_data(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dataset", required=True, help="FEVER-shaped JSONL file")
        p.add_argument("--n", type=int, required=True, help="number of records to sample")
        p.add_argument("--k", type=int, default=5, help="retrieval depth")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--judge", default="rule", help="rule | replay:<path> | http:<url>")
        p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA, help="complementary routing threshold")
        p.add_argument("--dim", type=int, default=DEFAULT_DIM, help="embedding dimension")
        with_config(p)

    p = sub.add_parser("score", help="score a partition file")
    p.add_argument("partition_file")
    with_config(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("judge", help="judge sampled records and emit a replayable verdict trace")
    with_data(p)
    p.add_argument("--out", help="write the verdict trace here instead of stdout")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("run", help="run the ablation pipeline")
    with_data(p)
    p.add_argument("--variants", default="all", help="comma-separated variant names, or 'all'")
    p.add_argument("--out", default="gsar-out", help="output directory")
    p.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--merge-k-into", choices=("ungrounded", "grounded"), default="ungrounded",
                   help="where no_complementary moves complementary claims")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("loop", help="run the replanning loop against a scripted judge")
    p.add_argument("script", help="JSON list of judge outputs, consumed in order")
    p.add_argument("--signal", default="scripted-signal")
    p.add_argument("--k-max", type=int, default=None, help="override the config replan budget")
    with_config(p)
    p.set_defaults(func=cmd_loop)

    p = sub.add_parser("audit", help="fingerprint-audit a traces.jsonl file")
    p.add_argument("traces")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("synth", help="write a synthetic FEVER-shaped dataset")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, DatasetError, GsarError, FileNotFoundError) as exc:
        print(f"gsar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
