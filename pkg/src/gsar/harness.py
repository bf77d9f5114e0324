"""Batch ablation harness: retrieve, judge once per record, score under every variant."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .corpus import ClaimRecord, VectorStore, embed_text
from .domain import Claim, Decision, GsarConfig, JudgeVerdict, Partition
from .judge import JudgeBackend, JudgeRequest, LabeledEvidence
from .scoring import decide, gsar_score
from .stats import DEFAULT_RESAMPLES, paired_bootstrap_ci

log = logging.getLogger(__name__)

FALLBACK_MARKER = "complementary view:"


class Variant(str, Enum):
    DEFAULT = "default"
    UNIFORM_WEIGHTS = "uniform_weights"
    NO_COMPLEMENTARY = "no_complementary"
    RHO_ZERO = "rho_zero"
    TWO_TIER = "two_tier"
    BASELINE_BINARY = "baseline_binary"
    BASELINE_UNIFORM_JUDGE = "baseline_uniform_judge"


ALL_VARIANTS = tuple(Variant)
# variants whose partition is rewritten from the judged one
PARTITION_CHANGING = frozenset({Variant.NO_COMPLEMENTARY, Variant.BASELINE_UNIFORM_JUDGE})


class DecisionRule(str, Enum):
    THREE_TIER = "three_tier"
    TWO_TIER = "two_tier"
    BINARY = "binary"


def parse_variants(names: str | Iterable[str]) -> list[Variant]:
    if isinstance(names, str):
        names = [n.strip() for n in names.split(",") if n.strip()]
    names = list(names)
    if names == ["all"]:
        return list(ALL_VARIANTS)
    out = [Variant(n) for n in names]  # ValueError on unknown names
    if len(set(out)) != len(out):
        raise ValueError("variants must be distinct")
    return out


def _merge_complementary(partition: Partition, into: str) -> Partition:
    if into == "grounded":
        return Partition(partition.grounded + partition.complementary, partition.ungrounded, partition.contradicted, ())
    if into == "ungrounded":
        return Partition(partition.grounded, partition.ungrounded + partition.complementary, partition.contradicted, ())
    raise ValueError(f"complementary claims can merge into 'ungrounded' or 'grounded', not {into!r}")


def apply_variant(
    variant: Variant,
    partition: Partition,
    config: GsarConfig,
    merge_complementary_into: str = "ungrounded",
) -> tuple[Partition, GsarConfig, DecisionRule]:
    variant = Variant(variant)
    uniform = replace(config, weights=config.weights.uniform(1.0))
    if variant is Variant.DEFAULT:
        return partition, config, DecisionRule.THREE_TIER
    if variant is Variant.UNIFORM_WEIGHTS:
        return partition, uniform, DecisionRule.THREE_TIER
    if variant is Variant.NO_COMPLEMENTARY:
        return _merge_complementary(partition, merge_complementary_into), config, DecisionRule.THREE_TIER
    if variant is Variant.RHO_ZERO:
        return partition, replace(config, rho=0.0), DecisionRule.THREE_TIER
    if variant is Variant.TWO_TIER:
        return partition, config, DecisionRule.TWO_TIER
    if variant is Variant.BASELINE_BINARY:
        return partition, config, DecisionRule.BINARY
    return _merge_complementary(partition, "ungrounded"), uniform, DecisionRule.THREE_TIER


def score_variant(
    variant: Variant,
    partition: Partition,
    config: GsarConfig,
    merge_complementary_into: str = "ungrounded",
) -> tuple[Partition, float, Decision]:
    """Variant-transformed partition, its reported score, and the decision."""
    part, cfg, rule = apply_variant(variant, partition, config, merge_complementary_into)
    if rule is DecisionRule.BINARY:
        n = len(part)
        score = len(part.grounded) / n if n else cfg.empty_partition_score
        ok = bool(part.grounded) and not part.contradicted
        return part, score, Decision.PROCEED if ok else Decision.REPLAN
    score = gsar_score(part, cfg).score
    decision = decide(score, cfg.thresholds)
    if rule is DecisionRule.TWO_TIER and decision is Decision.REGENERATE:
        decision = Decision.REPLAN
    return part, score, decision


@dataclass(frozen=True)
class RunTrace:
    record_id: str
    variant: Variant
    partition_counts: tuple[int, int, int, int]
    atoms: tuple[tuple[str, str, str], ...]
    score: float
    decision: Decision
    replans_used: int
    judge_backend: str
    parse_stage: int
    abstained: bool = False
    # counts as produced by the judge, before any variant rewrite
    judge_counts: tuple[int, int, int, int] = (0, 0, 0, 0)

    def __post_init__(self) -> None:
        counts = Counter(cls for _, cls, _ in self.atoms)
        expected = tuple(counts.get(c, 0) for c in ("grounded", "ungrounded", "contradicted", "complementary"))
        if tuple(self.partition_counts) != expected:
            raise ValueError(f"partition_counts {self.partition_counts} disagree with atoms {expected}")

    def to_json(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "variant": self.variant.value,
            "partition_counts": list(self.partition_counts),
            "judge_counts": list(self.judge_counts),
            "atoms": [list(a) for a in self.atoms],
            "score": self.score,
            "decision": self.decision.value,
            "replans_used": self.replans_used,
            "judge_backend": self.judge_backend,
            "parse_stage": self.parse_stage,
            "abstained": self.abstained,
        }

    @classmethod
    def from_json(cls, row: dict[str, Any]) -> RunTrace:
        return cls(
            record_id=row["record_id"],
            variant=Variant(row["variant"]),
            partition_counts=tuple(row["partition_counts"]),
            atoms=tuple(tuple(a) for a in row["atoms"]),
            score=row["score"],
            decision=Decision(row["decision"]),
            replans_used=row["replans_used"],
            judge_backend=row["judge_backend"],
            parse_stage=row["parse_stage"],
            abstained=row.get("abstained", False),
            judge_counts=tuple(row.get("judge_counts", row["partition_counts"])),
        )


def build_request(record: ClaimRecord, store: VectorStore, k: int) -> JudgeRequest:
    hits = store.top_k(embed_text(record.claim_text, store.dimension), k)
    evidence = tuple(LabeledEvidence(f"doc:{d.id}", d.content, sim, d) for d, sim in hits)
    return JudgeRequest(record.claim_text, (Claim(record.claim_text),), evidence, record_id=record.id)


def traces_for_verdict(
    record: ClaimRecord,
    verdict: JudgeVerdict,
    variants: Sequence[Variant],
    config: GsarConfig,
    backend: str,
    merge_complementary_into: str = "ungrounded",
) -> list[RunTrace]:
    out = []
    for variant in variants:
        part, score, decision = score_variant(variant, verdict.partition, config, merge_complementary_into)
        if verdict.abstained:
            decision = Decision.REPLAN
        out.append(
            RunTrace(
                record_id=record.id,
                variant=Variant(variant),
                partition_counts=part.counts,
                atoms=tuple(part.atoms()),
                score=score,
                decision=decision,
                replans_used=0,
                judge_backend=backend,
                parse_stage=verdict.parse_stage,
                abstained=verdict.abstained,
                judge_counts=verdict.partition.counts,
            )
        )
    return out


def run_pipeline(
    records: Sequence[ClaimRecord],
    store: VectorStore,
    judge: JudgeBackend,
    config: GsarConfig,
    variants: Sequence[Variant] = ALL_VARIANTS,
    seed: int = 42,
    k: int = 5,
    bootstrap_resamples: int = DEFAULT_RESAMPLES,
    merge_complementary_into: str = "ungrounded",
    workers: int = 1,
) -> tuple[list[RunTrace], dict[str, Any]]:
    """Judge each record once and score it under every requested variant.

    Traces come back grouped by record (in input order), then by variant.
    """
    variants = [Variant(v) for v in variants]
    if len(set(variants)) != len(variants):
        raise ValueError("variants must be distinct")

    def one(record: ClaimRecord) -> list[RunTrace]:
        verdict = judge.evaluate(build_request(record, store, k))
        if verdict.abstained:
            log.info("judge abstained on %s: %s", record.id, verdict.abstain_reason)
        return traces_for_verdict(record, verdict, variants, config, judge.name, merge_complementary_into)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_record = list(pool.map(one, records))
    else:
        per_record = [one(r) for r in records]
    traces = [t for group in per_record for t in group]
    summary = summarize(
        traces,
        records,
        config,
        seed=seed,
        b=bootstrap_resamples,
        meta={"judge_backend": judge.name, "k": k, "merge_complementary_into": merge_complementary_into},
    )
    return traces, summary


# --- metrics -------------------------------------------------------------


def compute_metrics(traces: Sequence[RunTrace], gold: Sequence[ClaimRecord]) -> dict[str, Any]:
    """M1, M2, M4, M5 for one variant's traces. Absent metrics are ``None``.

    M4 and M5 read the judge's own partition (``judge_counts``): they measure
    identification, which no scoring variant changes.
    """
    by_id = {r.id: r for r in gold}
    n = len(traces)
    proceeds = [t for t in traces if t.decision is Decision.PROCEED]
    m1 = len(proceeds) / n if n else None
    m2 = sum(t.replans_used for t in proceeds) / len(proceeds) if proceeds else None

    refutes = [t for t in traces if by_id[t.record_id].gold_label == "REFUTES"]
    m4 = sum(1 for t in refutes if t.judge_counts[2] > 0) / len(refutes) if refutes else None

    annotated = [t for t in traces if by_id[t.record_id].gold_complementary is not None]
    if annotated:
        mode = "gold"
        eligible = [t for t in annotated if by_id[t.record_id].gold_complementary]
    else:
        mode = "judge"
        eligible = [t for t in traces if by_id[t.record_id].gold_label == "NOT ENOUGH INFO"]
    m5 = sum(1 for t in eligible if t.judge_counts[3] > 0) / len(eligible) if eligible else None
    return {"M1": m1, "M2": m2, "M4": m4, "M5": m5, "M5_mode": mode}


def _by_variant(traces: Iterable[RunTrace]) -> dict[Variant, list[RunTrace]]:
    out: dict[Variant, list[RunTrace]] = {}
    for t in traces:
        out.setdefault(t.variant, []).append(t)
    return out


# --- audit ---------------------------------------------------------------


def variant_fingerprint(traces: Sequence[RunTrace]) -> str:
    rows = [[t.record_id, list(t.partition_counts), sorted(a[0] for a in t.atoms)] for t in traces]
    return hashlib.sha256(json.dumps(rows, ensure_ascii=False).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    details: tuple[str, ...] = ()
    fingerprints: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"passed": self.passed, "details": list(self.details), "fingerprints": self.fingerprints}


def fingerprint_audit(traces: Sequence[RunTrace]) -> AuditResult:
    """Flag cells that look like a silent judge fallback.

    Fails when a complementary-rewriting variant has the same partition-shape
    fingerprint as an unrewritten one even though the judge populated the
    complementary class, or when any atom carries the fallback marker prefix.
    """
    groups = _by_variant(traces)
    fps = {v.value: variant_fingerprint(ts) for v, ts in groups.items()}
    details = []
    marked = sorted({a[0] for t in traces for a in t.atoms if a[0].strip().casefold().startswith(FALLBACK_MARKER)})
    if marked:
        details.append(f"{len(marked)} atom(s) carry the fallback marker {FALLBACK_MARKER!r}, e.g. {marked[0]!r}")

    reference = [v for v in groups if v not in PARTITION_CHANGING]
    has_complementary = any(t.judge_counts[3] > 0 or t.partition_counts[3] > 0 for v in reference for t in groups[v])
    if has_complementary:
        for changed in (v for v in groups if v in PARTITION_CHANGING):
            for ref in reference:
                if fps[changed.value] == fps[ref.value]:
                    details.append(
                        f"{changed.value} and {ref.value} share fingerprint {fps[ref.value][:12]} "
                        "although complementary claims are present"
                    )
    return AuditResult(not details, tuple(details), fps)


# --- summary -------------------------------------------------------------


def summarize(
    traces: Sequence[RunTrace],
    gold: Sequence[ClaimRecord],
    config: GsarConfig,
    seed: int = 42,
    b: int = DEFAULT_RESAMPLES,
    meta: dict[str, Any] | None = None,
) -> dict[str, Any]:
    groups = _by_variant(traces)
    variants: dict[str, Any] = {}
    for v, ts in groups.items():
        hist = Counter(t.decision for t in ts)
        variants[v.value] = {
            "n": len(ts),
            "histogram": {d.value: hist.get(d, 0) for d in Decision},
            "mean_score": sum(t.score for t in ts) / len(ts) if ts else None,
            "abstained": sum(1 for t in ts if t.abstained),
            "metrics": compute_metrics(ts, gold),
        }

    deltas: dict[str, Any] = {}
    base = groups.get(Variant.DEFAULT)
    if base:
        base_by_id = {t.record_id: t for t in base}
        for v, ts in groups.items():
            if v is Variant.DEFAULT:
                continue
            pairs = [(base_by_id[t.record_id], t) for t in ts]
            ds = paired_bootstrap_ci([(a.score, c.score) for a, c in pairs], b, seed)
            proceed = [
                (float(a.decision is Decision.PROCEED), float(c.decision is Decision.PROCEED)) for a, c in pairs
            ]
            dp = paired_bootstrap_ci(proceed, b, seed)
            n = len(pairs)
            deltas[v.value] = {
                "delta_mean_score": {"value": ds.mean_delta, "ci95": [ds.ci_low, ds.ci_high]},
                "delta_proceed": {
                    "value": dp.mean_delta * n,
                    "ci95": [dp.ci_low * n, dp.ci_high * n],
                },
            }

    return {
        "n": len({t.record_id for t in traces}),
        "variants": variants,
        "deltas_vs_default": deltas,
        "bootstrap": {"resamples": b, "seed": seed, "interval": "percentile", "level": 0.95},
        "baseline_binary_score": "unweighted |G| / |C|",
        "audit": fingerprint_audit(traces).to_json(),
        "config": config.to_flat(),
        "seed": seed,
        **(meta or {}),
    }


def format_table(summary: dict[str, Any]) -> str:
    header = f"{'variant':<24}{'proceed':>8}{'regen':>7}{'replan':>8}{'mean S':>8}{'M4':>7}{'M5':>7}"
    lines = [header, "-" * len(header)]

    def fmt(x: float | None) -> str:
        return "  n/a" if x is None else f"{x:.2f}"

    for name, block in summary["variants"].items():
        h, m = block["histogram"], block["metrics"]
        lines.append(
            f"{name:<24}{h['proceed']:>8}{h['regenerate']:>7}{h['replan']:>8}"
            f"{fmt(block['mean_score']):>8}{fmt(m['M4']):>7}{fmt(m['M5']):>7}"
        )
    return "\n".join(lines)
