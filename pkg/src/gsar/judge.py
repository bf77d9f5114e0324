"""Judge protocol: request/verdict plumbing, the robust output parser, and backends.

Three backends ship here:

* ``RuleBasedJudge`` routes a FEVER-shaped record by its gold label and the
  retrieved passages. Deterministic; used for demos and structural tests.
* ``ReplayJudge`` answers from a JSONL trace of recorded verdicts.
* ``HttpJudge`` posts a prompt to an endpoint and parses the raw reply.

Backends never raise on bad judge output; failures become abstain verdicts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any, NamedTuple, Protocol

import httpx

from .corpus import ClaimRecord, Document, claim_document_id
from .domain import (
    PARTITION_CLASSES,
    VERDICT_FIELDS,
    Claim,
    DecisionStatus,
    EvidenceType,
    GsarConfig,
    GsarError,
    JudgeVerdict,
    Partition,
    PassageRef,
    abstain_verdict,
    parse_evidence_type,
    ref_from_wire,
)
from .scoring import gsar_score

log = logging.getLogger(__name__)

DEFAULT_KAPPA = 0.55
UNPARSEABLE = "unparseable judge output"


@dataclass(frozen=True)
class LabeledEvidence:
    label: str
    text: str
    similarity: float | None = None
    document: Document | None = None


@dataclass(frozen=True)
class JudgeRequest:
    synthesis_text: str
    claims: tuple[Claim, ...] = ()
    evidence: tuple[LabeledEvidence, ...] = ()
    # lets gold-aware demo judges find their record; never shown to an LLM judge
    record_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "claims", tuple(self.claims))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        labels = [e.label for e in self.evidence]
        if len(labels) != len(set(labels)):
            raise GsarError("evidence labels must be unique within a request")

    @property
    def fingerprint(self) -> str:
        return request_fingerprint(self.synthesis_text, [e.label for e in self.evidence])


def request_fingerprint(synthesis_text: str, labels: Sequence[str]) -> str:
    payload = json.dumps([synthesis_text, sorted(labels)], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class JudgeBackend(Protocol):
    name: str

    def evaluate(self, request: JudgeRequest) -> JudgeVerdict: ...


# --- parsing -------------------------------------------------------------


class ParsedVerdict(NamedTuple):
    verdict: JudgeVerdict
    stage: int


def _first_json_object(text: str) -> dict[str, Any] | None:
    decoder = json.JSONDecoder()
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except (json.JSONDecodeError, RecursionError):
            pass
        else:
            if isinstance(obj, dict):
                return obj
        pos = text.find("{", pos + 1)
    return None


def _lenient_claim(item: Any) -> Claim:
    if isinstance(item, str):
        return Claim(item, EvidenceType.INFERENCE)
    if not isinstance(item, dict):
        raise ValueError(f"cannot coerce {type(item).__name__} into a claim")
    label = item.get("type", item.get("evidence_type", EvidenceType.INFERENCE.value))
    refs = item.get("evidence_refs") or []
    if not isinstance(refs, list):
        raise ValueError("evidence_refs must be a list")
    return Claim(item["text"], parse_evidence_type(label), tuple(ref_from_wire(r) for r in refs))


def _str_list(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    if not isinstance(value, list):
        raise ValueError("expected a list of strings")
    return tuple(str(v) for v in value)


def _opt_str(value: Any) -> str | None:
    return None if value is None else str(value)


def _lenient_verdict(obj: dict[str, Any]) -> JudgeVerdict:
    if not any(k in obj for k in VERDICT_FIELDS):
        raise ValueError("object carries no verdict fields")
    score = obj.get("grounding_score", 0.5)
    if isinstance(score, str):
        score = float(score)
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise ValueError("grounding_score must be a number")
    lists = {}
    for name in PARTITION_CLASSES:
        raw = obj.get(f"{name}_claims") or []
        if not isinstance(raw, list):
            raise ValueError(f"{name}_claims must be a list")
        lists[name] = tuple(_lenient_claim(c) for c in raw)
    partition = Partition(**lists)
    status = obj.get("decision_status", "resolved")
    status = DecisionStatus(status)
    abstain_reason = _opt_str(obj.get("abstain_reason"))
    if status is DecisionStatus.ABSTAIN and not abstain_reason:
        abstain_reason = "judge abstained without a reason"
    is_grounded = obj.get("is_grounded")
    if not isinstance(is_grounded, bool):
        is_grounded = bool(partition.grounded) and not partition.contradicted
    return JudgeVerdict(
        judge_score=float(score),
        is_grounded=is_grounded,
        partition=partition,
        gaps=_str_list(obj.get("gaps")),
        contradictions=_str_list(obj.get("contradictions")),
        verification_needed=bool(obj.get("verification_needed", False)),
        verification_reason=_opt_str(obj.get("verification_reason")),
        explanation=str(obj.get("explanation") or ""),
        decision_status=status,
        abstain_reason=abstain_reason,
        parse_stage=2,
    )


def parse_judge_output(raw: str) -> ParsedVerdict:
    """Strict schema parse, then lenient first-object parse, then the abstain default.

    Never raises.
    """
    if not isinstance(raw, str):
        raw = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else str(raw)
    try:
        return ParsedVerdict(JudgeVerdict.from_wire(json.loads(raw), parse_stage=1), 1)
    except Exception:
        pass
    try:
        obj = _first_json_object(raw)
        if obj is not None:
            return ParsedVerdict(_lenient_verdict(obj), 2)
    except Exception:
        pass
    return ParsedVerdict(abstain_verdict(UNPARSEABLE, parse_stage=3), 3)


# --- rule-based judge ----------------------------------------------------


def rule_based_judge(
    record: ClaimRecord,
    retrieved: Sequence[tuple[Document, float]],
    kappa: float = DEFAULT_KAPPA,
    config: GsarConfig | None = None,
) -> JudgeVerdict:
    """Single-atom verdict routed by gold label.

    SUPPORTS -> grounded, REFUTES -> contradicted, NOT ENOUGH INFO -> ungrounded,
    unless the nearest other claim in the retrieved set has cosine >= kappa, in
    which case the claim is complementary. The claim is typed ``specific_data``
    when a gold sentence was retrieved and ``inference`` otherwise.
    """
    config = config or GsarConfig()
    label = record.gold_label
    if label not in ("SUPPORTS", "REFUTES", "NOT ENOUGH INFO"):
        return abstain_verdict(f"unknown gold label {label!r}")

    gold_text = {e.sentence_text for e in record.gold_evidence}
    gold_hits = [doc for doc, _ in retrieved if doc.src == "gold" and doc.content in gold_text]
    if gold_hits:
        claim = Claim(record.claim_text, EvidenceType.SPECIFIC_DATA, (PassageRef(gold_hits[0].id),))
    else:
        claim = Claim(record.claim_text, EvidenceType.INFERENCE)

    own_id = claim_document_id(record)
    neighbours = [(d, s) for d, s in retrieved if d.src == "claim" and d.id != own_id]
    gaps: tuple[str, ...] = ()
    contradictions: tuple[str, ...] = ()
    if label == "SUPPORTS":
        partition = Partition(grounded=(claim,))
        explanation = "claim is supported by the retrieved evidence"
    elif label == "REFUTES":
        partition = Partition(contradicted=(claim,))
        contradictions = tuple(d.content for d in gold_hits) or ("claim conflicts with gold evidence",)
        explanation = "claim conflicts with the evidence"
    elif neighbours and neighbours[0][1] >= kappa:
        nb = neighbours[0][0]
        claim = Claim(record.claim_text, EvidenceType.COMPLEMENTARY_FINDING, (PassageRef(nb.id),))
        partition = Partition(complementary=(claim,))
        explanation = "claim offers a non-conflicting perspective related to a neighbouring claim"
    else:
        partition = Partition(ungrounded=(claim,))
        gaps = ("no supporting or refuting evidence retrieved",)
        explanation = "no evidence supports or refutes the claim"

    score = gsar_score(partition, config).score
    return JudgeVerdict(
        judge_score=score,
        is_grounded=bool(partition.grounded),
        partition=partition,
        gaps=gaps,
        contradictions=contradictions,
        verification_needed=bool(partition.ungrounded),
        verification_reason="claim lacks evidence" if partition.ungrounded else None,
        explanation=explanation,
    )


class RuleBasedJudge:
    """Backend wrapper around :func:`rule_based_judge`; needs the gold records."""

    name = "rule"

    def __init__(
        self,
        records: Sequence[ClaimRecord],
        kappa: float = DEFAULT_KAPPA,
        config: GsarConfig | None = None,
    ):
        self.records = {r.id: r for r in records}
        self.kappa = kappa
        self.config = config

    def evaluate(self, request: JudgeRequest) -> JudgeVerdict:
        record = self.records.get(request.record_id or "")
        if record is None:
            return abstain_verdict("rule-based judge has no gold record for this request")
        retrieved = [(e.document, e.similarity or 0.0) for e in request.evidence if e.document is not None]
        return rule_based_judge(record, retrieved, self.kappa, self.config)


# --- replay judge --------------------------------------------------------


class ReplayJudge:
    name = "replay"

    def __init__(self, verdicts: Mapping[str, JudgeVerdict], source: str = ""):
        self.verdicts = dict(verdicts)
        self.name = f"replay:{source}" if source else "replay"

    def evaluate(self, request: JudgeRequest) -> JudgeVerdict:
        verdict = self.verdicts.get(request.fingerprint)
        if verdict is None:
            return abstain_verdict("no recorded verdict")
        return verdict


def replay_judge(trace_path: str | os.PathLike) -> ReplayJudge:
    """Load ``{fingerprint, verdict}`` JSONL lines; later duplicates win with a warning."""
    verdicts: dict[str, JudgeVerdict] = {}
    with open(trace_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                fp = row["fingerprint"]
                verdict = JudgeVerdict.from_wire(row["verdict"], parse_stage=int(row.get("parse_stage", 1)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise GsarError(f"{trace_path} line {lineno}: bad replay record ({exc})") from None
            if fp in verdicts:
                log.warning("duplicate fingerprint %s at line %d; keeping the later record", fp[:12], lineno)
            verdicts[fp] = verdict
    return ReplayJudge(verdicts, str(trace_path))


def trace_line(request: JudgeRequest, verdict: JudgeVerdict, **extra: Any) -> str:
    row = {"fingerprint": request.fingerprint, "verdict": verdict.to_wire(), "parse_stage": verdict.parse_stage, **extra}
    return json.dumps(row, ensure_ascii=False, sort_keys=True)


# --- HTTP judge ----------------------------------------------------------

DEFAULT_PROMPT_TEMPLATE = """You are a grounding judge. Partition every claim in the synthesis into
grounded, ungrounded, contradicted, or complementary claims, using only the
labelled evidence below. Each claim is an object {"text", "type", "evidence_refs"}
where type is one of: tool_match, specific_data, signal_match, neg_evidence,
complementary_finding, synthesis, inference, domain.

Reply with one JSON object with exactly these fields:
grounding_score (0..1), is_grounded (bool), grounded_claims, ungrounded_claims,
contradicted_claims, complementary_claims, gaps (list of strings),
contradictions (list of strings), verification_needed (bool),
verification_reason (string or null), explanation (one sentence),
decision_status ("resolved" or "abstain"), abstain_reason (string or null).

Synthesis:
{synthesis}

Evidence:
{evidence}
"""


def render_prompt(template: str, request: JudgeRequest) -> str:
    evidence = "\n".join(f"[{e.label}] {e.text}" for e in request.evidence)
    return template.replace("{synthesis}", request.synthesis_text).replace("{evidence}", evidence)


class HttpJudge:
    def __init__(self, endpoint: str, prompt_template: str = DEFAULT_PROMPT_TEMPLATE, timeout: float = 30.0):
        self.endpoint = endpoint
        self.prompt_template = prompt_template
        self.timeout = timeout
        self.name = f"http:{endpoint}"

    def evaluate(self, request: JudgeRequest) -> JudgeVerdict:
        prompt = render_prompt(self.prompt_template, request)
        try:
            resp = httpx.post(self.endpoint, json={"prompt": prompt}, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            log.warning("judge endpoint %s failed: %s", self.endpoint, exc)
            return abstain_verdict(f"judge endpoint error: {type(exc).__name__}", parse_stage=3)
        return parse_judge_output(resp.text).verdict


def http_judge(endpoint: str, prompt_template: str = DEFAULT_PROMPT_TEMPLATE, timeout: float = 30.0) -> HttpJudge:
    return HttpJudge(endpoint, prompt_template, timeout)
