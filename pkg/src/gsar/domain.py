"""Shared value types, configuration loading, and JSON wire shapes.

Everything here is an immutable value. Validation happens at construction;
nothing is silently repaired.
"""

from __future__ import annotations

import json
import math
import os
import re
from functools import cached_property
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Union


class GsarError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(GsarError, ValueError):
    pass


class PartitionError(GsarError, ValueError):
    pass


class WireFormatError(GsarError, ValueError):
    """A JSON document does not match the expected wire shape."""


class EvidenceType(str, Enum):
    TOOL_MATCH = "tool_match"
    SPECIFIC_DATA = "specific_data"
    SIGNAL_MATCH = "signal_match"
    NEG_EVIDENCE = "neg_evidence"
    COMPLEMENTARY_FINDING = "complementary_finding"
    SYNTHESIS = "synthesis"
    INFERENCE = "inference"
    DOMAIN = "domain"


@dataclass(frozen=True)
class UnknownEvidenceType:
    """An evidence-type label outside the taxonomy; scored with the default weight."""

    label: str

    @property
    def value(self) -> str:
        return self.label


EvidenceKind = Union[EvidenceType, UnknownEvidenceType]

_KNOWN_TYPES = {t.value: t for t in EvidenceType}


def parse_evidence_type(label: str) -> EvidenceKind:
    if not isinstance(label, str):
        raise WireFormatError(f"evidence type must be a string, got {label!r}")
    return _KNOWN_TYPES.get(label, UnknownEvidenceType(label))


# --- evidence references -------------------------------------------------


def _require_ids(obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not isinstance(value, str) or not value:
            raise WireFormatError(f"{type(obj).__name__}.{name} must be a non-empty string")


@dataclass(frozen=True)
class ToolOutputRef:
    tool_id: str
    step_id: str
    field_path: str

    def __post_init__(self) -> None:
        _require_ids(self, "tool_id", "step_id", "field_path")


@dataclass(frozen=True)
class StepOutputRef:
    specialist_id: str
    step_id: str
    field_path: str

    def __post_init__(self) -> None:
        _require_ids(self, "specialist_id", "step_id", "field_path")


@dataclass(frozen=True)
class SignalRef:
    signal_id: str
    field_path: str

    def __post_init__(self) -> None:
        _require_ids(self, "signal_id", "field_path")


@dataclass(frozen=True)
class ClaimRef:
    claim_id: str

    def __post_init__(self) -> None:
        _require_ids(self, "claim_id")


@dataclass(frozen=True)
class PassageRef:
    document_id: str

    def __post_init__(self) -> None:
        _require_ids(self, "document_id")


EvidenceRef = Union[ToolOutputRef, StepOutputRef, SignalRef, ClaimRef, PassageRef]

_REF_KINDS: dict[str, type] = {
    "ToolOutputRef": ToolOutputRef,
    "StepOutputRef": StepOutputRef,
    "SignalRef": SignalRef,
    "ClaimRef": ClaimRef,
    "PassageRef": PassageRef,
}
_REF_FIELDS: dict[type, tuple[str, ...]] = {
    ToolOutputRef: ("tool_id", "step_id", "field_path"),
    StepOutputRef: ("specialist_id", "step_id", "field_path"),
    SignalRef: ("signal_id", "field_path"),
    ClaimRef: ("claim_id",),
    PassageRef: ("document_id",),
}


def ref_to_wire(ref: EvidenceRef) -> dict[str, str]:
    out = {"kind": type(ref).__name__}
    for name in _REF_FIELDS[type(ref)]:
        out[name] = getattr(ref, name)
    return out


def ref_from_wire(obj: Any) -> EvidenceRef:
    if not isinstance(obj, dict):
        raise WireFormatError(f"evidence ref must be an object, got {type(obj).__name__}")
    cls = _REF_KINDS.get(obj.get("kind"))
    if cls is None:
        raise WireFormatError(f"unknown evidence ref kind {obj.get('kind')!r}")
    names = _REF_FIELDS[cls]
    extra = set(obj) - set(names) - {"kind"}
    if extra:
        raise WireFormatError(f"unexpected fields in {cls.__name__}: {sorted(extra)}")
    try:
        return cls(**{name: obj[name] for name in names})
    except KeyError as exc:
        raise WireFormatError(f"{cls.__name__} missing field {exc}") from None


# --- claims and partitions ----------------------------------------------

_WS = re.compile(r"\s+")


def claim_key(text: str) -> str:
    """Identity used for disjointness: trimmed, whitespace-collapsed, case-folded."""
    return _WS.sub(" ", text.strip()).casefold()


@dataclass(frozen=True)
class Claim:
    text: str
    evidence_type: EvidenceKind = EvidenceType.INFERENCE
    evidence_refs: tuple[EvidenceRef, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise WireFormatError("claim text must be non-empty")
        if isinstance(self.evidence_type, str) and not isinstance(self.evidence_type, EvidenceType):
            object.__setattr__(self, "evidence_type", parse_evidence_type(self.evidence_type))
        object.__setattr__(self, "evidence_refs", tuple(self.evidence_refs))

    @cached_property
    def key(self) -> str:
        return claim_key(self.text)

    def to_wire(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "type": self.evidence_type.value,
            "evidence_refs": [ref_to_wire(r) for r in self.evidence_refs],
        }

    @classmethod
    def from_wire(cls, obj: Any) -> Claim:
        if not isinstance(obj, dict):
            raise WireFormatError(f"claim must be an object, got {type(obj).__name__}")
        extra = set(obj) - {"text", "type", "evidence_refs"}
        if extra:
            raise WireFormatError(f"unexpected claim fields: {sorted(extra)}")
        try:
            text, label, refs = obj["text"], obj["type"], obj["evidence_refs"]
        except KeyError as exc:
            raise WireFormatError(f"claim missing field {exc}") from None
        if not isinstance(refs, list):
            raise WireFormatError("evidence_refs must be a list")
        return cls(text, parse_evidence_type(label), tuple(ref_from_wire(r) for r in refs))


PARTITION_CLASSES = ("grounded", "ungrounded", "contradicted", "complementary")


@dataclass(frozen=True)
class Partition:
    grounded: tuple[Claim, ...] = ()
    ungrounded: tuple[Claim, ...] = ()
    contradicted: tuple[Claim, ...] = ()
    complementary: tuple[Claim, ...] = ()

    def __post_init__(self) -> None:
        seen: dict[str, str] = {}
        for name in PARTITION_CLASSES:
            claims = tuple(getattr(self, name))
            object.__setattr__(self, name, claims)
            for claim in claims:
                if not isinstance(claim, Claim):
                    raise PartitionError(f"{name} contains a non-Claim value {claim!r}")
                key = claim.key
                if key in seen:
                    raise PartitionError(f"claim {claim.text!r} appears in both {seen[key]} and {name}")
                seen[key] = name

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (
            len(self.grounded),
            len(self.ungrounded),
            len(self.contradicted),
            len(self.complementary),
        )

    def __len__(self) -> int:
        return sum(self.counts)

    def atoms(self) -> list[tuple[str, str, str]]:
        """(text, class, evidence_type) for every claim, in class order."""
        return [
            (c.text, name, c.evidence_type.value)
            for name in PARTITION_CLASSES
            for c in getattr(self, name)
        ]


# --- judge verdict -------------------------------------------------------


class DecisionStatus(str, Enum):
    RESOLVED = "resolved"
    ABSTAIN = "abstain"


VERDICT_FIELDS = (
    "grounding_score",
    "is_grounded",
    "grounded_claims",
    "ungrounded_claims",
    "contradicted_claims",
    "complementary_claims",
    "gaps",
    "contradictions",
    "verification_needed",
    "verification_reason",
    "explanation",
    "decision_status",
    "abstain_reason",
)


def _is_real(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass(frozen=True)
class JudgeVerdict:
    judge_score: float
    is_grounded: bool
    partition: Partition
    gaps: tuple[str, ...] = ()
    contradictions: tuple[str, ...] = ()
    verification_needed: bool = False
    verification_reason: str | None = None
    explanation: str = ""
    decision_status: DecisionStatus = DecisionStatus.RESOLVED
    abstain_reason: str | None = None
    # telemetry only: 0 = built in-process, 1-3 = parser stage that produced it
    parse_stage: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if not _is_real(self.judge_score) or not 0.0 <= self.judge_score <= 1.0:
            raise WireFormatError(f"judge_score must be in [0, 1], got {self.judge_score!r}")
        object.__setattr__(self, "decision_status", DecisionStatus(self.decision_status))
        object.__setattr__(self, "gaps", tuple(self.gaps))
        object.__setattr__(self, "contradictions", tuple(self.contradictions))
        if self.decision_status is DecisionStatus.ABSTAIN and not self.abstain_reason:
            raise WireFormatError("abstain verdicts require an abstain_reason")

    @property
    def abstained(self) -> bool:
        return self.decision_status is DecisionStatus.ABSTAIN

    def to_wire(self) -> dict[str, Any]:
        p = self.partition
        return {
            "grounding_score": self.judge_score,
            "is_grounded": self.is_grounded,
            "grounded_claims": [c.to_wire() for c in p.grounded],
            "ungrounded_claims": [c.to_wire() for c in p.ungrounded],
            "contradicted_claims": [c.to_wire() for c in p.contradicted],
            "complementary_claims": [c.to_wire() for c in p.complementary],
            "gaps": list(self.gaps),
            "contradictions": list(self.contradictions),
            "verification_needed": self.verification_needed,
            "verification_reason": self.verification_reason,
            "explanation": self.explanation,
            "decision_status": self.decision_status.value,
            "abstain_reason": self.abstain_reason,
        }

    @classmethod
    def from_wire(cls, obj: Any, parse_stage: int = 0) -> JudgeVerdict:
        """Strict parse: every wire field present with the right type."""
        if not isinstance(obj, dict):
            raise WireFormatError("verdict must be a JSON object")
        missing = [k for k in VERDICT_FIELDS if k not in obj]
        extra = sorted(set(obj) - set(VERDICT_FIELDS))
        if missing or extra:
            raise WireFormatError(f"verdict fields: missing={missing} unexpected={extra}")
        for name in ("is_grounded", "verification_needed"):
            if not isinstance(obj[name], bool):
                raise WireFormatError(f"{name} must be a boolean")
        for name in ("gaps", "contradictions"):
            if not isinstance(obj[name], list) or not all(isinstance(s, str) for s in obj[name]):
                raise WireFormatError(f"{name} must be a list of strings")
        for name in ("verification_reason", "abstain_reason"):
            if obj[name] is not None and not isinstance(obj[name], str):
                raise WireFormatError(f"{name} must be a string or null")
        if not isinstance(obj["explanation"], str):
            raise WireFormatError("explanation must be a string")
        if obj["decision_status"] not in ("resolved", "abstain"):
            raise WireFormatError("decision_status must be 'resolved' or 'abstain'")
        lists = {}
        for name in PARTITION_CLASSES:
            raw = obj[f"{name}_claims"]
            if not isinstance(raw, list):
                raise WireFormatError(f"{name}_claims must be a list")
            lists[name] = tuple(Claim.from_wire(c) for c in raw)
        return cls(
            judge_score=obj["grounding_score"],
            is_grounded=obj["is_grounded"],
            partition=Partition(**lists),
            gaps=tuple(obj["gaps"]),
            contradictions=tuple(obj["contradictions"]),
            verification_needed=obj["verification_needed"],
            verification_reason=obj["verification_reason"],
            explanation=obj["explanation"],
            decision_status=DecisionStatus(obj["decision_status"]),
            abstain_reason=obj["abstain_reason"],
            parse_stage=parse_stage,
        )


def abstain_verdict(reason: str, parse_stage: int = 0) -> JudgeVerdict:
    """Safe default: neutral score, empty partition, abstain."""
    return JudgeVerdict(
        judge_score=0.5,
        is_grounded=False,
        partition=Partition(),
        explanation=reason,
        decision_status=DecisionStatus.ABSTAIN,
        abstain_reason=reason,
        parse_stage=parse_stage,
    )


# --- configuration -------------------------------------------------------

DEFAULT_WEIGHTS: dict[EvidenceType, float] = {
    EvidenceType.TOOL_MATCH: 1.00,
    EvidenceType.SPECIFIC_DATA: 0.95,
    EvidenceType.SIGNAL_MATCH: 0.90,
    EvidenceType.COMPLEMENTARY_FINDING: 0.85,
    EvidenceType.SYNTHESIS: 0.80,
    EvidenceType.NEG_EVIDENCE: 0.70,
    EvidenceType.INFERENCE: 0.60,
    EvidenceType.DOMAIN: 0.60,
}
DEFAULT_UNKNOWN_WEIGHT = 0.60
DEFAULT_RHO = 0.5
DEFAULT_TAU_PROCEED = 0.80
DEFAULT_TAU_REGENERATE = 0.65
DEFAULT_K_MAX = 2
DEFAULT_EMPTY_SCORE = 0.5


def _unit_interval(value: Any, what: str, subject: Any = None) -> float:
    if not _is_real(value) or not 0.0 <= value <= 1.0:
        where = "" if subject is None else f" for {getattr(subject, 'value', subject)}"
        raise ConfigError(f"{what} out of range [0, 1]{where}: {value!r}")
    return float(value)


@dataclass(frozen=True)
class WeightMap:
    entries: Mapping[EvidenceType, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    default_weight: float = DEFAULT_UNKNOWN_WEIGHT

    def __post_init__(self) -> None:
        entries = {}
        for kind, w in dict(self.entries).items():
            entries[EvidenceType(kind)] = _unit_interval(w, "weight", kind)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(
            self, "default_weight", _unit_interval(self.default_weight, "weight", "default")
        )

    def __getitem__(self, kind: EvidenceKind) -> float:
        # unknown kinds never match an entry key, so they get the default
        return self.entries.get(kind, self.default_weight)

    def uniform(self, value: float = 1.0) -> WeightMap:
        return WeightMap({t: value for t in EvidenceType}, value)


@dataclass(frozen=True)
class Thresholds:
    tau_proceed: float = DEFAULT_TAU_PROCEED
    tau_regenerate: float = DEFAULT_TAU_REGENERATE

    def __post_init__(self) -> None:
        p, r = self.tau_proceed, self.tau_regenerate
        if not (_is_real(p) and _is_real(r)) or not 0.0 < r < p < 1.0:
            raise ConfigError(
                f"threshold ordering violated: need 0 < tau_regenerate ({r!r}) "
                f"< tau_proceed ({p!r}) < 1"
            )


@dataclass(frozen=True)
class GsarConfig:
    weights: WeightMap = field(default_factory=WeightMap)
    rho: float = DEFAULT_RHO
    thresholds: Thresholds = field(default_factory=Thresholds)
    k_max: int = DEFAULT_K_MAX
    empty_partition_score: float = DEFAULT_EMPTY_SCORE

    def __post_init__(self) -> None:
        if not _is_real(self.rho) or not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho out of range [0, 1]: {self.rho!r}")
        if isinstance(self.k_max, bool) or not isinstance(self.k_max, int) or self.k_max < 0:
            raise ConfigError(f"k_max must be a non-negative integer: {self.k_max!r}")
        _unit_interval(self.empty_partition_score, "empty_partition_score")

    def to_flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {f"weights.{t.value}": w for t, w in self.weights.entries.items()}
        out.update(
            default_weight=self.weights.default_weight,
            rho=self.rho,
            tau_proceed=self.thresholds.tau_proceed,
            tau_regenerate=self.thresholds.tau_regenerate,
            k_max=self.k_max,
            empty_partition_score=self.empty_partition_score,
        )
        return out


_SCALAR_KEYS = {"default_weight", "rho", "tau_proceed", "tau_regenerate", "k_max", "empty_partition_score"}


def validate_config(raw: Mapping[str, Any] | None = None) -> GsarConfig:
    """Build a config from a flat key/value record, filling absent keys with defaults.

    Weight keys are ``weights.<type>``; a nested ``{"weights": {...}}`` object is
    accepted too.
    """
    raw = dict(raw or {})
    if isinstance(raw.get("weights"), dict):
        for label, w in raw.pop("weights").items():
            raw[f"weights.{label}"] = w
    weights = dict(DEFAULT_WEIGHTS)
    for key in list(raw):
        if key.startswith("weights."):
            label = key[len("weights."):]
            if label not in _KNOWN_TYPES:
                raise ConfigError(f"unknown evidence type in config: {label!r}")
            weights[_KNOWN_TYPES[label]] = _unit_interval(raw.pop(key), "weight", label)
    unknown = set(raw) - _SCALAR_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    k_max = raw.get("k_max", DEFAULT_K_MAX)
    if isinstance(k_max, float) and k_max.is_integer():
        k_max = int(k_max)
    return GsarConfig(
        weights=WeightMap(weights, raw.get("default_weight", DEFAULT_UNKNOWN_WEIGHT)),
        rho=raw.get("rho", DEFAULT_RHO),
        thresholds=Thresholds(
            raw.get("tau_proceed", DEFAULT_TAU_PROCEED),
            raw.get("tau_regenerate", DEFAULT_TAU_REGENERATE),
        ),
        k_max=k_max,
        empty_partition_score=raw.get("empty_partition_score", DEFAULT_EMPTY_SCORE),
    )


def load_config(path: str | os.PathLike | None = None) -> GsarConfig:
    """Load a JSON config file; ``None`` falls back to $GSAR_CONFIG, then defaults."""
    if path is None:
        path = os.environ.get("GSAR_CONFIG") or None
    if path is None:
        return validate_config({})
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return validate_config(raw)


# --- decisions and investigation results ---------------------------------


class Decision(str, Enum):
    PROCEED = "proceed"
    REGENERATE = "regenerate"
    REPLAN = "replan"


@dataclass(frozen=True)
class Report:
    claims: tuple[Claim, ...]
    synthesis_text: str
    signal_id: str
    # labelled evidence handed to the judge alongside the synthesis
    evidence: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "claims", tuple(self.claims))
        object.__setattr__(self, "evidence", tuple(tuple(e) for e in self.evidence))


@dataclass(frozen=True)
class HistoryEntry:
    verdict: JudgeVerdict
    score: float
    decision: Decision


@dataclass(frozen=True)
class InvestigationResult:
    report: Report
    score: float
    replans_used: int
    degraded: bool
    regenerations_used: int
    verdict_history: tuple[HistoryEntry, ...]
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "score": self.score,
            "replans_used": self.replans_used,
            "degraded": self.degraded,
            "regenerations_used": self.regenerations_used,
            "final_decision": self.verdict_history[-1].decision.value if self.verdict_history else None,
            "score_trajectory": [h.score for h in self.verdict_history],
            "decision_trajectory": [h.decision.value for h in self.verdict_history],
            "error": self.error,
            "report": {
                "signal_id": self.report.signal_id,
                "synthesis_text": self.report.synthesis_text,
                "claims": [c.to_wire() for c in self.report.claims],
            },
        }
