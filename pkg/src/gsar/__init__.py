"""Evidence-typed groundedness scoring with tiered recovery decisions."""

from .domain import (
    Claim,
    ConfigError,
    Decision,
    DecisionStatus,
    EvidenceType,
    GsarConfig,
    InvestigationResult,
    JudgeVerdict,
    Partition,
    Report,
    Thresholds,
    UnknownEvidenceType,
    WeightMap,
    load_config,
    validate_config,
)
from .scoring import ScoreBreakdown, decide, gsar_score, partition_weight

__all__ = [
    "Claim",
    "ConfigError",
    "Decision",
    "DecisionStatus",
    "EvidenceType",
    "GsarConfig",
    "InvestigationResult",
    "JudgeVerdict",
    "Partition",
    "Report",
    "ScoreBreakdown",
    "Thresholds",
    "UnknownEvidenceType",
    "WeightMap",
    "decide",
    "gsar_score",
    "load_config",
    "partition_weight",
    "validate_config",
]
