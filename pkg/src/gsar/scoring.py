"""Partition weights, the weighted groundedness score, and the three-tier decision."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

from .domain import Claim, Decision, GsarConfig, Partition, Thresholds, WeightMap


@dataclass(frozen=True)
class ScoreBreakdown:
    w_grounded: float
    w_ungrounded: float
    w_contradicted: float
    w_complementary: float
    numerator: float
    denominator: float
    score: float
    rho: float

    def to_json(self) -> dict[str, float]:
        return {
            "w_grounded": self.w_grounded,
            "w_ungrounded": self.w_ungrounded,
            "w_contradicted": self.w_contradicted,
            "w_complementary": self.w_complementary,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "score": self.score,
        }


def partition_weight(claims: Iterable[Claim], weights: WeightMap) -> float:
    """Sum of evidence-type weights; unknown types fall back to the default weight."""
    total = 0.0
    for claim in claims:
        total += weights[claim.evidence_type]
    return total


def gsar_score(partition: Partition, config: GsarConfig) -> ScoreBreakdown:
    """Score = (W(G) + W(K)) / (W(G) + W(U) + rho*W(X) + W(K)).

    A zero denominator (no claims, or only zero-weight claims) yields
    ``config.empty_partition_score``.
    """
    w = config.weights
    wg = partition_weight(partition.grounded, w)
    wu = partition_weight(partition.ungrounded, w)
    wx = partition_weight(partition.contradicted, w)
    wk = partition_weight(partition.complementary, w)
    num = wg + wk
    den = wg + wu + config.rho * wx + wk
    score = config.empty_partition_score if den == 0.0 else num / den
    return ScoreBreakdown(wg, wu, wx, wk, num, den, score, config.rho)


def decide(score: float, thresholds: Thresholds) -> Decision:
    if not isinstance(score, (int, float)) or math.isnan(score) or not 0.0 <= score <= 1.0:
        raise ValueError(f"score must be in [0, 1], got {score!r}")
    if score >= thresholds.tau_proceed:
        return Decision.PROCEED
    if score >= thresholds.tau_regenerate:
        return Decision.REGENERATE
    return Decision.REPLAN
