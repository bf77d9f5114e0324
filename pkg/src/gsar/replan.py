"""Bounded outer loop: judge, score, decide, then regenerate or replan.

The loop is driven by caller-supplied hooks standing in for the planner,
the specialist dispatch, and the summary rewriter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Protocol

from .domain import (
    Decision,
    GsarConfig,
    HistoryEntry,
    InvestigationResult,
    JudgeVerdict,
    Report,
)
from .judge import JudgeBackend, JudgeRequest, LabeledEvidence
from .scoring import decide, gsar_score

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Plan:
    payload: str
    revision: int = 0

    def revised(self, payload: str | None = None) -> Plan:
        return replace(self, payload=self.payload if payload is None else payload, revision=self.revision + 1)


class InvestigationHooks(Protocol):
    def initial_plan(self, signal: str) -> Plan: ...

    def dispatch_and_synthesize(self, plan: Plan) -> Report: ...

    def revise_plan(self, plan: Plan, report: Report, explanation: str) -> Plan: ...

    def regenerate_summary(self, report: Report, explanation: str) -> Report: ...


class HookError(RuntimeError):
    pass


def judge_request(report: Report) -> JudgeRequest:
    evidence = tuple(LabeledEvidence(label, text) for label, text in report.evidence)
    return JudgeRequest(report.synthesis_text, report.claims, evidence)


def _feedback(verdict: JudgeVerdict) -> str:
    if verdict.abstained:
        return f"gather more evidence before re-attempting synthesis ({verdict.abstain_reason})"
    return verdict.explanation


def run_investigation(
    signal: str,
    hooks: InvestigationHooks,
    judge: JudgeBackend,
    config: GsarConfig,
) -> InvestigationResult:
    """Run the outer loop until proceed or until the replan budget is spent.

    Abstain verdicts take the replan branch. A regenerate outcome that directly
    follows a regeneration is escalated to the replan branch, so at most one
    regeneration happens between replans. Exceptions from hooks or the judge end
    the run with ``degraded=True`` and the message in ``error``.
    """
    k = 0
    regenerations = 0
    degraded = False
    history: list[HistoryEntry] = []
    report = Report((), "", signal)
    score = config.empty_partition_score

    def evaluate(current: Report) -> tuple[JudgeVerdict, float, Decision]:
        verdict = judge.evaluate(judge_request(current))
        s = gsar_score(verdict.partition, config).score
        d = Decision.REPLAN if verdict.abstained else decide(s, config.thresholds)
        history.append(HistoryEntry(verdict, s, d))
        return verdict, s, d

    def result(error: str | None = None) -> InvestigationResult:
        return InvestigationResult(
            report=report,
            score=score,
            replans_used=k,
            degraded=degraded,
            regenerations_used=regenerations,
            verdict_history=tuple(history),
            error=error,
        )

    try:
        plan = hooks.initial_plan(signal)
        report = hooks.dispatch_and_synthesize(plan)
        verdict, score, decision = evaluate(report)
        just_regenerated = False
        while decision is not Decision.PROCEED:
            if decision is Decision.REPLAN or just_regenerated:
                if k >= config.k_max:
                    degraded = True
                    break
                new_plan = hooks.revise_plan(plan, report, _feedback(verdict))
                if new_plan.revision != plan.revision + 1:
                    raise HookError(
                        f"revise_plan must bump the revision by one ({plan.revision} -> {new_plan.revision})"
                    )
                plan = new_plan
                report = hooks.dispatch_and_synthesize(plan)
                k += 1
                just_regenerated = False
            else:
                report = hooks.regenerate_summary(report, _feedback(verdict))
                regenerations += 1
                just_regenerated = True
            verdict, score, decision = evaluate(report)
    except Exception as exc:  # noqa: BLE001 - degraded-but-honest beats crashing
        log.warning("investigation %r stopped early: %s", signal, exc)
        degraded = True
        return result(f"{type(exc).__name__}: {exc}")
    return result()
