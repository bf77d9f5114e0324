from __future__ import annotations

import pytest

from gsar.domain import Decision, GsarConfig, JudgeVerdict, Partition, Report
from gsar.replan import Plan, run_investigation

from .factories import C1, C2, C3, abstain, proceed_verdict, regenerate_verdict, replan_verdict, verdict


class Script:
    name = "script"

    def __init__(self, *verdicts: JudgeVerdict, fallback: JudgeVerdict | None = None):
        self.verdicts = list(verdicts)
        self.fallback = fallback
        self.calls = 0
        self.requests = []

    def evaluate(self, request):
        self.requests.append(request)
        self.calls += 1
        if self.verdicts:
            return self.verdicts.pop(0)
        if self.fallback is None:
            raise AssertionError("judge called more often than scripted")
        return self.fallback


class Hooks:
    def __init__(self, fail_on: str | None = None, bad_revision: bool = False):
        self.log: list[str] = []
        self.fail_on = fail_on
        self.bad_revision = bad_revision
        self.feedback: list[str] = []

    def _step(self, name):
        self.log.append(name)
        if name == self.fail_on:
            raise RuntimeError(f"{name} blew up")

    def initial_plan(self, signal):
        self._step("plan")
        return Plan(signal)

    def dispatch_and_synthesize(self, plan):
        self._step("dispatch")
        return Report((C1,), f"synthesis r{plan.revision}", "sig", (("doc:1", "cpu=97%"),))

    def revise_plan(self, plan, report, explanation):
        self._step("revise")
        self.feedback.append(explanation)
        return Plan(plan.payload, plan.revision + (2 if self.bad_revision else 1))

    def regenerate_summary(self, report, explanation):
        self._step("regenerate")
        self.feedback.append(explanation)
        return Report(report.claims, report.synthesis_text + "'", report.signal_id, report.evidence)


def run(judge, hooks=None, k_max=2):
    return run_investigation("sig", hooks or Hooks(), judge, GsarConfig(k_max=k_max))


def test_all_grounded_proceeds_without_replanning():
    judge = Script(proceed_verdict())
    res = run(judge)
    assert (res.replans_used, res.degraded, res.regenerations_used, res.score) == (0, False, 0, 1.0)
    assert judge.calls == 1 and res.error is None
    assert judge.requests[0].evidence[0].label == "doc:1"


def test_persistently_low_scores_exhaust_the_budget():
    judge = Script(fallback=replan_verdict())
    hooks = Hooks()
    res = run(judge, hooks, k_max=2)
    assert res.replans_used == 2 and res.degraded
    assert judge.calls == 3 == len(res.verdict_history)
    assert hooks.log == ["plan", "dispatch", "revise", "dispatch", "revise", "dispatch"]
    assert res.to_json()["final_decision"] == "replan"


def test_worked_example_regenerates_once_then_proceeds():
    judge = Script(regenerate_verdict(), verdict(Partition(grounded=(C1, C2))))
    hooks = Hooks()
    res = run(judge, hooks)
    assert res.replans_used == 0 and res.regenerations_used == 1 and not res.degraded
    assert [h.decision for h in res.verdict_history] == [Decision.REGENERATE, Decision.PROCEED]
    assert res.verdict_history[0].score == pytest.approx(28 / 37)
    assert hooks.feedback == ["synthesis is loose"]
    assert res.report.synthesis_text == "synthesis r0'"


def test_second_consecutive_regenerate_escalates_to_replan():
    judge = Script(regenerate_verdict(), regenerate_verdict(), proceed_verdict())
    hooks = Hooks()
    res = run(judge, hooks)
    assert res.regenerations_used == 1 and res.replans_used == 1 and not res.degraded
    assert hooks.log == ["plan", "dispatch", "regenerate", "revise", "dispatch"]


def test_abstain_forever_with_zero_budget_degrades_immediately():
    judge = Script(fallback=abstain())
    res = run(judge, k_max=0)
    assert res.degraded and res.replans_used == 0 and judge.calls == 1
    assert res.score == 0.5


def test_abstain_takes_replan_branch_even_with_grounded_partition():
    grounded_but_abstaining = JudgeVerdict(
        judge_score=1.0, is_grounded=True, partition=Partition(grounded=(C1,)),
        decision_status=abstain().decision_status, abstain_reason="unsure",
    )
    hooks = Hooks()
    res = run(Script(grounded_but_abstaining, proceed_verdict()), hooks)
    assert res.replans_used == 1
    assert res.verdict_history[0].decision is Decision.REPLAN
    assert "gather more evidence" in hooks.feedback[0]


def test_abstain_then_grounded_uses_one_replan():
    res = run(Script(abstain(), proceed_verdict()))
    assert res.replans_used == 1 and not res.degraded


@pytest.mark.parametrize("step", ["plan", "dispatch", "revise", "regenerate"])
def test_hook_errors_degrade_with_message(step):
    judge = Script(regenerate_verdict(), replan_verdict(), fallback=proceed_verdict())
    res = run(judge, Hooks(fail_on=step))
    assert res.degraded and step in res.error and "RuntimeError" in res.error


def test_judge_exception_degrades():
    res = run(Script())
    assert res.degraded and "AssertionError" in res.error


def test_revision_must_advance_by_one():
    res = run(Script(replan_verdict(), fallback=proceed_verdict()), Hooks(bad_revision=True))
    assert res.degraded and "HookError" in res.error


def test_negative_budget_is_rejected():
    with pytest.raises(ValueError):
        GsarConfig(k_max=-1)


def test_history_matches_judge_calls_and_k_bound():
    for k_max in range(4):
        judge = Script(regenerate_verdict(), fallback=verdict(Partition(ungrounded=(C3,))))
        res = run(judge, k_max=k_max)
        assert len(res.verdict_history) == judge.calls
        assert res.replans_used == k_max and res.degraded
