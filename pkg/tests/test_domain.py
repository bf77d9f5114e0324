from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsar.domain import (
    ClaimRef,
    Claim,
    ConfigError,
    DecisionStatus,
    EvidenceType,
    JudgeVerdict,
    Partition,
    PartitionError,
    PassageRef,
    SignalRef,
    StepOutputRef,
    ToolOutputRef,
    UnknownEvidenceType,
    WireFormatError,
    load_config,
    parse_evidence_type,
    validate_config,
)

from .factories import worked_example
from .strategies import partitions


def test_absent_config_gives_reference_defaults(monkeypatch):
    monkeypatch.delenv("GSAR_CONFIG", raising=False)
    cfg = load_config(None)
    expected = {
        "tool_match": 1.00, "specific_data": 0.95, "signal_match": 0.90, "complementary_finding": 0.85,
        "synthesis": 0.80, "neg_evidence": 0.70, "inference": 0.60, "domain": 0.60,
    }
    assert {t.value: w for t, w in cfg.weights.entries.items()} == expected
    assert (cfg.thresholds.tau_proceed, cfg.thresholds.tau_regenerate) == (0.80, 0.65)
    assert cfg.rho == 0.5 and cfg.k_max == 2 and cfg.empty_partition_score == 0.5


@pytest.mark.parametrize(
    "raw, message",
    [
        ({"tau_regenerate": 0.9, "tau_proceed": 0.8}, "threshold ordering"),
        ({"tau_regenerate": 0.0}, "threshold ordering"),
        ({"tau_proceed": 1.0}, "threshold ordering"),
        ({"rho": 1.2}, "rho out of range"),
        ({"rho": -0.1}, "rho out of range"),
        ({"weights.inference": 1.5}, "weight out of range"),
        ({"default_weight": -1}, "weight out of range"),
        ({"k_max": -1}, "k_max"),
        ({"weights.vibes": 0.3}, "unknown evidence type"),
        ({"tau": 0.3}, "unknown config keys"),
    ],
)
def test_config_rejects_invalid_values(raw, message):
    with pytest.raises(ConfigError, match=message):
        validate_config(raw)


def test_config_file_overrides_and_env_fallback(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"weights.inference": 0.3, "rho": 0.25, "k_max": 4, "empty_partition_score": 0.4}))
    cfg = load_config(path)
    assert cfg.weights[EvidenceType.INFERENCE] == 0.3
    assert cfg.weights[EvidenceType.TOOL_MATCH] == 1.0
    assert (cfg.rho, cfg.k_max, cfg.empty_partition_score) == (0.25, 4, 0.4)
    monkeypatch.setenv("GSAR_CONFIG", str(path))
    assert load_config(None) == cfg
    assert validate_config(cfg.to_flat()) == cfg


def test_nested_weights_are_accepted():
    assert validate_config({"weights": {"domain": 0.1}}).weights[EvidenceType.DOMAIN] == 0.1


def test_missing_config_file_is_an_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_unknown_evidence_labels_are_preserved():
    kind = parse_evidence_type("hunch")
    assert kind == UnknownEvidenceType("hunch")
    claim = Claim.from_wire({"text": "x", "type": "hunch", "evidence_refs": []})
    assert claim.to_wire()["type"] == "hunch"
    assert parse_evidence_type("domain") is EvidenceType.DOMAIN


def test_claim_text_must_be_non_blank():
    with pytest.raises(WireFormatError):
        Claim("   ")


def test_partition_rejects_duplicates_by_normalised_text():
    a = Claim("CPU  was HIGH", EvidenceType.TOOL_MATCH)
    b = Claim(" cpu was high ", EvidenceType.INFERENCE)
    with pytest.raises(PartitionError):
        Partition(grounded=(a,), contradicted=(b,))
    with pytest.raises(PartitionError):
        Partition(grounded=(a, b))


@pytest.mark.parametrize(
    "ref",
    [
        ToolOutputRef("prom", "step-1", "cpu.max"),
        StepOutputRef("db-agent", "step-2", "rows[0]"),
        SignalRef("alert-7", "labels.node"),
        ClaimRef("c-9"),
        PassageRef("gold:000001"),
    ],
)
def test_evidence_refs_round_trip(ref):
    claim = Claim("x happened", EvidenceType.SIGNAL_MATCH, (ref,))
    assert Claim.from_wire(json.loads(json.dumps(claim.to_wire()))) == claim


def test_evidence_ref_ids_must_be_non_empty():
    with pytest.raises(WireFormatError):
        ToolOutputRef("", "s", "f")
    with pytest.raises(WireFormatError):
        ClaimRef("")


def test_verdict_wire_shape_uses_exact_field_names():
    v = JudgeVerdict(0.7, True, worked_example(), gaps=("g",), explanation="e")
    wire = v.to_wire()
    assert list(wire) == [
        "grounding_score", "is_grounded", "grounded_claims", "ungrounded_claims", "contradicted_claims",
        "complementary_claims", "gaps", "contradictions", "verification_needed", "verification_reason",
        "explanation", "decision_status", "abstain_reason",
    ]
    assert JudgeVerdict.from_wire(json.loads(json.dumps(wire))) == v


def test_verdict_invariants():
    with pytest.raises(WireFormatError):
        JudgeVerdict(1.5, True, Partition())
    with pytest.raises(WireFormatError):
        JudgeVerdict(0.5, False, Partition(), decision_status=DecisionStatus.ABSTAIN)


@settings(max_examples=200, deadline=None)
@given(partitions(), st.floats(0, 1), st.booleans(), st.lists(st.text(max_size=10), max_size=3),
       st.one_of(st.none(), st.text(min_size=1, max_size=10)))
def test_verdict_round_trip_property(partition, score, grounded, gaps, reason):
    status = DecisionStatus.ABSTAIN if reason else DecisionStatus.RESOLVED
    v = JudgeVerdict(score, grounded, partition, gaps=tuple(gaps), decision_status=status, abstain_reason=reason,
                     verification_reason=reason)
    assert JudgeVerdict.from_wire(json.loads(json.dumps(v.to_wire()))) == v
