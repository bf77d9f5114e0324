from __future__ import annotations

import dataclasses
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsar.domain import Claim, Decision, EvidenceType, GsarConfig, Partition, Thresholds, UnknownEvidenceType, WeightMap
from gsar.scoring import decide, gsar_score, partition_weight

from .factories import C1, C2, DEFAULT_FRACTIONS, exact_score, worked_example
from .strategies import configs, partitions, types

DEFAULT = GsarConfig()


def test_partition_weight_of_worked_grounded_set():
    assert partition_weight([C1, C2], DEFAULT.weights) == pytest.approx(1.95, abs=1e-12)


def test_partition_weight_edge_cases():
    assert partition_weight([], DEFAULT.weights) == 0
    odd = Claim("an unlabelled observation", UnknownEvidenceType("hunch"))
    assert partition_weight([odd], WeightMap(default_weight=0.6)) == 0.6


def test_worked_example_matches_exact_oracle():
    b = gsar_score(worked_example(), DEFAULT)
    assert b.w_grounded == pytest.approx(1.95)
    assert b.w_ungrounded == pytest.approx(0.60)
    assert b.w_contradicted == pytest.approx(0.60)
    assert b.w_complementary == pytest.approx(0.85)
    assert b.numerator == pytest.approx(2.80)
    assert b.denominator == pytest.approx(3.70)
    assert b.score == pytest.approx(28 / 37, abs=1e-9)
    assert decide(b.score, DEFAULT.thresholds) is Decision.REGENERATE


def test_worked_example_without_contradiction_penalty():
    # 2.80 / (1.95 + 0.60 + 0 + 0.85) = 2.80 / 3.40
    b = gsar_score(worked_example(), dataclasses.replace(DEFAULT, rho=0.0))
    assert b.score == pytest.approx(14 / 17, abs=1e-9)


def test_empty_and_trivial_partitions():
    assert gsar_score(Partition(), DEFAULT).score == 0.5
    assert gsar_score(Partition(grounded=(C1,)), DEFAULT).score == 1.0
    zero = GsarConfig(weights=WeightMap({t: 0.0 for t in EvidenceType}, 0.0))
    assert gsar_score(Partition(ungrounded=(C1,)), zero).score == 0.5
    custom = dataclasses.replace(DEFAULT, empty_partition_score=0.3)
    assert gsar_score(Partition(), custom).score == 0.3


@pytest.mark.parametrize(
    "score, expected",
    [
        (0.7567, Decision.REGENERATE),
        (0.80, Decision.PROCEED),
        (0.64, Decision.REPLAN),
        (0.65, Decision.REGENERATE),
        (1.0, Decision.PROCEED),
        (0.0, Decision.REPLAN),
    ],
)
def test_decide_boundaries(score, expected):
    assert decide(score, Thresholds(0.80, 0.65)) is expected


@pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan")])
def test_decide_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        decide(bad, Thresholds())


@settings(max_examples=300, deadline=None)
@given(partitions(), configs())
def test_score_matches_rational_oracle(partition, config):
    weights = {t.value: Fraction(config.weights[t]) for t in EvidenceType}
    expected = exact_score(
        partition.grounded, partition.ungrounded, partition.contradicted, partition.complementary,
        weights, Fraction(config.rho), Fraction(config.weights.default_weight),
    )
    b = gsar_score(partition, config)
    assert b.score == pytest.approx(float(expected), abs=1e-12)
    assert 0.0 <= b.score <= 1.0
    assert b.numerator == pytest.approx(b.w_grounded + b.w_complementary, abs=1e-12)
    assert b.denominator == pytest.approx(
        b.w_grounded + b.w_ungrounded + config.rho * b.w_contradicted + b.w_complementary, abs=1e-12
    )


@settings(max_examples=300, deadline=None)
@given(partitions(), configs(), types)
def test_contradictions_never_raise_the_score(partition, config, t):
    before = gsar_score(partition, config).score
    extra = Claim("an extra contradicted claim", t)
    after = gsar_score(dataclasses.replace(partition, contradicted=partition.contradicted + (extra,)), config).score
    if gsar_score(partition, config).denominator > 0:
        assert after <= before + 1e-12


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.sampled_from([0, 1, 2, 3]), min_size=1, max_size=6),
    st.floats(1e-6, 1.0),
    st.floats(1e-6, 1.0),
    st.one_of(st.just(0.0), st.floats(1e-6, 1.0)),
)
def test_single_type_partitions_ignore_that_types_weight(classes, w1, w2, rho):
    # every claim shares one evidence type, so its weight cancels out of the ratio
    groups = [[], [], [], []]
    for i, c in enumerate(classes):
        groups[c].append(Claim(f"c{i}", EvidenceType.DOMAIN))
    part = Partition(*map(tuple, groups))
    s1 = gsar_score(part, GsarConfig(weights=WeightMap({EvidenceType.DOMAIN: w1}), rho=rho)).score
    s2 = gsar_score(part, GsarConfig(weights=WeightMap({EvidenceType.DOMAIN: w2}), rho=rho)).score
    assert s1 == pytest.approx(s2, abs=1e-12)


def test_scoring_sums_in_input_order_deterministically():
    p = worked_example()
    assert gsar_score(p, DEFAULT) == gsar_score(p, DEFAULT)
    assert DEFAULT_FRACTIONS["tool_match"] == 1
