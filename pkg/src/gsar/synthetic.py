"""Deterministic FEVER-shaped toy corpora.

Each record is one of four kinds: SUPPORTS and REFUTES claims with a gold
sentence sharing most of their tokens; NOT ENOUGH INFO claims generated in
pairs that paraphrase each other (so each is the other's near neighbour);
and isolated NOT ENOUGH INFO claims built from unique vocabulary.
"""

from __future__ import annotations

import random

from .corpus import ClaimRecord, GoldEvidence

KINDS = ("supports", "refutes", "nei_pair", "nei_alone")
_CONSONANTS = "bcdfghklmnprstvz"
_VOWELS = "aeiou"
_TOPICS = ("jazz", "rowing", "geology", "cartography", "botany", "opera", "chess", "weaving")
_CITIES = ("Lisbon", "Osaka", "Quito", "Tallinn", "Accra", "Perth", "Bergen", "Cusco")


def _word(rng: random.Random, syllables: int = 3) -> str:
    return "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syllables))


def make_records(
    n: int,
    seed: int = 0,
    mix: tuple[float, float, float, float] = (0.3, 0.3, 0.2, 0.2),
) -> list[ClaimRecord]:
    """``n`` records with kind proportions ``mix`` (supports, refutes, nei_pair, nei_alone).

    Records carry ``gold_complementary`` annotations: True for paired NEI claims.
    """
    rng = random.Random(seed)
    counts = [int(round(n * f)) for f in mix]
    counts[2] -= counts[2] % 2
    counts[0] += n - sum(counts)
    records: list[ClaimRecord] = []
    used: set[str] = set()

    def fresh(syllables: int = 3) -> str:
        while True:
            w = _word(rng, syllables)
            if w not in used:
                used.add(w)
                return w

    def rid() -> str:
        return f"syn-{len(records):05d}"

    for _ in range(counts[0]):
        name, year = fresh().capitalize(), rng.randint(1800, 2000)
        founder = fresh().capitalize()
        gold = f"{name} was founded in {year} by {founder}."
        records.append(
            ClaimRecord(rid(), f"{name} was founded in {year}.", "SUPPORTS",
                        (GoldEvidence(name, 0, gold),), "VERIFIABLE", False)
        )
    for _ in range(counts[1]):
        name, year = fresh().capitalize(), rng.randint(1800, 2000)
        gold = f"{name} was established in {year} and has operated ever since."
        records.append(
            ClaimRecord(rid(), f"{name} was established in {year + rng.randint(5, 50)}.", "REFUTES",
                        (GoldEvidence(name, 1, gold),), "VERIFIABLE", False)
        )
    for _ in range(counts[2] // 2):
        name = fresh().capitalize()
        topic, city = rng.choice(_TOPICS), rng.choice(_CITIES)
        first = f"{name} is associated with the {topic} community."
        second = f"{name} is widely associated with the {topic} community in {city}."
        for text in (first, second):
            records.append(ClaimRecord(rid(), text, "NOT ENOUGH INFO", (), "NOT VERIFIABLE", True))
    for _ in range(counts[3]):
        text = " ".join(fresh() for _ in range(4)).capitalize() + "."
        records.append(ClaimRecord(rid(), text, "NOT ENOUGH INFO", (), "NOT VERIFIABLE", False))

    order = list(range(len(records)))
    rng.shuffle(order)
    return [
        ClaimRecord(f"syn-{i:05d}", r.claim_text, r.gold_label, r.gold_evidence, r.verifiable, r.gold_complementary)
        for i, r in enumerate(records[j] for j in order)
    ]
