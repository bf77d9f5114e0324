"""FEVER-shaped dataset ingestion and a small in-memory cosine vector store."""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .domain import GsarError

LABELS = ("SUPPORTS", "REFUTES", "NOT ENOUGH INFO")
VERIFIABILITY = ("VERIFIABLE", "NOT VERIFIABLE")
DEFAULT_DIM = 256

_TOKEN = re.compile(r"[^\W_]+")


class DatasetError(GsarError, ValueError):
    pass


class DimensionError(GsarError, ValueError):
    pass


@dataclass(frozen=True)
class GoldEvidence:
    page_title: str
    sentence_id: int
    sentence_text: str


@dataclass(frozen=True)
class ClaimRecord:
    id: str
    claim_text: str
    gold_label: str
    gold_evidence: tuple[GoldEvidence, ...] = ()
    verifiable: str = "VERIFIABLE"
    # optional annotation for synthetic corpora: the claim is a gold complementary claim
    gold_complementary: bool | None = None

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "id": self.id,
            "claim": self.claim_text,
            "label": self.gold_label,
            "evidence": [[e.page_title, e.sentence_id, e.sentence_text] for e in self.gold_evidence],
            "verifiable": self.verifiable,
        }
        if self.gold_complementary is not None:
            row["complementary"] = self.gold_complementary
        return row


def parse_row(row: Any, lineno: int = 0) -> ClaimRecord:
    where = f"line {lineno}: " if lineno else ""
    if not isinstance(row, dict):
        raise DatasetError(f"{where}row must be a JSON object")
    for key in ("id", "claim", "label", "evidence"):
        if key not in row:
            raise DatasetError(f"{where}missing required key {key!r}")
    label = row["label"]
    if label not in LABELS:
        raise DatasetError(f"{where}unknown label {label!r}")
    if not isinstance(row["claim"], str) or not row["claim"].strip():
        raise DatasetError(f"{where}claim must be a non-empty string")
    evidence = []
    if not isinstance(row["evidence"], list):
        raise DatasetError(f"{where}evidence must be a list")
    for item in row["evidence"]:
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 3
            or not isinstance(item[0], str)
            or isinstance(item[1], bool)
            or not isinstance(item[1], int)
            or not isinstance(item[2], str)
        ):
            raise DatasetError(f"{where}evidence items must be [page_title, sentence_id, sentence_text]")
        evidence.append(GoldEvidence(item[0], item[1], item[2]))
    if label != "NOT ENOUGH INFO" and not evidence:
        raise DatasetError(f"{where}{label} rows need gold evidence")
    verifiable = row.get("verifiable", "NOT VERIFIABLE" if label == "NOT ENOUGH INFO" else "VERIFIABLE")
    if verifiable not in VERIFIABILITY:
        raise DatasetError(f"{where}unknown verifiable value {verifiable!r}")
    comp = row.get("complementary")
    if comp is not None and not isinstance(comp, bool):
        raise DatasetError(f"{where}complementary must be a boolean")
    return ClaimRecord(str(row["id"]), row["claim"], label, tuple(evidence), verifiable, comp)


def load_dataset(path: str | os.PathLike, n: int, seed: int = 42) -> list[ClaimRecord]:
    """Read a JSONL dataset and draw a seeded sample of ``n`` records (file order kept)."""
    if n < 0:
        raise DatasetError(f"n must be non-negative, got {n}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            records.append(parse_row(row, lineno))
    if n > len(records):
        raise DatasetError(f"requested n={n} but {path} holds only {len(records)} records")
    picked = sorted(random.Random(seed).sample(range(len(records)), n))
    return [records[i] for i in picked]


def write_dataset(path: str | os.PathLike, records: list[ClaimRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_row()) + "\n")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def embed_text(text: str, dimension: int = DEFAULT_DIM) -> np.ndarray:
    """Signed feature-hashing bag of tokens, L2-normalised. Empty input gives zeros."""
    if dimension < 8:
        raise DimensionError(f"dimension must be >= 8, got {dimension}")
    vec = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
        vec[h % dimension] += 1.0 if (h >> 63) & 1 else -1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class Document:
    id: str
    content: str
    embedding: np.ndarray = field(compare=False, repr=False)
    src: str = "claim"
    claim_id: int = 0
    label: str | None = None

    def __post_init__(self) -> None:
        if self.src not in ("claim", "gold"):
            raise DatasetError(f"document src must be 'claim' or 'gold', got {self.src!r}")

    @property
    def metadata(self) -> dict[str, Any]:
        meta: dict[str, Any] = {"src": self.src, "claim_id": self.claim_id}
        if self.label is not None:
            meta["label"] = self.label
        return meta


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class VectorStore:
    """Exhaustive-scan cosine store. Index first, then query from any thread."""

    def __init__(self, dimension: int = DEFAULT_DIM):
        if dimension < 1:
            raise DimensionError("dimension must be positive")
        self.dimension = dimension
        self.documents: list[Document] = []
        self._ids: set[str] = set()
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.documents)

    def add(self, doc: Document) -> None:
        if doc.embedding.shape != (self.dimension,):
            raise DimensionError(
                f"document {doc.id} has embedding shape {doc.embedding.shape}, store expects ({self.dimension},)"
            )
        if doc.id in self._ids:
            raise DatasetError(f"duplicate document id {doc.id!r}")
        self.documents.append(doc)
        self._ids.add(doc.id)
        self._matrix = None

    def _normalised(self) -> np.ndarray:
        if self._matrix is None:
            m = np.array([d.embedding for d in self.documents], dtype=np.float64).reshape(-1, self.dimension)
            norms = np.linalg.norm(m, axis=1, keepdims=True)
            self._matrix = np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)
        return self._matrix

    def top_k(self, query: np.ndarray, k: int) -> list[tuple[Document, float]]:
        """Highest-cosine documents first; equal similarities ordered by document id."""
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dimension,):
            raise DimensionError(f"query shape {query.shape} does not match store dimension {self.dimension}")
        qn = np.linalg.norm(query)
        if qn == 0 or not self.documents:
            return []
        sims = self._normalised() @ (query / qn)
        order = sorted(range(len(self.documents)), key=lambda i: (-sims[i], self.documents[i].id))
        return [(self.documents[i], float(sims[i])) for i in order[:k]]


def top_k(store: VectorStore, query: np.ndarray, k: int) -> list[tuple[Document, float]]:
    return store.top_k(query, k)


def claim_document_id(record: ClaimRecord) -> str:
    return f"claim:{record.id}"


def index_records(store: VectorStore, records: list[ClaimRecord]) -> int:
    """Insert one document per claim and one per distinct gold sentence text."""
    inserted = 0
    seen_gold = {d.content for d in store.documents if d.src == "gold"}
    gold_count = sum(1 for d in store.documents if d.src == "gold")
    for idx, rec in enumerate(records):
        store.add(
            Document(
                claim_document_id(rec),
                rec.claim_text,
                embed_text(rec.claim_text, store.dimension),
                src="claim",
                claim_id=idx,
                label=rec.gold_label,
            )
        )
        inserted += 1
        for ev in rec.gold_evidence:
            if ev.sentence_text in seen_gold:
                continue
            seen_gold.add(ev.sentence_text)
            store.add(
                Document(
                    f"gold:{gold_count:06d}",
                    ev.sentence_text,
                    embed_text(ev.sentence_text, store.dimension),
                    src="gold",
                    claim_id=idx,
                )
            )
            gold_count += 1
            inserted += 1
    return inserted


def build_store(records: list[ClaimRecord], dimension: int = DEFAULT_DIM) -> VectorStore:
    store = VectorStore(dimension)
    index_records(store, records)
    return store
