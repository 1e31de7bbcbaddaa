"""Phrase bank of noun phrases indexed by context embeddings, and reference retrieval."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import Document, Phrase, extract_noun_phrases, is_present
from .embedding import EmbeddingModel

BANK_FORMAT_VERSION = 1


@dataclass
class BankEntry:
    surface: tuple[str, ...]
    sum_vec: np.ndarray
    doc_count: int


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 15
    tau: float = 0.7
    absent_only: bool = True

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


@dataclass(frozen=True)
class Reference:
    phrase: Phrase
    score: float


class PhraseBank:
    """stem key -> (canonical surface, running sum of document embeddings, document count)."""

    def __init__(self, dim: int, min_df: int = 5):
        if min_df < 1:
            raise ValueError("min_df must be >= 1")
        self.dim = int(dim)
        self.min_df = int(min_df)
        self.entries: dict[str, BankEntry] = {}
        self._index: tuple[list[str], np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        """True for retrievable entries (doc_count >= min_df) only."""
        e = self.entries.get(key)
        return e is not None and e.doc_count >= self.min_df

    def context_embedding(self, key: str) -> np.ndarray:
        e = self.entries[key]
        c = e.sum_vec / e.doc_count
        n = np.linalg.norm(c)
        return c / n if n > 0 else c

    def retrievable_keys(self) -> list[str]:
        return sorted(k for k, e in self.entries.items() if e.doc_count >= self.min_df)

    def add_document(self, doc: Document, model: EmbeddingModel, max_len: int = 6) -> None:
        if model.dim != self.dim:
            raise ValueError(f"embedding dim {model.dim} does not match bank dim {self.dim}")
        phrases = extract_noun_phrases(doc.tokens, doc.tags, max_len)
        if not phrases:
            return
        v = model.embed_text(doc.tokens)
        for p in phrases:  # already unique per document
            e = self.entries.get(p.stem_key)
            if e is None:
                self.entries[p.stem_key] = BankEntry(p.tokens, v.copy(), 1)
            else:
                e.sum_vec += v
                e.doc_count += 1
        self._index = None

    def _sealed_index(self) -> tuple[list[str], np.ndarray]:
        if self._index is None:
            keys = self.retrievable_keys()
            mat = np.zeros((len(keys), self.dim))
            for r, k in enumerate(keys):
                mat[r] = self.context_embedding(k)
            self._index = (keys, mat)
        return self._index

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"dim": self.dim, "min_df": self.min_df, "version": BANK_FORMAT_VERSION}) + "\n")
            for key in sorted(self.entries):
                e = self.entries[key]
                fh.write(json.dumps({
                    "phrase": " ".join(e.surface),
                    "count": e.doc_count,
                    "sum": [float(x) for x in e.sum_vec],
                }) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PhraseBank":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("version") != BANK_FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported bank version {header.get('version')!r}")
            bank = cls(header["dim"], header["min_df"])
            for lineno, line in enumerate(fh, 2):
                if not line.strip():
                    continue
                row = json.loads(line)
                if len(row["sum"]) != bank.dim:
                    raise ValueError(f"{path}:{lineno}: sum vector has wrong dimension")
                p = Phrase(tuple(row["phrase"].split()))
                bank.entries[p.stem_key] = BankEntry(p.tokens, np.array(row["sum"], dtype=np.float64), int(row["count"]))
        return bank


def build_phrase_bank(corpus: Iterable[Document], model: EmbeddingModel, min_df: int = 5) -> PhraseBank:
    bank = PhraseBank(model.dim, min_df)
    return update_phrase_bank(bank, corpus, model)


def update_phrase_bank(bank: PhraseBank, corpus: Iterable[Document], model: EmbeddingModel) -> PhraseBank:
    """Fold new documents into ``bank`` in place (and return it)."""
    if model.dim != bank.dim:
        raise ValueError(f"embedding dim {model.dim} does not match bank dim {bank.dim}")
    for doc in corpus:
        bank.add_document(doc, model)
    return bank


def retrieve(
    bank: PhraseBank,
    doc: Document,
    model: EmbeddingModel,
    config: RetrievalConfig = RetrievalConfig(),
) -> list[Reference]:
    """Top-k bank phrases by cosine(context embedding, document embedding).

    Scores below ``tau`` are dropped, as are phrases present in ``doc`` when
    ``config.absent_only``. Ties are broken by stem key.
    """
    if config.k == 0:
        return []
    keys, mat = bank._sealed_index()
    if not keys:
        return []
    v = model.embed_text(doc.tokens)
    n = np.linalg.norm(v)
    scores = mat @ (v / n) if n > 0 else np.zeros(len(keys))
    candidates = np.flatnonzero(scores >= config.tau)
    # keys are sorted, so a stable sort on -score yields lexicographic tie-breaking
    order = candidates[np.argsort(-scores[candidates], kind="stable")]
    out = []
    for r in order:
        surface = bank.entries[keys[r]].surface
        if config.absent_only and is_present(surface, doc):
            continue
        out.append(Reference(Phrase(surface), float(scores[r])))
        if len(out) == config.k:
            break
    return out
