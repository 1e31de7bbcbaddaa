"""Word-vector table with additive (unigram-mean) text embeddings."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


class VectorFileError(ValueError):
    pass


class EmbeddingModel:
    """Read-only word -> vector table.

    With ``normalize=True`` (the default) every stored vector and every text
    embedding has unit L2 norm, so dot products are cosines. ``normalize=False``
    keeps raw vectors and raw means; similarities are then unbounded above.
    """

    def __init__(self, words: Sequence[str], vectors: np.ndarray, normalize: bool = True):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise ValueError("vectors must be a (len(words), dim) array")
        if normalize:
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            vectors = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)
        self.normalize = normalize
        self.words = list(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.vectors = vectors
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def lookup(self, word: str) -> np.ndarray | None:
        """Vector for ``word``, or None when out of vocabulary."""
        i = self.index.get(word)
        return None if i is None else self.vectors[i]

    def embed_text(self, tokens: Sequence[str]) -> np.ndarray:
        ids = [self.index[t] for t in tokens if t in self.index]
        if not ids:
            return np.zeros(self.dim)
        v = self.vectors[ids].mean(axis=0)
        if self.normalize:
            n = np.linalg.norm(v)
            return v / n if n > 0 else v
        return v

    def embed_words(self, words: Sequence[str]) -> np.ndarray:
        """Row per word; zero rows for OOV words."""
        out = np.zeros((len(words), self.dim))
        for r, w in enumerate(words):
            i = self.index.get(w)
            if i is not None:
                out[r] = self.vectors[i]
        return out

    def similarity(self, a_tokens: Sequence[str], b_tokens: Sequence[str]) -> float:
        return clamped_dot(self.embed_text(a_tokens), self.embed_text(b_tokens))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.words)} {self.dim}\n")
            for w, v in zip(self.words, self.vectors):
                fh.write(w + " " + " ".join(repr(float(x)) for x in v) + "\n")


def clamped_dot(u: np.ndarray, v: np.ndarray) -> float:
    return max(0.0, float(u @ v))


def embed_text(model: EmbeddingModel, tokens: Sequence[str]) -> np.ndarray:
    return model.embed_text(tokens)


def similarity(a_tokens: Sequence[str], b_tokens: Sequence[str], model: EmbeddingModel) -> float:
    return model.similarity(a_tokens, b_tokens)


def load_vectors(path: str | Path, normalize: bool = True) -> EmbeddingModel:
    """Read a text vector file: optional "<count> <dim>" header, then "word f1 ... fdim"."""
    words: list[str] = []
    rows: list[list[float]] = []
    position: dict[str, int] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            word, values = parts[0], parts[1:]
            try:
                vec = [float(x) for x in values]
            except ValueError:
                raise VectorFileError(f"{path}:{lineno}: non-numeric value in row") from None
            if not vec:
                raise VectorFileError(f"{path}:{lineno}: row has no values")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise VectorFileError(
                    f"{path}:{lineno}: expected {dim} values, got {len(vec)}"
                )
            if word in position:
                logger.warning("%s:%d: duplicate word %r, keeping the last row", path, lineno, word)
                rows[position[word]] = vec
            else:
                position[word] = len(words)
                words.append(word)
                rows.append(vec)
    if dim is None:
        raise VectorFileError(f"{path}: no vectors found")
    return EmbeddingModel(words, np.array(rows, dtype=np.float64).reshape(len(rows), dim), normalize)
