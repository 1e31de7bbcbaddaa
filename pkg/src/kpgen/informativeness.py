"""Per-step informativeness distribution over the extended vocabulary.

Every non-[EOS] word scores ``max(S(w, x), epsilon)`` independently of the
prefix; [EOS] scores ``S(prefix, x)``, unfloored, so an empty prefix can
never terminate. Scores are renormalized at every step.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import EOS
from .embedding import EmbeddingModel

DEFAULT_EPSILON = 1e-4


class InformativenessTable:
    def __init__(
        self,
        doc_tokens: Sequence[str],
        ext_words: Sequence[str],
        model: EmbeddingModel,
        epsilon: float = DEFAULT_EPSILON,
    ):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.model = model
        self.epsilon = epsilon
        self.ext_words = list(ext_words)
        self.eos_index = self.ext_words.index(EOS)
        self.doc_vec = model.embed_text(doc_tokens)
        # a single word's text embedding is its (normalized) vector, zero if OOV
        raw = np.maximum(model.embed_words(self.ext_words) @ self.doc_vec, 0.0)
        self.raw_scores = raw
        self.word_scores = np.maximum(raw, epsilon)
        self.word_scores[self.eos_index] = 0.0

    def eos_score(self, prefix_words: Sequence[str]) -> float:
        return max(0.0, float(self.model.embed_text(prefix_words) @ self.doc_vec))

    def step(self, prefix_words: Sequence[str]) -> np.ndarray:
        scores = self.word_scores.copy()
        scores[self.eos_index] = self.eos_score(prefix_words)
        return scores / scores.sum()

    def step_batch(self, prefixes: Sequence[Sequence[str]]) -> np.ndarray:
        eos = np.array([self.eos_score(p) for p in prefixes])
        scores = np.repeat(self.word_scores[None, :], len(prefixes), axis=0)
        scores[:, self.eos_index] = eos
        return scores / scores.sum(axis=1, keepdims=True)


def informativeness_step(table: InformativenessTable, prefix_words: Sequence[str]) -> np.ndarray:
    return table.step(prefix_words)
