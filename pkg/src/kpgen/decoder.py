"""Product-of-experts beam search and reranking of generated keyphrases."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import EOS, SPECIAL_TOKENS, Document, Phrase, first_offset
from .informativeness import InformativenessTable
from .phraseness.inputs import AugmentedInput
from .phraseness.model import PhrasenessModel
from .retriever import PhraseBank

MIN_LENGTH_DENOMINATOR = 0.5


class DegenerateStepError(ValueError):
    pass


@dataclass
class DecodeConfig:
    lam: float = 0.75
    beam_size: int = 100
    beam_depth: int = 6
    alpha: float = 0.0
    beta: float = 5 / 6
    top_n: int = 10
    use_references: bool = True
    use_pos: bool = True
    use_adjustment: bool = True

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.beam_depth < 1:
            raise ValueError("beam_depth must be >= 1")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if not -1.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [-1, 1]")


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: tuple[str, ...]
    ids: tuple[int, ...]
    score: float  # cumulative combined log-probability, EOS step included
    finished: bool = True


@dataclass(frozen=True)
class ScoredKeyphrase:
    phrase: Phrase
    raw_score: float  # s(y) = -log P_kp(y | x)
    normalized_score: float
    adjustment: float
    score: float  # final reranking score, lower is better
    present: bool
    first_offset: int | None

    def to_json(self) -> dict:
        return {"phrase": str(self.phrase), "score": self.score}


def combine_step(p_pn: np.ndarray, p_in: np.ndarray, lam: float) -> np.ndarray:
    """Entrywise ``p_pn**lam * p_in``, renormalized (along the last axis)."""
    p_pn = np.asarray(p_pn, dtype=np.float64)
    p_in = np.asarray(p_in, dtype=np.float64)
    if p_pn.shape != p_in.shape:
        raise ValueError("distributions must share the extended vocabulary")
    prod = np.power(p_pn, lam) * p_in
    z = prod.sum(axis=-1, keepdims=True)
    if np.any(z <= 0):
        raise DegenerateStepError("phraseness and informativeness have disjoint support")
    return prod / z


def combine_log_step(p_pn: np.ndarray, p_in: np.ndarray, lam: float) -> np.ndarray:
    """log of :func:`combine_step`, with -inf where the product vanishes."""
    with np.errstate(divide="ignore"):
        return np.log(combine_step(p_pn, p_in, lam))


def banned_ids(source: AugmentedInput) -> np.ndarray:
    """Marker/padding/unknown ids, which are never emitted as phrase words."""
    return np.array([i for i, w in enumerate(source.ext_words) if w in SPECIAL_TOKENS and w != EOS])


class StepScorer:
    """Combined per-step log-distribution for one document."""

    def __init__(self, model: PhrasenessModel, source: AugmentedInput, table: InformativenessTable, lam: float):
        if table.ext_words != source.ext_words:
            raise ValueError("informativeness table built over a different extended vocabulary")
        self.model = model
        self.source = source
        self.table = table
        self.lam = lam
        self.encoded = model.encode_input(source)
        self.banned = banned_ids(source)
        self.eos_id = source.ext_words.index(EOS)

    def __call__(self, prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        p_pn = self.model.step(self.encoded, prefixes).cpu().numpy()
        words = self.source.ext_words
        p_in = self.table.step_batch([[words[i] for i in p] for p in prefixes])
        logp = combine_log_step(p_pn, p_in, self.lam)
        if len(self.banned):
            logp[:, self.banned] = -np.inf
        return logp


def beam_search(scorer: StepScorer, beam_size: int, beam_depth: int) -> list[BeamHypothesis]:
    """Beam search over combined log-probabilities.

    Phrases hold at most ``beam_depth`` words; the step after the last word
    may only emit [EOS]. Candidates ending in [EOS] leave the beam as finished
    hypotheses; unfinished ones are dropped at the depth limit.
    """
    eos = scorer.eos_id
    words = scorer.source.ext_words
    alive: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    finished: list[BeamHypothesis] = []
    for t in range(beam_depth + 1):
        if not alive:
            break
        logp = scorer([p for p, _ in alive])
        if t == beam_depth:
            only_eos = np.full_like(logp, -np.inf)
            only_eos[:, eos] = logp[:, eos]
            logp = only_eos
        cand = (np.array([s for _, s in alive])[:, None] + logp).ravel()
        finite = np.flatnonzero(np.isfinite(cand))
        if len(finite) > beam_size:
            part = np.argpartition(-cand[finite], beam_size - 1)[:beam_size]
            finite = finite[part]
        # stable order: score descending, then hypothesis index, then token id
        chosen = finite[np.lexsort((finite, -cand[finite]))]
        V = logp.shape[1]
        nxt = []
        for flat in chosen:
            h, tok = divmod(int(flat), V)
            prefix, _ = alive[h]
            score = float(cand[flat])
            if tok == eos:
                if prefix:
                    finished.append(BeamHypothesis(tuple(words[i] for i in prefix), prefix, score))
            else:
                nxt.append((prefix + (tok,), score))
        alive = nxt
    finished.sort(key=lambda h: (-h.score, h.ids))
    return finished[:beam_size]


def adjustment_weight(phrase: Phrase, doc: Document, bank: PhraseBank | None, beta: float) -> float:
    """Favors early present phrases and absent phrases already in the bank."""
    offset = first_offset(phrase, doc)
    if offset is None:
        return beta if bank is not None and phrase.stem_key in bank else 1.0
    w = math.log2(1 + offset)
    return w / (w + 1)


def rerank(
    hypotheses: Sequence[BeamHypothesis],
    doc: Document,
    bank: PhraseBank | None,
    config: DecodeConfig,
) -> tuple[list[ScoredKeyphrase], list[ScoredKeyphrase]]:
    """Length-normalize, weight, dedupe by stem, and split into present/absent lists.

    Lists are ascending by final score (best first) and truncated to ``top_n``.
    """
    best: dict[str, ScoredKeyphrase] = {}
    for hyp in hypotheses:
        phrase = Phrase(hyp.tokens)
        s = -hyp.score
        normalized = s / max(len(phrase) + config.alpha, MIN_LENGTH_DENOMINATOR)
        offset = first_offset(phrase, doc)
        b = adjustment_weight(phrase, doc, bank, config.beta) if config.use_adjustment else 1.0
        kp = ScoredKeyphrase(phrase, s, normalized, b, normalized * b, offset is not None, offset)
        prev = best.get(phrase.stem_key)
        if prev is None or _rank_key(kp) < _rank_key(prev):
            best[phrase.stem_key] = kp
    ranked = sorted(best.values(), key=_rank_key)
    present = [k for k in ranked if k.present][: config.top_n]
    absent = [k for k in ranked if not k.present][: config.top_n]
    return present, absent


def _rank_key(kp: ScoredKeyphrase):
    return (kp.score, len(kp.phrase), kp.phrase.stem_key)
