"""Augmented inputs ``[BOS] x [BOR] z1 [SEP] z2 ... [EOR] [EOS]`` and training instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..corpus import BOR, BOS, EOR, EOS, SEP, SPECIAL_TAG, SPECIAL_TOKENS, UNK, Phrase
from .vocab import Vocabularies


@dataclass
class AugmentedInput:
    tokens: list[str]
    tags: list[str]
    enc_ids: list[int]
    tag_ids: list[int]
    ext_ids: list[int]
    ext_words: list[str]
    ext_tag_ids: list[int]
    n_refs: int = 0
    _ext_index: dict[str, int] | None = field(default=None, repr=False)

    @property
    def ext_size(self) -> int:
        return len(self.ext_words)

    def ext_id(self, word: str, unk_id: int) -> int:
        if self._ext_index is None:
            self._ext_index = {w: i for i, w in enumerate(self.ext_words)}
        return self._ext_index.get(word, unk_id)


def build_augmented_input(
    tokens: Sequence[str],
    tags: Sequence[str],
    references: Sequence[Phrase | Sequence[str]],
    vocabs: Vocabularies,
    max_src_len: int = 400,
    max_input_len: int | None = None,
) -> AugmentedInput:
    """Lay out source and references with marker tokens.

    ``x`` is truncated to ``max_src_len`` first; whole references are then
    dropped from the end if the total would exceed ``max_input_len``.
    """
    x = list(tokens[:max_src_len])
    x_tags = list(tags[:max_src_len])
    refs = [list(r.tokens) if isinstance(r, Phrase) else list(r) for r in references]
    if max_input_len is not None:
        budget = max_input_len - len(x) - 4
        kept = []
        for r in refs:
            cost = len(r) + (1 if kept else 0)
            if cost > budget:
                break
            kept.append(r)
            budget -= cost
        refs = kept

    seq = [BOS] + x + [BOR]
    seq_tags = [SPECIAL_TAG] + x_tags + [SPECIAL_TAG]
    for j, r in enumerate(refs):
        if j:
            seq.append(SEP)
            seq_tags.append(SPECIAL_TAG)
        seq.extend(r)
        seq_tags.extend(vocabs.tag_of(w) for w in r)
    seq += [EOR, EOS]
    seq_tags += [SPECIAL_TAG, SPECIAL_TAG]

    dec = vocabs.decoder
    ext_words = list(dec.itos)
    ext_tag_ids = list(vocabs.decoder_tag_ids)
    oov: dict[str, int] = {}
    ext_ids = []
    for w, t in zip(seq, seq_tags):
        if w in dec.stoi:
            ext_ids.append(dec.stoi[w])
        else:
            if w not in oov:
                oov[w] = len(ext_words)
                ext_words.append(w)
                ext_tag_ids.append(vocabs.tags.id(vocabs.tag_of(w)))
            ext_ids.append(oov[w])

    return AugmentedInput(
        tokens=seq,
        tags=seq_tags,
        enc_ids=vocabs.encoder.ids(seq),
        tag_ids=[vocabs.tags.id(t) for t in seq_tags],
        ext_ids=ext_ids,
        ext_words=ext_words,
        ext_tag_ids=ext_tag_ids,
        n_refs=len(refs),
    )


@dataclass
class TrainingInstance:
    source: AugmentedInput
    target: list[str]  # phrase tokens followed by [EOS]
    target_ids: list[int]  # extended-vocab ids
    is_reference: bool = False


def make_instance(source: AugmentedInput, phrase: Sequence[str], vocabs: Vocabularies, is_reference: bool = False) -> TrainingInstance:
    target = list(phrase) + [EOS]
    unk = vocabs.decoder.stoi[UNK]
    return TrainingInstance(source, target, [source.ext_id(w, unk) for w in target], is_reference)


def make_training_instances(
    tokens: Sequence[str],
    tags: Sequence[str],
    noun_phrases: Sequence[Phrase],
    references: Sequence[Phrase],
    vocabs: Vocabularies,
    mask_prob: float = 0.5,
    rng: np.random.Generator | None = None,
    max_src_len: int = 400,
    max_input_len: int | None = None,
) -> list[TrainingInstance]:
    """One instance per present noun phrase and per reference.

    A reference target is removed from its own input's reference block with
    probability ``mask_prob``; every other instance shares one input object.
    """
    if not 0.0 <= mask_prob <= 1.0:
        raise ValueError("mask_prob must lie in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng()
    full = build_augmented_input(tokens, tags, references, vocabs, max_src_len, max_input_len)
    out = [make_instance(full, p.tokens, vocabs) for p in noun_phrases]
    for j, ref in enumerate(references):
        src = full
        if mask_prob > 0 and rng.random() < mask_prob:
            rest = [r for i, r in enumerate(references) if i != j]
            src = build_augmented_input(tokens, tags, rest, vocabs, max_src_len, max_input_len)
        out.append(make_instance(src, ref.tokens, vocabs, is_reference=True))
    return out


def is_marker(word: str) -> bool:
    return word in SPECIAL_TOKENS
