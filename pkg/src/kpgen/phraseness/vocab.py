from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

from ..corpus import SPECIAL_TAG, SPECIAL_TOKENS, UNK, PosTagger

PTB_TAGS = (
    "CC CD DT EX FW IN JJ JJR JJS LS MD NN NNS NNP NNPS PDT POS PRP PRP$ RB RBR RBS RP "
    "SYM TO UH VB VBD VBG VBN VBP VBZ WDT WP WP$ WRB . , :"
).split()


class Vocabulary:
    """Index <-> token map; special tokens occupy the first ids."""

    def __init__(self, tokens: Sequence[str]):
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def from_counts(cls, counts: Counter, max_size: int, specials: Sequence[str] = SPECIAL_TOKENS) -> "Vocabulary":
        ranked = sorted((w for w in counts if w not in specials), key=lambda w: (-counts[w], w))
        return cls(list(specials) + ranked[: max(0, max_size - len(specials))])

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.stoi[UNK])

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]


class TagVocabulary(Vocabulary):
    def __init__(self, tags: Sequence[str] = ()):
        extra = sorted(set(tags) - set(PTB_TAGS) - {SPECIAL_TAG, "NN"})
        super().__init__([SPECIAL_TAG, "NN"] + [t for t in PTB_TAGS if t != "NN"] + extra)

    def id(self, tag: str) -> int:
        return self.stoi.get(tag, self.stoi["NN"])


class Vocabularies:
    """Encoder words, decoder words, POS tags, and the word -> tag lexicon."""

    def __init__(self, encoder: Vocabulary, decoder: Vocabulary, tags: TagVocabulary, lexicon: PosTagger):
        self.encoder = encoder
        self.decoder = decoder
        self.tags = tags
        self.lexicon = lexicon

    @classmethod
    def build(
        cls,
        token_seqs: Iterable[Sequence[str]],
        phrase_seqs: Iterable[Sequence[str]],
        tag_pairs: Iterable[tuple[Sequence[str], Sequence[str]]],
        enc_size: int,
        dec_size: int,
    ) -> "Vocabularies":
        enc_counts = Counter(w for seq in token_seqs for w in seq)
        dec_counts = Counter(w for seq in phrase_seqs for w in seq)
        tag_pairs = list(tag_pairs)
        lexicon = PosTagger.from_seed().update(tag_pairs)
        tags = TagVocabulary({t for _, ts in tag_pairs for t in ts})
        return cls(
            Vocabulary.from_counts(enc_counts, enc_size),
            Vocabulary.from_counts(dec_counts, dec_size),
            tags,
            lexicon,
        )

    def tag_of(self, word: str) -> str:
        return self.lexicon.tag_word(word)

    @property
    def decoder_tag_ids(self) -> list[int]:
        """POS tag id of every decoder-vocabulary word, from the lexicon."""
        if getattr(self, "_decoder_tag_ids", None) is None:
            self._decoder_tag_ids = [self.tags.id(self.tag_of(w)) for w in self.decoder.itos]
        return self._decoder_tag_ids

    def to_state(self) -> dict:
        return {
            "encoder": self.encoder.itos,
            "decoder": self.decoder.itos,
            "tags": self.tags.itos,
            "lexicon": self.lexicon.lexicon,
        }

    @classmethod
    def from_state(cls, state: dict) -> "Vocabularies":
        tags = TagVocabulary.__new__(TagVocabulary)
        Vocabulary.__init__(tags, state["tags"])
        return cls(
            Vocabulary(state["encoder"]),
            Vocabulary(state["decoder"]),
            tags,
            PosTagger(state["lexicon"]),
        )
