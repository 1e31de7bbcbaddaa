"""Document ingestion: tokenization, POS tagging, noun-phrase chunking, stemming."""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from nltk.stem.porter import PorterStemmer

BOS, BOR, SEP, EOR, EOS = "[BOS]", "[BOR]", "[SEP]", "[EOR]", "[EOS]"
PAD, UNK = "[PAD]", "[UNK]"
SPECIAL_TOKENS = (PAD, UNK, BOS, EOS, BOR, EOR, SEP)
SPECIAL_TAG = "SPECIAL"

MAX_PHRASE_LEN = 6

# words with intra-word hyphens/apostrophes/dots, numbers, or single punctuation marks
_TOKEN_RE = re.compile(
    r"\[(?:BOS|EOS|BOR|EOR|SEP|PAD|UNK)\]"
    r"|\d+(?:[.,]\d+)*"
    r"|\w+(?:[-'’]\w+)*"
    r"|[^\w\s]",
    re.UNICODE,
)

_stemmer = PorterStemmer()


@lru_cache(maxsize=200_000)
def stem(word: str) -> str:
    return _stemmer.stem(word)


def stem_key(tokens: Sequence[str]) -> str:
    """Space-joined Porter stems; the identity used for matching and dedup."""
    return " ".join(stem(t) for t in tokens)


def tokenize(text: str) -> list[str]:
    """Lowercase and split punctuation from words, keeping hyphenated words whole."""
    return _TOKEN_RE.findall(text.lower())


def join_title_body(title: str, body: str) -> list[str]:
    head, tail = tokenize(title), tokenize(body)
    if head and tail and head[-1] != ".":
        head.append(".")
    return head + tail


class InvalidPhraseError(ValueError):
    pass


@dataclass(frozen=True)
class Phrase:
    tokens: tuple[str, ...]
    stem_key: str = field(init=False, compare=False)

    def __post_init__(self):
        if not self.tokens:
            raise InvalidPhraseError("empty phrase")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "stem_key", stem_key(self.tokens))

    @classmethod
    def from_text(cls, text: str) -> "Phrase":
        return cls(tuple(tokenize(text)))

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Document:
    id: str
    title: str
    body: str
    tokens: list[str]
    tags: list[str]
    gold_keyphrases: list[Phrase] | None = None

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"document {self.id!r}: {len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        self._stems: list[str] | None = None

    @property
    def stems(self) -> list[str]:
        if self._stems is None:
            self._stems = [stem(t) for t in self.tokens]
        return self._stems

    @classmethod
    def from_record(cls, record: dict, tagger: "PosTagger | None" = None) -> "Document":
        """Build from a corpus JSON record ({"id", "title", "abstract", ...})."""
        title = record.get("title", "") or ""
        body = record.get("abstract", record.get("body", "")) or ""
        tokens = join_title_body(title, body)
        tags = record.get("tags")
        if tags is None:
            tags = (tagger or default_tagger()).tag(tokens)
        elif len(tags) != len(tokens):
            raise ValueError(
                f"document {record.get('id')!r}: pre-tagging has {len(tags)} tags "
                f"for {len(tokens)} tokens"
            )
        golds = record.get("keyphrases")
        if golds is not None:
            golds = [Phrase.from_text(k) for k in golds if tokenize(k)]
        return cls(
            id=str(record.get("id", "")),
            title=title,
            body=body,
            tokens=tokens,
            tags=list(tags),
            gold_keyphrases=golds,
        )

    def to_record(self) -> dict:
        record = {"id": self.id, "title": self.title, "abstract": self.body, "tags": self.tags}
        if self.gold_keyphrases is not None:
            record["keyphrases"] = [str(p) for p in self.gold_keyphrases]
        return record


# ---------------------------------------------------------------------------
# POS tagging


class PosTagger:
    """Most-frequent-tag lexicon with suffix fallbacks; unknown words are NN."""

    _SUFFIX_RULES = (
        ("ly", "RB"),
        ("ing", "VBG"),
        ("ed", "VBN"),
        ("ous", "JJ"),
        ("ive", "JJ"),
        ("able", "JJ"),
        ("ible", "JJ"),
        ("ful", "JJ"),
        ("less", "JJ"),
        ("ical", "JJ"),
        ("al", "JJ"),
        ("est", "JJS"),
    )
    _NUMBER_RE = re.compile(r"^\d+(?:[.,]\d+)*$")
    _PUNCT_RE = re.compile(r"^[^\w\s]$")

    def __init__(self, lexicon: dict[str, str] | None = None):
        self.lexicon = dict(lexicon or {})

    @classmethod
    def from_seed(cls) -> "PosTagger":
        text = resources.files("kpgen.data").joinpath("seed_lexicon.tsv").read_text("utf-8")
        lexicon = {}
        for line in text.splitlines():
            if not line or line.startswith("#"):
                continue
            word, tag = line.split("\t")
            lexicon[word] = tag
        return cls(lexicon)

    def update(self, tagged: Iterable[tuple[Sequence[str], Sequence[str]]]) -> "PosTagger":
        """Overlay most-frequent tags observed in pre-tagged (tokens, tags) pairs."""
        counts: dict[str, Counter] = defaultdict(Counter)
        for tokens, tags in tagged:
            for tok, tag in zip(tokens, tags):
                if tag != SPECIAL_TAG:
                    counts[tok][tag] += 1
        for tok, c in counts.items():
            # ties go to the alphabetically first tag so the lexicon is reproducible
            self.lexicon[tok] = min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        return self

    def tag_word(self, word: str) -> str:
        if word in SPECIAL_TOKENS:
            return SPECIAL_TAG
        if word in self.lexicon:
            return self.lexicon[word]
        if self._NUMBER_RE.match(word):
            return "CD"
        if self._PUNCT_RE.match(word):
            return word if word in ".,:;" else "SYM"
        if len(word) > 3 and word.endswith("s") and not word.endswith(("ss", "us", "is")):
            base = self.lexicon.get(word[:-1])
            if base in (None, "NN"):
                return "NNS"
        if len(word) > 4:
            for suffix, tag in self._SUFFIX_RULES:
                if word.endswith(suffix):
                    return tag
        return "NN"

    def tag(self, tokens: Sequence[str]) -> list[str]:
        return [self.tag_word(t) for t in tokens]


@lru_cache(maxsize=1)
def default_tagger() -> PosTagger:
    return PosTagger.from_seed()


def pos_tag(tokens: Sequence[str], tagger: PosTagger | None = None) -> list[str]:
    return (tagger or default_tagger()).tag(tokens)


# ---------------------------------------------------------------------------
# Noun phrases


def _is_noun(tag: str) -> bool:
    return tag.startswith("NN")


def _is_np_word(tag: str) -> bool:
    return tag == "JJ" or _is_noun(tag)


def extract_noun_phrases(
    tokens: Sequence[str], tags: Sequence[str], max_len: int = MAX_PHRASE_LEN
) -> list[Phrase]:
    """All spans matching (JJ|NN.*)*(NN.*) up to ``max_len`` words.

    Both maximal chunks and their inner spans are emitted, ordered by start
    position (longer first at the same start) and deduplicated by stem key.
    """
    spans = []
    n = len(tokens)
    i = 0
    while i < n:
        if not _is_np_word(tags[i]):
            i += 1
            continue
        j = i
        while j < n and _is_np_word(tags[j]):
            j += 1
        for start in range(i, j):
            for end in range(min(j, start + max_len), start, -1):
                if _is_noun(tags[end - 1]):
                    spans.append((start, end))
        i = j

    seen = set()
    phrases = []
    for start, end in sorted(spans, key=lambda s: (s[0], -(s[1] - s[0]))):
        p = Phrase(tuple(tokens[start:end]))
        if p.stem_key not in seen:
            seen.add(p.stem_key)
            phrases.append(p)
    return phrases


def find_offset(phrase_stems: Sequence[str], doc_stems: Sequence[str]) -> int | None:
    """0-indexed start of the first contiguous occurrence, or None."""
    m = len(phrase_stems)
    if m == 0:
        raise InvalidPhraseError("empty phrase")
    first = phrase_stems[0]
    for i in range(len(doc_stems) - m + 1):
        if doc_stems[i] == first and list(doc_stems[i : i + m]) == list(phrase_stems):
            return i
    return None


def first_offset(phrase: Phrase | Sequence[str], doc: Document) -> int | None:
    """1-indexed word position of the phrase's first stemmed occurrence."""
    tokens = phrase.tokens if isinstance(phrase, Phrase) else tuple(phrase)
    off = find_offset([stem(t) for t in tokens], doc.stems)
    return None if off is None else off + 1


def is_present(phrase: Phrase | Sequence[str], doc: Document) -> bool:
    return first_offset(phrase, doc) is not None


# ---------------------------------------------------------------------------
# Corpus files


def iter_records(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def read_corpus(path: str | Path, tagger: PosTagger | None = None) -> list[Document]:
    return [Document.from_record(r, tagger) for r in iter_records(path)]


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record()) + "\n")
