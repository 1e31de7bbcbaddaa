"""Generated corpora with planted keyphrases, for smoke tests and end-to-end checks.

Each document belongs to one topic. A few of the topic's keyphrases are
planted in the title and body (present golds); two more keyphrases of the same
topic that do not occur in the text are the absent golds. Word vectors are
fixed random unit vectors, with each topic's words scattered around a shared
topic direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Document, Phrase, is_present, stem
from .embedding import EmbeddingModel

_ONSETS = "b d f g k l m n p r s t v z".split()
_VOWELS = "a e i o u".split()
_CODAS = "k t r m p".split()

FUNCTION_WORDS = {
    "the": "DT", "this": "DT", "of": "IN", "for": "IN", "with": "IN", "in": "IN",
    "and": "CC", "we": "PRP", "by": "IN", "on": "IN",
}


@dataclass
class SyntheticCorpus:
    documents: list[Document]
    embeddings: EmbeddingModel
    topics: list[dict]


def _pseudo_words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    out = []
    stems = {stem(w) for w in taken}
    while len(out) < n:
        syl = int(rng.integers(2, 4))
        w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syl)) + rng.choice(_CODAS)
        s = stem(w)
        if w in taken or s != w or s in stems:
            continue
        taken.add(w)
        stems.add(s)
        out.append(w)
    return out


def make_synthetic_corpus(
    n_docs: int = 2000,
    n_topics: int = 20,
    nouns_per_topic: int = 12,
    adjs_per_topic: int = 6,
    kps_per_topic: int = 10,
    n_general_nouns: int = 60,
    n_general_adjs: int = 20,
    n_verbs: int = 30,
    dim: int = 64,
    topic_noise: float = 0.6,
    seed: int = 0,
) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    taken = set(FUNCTION_WORDS)
    general_nouns = _pseudo_words(rng, n_general_nouns, taken)
    general_adjs = _pseudo_words(rng, n_general_adjs, taken)
    verbs = _pseudo_words(rng, n_verbs, taken)

    vectors: dict[str, np.ndarray] = {}
    for w in list(FUNCTION_WORDS) + general_nouns + general_adjs + verbs:
        vectors[w] = rng.standard_normal(dim)

    topics = []
    for _ in range(n_topics):
        center = rng.standard_normal(dim)
        center /= np.linalg.norm(center)
        nouns = _pseudo_words(rng, nouns_per_topic, taken)
        adjs = _pseudo_words(rng, adjs_per_topic, taken)
        for w in nouns + adjs:
            vectors[w] = center + topic_noise * rng.standard_normal(dim) / np.sqrt(dim)
        kps: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
        seen = set()
        while len(kps) < kps_per_topic:
            shape = rng.integers(0, 3)
            if shape == 0:
                words, tags = (rng.choice(adjs), rng.choice(nouns)), ("JJ", "NN")
            elif shape == 1:
                words, tags = tuple(rng.choice(nouns, 2, replace=False)), ("NN", "NN")
            else:
                words, tags = (rng.choice(adjs),) + tuple(rng.choice(nouns, 2, replace=False)), ("JJ", "NN", "NN")
            words = tuple(str(w) for w in words)
            if words in seen:
                continue
            seen.add(words)
            kps.append((words, tags))
        topics.append({"nouns": nouns, "adjs": adjs, "keyphrases": kps})

    words = sorted(vectors)
    embeddings = EmbeddingModel(words, np.stack([vectors[w] for w in words]))

    def filler(topic) -> tuple[list[str], list[str]]:
        r = rng.random()
        if r < 0.4:
            return [str(rng.choice(general_nouns))], ["NN"]
        if r < 0.7:
            return [str(rng.choice(general_adjs)), str(rng.choice(general_nouns))], ["JJ", "NN"]
        return [str(rng.choice(topic["nouns"]))], ["NN"]

    def sentence(np_a, np_b) -> tuple[list[str], list[str]]:
        (a, at), (b, bt) = np_a, np_b
        v = str(rng.choice(verbs))
        g = str(rng.choice(general_nouns))
        form = rng.integers(0, 4)
        if form == 0:
            return ["the"] + a + [v, "the"] + b + ["."], ["DT"] + at + ["VBZ", "DT"] + bt + ["."]
        if form == 1:
            return ["we", v] + a + ["for"] + b + ["."], ["PRP", "VBZ"] + at + ["IN"] + bt + ["."]
        if form == 2:
            return ["this", g, v] + a + ["with", "the"] + b + ["."], ["DT", "NN", "VBZ"] + at + ["IN", "DT"] + bt + ["."]
        return a + [v, g, "of"] + b + ["."], at + ["VBZ", "NN", "IN"] + bt + ["."]

    docs = []
    for i in range(n_docs):
        t = int(rng.integers(n_topics))
        topic = topics[t]
        kps = topic["keyphrases"]
        order = rng.permutation(len(kps))
        n_present = int(rng.integers(3, 5))
        planted = [kps[j] for j in order[:n_present]]

        title = list(planted[0][0]) + ["for"] + list(planted[1][0])
        title_tags = list(planted[0][1]) + ["IN"] + list(planted[1][1])
        slots = [(list(w), list(tg)) for w, tg in planted[1:]] + [filler(topic) for _ in range(4 + (n_present - 1) % 2)]
        rng.shuffle(slots)
        body, body_tags = [], []
        for a, b in zip(slots[0::2], slots[1::2]):
            s, st = sentence(a, b)
            body += s
            body_tags += st

        record = {
            "id": f"syn-{i}",
            "title": " ".join(title),
            "abstract": " ".join(body),
            "tags": title_tags + ["."] + body_tags,
        }
        doc = Document.from_record(record)
        absent = [Phrase(w) for w, _ in (kps[j] for j in order[n_present:]) if not is_present(w, doc)][:2]
        doc.gold_keyphrases = [Phrase(w) for w, _ in planted] + absent
        docs.append(doc)
    return SyntheticCorpus(docs, embeddings, topics)
