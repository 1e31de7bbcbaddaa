"""Acceptance gate: one test per criterion, each printing a PASS/FAIL summary line."""

import itertools
import math
import os
import time

import numpy as np
import pytest
import torch

from kpgen import KeyphraseGenerator
from kpgen.corpus import EOS, SPECIAL_TOKENS, Document, Phrase, pos_tag, read_corpus, stem
from kpgen.decoder import BeamHypothesis, DecodeConfig, StepScorer, adjustment_weight, beam_search, combine_step, rerank
from kpgen.embedding import EmbeddingModel
from kpgen.evaluation import dataset_stats, score_document
from kpgen.informativeness import InformativenessTable, informativeness_step
from kpgen.phraseness import build_augmented_input, make_training_instances, phraseness_step
from kpgen.retriever import BankEntry, PhraseBank, RetrievalConfig, build_phrase_bank, retrieve, update_phrase_bank
from kpgen.synthetic import make_synthetic_corpus

from conftest import TOY_WORDS, make_doc, random_embeddings, record_criterion, toy_model, toy_vocabs

SOURCE_POOL = list(TOY_WORDS) + ["the", "for", "of", "zorblax", "quux", "blip"]


def _random_source(rng, vocabs, max_len=12, max_refs=3):
    tokens = list(rng.choice(SOURCE_POOL, size=int(rng.integers(1, max_len))))
    refs = [tuple(rng.choice(SOURCE_POOL, size=int(rng.integers(1, 3)))) for _ in range(int(rng.integers(0, max_refs + 1)))]
    return tokens, build_augmented_input(tokens, pos_tag(tokens), refs, vocabs)


# ---------------------------------------------------------------------------
# 1. distribution validity


def test_ac1_distribution_validity():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    vocabs = toy_vocabs()
    emb = random_embeddings(SOURCE_POOL[:-1], seed=1)  # "blip" stays out of vocabulary
    worst = 0.0
    negative = False
    n = 0
    for m in range(10):
        model = toy_model(seed=m, vocabs=vocabs, d_model=int(rng.choice([8, 16])), use_pos=bool(m % 2))
        for _ in range(100):
            tokens, src = _random_source(rng, vocabs)
            prefix = [int(i) for i in rng.integers(0, src.ext_size, size=int(rng.integers(0, 4)))]
            p_pn = phraseness_step(model, src, prefix)
            table = InformativenessTable(tokens, src.ext_words, emb)
            p_in = informativeness_step(table, [src.ext_words[i] for i in prefix])
            p = combine_step(p_pn, p_in, float(rng.uniform(0, 1)))
            for dist in (p_pn, p_in, p):
                negative |= bool(np.any(dist < 0))
                worst = max(worst, abs(dist.sum() - 1.0))
            n += 1
    elapsed = time.perf_counter() - start
    passed = n == 1000 and not negative and worst <= 1e-6 and elapsed < 60
    record_criterion("1 distribution validity", passed,
                     f"{n} fixtures, max |sum-1|={worst:.2e}, negative={negative}, {elapsed:.1f}s")
    assert passed


# ---------------------------------------------------------------------------
# 2. copy-mechanism endpoints


def _reference_parts(model, enc, src, prefix):
    """Pure-generation and pure-copy distributions rebuilt outside ``step``."""
    vocabs = model.vocabs
    V = len(vocabs.decoder)
    unk = vocabs.decoder.stoi["[UNK]"]
    special = vocabs.tags.id("SPECIAL")
    prev = torch.tensor([[model.bos_id] + [i if i < V else unk for i in prefix]])
    prev_tags = torch.tensor([[special] + [src.ext_tag_ids[i] for i in prefix]])
    with torch.no_grad():
        s, queries, _ = model.decode(enc.memory, torch.zeros((1, enc.memory.shape[1]), dtype=torch.bool), prev, prev_tags)
    s = s[0, -1].numpy()
    q = queries[0, -1].numpy()
    logits = model.generator.weight.detach().numpy() @ s + model.generator.bias.detach().numpy()
    gen = np.zeros(src.ext_size)
    e = np.exp(logits - logits.max())
    gen[:V] = e / e.sum()
    scores = enc.copy_keys[0].numpy() @ q
    a = np.exp(scores - scores.max())
    a /= a.sum()
    copy = np.zeros(src.ext_size)
    for i, w in enumerate(src.ext_ids):
        copy[w] += a[i]
    return gen, copy


def test_ac2_copy_endpoints():
    rng = np.random.default_rng(1)
    vocabs = toy_vocabs()
    worst = 0.0
    multi = 0
    for seed in range(5):
        model = toy_model(seed=seed, vocabs=vocabs)
        for _ in range(20):
            _, src = _random_source(rng, vocabs)
            multi += len(src.ext_ids) > len(set(src.ext_ids))
            prefix = [int(i) for i in rng.integers(0, src.ext_size, size=int(rng.integers(0, 4)))]
            gen, copy = _reference_parts(model, model.encode_input(src), src, prefix)
            worst = max(
                worst,
                np.abs(phraseness_step(model, src, prefix, force_p_gen=1.0) - gen).max(),
                np.abs(phraseness_step(model, src, prefix, force_p_gen=0.0) - copy).max(),
            )
    passed = worst <= 1e-9 and multi > 0
    record_criterion("2 copy endpoints", passed, f"max abs error {worst:.2e}, {multi} sources with repeated words")
    assert passed


# ---------------------------------------------------------------------------
# 3. gradient check


def test_ac3_gradient_check():
    start = time.perf_counter()
    vocabs = toy_vocabs()
    model = toy_model(seed=0, vocabs=vocabs, d_model=8, layers=1, heads=2, pos_emb_dim=4, max_input_len=24)
    model.train()  # dropout is 0; train mode keeps the reference (non-fused) attention path
    tokens = ["the", "latent", "topic", "model", "for", "zorblax", "topic"]
    nps = [Phrase.from_text(p) for p in ("latent topic model", "zorblax topic")]
    refs = [Phrase.from_text("author network"), Phrase.from_text("quux")]
    instances = make_training_instances(tokens, pos_tag(tokens), nps, refs, vocabs, mask_prob=0.5,
                                        rng=np.random.default_rng(2))

    def loss():
        return model.nll(instances).mean()

    model.zero_grad()
    loss().backward()
    h = 1e-6
    worst, worst_name = 0.0, ""
    with torch.no_grad():
        for name, param in model.named_parameters():
            analytic = param.grad.detach().clone().reshape(-1)
            numeric = torch.zeros_like(analytic)
            flat = param.view(-1)
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + h
                up = loss().item()
                flat[i] = old - h
                down = loss().item()
                flat[i] = old
                numeric[i] = (up - down) / (2 * h)
            denom = max(analytic.norm().item(), numeric.norm().item())
            rel = 0.0 if denom < 1e-10 else (analytic - numeric).norm().item() / denom
            if rel > worst:
                worst, worst_name = rel, name
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-3 and elapsed < 120
    record_criterion("3 gradient check", passed, f"max group relative error {worst:.2e} ({worst_name}), {elapsed:.1f}s")
    assert passed


# ---------------------------------------------------------------------------
# 4. beam search vs exhaustive enumeration


def test_ac4_beam_matches_exhaustive():
    vocabs = toy_vocabs()
    model = toy_model(seed=3, vocabs=vocabs)
    tokens = ["topic", "latent", "zorblax", "model", "quux", "network", "author"]
    src = build_augmented_input(tokens, pos_tag(tokens), [], vocabs)
    emb = random_embeddings(SOURCE_POOL, seed=4)
    table = InformativenessTable(tokens, src.ext_words, emb)
    lam = 0.75
    symbols = [i for i, w in enumerate(src.ext_words) if w not in SPECIAL_TOKENS]
    eos = src.ext_words.index(EOS)
    assert len(symbols) + 1 <= 8

    def log_combined(prefix):
        p_pn = phraseness_step(model, src, list(prefix))
        p_in = table.step([src.ext_words[i] for i in prefix])
        prod = p_pn**lam * p_in
        with np.errstate(divide="ignore"):
            return np.log(prod / prod.sum())

    cache = {}

    def logp(prefix):
        if prefix not in cache:
            cache[prefix] = log_combined(prefix)
        return cache[prefix]

    oracle = []
    for n in range(1, 4):
        for seq in itertools.product(symbols, repeat=n):
            score = sum(logp(seq[:t])[seq[t]] for t in range(n)) + logp(seq)[eos]
            if np.isfinite(score):
                oracle.append((seq, score))
    oracle.sort(key=lambda x: (-x[1], x[0]))

    hyps = beam_search(StepScorer(model, src, table, lam), beam_size=8**3, beam_depth=3)
    got = [(h.ids, h.score) for h in hyps]
    same_order = [g[0] for g in got] == [o[0] for o in oracle]
    max_diff = max((abs(g[1] - o[1]) for g, o in zip(got, oracle)), default=0.0)
    passed = same_order and max_diff <= 1e-9
    record_criterion("4 beam vs exhaustive", passed,
                     f"{len(got)} beam / {len(oracle)} oracle sequences, order match={same_order}, max score diff {max_diff:.1e}")
    assert passed


# ---------------------------------------------------------------------------
# 5. reranking arithmetic


def _oracle_offset(phrase, doc):
    stems = [stem(t) for t in doc.tokens]
    target = [stem(t) for t in phrase.tokens]
    for i in range(len(stems) - len(target) + 1):
        if stems[i:i + len(target)] == target:
            return i + 1
    return None


def test_ac5_rerank_arithmetic():
    doc = make_doc("topic model of latent networks for author topic")
    bank = PhraseBank(2, min_df=2)
    bank.entries["author network"] = BankEntry(("author", "network"), np.zeros(2), 5)
    beta = 5 / 6
    values = {
        "absent in bank": (adjustment_weight(Phrase.from_text("author networks"), doc, bank, beta), 5 / 6),
        "absent not in bank": (adjustment_weight(Phrase.from_text("deep nets"), doc, bank, beta), 1.0),
        "offset 1": (adjustment_weight(Phrase.from_text("topic model"), doc, bank, beta), 0.5),
        "offset 3": (adjustment_weight(Phrase.from_text("of latent"), doc, bank, beta), 2 / 3),
    }
    exact = all(got == want for got, want in values.values())

    rng = np.random.default_rng(5)
    words = ["topic", "model", "of", "latent", "networks", "author", "deep", "nets"]
    worst = 0.0
    for alpha in (-1.0, -0.5, 0.0, 0.25, 1.0):
        hyps = [
            BeamHypothesis(tuple(rng.choice(words, size=int(rng.integers(1, 4)))), (0,), -float(rng.uniform(0.1, 20)))
            for _ in range(200)
        ]
        present, absent = rerank(hyps, doc, bank, DecodeConfig(alpha=alpha, beta=beta, top_n=1000))
        for kp in present + absent:
            off = _oracle_offset(kp.phrase, doc)
            if off is None:
                b = beta if kp.phrase.stem_key in {"author network"} else 1.0
            else:
                b = math.log2(1 + off) / (math.log2(1 + off) + 1)
            expected = kp.raw_score / max(len(kp.phrase) + alpha, 0.5) * b
            worst = max(worst, abs(kp.score - expected))
    passed = exact and worst <= 1e-12
    detail = ", ".join(f"{k}: b={v[0]:.6g}" for k, v in values.items())
    record_criterion("5 rerank arithmetic", passed, f"{detail}; max ŝ error {worst:.1e}")
    assert passed


# ---------------------------------------------------------------------------
# 6. retriever correctness


def _brute_force(bank, doc, model, k, tau, absent_only):
    v = model.embed_text(doc.tokens)
    v = v / np.linalg.norm(v)
    stems = [stem(t) for t in doc.tokens]
    rows = []
    for key, e in bank.entries.items():
        if e.doc_count < bank.min_df:
            continue
        c = e.sum_vec / e.doc_count
        score = float(np.dot(c / np.linalg.norm(c), v))
        if score < tau:
            continue
        target = [stem(t) for t in e.surface]
        present = any(stems[i:i + len(target)] == target for i in range(len(stems) - len(target) + 1))
        if absent_only and present:
            continue
        rows.append((-score, key, score))
    rows.sort()
    return [(key, score) for _, key, score in rows[:k]]


def test_ac6_retriever():
    rng = np.random.default_rng(6)
    dim = 32
    doc_words = [f"w{i}" for i in range(200)]
    emb = EmbeddingModel(doc_words, rng.standard_normal((200, dim)))
    bank = PhraseBank(dim, min_df=3)
    for i in range(10_000):
        surface = (doc_words[i % 200],) if i < 200 else (f"p{i:05d}", f"q{i % 97}")
        anchor = emb.vectors[int(rng.integers(200))]
        count = int(rng.integers(1, 10))
        bank.entries[Phrase(surface).stem_key] = BankEntry(surface, count * (anchor + 0.8 * rng.standard_normal(dim) / np.sqrt(dim)), count)
    mismatches = checks = returned = 0
    worst = 0.0
    for trial in range(12):
        tokens = list(rng.choice(doc_words, size=int(rng.integers(3, 15))))
        doc = Document(f"t{trial}", "", "", tokens, ["NN"] * len(tokens))
        for k, tau, absent_only in ((15, 0.7, True), (50, 0.3, True), (10_000, 0.0, False), (5, 0.5, False)):
            got = [(r.phrase.stem_key, r.score) for r in retrieve(bank, doc, emb, RetrievalConfig(k, tau, absent_only))]
            want = _brute_force(bank, doc, emb, k, tau, absent_only)
            checks += 1
            returned += len(got)
            if [g[0] for g in got] != [w[0] for w in want]:
                mismatches += 1
            else:
                worst = max([worst] + [abs(g[1] - w[1]) for g, w in zip(got, want)])

    syn = make_synthetic_corpus(n_docs=20, n_topics=3, seed=6)
    fresh = build_phrase_bank(syn.documents, syn.embeddings, min_df=2)
    incremental = update_phrase_bank(build_phrase_bank(syn.documents[:12], syn.embeddings, min_df=2),
                                     syn.documents[12:], syn.embeddings)
    same_keys = fresh.entries.keys() == incremental.entries.keys()
    update_err = max(
        max(np.abs(fresh.entries[k].sum_vec - incremental.entries[k].sum_vec).max(),
            np.abs(fresh.context_embedding(k) - incremental.context_embedding(k)).max())
        for k in fresh.entries
    ) if same_keys else float("inf")
    same_counts = same_keys and all(fresh.entries[k].doc_count == incremental.entries[k].doc_count for k in fresh.entries)
    passed = mismatches == 0 and returned > 0 and worst <= 1e-12 and same_counts and update_err <= 1e-9
    record_criterion("6 retriever", passed,
                     f"{checks} scans over 10000 entries, {returned} references, {mismatches} mismatches; "
                     f"update vs rebuild error {update_err:.1e}")
    assert passed


# ---------------------------------------------------------------------------
# 7. metric harness


def test_ac7_metrics():
    P = lambda *ts: [Phrase.from_text(t) for t in ts]  # noqa: E731
    f1 = score_document(P("a", "b", "c", "d", "e"), P("a", "c", "x", "y"), 5)
    rng = np.random.default_rng(7)
    letters = list("abcdefghij")
    monotone = True
    for _ in range(500):
        preds = P(*rng.choice(letters, size=int(rng.integers(0, 15))))
        golds = P(*rng.choice(letters, size=int(rng.integers(1, 6))))
        r = [score_document(preds, golds, k, "recall") for k in range(1, 16)]
        monotone &= all(x <= y for x, y in zip(r, r[1:]))
    porter = score_document(P("topic models"), P("topic model"), 5) == 1.0
    passed = f1 == 4 / 9 and monotone and porter
    record_criterion("7 metric harness", passed, f"F1@5={f1!r}, recall monotone={monotone}, stemmed match={porter}")
    assert passed


# ---------------------------------------------------------------------------
# 8. synthetic end-to-end


E2E = dict(enc_layers=2, dec_layers=2, d_model=64, heads=4, pos_emb_dim=16, epochs=2, lr=1e-3, clip_norm=1.0,
           batch_size=64, beam_size=100, beam_depth=6, min_df=5, random_state=0)


@pytest.mark.slow
def test_ac8_synthetic_end_to_end():
    syn = make_synthetic_corpus(n_docs=2000, seed=0)
    train_docs, test_docs = syn.documents[:1800], syn.documents[1800:]
    bank = build_phrase_bank(train_docs, syn.embeddings, min_df=E2E["min_df"])

    results = {}
    for use_refs in (True, False):
        start = time.perf_counter()
        est = KeyphraseGenerator(embeddings=syn.embeddings, bank=bank, use_references=use_refs, **E2E)
        est.fit(train_docs)
        train_seconds = time.perf_counter() - start
        report = est.evaluate(test_docs)
        results[use_refs] = (report.metrics, train_seconds)

    (full, t_full), (ablated, t_abl) = results[True], results[False]
    passed = (
        max(t_full, t_abl) <= 15 * 60
        and full["present_f1@5"] >= 0.30
        and full["absent_r@10"] > 0
        and ablated["absent_r@10"] < full["absent_r@10"]
    )
    record_criterion(
        "8 synthetic end-to-end", passed,
        f"F1@5={full['present_f1@5']:.3f}, R@10={full['absent_r@10']:.3f} (no references: "
        f"R@10={ablated['absent_r@10']:.3f}), training {t_full:.0f}s / {t_abl:.0f}s",
    )
    assert passed


# ---------------------------------------------------------------------------
# 9. dataset statistics (needs user-supplied data)


def test_ac9_inspec_stats():
    path = os.environ.get("KPGEN_INSPEC")
    if not path:
        record_criterion("9 Inspec statistics", None, "set KPGEN_INSPEC to an Inspec JSON Lines file to run")
        pytest.skip("KPGEN_INSPEC not set")
    stats = dataset_stats(read_corpus(path))
    passed = abs(stats["kps_per_doc"] - 9.7) <= 0.2 and abs(stats["pct_absent"] - 22.7) <= 1.0
    record_criterion("9 Inspec statistics", passed,
                     f"#kps/doc={stats['kps_per_doc']:.2f}, %absent={stats['pct_absent']:.2f}")
    assert passed
