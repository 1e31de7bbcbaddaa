"""Stemmed exact-match evaluation: macro F1@k for present, macro R@k for absent keyphrases."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import Document, Phrase, extract_noun_phrases, is_present

ALPHA_GRID = (-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)
METRICS = ("present_f1@3", "present_f1@5", "absent_r@5", "absent_r@10")


def match(pred: Phrase, gold: Phrase) -> bool:
    return pred.stem_key == gold.stem_key


def dedupe(phrases: Iterable[Phrase]) -> list[Phrase]:
    seen = set()
    out = []
    for p in phrases:
        if p.stem_key not in seen:
            seen.add(p.stem_key)
            out.append(p)
    return out


def precision_recall_f1(preds: Sequence[Phrase], golds: Sequence[Phrase], k: int) -> tuple[float, float, float]:
    """P, R, F1 of the top-k predictions; P divides by the number actually returned."""
    if k <= 0:
        raise ValueError("k must be positive")
    top = dedupe(preds)[:k]
    gold_keys = {g.stem_key for g in golds}
    if not top or not gold_keys:
        return 0.0, 0.0, 0.0
    hits = sum(p.stem_key in gold_keys for p in top)
    p = hits / len(top)
    r = hits / len(gold_keys)
    # 2PR/(P+R) written as one division, so simple ratios come out exact
    f1 = 2 * hits / (len(top) + len(gold_keys))
    return p, r, f1


def score_document(preds: Sequence[Phrase], golds: Sequence[Phrase], k: int, mode: str = "f1") -> float | None:
    """Per-document F1@k or R@k; None when there are no golds (excluded from macro averages)."""
    if mode not in ("f1", "recall"):
        raise ValueError(f"unknown mode {mode!r}")
    if k <= 0:
        raise ValueError("k must be positive")
    if not golds:
        return None
    _, r, f1 = precision_recall_f1(preds, golds, k)
    return f1 if mode == "f1" else r


def split_golds(doc: Document) -> tuple[list[Phrase], list[Phrase]]:
    golds = dedupe(doc.gold_keyphrases or [])
    present = [g for g in golds if is_present(g, doc)]
    absent = [g for g in golds if not is_present(g, doc)]
    return present, absent


@dataclass
class EvalReport:
    metrics: dict[str, float]
    counts: dict[str, int]
    n_docs: int
    per_document: dict[str, dict[str, float | None]] = field(default_factory=dict)

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(self.metrics[m] for m in METRICS)

    def to_json(self, per_document: bool = False) -> dict:
        out = {"n_docs": self.n_docs, "metrics": self.metrics, "evaluable_docs": self.counts}
        if per_document:
            out["per_document"] = self.per_document
        return out

    def to_table(self) -> str:
        rows = [("metric", "value", "docs")]
        rows += [(m, f"{self.metrics[m] * 100:.2f}", str(self.counts[m])) for m in METRICS]
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        return "\n".join(
            f"{r[0]:<{widths[0]}}  {r[1]:>{widths[1]}}  {r[2]:>{widths[2]}}" for r in rows
        )


def evaluate(
    docs: Sequence[Document],
    predictions: Mapping[str, tuple[Sequence[Phrase], Sequence[Phrase]]],
) -> EvalReport:
    """Macro-averaged metrics; ``predictions`` maps doc id -> (present, absent) ranked lists."""
    per_doc: dict[str, dict[str, float | None]] = {}
    sums = dict.fromkeys(METRICS, 0.0)
    counts = dict.fromkeys(METRICS, 0)
    for doc in docs:
        present_gold, absent_gold = split_golds(doc)
        present_pred, absent_pred = predictions.get(doc.id, ([], []))
        row = {
            "present_f1@3": score_document(present_pred, present_gold, 3, "f1"),
            "present_f1@5": score_document(present_pred, present_gold, 5, "f1"),
            "absent_r@5": score_document(absent_pred, absent_gold, 5, "recall"),
            "absent_r@10": score_document(absent_pred, absent_gold, 10, "recall"),
        }
        per_doc[doc.id] = row
        for m, v in row.items():
            if v is not None:
                sums[m] += v
                counts[m] += 1
    metrics = {m: sums[m] / counts[m] if counts[m] else 0.0 for m in METRICS}
    return EvalReport(metrics, counts, len(docs), per_doc)


def select_alpha_from_metrics(table: Mapping[float, Sequence[float]]) -> float:
    """Pick the alpha whose max-normalized metrics have the largest geometric mean.

    Metric columns that are zero for every alpha are dropped; ties go to the
    smaller alpha.
    """
    if not table:
        raise ValueError("empty alpha grid")
    alphas = sorted(table)
    n = len(table[alphas[0]])
    maxima = [max(table[a][j] for a in alphas) for j in range(n)]
    keep = [j for j in range(n) if maxima[j] > 0]
    if not keep:
        return alphas[0]

    def gmean(a: float) -> float:
        vals = [table[a][j] / maxima[j] for j in keep]
        if min(vals) <= 0:
            return 0.0
        return math.exp(sum(math.log(v) for v in vals) / len(vals))

    best = alphas[0]
    best_score = gmean(best)
    for a in alphas[1:]:
        g = gmean(a)
        if g > best_score:
            best, best_score = a, g
    return best


def select_alpha(
    evaluate_at: Callable[[float], EvalReport],
    grid: Sequence[float] = ALPHA_GRID,
) -> tuple[float, dict[float, tuple[float, ...]]]:
    """Grid-search the length penalty on a validation set.

    ``evaluate_at(alpha)`` reranks and scores the validation predictions.
    """
    if not grid:
        raise ValueError("empty alpha grid")
    table = {float(a): evaluate_at(float(a)).as_tuple() for a in grid}
    return select_alpha_from_metrics(table), table


def dataset_stats(docs: Sequence[Document], training_docs: Sequence[Document] | None = None) -> dict:
    """Mean #keyphrases per document, mean % absent, and optionally mean % overlap.

    Overlap counts a gold keyphrase when its stem key occurs among the gold
    keyphrases or extracted noun phrases of ``training_docs``.
    """
    labeled = [d for d in docs if d.gold_keyphrases]
    if not labeled:
        raise ValueError("no documents with gold keyphrases")
    n_kps, pct_absent, pct_overlap = [], [], []
    known = None
    if training_docs is not None:
        known = set()
        for d in training_docs:
            known.update(p.stem_key for p in (d.gold_keyphrases or []))
            known.update(p.stem_key for p in extract_noun_phrases(d.tokens, d.tags))
    for d in labeled:
        golds = dedupe(d.gold_keyphrases)
        n_kps.append(len(golds))
        pct_absent.append(100.0 * sum(not is_present(g, d) for g in golds) / len(golds))
        if known is not None:
            pct_overlap.append(100.0 * sum(g.stem_key in known for g in golds) / len(golds))
    stats = {
        "n_docs": len(labeled),
        "kps_per_doc": sum(n_kps) / len(n_kps),
        "pct_absent": sum(pct_absent) / len(pct_absent),
    }
    if known is not None:
        stats["pct_overlap"] = sum(pct_overlap) / len(pct_overlap)
    return stats
