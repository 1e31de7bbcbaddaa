"""scikit-learn style front ends: a phrase-bank retriever and the keyphrase generator."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Document, Phrase, extract_noun_phrases
from .decoder import BeamHypothesis, DecodeConfig, ScoredKeyphrase, StepScorer, beam_search, rerank
from .evaluation import ALPHA_GRID, EvalReport, evaluate, select_alpha
from .informativeness import DEFAULT_EPSILON, InformativenessTable
from .phraseness import (
    PhrasenessConfig,
    PhrasenessModel,
    TrainSchedule,
    Vocabularies,
    build_augmented_input,
    make_training_instances,
    train,
)
from .retriever import PhraseBank, Reference, RetrievalConfig, retrieve, update_phrase_bank
from .validation import check_documents, check_embeddings, check_fitted

logger = logging.getLogger(__name__)


class PhraseRetriever(TransformerMixin, BaseEstimator):
    """Phrase bank over an unlabeled corpus; ``transform`` returns each document's references.

    ``partial_fit`` folds further corpora into an existing bank.
    """

    def __init__(self, embeddings=None, min_df: int = 5, k: int = 15, tau: float = 0.7, absent_only: bool = True):
        self.embeddings = embeddings
        self.min_df = min_df
        self.k = k
        self.tau = tau
        self.absent_only = absent_only

    def fit(self, X, y=None):
        self.embeddings_ = check_embeddings(self.embeddings)
        self.bank_ = PhraseBank(self.embeddings_.dim, self.min_df)
        update_phrase_bank(self.bank_, check_documents(X, require_nonempty=False), self.embeddings_)
        return self

    def partial_fit(self, X, y=None):
        if not hasattr(self, "bank_"):
            return self.fit(X)
        update_phrase_bank(self.bank_, check_documents(X, require_nonempty=False), self.embeddings_)
        return self

    def transform(self, X) -> list[list[Reference]]:
        check_fitted(self, ["bank_"])
        config = RetrievalConfig(self.k, self.tau, self.absent_only)
        return [retrieve(self.bank_, d, self.embeddings_, config) for d in check_documents(X)]


@dataclass
class Prediction:
    id: str
    present: list[ScoredKeyphrase]
    absent: list[ScoredKeyphrase]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "present": [k.to_json() for k in self.present],
            "absent": [k.to_json() for k in self.absent],
        }


class KeyphraseGenerator(BaseEstimator):
    """Unsupervised keyphrase generation from an unlabeled corpus.

    ``fit`` builds (or reuses) the phrase bank, trains the retrieval-augmented
    copy model on each document's noun phrases and references, and
    ``predict`` decodes present and absent keyphrases with the
    phraseness x informativeness product of experts.
    """

    def __init__(
        self,
        embeddings=None,
        bank: PhraseBank | None = None,
        min_df: int = 5,
        k_refs: int = 15,
        tau: float = 0.7,
        enc_layers: int = 3,
        dec_layers: int = 3,
        d_model: int = 256,
        heads: int = 8,
        pos_emb_dim: int = 64,
        enc_vocab: int = 40000,
        dec_vocab: int = 40000,
        dropout: float = 0.1,
        max_src_len: int = 400,
        mask_prob: float = 0.5,
        epochs: int = 15,
        lr: float = 1e-4,
        lr_decay: float = 0.9,
        decay_every: int = 3,
        clip_norm: float = 0.1,
        batch_size: int = 64,
        lam: float = 0.75,
        beam_size: int = 100,
        beam_depth: int = 6,
        alpha: float = 0.0,
        beta: float = 5 / 6,
        top_n: int = 10,
        epsilon: float = DEFAULT_EPSILON,
        use_references: bool = True,
        use_pos: bool = True,
        use_adjustment: bool = True,
        random_state: int = 0,
        n_jobs: int | None = None,
    ):
        self.embeddings = embeddings
        self.bank = bank
        self.min_df = min_df
        self.k_refs = k_refs
        self.tau = tau
        self.enc_layers = enc_layers
        self.dec_layers = dec_layers
        self.d_model = d_model
        self.heads = heads
        self.pos_emb_dim = pos_emb_dim
        self.enc_vocab = enc_vocab
        self.dec_vocab = dec_vocab
        self.dropout = dropout
        self.max_src_len = max_src_len
        self.mask_prob = mask_prob
        self.epochs = epochs
        self.lr = lr
        self.lr_decay = lr_decay
        self.decay_every = decay_every
        self.clip_norm = clip_norm
        self.batch_size = batch_size
        self.lam = lam
        self.beam_size = beam_size
        self.beam_depth = beam_depth
        self.alpha = alpha
        self.beta = beta
        self.top_n = top_n
        self.epsilon = epsilon
        self.use_references = use_references
        self.use_pos = use_pos
        self.use_adjustment = use_adjustment
        self.random_state = random_state
        self.n_jobs = n_jobs

    # ------------------------------------------------------------------
    # configuration views

    def phraseness_config(self) -> PhrasenessConfig:
        return PhrasenessConfig(
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
            d_model=self.d_model,
            heads=self.heads,
            pos_emb_dim=self.pos_emb_dim,
            enc_vocab=self.enc_vocab,
            dec_vocab=self.dec_vocab,
            dropout=self.dropout,
            max_src_len=self.max_src_len,
            max_tgt_len=self.beam_depth + 1,
            max_input_len=self.max_src_len + 4 + max(self.k_refs, 0) * (self.beam_depth + 1),
            use_pos=self.use_pos,
        )

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(self.k_refs, self.tau)

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(
            lam=self.lam,
            beam_size=self.beam_size,
            beam_depth=self.beam_depth,
            alpha=self.alpha,
            beta=self.beta,
            top_n=self.top_n,
            use_references=self.use_references,
            use_pos=self.use_pos,
            use_adjustment=self.use_adjustment,
        )

    def schedule(self) -> TrainSchedule:
        return TrainSchedule(
            epochs=self.epochs,
            lr=self.lr,
            lr_decay=self.lr_decay,
            decay_every=self.decay_every,
            clip_norm=self.clip_norm,
            batch_size=self.batch_size,
            seed=self.random_state,
        )

    # ------------------------------------------------------------------
    # fitting

    def _references(self, doc: Document) -> list[Phrase]:
        if not self.use_references:
            return []
        return [r.phrase for r in retrieve(self.bank_, doc, self.embeddings_, self.retrieval_config())]

    def fit(self, X, y=None):
        docs = check_documents(X)
        self.embeddings_ = check_embeddings(self.embeddings)
        if self.bank is not None:
            if self.bank.dim != self.embeddings_.dim:
                raise ValueError(f"bank dim {self.bank.dim} != embedding dim {self.embeddings_.dim}")
            self.bank_ = self.bank
        else:
            self.bank_ = PhraseBank(self.embeddings_.dim, self.min_df)
            update_phrase_bank(self.bank_, docs, self.embeddings_)

        config = self.phraseness_config()
        phrases = [extract_noun_phrases(d.tokens, d.tags, self.beam_depth) for d in docs]
        refs = [self._references(d) for d in docs]
        self.vocabularies_ = Vocabularies.build(
            (d.tokens for d in docs),
            (p.tokens for ps in phrases for p in ps),
            ((d.tokens, d.tags) for d in docs),
            config.enc_vocab,
            config.dec_vocab,
        )
        rng = np.random.default_rng(self.random_state)
        instances = []
        for d, nps, rs in zip(docs, phrases, refs):
            instances.extend(make_training_instances(
                d.tokens, d.tags, nps, rs, self.vocabularies_, self.mask_prob, rng,
                config.max_src_len, config.max_input_len,
            ))
        logger.info("%d documents, %d training instances", len(docs), len(instances))

        torch.manual_seed(self.random_state)
        self.model_ = PhrasenessModel(config, self.vocabularies_)
        self.train_result_ = train(self.model_, instances, self.schedule())
        return self

    @classmethod
    def from_artifacts(cls, model: PhrasenessModel, bank: PhraseBank, embeddings, **params) -> "KeyphraseGenerator":
        """Wrap an already trained model and bank (e.g. loaded from disk) for prediction."""
        c = model.config
        est = cls(
            embeddings=embeddings, bank=bank, min_df=bank.min_df,
            enc_layers=c.enc_layers, dec_layers=c.dec_layers, d_model=c.d_model, heads=c.heads,
            pos_emb_dim=c.pos_emb_dim, enc_vocab=c.enc_vocab, dec_vocab=c.dec_vocab,
            dropout=c.dropout, max_src_len=c.max_src_len, use_pos=c.use_pos,
        )
        est.set_params(**params)
        est.embeddings_ = check_embeddings(embeddings)
        est.bank_ = bank
        est.model_ = model
        est.vocabularies_ = model.vocabs
        model.eval()
        return est

    # ------------------------------------------------------------------
    # decoding

    def _decode_one(self, doc: Document) -> list[BeamHypothesis]:
        config = self.decode_config()
        model_config = self.model_.config
        source = build_augmented_input(
            doc.tokens, doc.tags, self._references(doc), self.vocabularies_,
            model_config.max_src_len, model_config.max_input_len,
        )
        table = InformativenessTable(doc.tokens, source.ext_words, self.embeddings_, self.epsilon)
        scorer = StepScorer(self.model_, source, table, config.lam)
        return beam_search(scorer, config.beam_size, config.beam_depth)

    def generate(self, X) -> list[list[BeamHypothesis]]:
        """Raw beam-search hypotheses per document (before length normalization and reranking)."""
        check_fitted(self, ["model_", "bank_"])
        if self.beam_depth >= self.model_.config.max_tgt_len:
            raise ValueError(
                f"beam_depth {self.beam_depth} exceeds the model's maximum phrase length "
                f"{self.model_.config.max_tgt_len - 1}"
            )
        docs = check_documents(X)
        self.model_.eval()
        self.model_.config.use_pos = self.use_pos
        if self.n_jobs in (None, 1):
            return [self._decode_one(d) for d in docs]
        return Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(self._decode_one)(d) for d in docs)

    def rerank(self, docs, hypotheses, alpha: float | None = None) -> list[Prediction]:
        config = self.decode_config()
        if alpha is not None:
            config.alpha = alpha
        out = []
        for doc, hyps in zip(docs, hypotheses):
            present, absent = rerank(hyps, doc, self.bank_, config)
            out.append(Prediction(doc.id, present, absent))
        return out

    def predict(self, X) -> list[Prediction]:
        docs = check_documents(X)
        return self.rerank(docs, self.generate(docs))

    def evaluate(self, X) -> EvalReport:
        docs = check_documents(X)
        return evaluate_predictions(docs, self.predict(docs))

    def score(self, X, y=None) -> float:
        """Macro present F1@5 on documents carrying gold keyphrases."""
        return self.evaluate(X).metrics["present_f1@5"]

    def tune_alpha(self, X, grid=ALPHA_GRID) -> tuple[float, dict]:
        """Select the length penalty on validation documents and store it in ``alpha``."""
        docs = check_documents(X)
        hyps = self.generate(docs)
        best, table = select_alpha(lambda a: evaluate_predictions(docs, self.rerank(docs, hyps, a)), grid)
        self.alpha = best
        return best, table


def evaluate_predictions(docs, predictions: list[Prediction]) -> EvalReport:
    by_id = {
        p.id: ([k.phrase for k in p.present], [k.phrase for k in p.absent]) for p in predictions
    }
    return evaluate(docs, by_id)
