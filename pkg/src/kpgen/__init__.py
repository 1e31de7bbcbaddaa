"""Unsupervised keyphrase generation.

A retrieval-augmented copy seq2seq model supplies phraseness, word/text
embedding similarity supplies informativeness, and the two are combined as a
product of experts during beam search.
"""

from .corpus import Document, Phrase, extract_noun_phrases, is_present, pos_tag, read_corpus, tokenize
from .decoder import DecodeConfig, ScoredKeyphrase, adjustment_weight, beam_search, combine_step, rerank
from .embedding import EmbeddingModel, load_vectors
from .estimator import KeyphraseGenerator, PhraseRetriever, Prediction
from .evaluation import EvalReport, dataset_stats, evaluate, match, score_document, select_alpha
from .informativeness import InformativenessTable, informativeness_step
from .retriever import PhraseBank, RetrievalConfig, build_phrase_bank, retrieve, update_phrase_bank

__version__ = "0.1.0"

__all__ = [
    "DecodeConfig",
    "Document",
    "EmbeddingModel",
    "EvalReport",
    "InformativenessTable",
    "KeyphraseGenerator",
    "Phrase",
    "PhraseBank",
    "PhraseRetriever",
    "Prediction",
    "RetrievalConfig",
    "ScoredKeyphrase",
    "adjustment_weight",
    "beam_search",
    "build_phrase_bank",
    "combine_step",
    "dataset_stats",
    "evaluate",
    "extract_noun_phrases",
    "informativeness_step",
    "is_present",
    "load_vectors",
    "match",
    "pos_tag",
    "read_corpus",
    "rerank",
    "retrieve",
    "score_document",
    "select_alpha",
    "tokenize",
    "update_phrase_bank",
]
