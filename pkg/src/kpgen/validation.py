"""Input coercion for the estimators."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from sklearn.exceptions import NotFittedError

from .corpus import Document, PosTagger
from .embedding import EmbeddingModel, load_vectors


def check_documents(X, tagger: PosTagger | None = None, require_nonempty: bool = True) -> list[Document]:
    """Accept Documents, corpus records (dicts) or raw strings; return Documents."""
    if isinstance(X, (str, bytes, Document, dict)):
        raise TypeError("expected an iterable of documents, got a single document")
    docs = []
    for i, item in enumerate(X if isinstance(X, Iterable) else ()):
        if isinstance(item, Document):
            docs.append(item)
        elif isinstance(item, dict):
            docs.append(Document.from_record(item, tagger))
        elif isinstance(item, str):
            docs.append(Document.from_record({"id": str(i), "title": "", "abstract": item}, tagger))
        else:
            raise TypeError(f"item {i}: cannot interpret {type(item).__name__} as a document")
    if require_nonempty and not docs:
        raise ValueError("no documents supplied")
    return docs


def check_embeddings(embeddings) -> EmbeddingModel:
    if isinstance(embeddings, EmbeddingModel):
        return embeddings
    if isinstance(embeddings, (str, Path)):
        return load_vectors(embeddings)
    raise TypeError("embeddings must be an EmbeddingModel or a path to a vector file")


def check_fitted(estimator, attributes: Iterable[str]) -> None:
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first (missing {', '.join(missing)})"
        )
