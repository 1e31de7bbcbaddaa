import numpy as np
import pytest
import torch

from kpgen.corpus import Document, pos_tag, tokenize
from kpgen.embedding import EmbeddingModel
from kpgen.phraseness import PhrasenessConfig, PhrasenessModel, Vocabularies

ACCEPTANCE_LINES: list[str] = []

TOY_WORDS = ("topic", "model", "author", "latent", "network")


def record_criterion(name: str, passed: bool | None, detail: str = "") -> None:
    """One summary line per acceptance criterion; ``passed=None`` marks a skip."""
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    line = f"[{status}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_doc(text: str, doc_id: str = "d", golds=None) -> Document:
    tokens = tokenize(text)
    doc = Document(doc_id, "", text, tokens, pos_tag(tokens))
    if golds is not None:
        from kpgen.corpus import Phrase

        doc.gold_keyphrases = [Phrase.from_text(g) for g in golds]
    return doc


def toy_vocabs(words=TOY_WORDS, extra_source=("the", "for", "of")) -> Vocabularies:
    return Vocabularies.build(
        [list(words) + list(extra_source)],
        [list(words)],
        [],
        enc_size=64,
        dec_size=64,
    )


def toy_model(seed=0, vocabs=None, d_model=8, layers=1, heads=2, pos_emb_dim=4, dtype=torch.float64,
              use_pos=True, dropout=0.0, max_input_len=48, max_tgt_len=7) -> PhrasenessModel:
    torch.manual_seed(seed)
    config = PhrasenessConfig(
        enc_layers=layers, dec_layers=layers, d_model=d_model, heads=heads, pos_emb_dim=pos_emb_dim,
        enc_vocab=64, dec_vocab=64, dropout=dropout, max_src_len=32, max_tgt_len=max_tgt_len,
        max_input_len=max_input_len, use_pos=use_pos,
    )
    model = PhrasenessModel(config, vocabs or toy_vocabs()).to(dtype)
    model.eval()
    return model


def random_embeddings(words, dim=16, seed=0) -> EmbeddingModel:
    rng = np.random.default_rng(seed)
    return EmbeddingModel(list(words), rng.standard_normal((len(words), dim)))


@pytest.fixture
def vocabs():
    return toy_vocabs()


@pytest.fixture
def model(vocabs):
    return toy_model(vocabs=vocabs)
