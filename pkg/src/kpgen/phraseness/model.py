"""Transformer encoder-decoder with a POS-enhanced copy mechanism.

The output distribution over the extended vocabulary (decoder vocabulary plus
the out-of-vocabulary words of the augmented input) is

    p_gen * softmax(W_V s_t)  +  (1 - p_gen) * sum_{i: x_i = w} a_i

with ``p_gen = sigmoid(W_s s_t + W_y emb(y_{t-1}))`` and copy attention
``a = softmax_i(FF_h([h_i; pos(x_i)]) . FF_s([s_t; pos(y_{t-1})]))``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from ..corpus import BOS, PAD, UNK
from .inputs import AugmentedInput, TrainingInstance
from .vocab import Vocabularies

CHECKPOINT_VERSION = 1


@dataclass
class PhrasenessConfig:
    enc_layers: int = 3
    dec_layers: int = 3
    d_model: int = 256
    heads: int = 8
    pos_emb_dim: int = 64
    enc_vocab: int = 40000
    dec_vocab: int = 40000
    dropout: float = 0.1
    max_src_len: int = 400
    max_tgt_len: int = 7  # phrase tokens + [EOS]
    max_input_len: int = 512
    ff_dim: int | None = None
    use_pos: bool = True

    def __post_init__(self):
        for name in ("enc_layers", "dec_layers", "d_model", "heads", "pos_emb_dim",
                     "enc_vocab", "dec_vocab", "max_src_len", "max_tgt_len", "max_input_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class EncodedInput:
    """Encoder output for a single augmented input, reused across decoding steps."""
    source: AugmentedInput
    memory: torch.Tensor  # (1, S, d)
    copy_keys: torch.Tensor  # (1, S, d)
    ext_ids: torch.Tensor  # (S,)
    ext_tag_ids: torch.Tensor  # (ext,)


class PhrasenessModel(nn.Module):
    def __init__(self, config: PhrasenessConfig, vocabs: Vocabularies):
        super().__init__()
        self.config = config
        self.vocabs = vocabs
        d, p = config.d_model, config.pos_emb_dim
        ff = config.ff_dim or 4 * d
        self.pad_id = vocabs.decoder.stoi[PAD]
        self.unk_id = vocabs.decoder.stoi[UNK]
        self.bos_id = vocabs.decoder.stoi[BOS]

        self.enc_embed = nn.Embedding(len(vocabs.encoder), d, padding_idx=vocabs.encoder.stoi[PAD])
        self.dec_embed = nn.Embedding(len(vocabs.decoder), d, padding_idx=self.pad_id)
        self.enc_positions = nn.Embedding(config.max_input_len, d)
        self.dec_positions = nn.Embedding(config.max_tgt_len + 1, d)
        self.pos_tag_embed = nn.Embedding(len(vocabs.tags), p)
        self.embed_dropout = nn.Dropout(config.dropout)

        enc_layer = nn.TransformerEncoderLayer(d, config.heads, ff, config.dropout, batch_first=True)
        dec_layer = nn.TransformerDecoderLayer(d, config.heads, ff, config.dropout, batch_first=True)
        self.encoder = nn.TransformerEncoder(enc_layer, config.enc_layers, enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(dec_layer, config.dec_layers)

        self.generator = nn.Linear(d, len(vocabs.decoder))
        self.switch_state = nn.Linear(d, 1)
        self.switch_prev = nn.Linear(d, 1, bias=False)
        self.ff_h = nn.Sequential(nn.Linear(d + p, d), nn.Tanh(), nn.Linear(d, d))
        self.ff_s = nn.Sequential(nn.Linear(d + p, d), nn.Tanh(), nn.Linear(d, d))

    @property
    def dec_vocab_size(self) -> int:
        return self.generator.out_features

    def _pos(self, tag_ids: torch.Tensor) -> torch.Tensor:
        l = self.pos_tag_embed(tag_ids)
        return l if self.config.use_pos else torch.zeros_like(l)

    def encode(self, enc_ids, tag_ids, pad_mask):
        """-> encoder states h (B, S, d) and copy keys FF_h([h; l]) (B, S, d)."""
        positions = torch.arange(enc_ids.shape[1], device=enc_ids.device)
        x = self.embed_dropout(self.enc_embed(enc_ids) + self.enc_positions(positions))
        h = self.encoder(x, src_key_padding_mask=pad_mask)
        keys = self.ff_h(torch.cat([h, self._pos(tag_ids)], dim=-1))
        return h, keys

    def decode(self, memory, mem_pad_mask, dec_ids, dec_tag_ids, dec_pad_mask=None):
        """-> decoder states s (B, T, d), copy queries (B, T, d), switch logits (B, T)."""
        T = dec_ids.shape[1]
        positions = torch.arange(T, device=dec_ids.device)
        y = self.dec_embed(dec_ids)
        causal = torch.ones((T, T), dtype=torch.bool, device=dec_ids.device).triu(1)
        s = self.decoder(
            self.embed_dropout(y + self.dec_positions(positions)),
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=dec_pad_mask,
            memory_key_padding_mask=mem_pad_mask,
        )
        queries = self.ff_s(torch.cat([s, self._pos(dec_tag_ids)], dim=-1))
        switch = (self.switch_state(s) + self.switch_prev(y)).squeeze(-1)
        return s, queries, switch

    @staticmethod
    def copy_attention(keys, queries, mem_pad_mask):
        """a_i^t = softmax_i(keys_i . queries_t); padding positions get zero weight."""
        e = torch.einsum("bsd,btd->bts", keys, queries)
        e = e.masked_fill(mem_pad_mask[:, None, :], float("-inf"))
        return torch.softmax(e, dim=-1)

    # ------------------------------------------------------------------
    # training

    def collate(self, instances: Sequence[TrainingInstance]) -> dict:
        """Tensors for a batch; instances sharing a source object share one encoder pass."""
        sources: dict[int, int] = {}
        unique: list[AugmentedInput] = []
        src_index = []
        for inst in instances:
            key = id(inst.source)
            if key not in sources:
                sources[key] = len(unique)
                unique.append(inst.source)
            src_index.append(sources[key])

        S = max(len(s.tokens) for s in unique)
        U = len(unique)
        enc_ids = torch.full((U, S), self.vocabs.encoder.stoi[PAD], dtype=torch.long)
        tag_ids = torch.zeros((U, S), dtype=torch.long)
        ext_ids = torch.full((U, S), -1, dtype=torch.long)
        pad = torch.ones((U, S), dtype=torch.bool)
        for r, s in enumerate(unique):
            n = len(s.tokens)
            enc_ids[r, :n] = torch.tensor(s.enc_ids)
            tag_ids[r, :n] = torch.tensor(s.tag_ids)
            ext_ids[r, :n] = torch.tensor(s.ext_ids)
            pad[r, :n] = False

        B = len(instances)
        T = max(len(i.target_ids) for i in instances)
        V = self.dec_vocab_size
        dec_ids = torch.full((B, T), self.pad_id, dtype=torch.long)
        dec_tags = torch.zeros((B, T), dtype=torch.long)
        targets = torch.full((B, T), self.pad_id, dtype=torch.long)
        tgt_pad = torch.ones((B, T), dtype=torch.bool)
        tags = self.vocabs.tags
        special = tags.id("SPECIAL")
        for b, inst in enumerate(instances):
            n = len(inst.target_ids)
            prev = [self.bos_id] + [i if i < V else self.unk_id for i in inst.target_ids[:-1]]
            prev_tags = [special] + [tags.id(self.vocabs.tag_of(w)) for w in inst.target[:-1]]
            dec_ids[b, :n] = torch.tensor(prev)
            dec_tags[b, :n] = torch.tensor(prev_tags)
            targets[b, :n] = torch.tensor(inst.target_ids)
            tgt_pad[b, :n] = False
        return {
            "enc_ids": enc_ids, "tag_ids": tag_ids, "ext_ids": ext_ids, "src_pad": pad,
            "src_index": torch.tensor(src_index), "dec_ids": dec_ids, "dec_tags": dec_tags,
            "targets": targets, "tgt_pad": tgt_pad,
        }

    def target_log_probs(self, batch: dict) -> torch.Tensor:
        """log P_pn(z_t | z_<t, x~) for every target position, (B, T); padding -> 0."""
        h, keys = self.encode(batch["enc_ids"], batch["tag_ids"], batch["src_pad"])
        idx = batch["src_index"]
        memory, keys = h[idx], keys[idx]
        mem_pad, ext_ids = batch["src_pad"][idx], batch["ext_ids"][idx]
        s, queries, switch = self.decode(memory, mem_pad, batch["dec_ids"], batch["dec_tags"], batch["tgt_pad"])

        targets = batch["targets"]
        V = self.dec_vocab_size
        p_gen = torch.sigmoid(switch)
        log_pv = torch.log_softmax(self.generator(s), dim=-1)
        in_vocab = targets < V
        pv = torch.where(in_vocab, log_pv.gather(-1, targets.clamp(max=V - 1).unsqueeze(-1)).squeeze(-1).exp(),
                         torch.zeros((), dtype=s.dtype))
        a = self.copy_attention(keys, queries, mem_pad)
        pc = (a * (ext_ids[:, None, :] == targets[:, :, None])).sum(-1)
        p = p_gen * pv + (1 - p_gen) * pc
        logp = torch.log(p.clamp_min(torch.finfo(p.dtype).tiny))
        return logp.masked_fill(batch["tgt_pad"], 0.0)

    def nll(self, instances: Sequence[TrainingInstance]) -> torch.Tensor:
        """Per-instance negative log-likelihood -log P_pn(z | x~), (B,)."""
        return -self.target_log_probs(self.collate(instances)).sum(-1)

    # ------------------------------------------------------------------
    # inference

    def _device(self):
        return self.generator.weight.device

    @torch.no_grad()
    def encode_input(self, source: AugmentedInput) -> EncodedInput:
        dev = self._device()
        enc_ids = torch.tensor([source.enc_ids], device=dev)
        tag_ids = torch.tensor([source.tag_ids], device=dev)
        pad = torch.zeros_like(enc_ids, dtype=torch.bool)
        h, keys = self.encode(enc_ids, tag_ids, pad)
        return EncodedInput(
            source,
            h,
            keys,
            torch.tensor(source.ext_ids, device=dev),
            torch.tensor(source.ext_tag_ids, device=dev),
        )

    @torch.no_grad()
    def step(self, enc: EncodedInput, prefixes: Sequence[Sequence[int]], force_p_gen: float | None = None,
             return_parts: bool = False):
        """Next-word distributions over the extended vocabulary, float64 (B, ext).

        ``prefixes`` are extended-vocab id sequences of equal length.
        """
        dev = self._device()
        B = len(prefixes)
        L = len(prefixes[0]) if B else 0
        if L >= self.config.max_tgt_len:
            raise ValueError(f"prefix length {L} reaches max_tgt_len {self.config.max_tgt_len}")
        V = self.dec_vocab_size
        ext_size = enc.source.ext_size
        special = self.vocabs.tags.id("SPECIAL")
        prev = torch.tensor([[self.bos_id] + list(p) for p in prefixes], device=dev, dtype=torch.long).reshape(B, L + 1)
        prev_tags = torch.full_like(prev, special)
        if L:
            prev_tags[:, 1:] = enc.ext_tag_ids[prev[:, 1:].clamp(min=0, max=ext_size - 1)]
        prev = torch.where(prev < V, prev, torch.full_like(prev, self.unk_id))

        S = enc.memory.shape[1]
        mem_pad = torch.zeros((B, S), dtype=torch.bool, device=dev)
        s, queries, switch = self.decode(enc.memory.expand(B, -1, -1), mem_pad, prev, prev_tags)
        s, queries, switch = s[:, -1].double(), queries[:, -1:].double(), switch[:, -1].double()

        p_gen = torch.sigmoid(switch) if force_p_gen is None else torch.full_like(switch, float(force_p_gen))
        g = self.generator
        pv = torch.softmax(nn.functional.linear(s, g.weight.double(), g.bias.double()), dim=-1)
        a = self.copy_attention(enc.copy_keys.double().expand(B, -1, -1), queries, mem_pad).squeeze(1)
        pc = torch.zeros((B, ext_size), dtype=torch.float64, device=dev)
        pc.scatter_add_(1, enc.ext_ids.expand(B, -1), a)
        pv_ext = torch.zeros((B, ext_size), dtype=torch.float64, device=dev)
        pv_ext[:, :V] = pv
        p = p_gen[:, None] * pv_ext + (1 - p_gen[:, None]) * pc
        if return_parts:
            return p, {"p_gen": p_gen, "p_vocab": pv_ext, "p_copy": pc, "attention": a}
        return p

    # ------------------------------------------------------------------
    # persistence

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "format_version": CHECKPOINT_VERSION,
                "config": dataclasses.asdict(self.config),
                "vocabs": self.vocabs.to_state(),
                "state_dict": self.state_dict(),
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path, map_location="cpu") -> "PhrasenessModel":
        ckpt = torch.load(path, map_location=map_location, weights_only=False)
        if ckpt.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {ckpt.get('format_version')!r}")
        model = cls(PhrasenessConfig(**ckpt["config"]), Vocabularies.from_state(ckpt["vocabs"]))
        model.load_state_dict(ckpt["state_dict"])
        model.eval()
        return model


def phraseness_step(model: PhrasenessModel, source: AugmentedInput, prefix: Sequence[int],
                    force_p_gen: float | None = None):
    """Single-prefix convenience wrapper around :meth:`PhrasenessModel.step` (numpy output)."""
    enc = model.encode_input(source)
    return model.step(enc, [list(prefix)], force_p_gen)[0].cpu().numpy()
