"""Desk-scale UniLM-style seq2seq transformer with knowledge injection.

One shared transformer stack reads ``[CLS] concepts [SEP] target``.
Source positions attend bidirectionally within the source; target
position t attends to the whole source and to targets up to t. In
``inject`` mode the concept-segment hidden states are rewritten after
one encoder layer by key-value attention over bi-LSTM encodings of the
evidence sentences.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Literal, NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

Mode = Literal["baseline", "concat", "inject"]
MODES = ("baseline", "concat", "inject")

MASK_NEG = -1e9


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0
    max_source_len: int = 32
    max_target_len: int = 24
    max_evidence_len: int = 16
    max_evidence_sentences: int = 8
    cs_encoder_hidden: int = 32
    injection_layer_index: int = 1
    mask_lm_prob: float = 0.7
    scaled_injection: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "n_layers", "n_heads", "max_source_len", "max_target_len",
                     "max_evidence_len", "max_evidence_sentences", "cs_encoder_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        if not 1 <= self.injection_layer_index <= self.n_layers:
            raise ValueError("injection_layer_index must name one of the encoder layers (1-based)")
        if not 0.0 < self.mask_lm_prob <= 1.0:
            raise ValueError("mask_lm_prob must lie in (0, 1]")
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


class InjectionState(NamedTuple):
    cs_encodings: torch.Tensor
    Q: torch.Tensor
    K: torch.Tensor
    V: torch.Tensor
    M: torch.Tensor
    A: torch.Tensor
    H_hid: torch.Tensor
    H_ctxt: torch.Tensor
    H_attn: torch.Tensor


def seq2seq_attention_mask(src_pad: torch.Tensor, tgt_pad: torch.Tensor) -> torch.Tensor:
    """Boolean ``(B, S+T, S+T)`` mask; True where a query may attend to a key."""
    B, S = src_pad.shape
    T = tgt_pad.shape[1]
    device = src_pad.device
    key_ok = torch.cat([~src_pad, ~tgt_pad], dim=1)[:, None, :]
    allowed = torch.zeros(S + T, S + T, dtype=torch.bool, device=device)
    allowed[:, :S] = True
    allowed[S:, S:] = torch.tril(torch.ones(T, T, dtype=torch.bool, device=device))
    return allowed[None] & key_ok


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.out = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
        B, L, D = x.shape
        q, k, v = self.qkv(x).view(B, L, 3, self.n_heads, self.d_head).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        scores = scores.masked_fill(~allowed[:, None], float("-inf"))
        ctx = torch.softmax(scores, dim=-1) @ v
        return self.out(ctx.transpose(1, 2).reshape(B, L, D))


class TransformerBlock(nn.Module):
    """Post-norm BERT layer."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.attn = MultiHeadSelfAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(nn.Linear(d_model, d_ff), nn.GELU(), nn.Linear(d_ff, d_model))
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, x, allowed):
        x = self.norm1(x + self.attn(x, allowed))
        return self.norm2(x + self.ff(x))


class CommonsenseEncoder(nn.Module):
    """Bi-LSTM over embedded evidence sentences, projected back to ``d_model``.

    Evidence arrives as ``(B, N, L)`` token ids; each sentence is encoded
    independently and the per-token outputs are laid out as ``(B, N*L, d)``
    with padding flagged in the returned mask.
    """

    def __init__(self, embedding: nn.Embedding, hidden: int, d_model: int):
        super().__init__()
        self.embedding = embedding
        self.lstm = nn.LSTM(embedding.embedding_dim, hidden, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * hidden, d_model)

    def forward(self, evidence_ids: torch.Tensor, evidence_lens: torch.Tensor):
        B, N, L = evidence_ids.shape
        d = self.proj.out_features
        dtype = self.proj.weight.dtype
        lens = evidence_lens.reshape(-1)
        pad = torch.arange(L, device=lens.device)[None, :] >= lens[:, None]
        out = torch.zeros(B * N, L, d, dtype=dtype, device=evidence_ids.device)
        rows = torch.nonzero(lens > 0).flatten()
        if rows.numel():
            emb = self.embedding(evidence_ids.reshape(B * N, L)[rows])
            packed = nn.utils.rnn.pack_padded_sequence(emb, lens[rows].cpu(), batch_first=True, enforce_sorted=False)
            enc, _ = self.lstm(packed)
            enc, _ = nn.utils.rnn.pad_packed_sequence(enc, batch_first=True, total_length=L)
            out = out.index_copy(0, rows, self.proj(enc) * (~pad[rows])[..., None].to(dtype))
        return out.view(B, N * L, d), pad.view(B, N * L)


def build_joint_mask(given: torch.Tensor, expansion: torch.Tensor, cs_padding: torch.Tensor) -> torch.Tensor:
    """Additive ``(B, S, L)`` mask: 0 from given-concept rows to real evidence, -1e9 elsewhere.

    Expansion concepts, special tokens and padding never attend to evidence.
    """
    if given.shape != expansion.shape:
        raise ValueError("given and expansion flags differ in shape")
    if bool((given & expansion).any()):
        raise ValueError("a position cannot be both given and expanded")
    allowed = given[:, :, None] & ~cs_padding[:, None, :]
    M = torch.full(allowed.shape, MASK_NEG)
    return M.masked_fill(allowed, 0.0)


class KnowledgeInjection(nn.Module):
    """``A = softmax(QK^T + M)``, ``H_ctxt = A V``, ``H_attn = W^T H_ctxt + H_hid``.

    Queries come from the transformer hidden states, keys and values from
    the commonsense encodings. Rows with no unmasked key get a zero
    attention vector, so those positions keep ``H_hid``.
    """

    def __init__(self, d_model: int, scaled: bool = False):
        super().__init__()
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.w = nn.Linear(d_model, d_model, bias=False)
        self.scaled = scaled

    def forward(self, h_hid: torch.Tensor, cs: torch.Tensor, M: torch.Tensor, return_state: bool = False):
        B, S, D = h_hid.shape
        if cs.dim() != 3 or cs.shape[0] != B or cs.shape[2] != D:
            raise ValueError(f"cs_encodings shape {tuple(cs.shape)} does not match hidden {tuple(h_hid.shape)}")
        if tuple(M.shape) != (B, S, cs.shape[1]):
            raise ValueError(f"mask shape {tuple(M.shape)} != {(B, S, cs.shape[1])}")
        Q, K, V = self.q(h_hid), self.k(cs), self.v(cs)
        scores = Q @ K.transpose(-1, -2)
        if self.scaled:
            scores = scores / math.sqrt(D)
        M = M.to(scores.dtype)
        live = (M == 0).any(dim=-1, keepdim=True)
        A = torch.softmax(scores + M, dim=-1) * live.to(scores.dtype)
        h_ctxt = A @ V
        h_attn = self.w(h_ctxt) + h_hid
        if return_state:
            return h_attn, InjectionState(cs, Q, K, V, M, A, h_hid, h_ctxt, h_attn)
        return h_attn


class Seq2SeqTransformer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        d = config.d_model
        self.tok_emb = nn.Embedding(config.vocab_size, d)
        self.pos_emb = nn.Embedding(config.max_source_len + config.max_target_len, d)
        self.seg_emb = nn.Embedding(2, d)
        self.emb_norm = nn.LayerNorm(d)
        self.blocks = nn.ModuleList(TransformerBlock(d, config.n_heads, config.d_ff) for _ in range(config.n_layers))
        self.cs_encoder = CommonsenseEncoder(self.tok_emb, config.cs_encoder_hidden, d)
        self.injection = KnowledgeInjection(d, config.scaled_injection)
        self.lm_head = nn.Linear(d, config.vocab_size)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module):
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, std=0.02 if isinstance(module, nn.Embedding) else 0.05)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def injection_parameters(self) -> dict[str, nn.Parameter]:
        """Parameters of the injection path: Q/K/V/W projections and the bi-LSTM."""
        named = {f"injection.{n}": p for n, p in self.injection.named_parameters()}
        named.update({f"cs_encoder.lstm.{n}": p for n, p in self.cs_encoder.lstm.named_parameters()})
        named.update({f"cs_encoder.proj.{n}": p for n, p in self.cs_encoder.proj.named_parameters()})
        return named

    def encode_commonsense(self, evidence_ids: torch.Tensor, evidence_lens: torch.Tensor):
        return self.cs_encoder(evidence_ids, evidence_lens)

    def embed(self, batch) -> torch.Tensor:
        ids = torch.cat([batch.src_ids, batch.tgt_ids], dim=1)
        real = torch.cat([~batch.src_pad, ~batch.tgt_pad], dim=1)
        # positions count real tokens only, so padding does not shift the target
        pos = (torch.cumsum(real.long(), dim=1) - 1).clamp(min=0)
        seg = torch.zeros_like(ids)
        seg[:, batch.src_ids.shape[1] :] = 1
        return self.emb_norm(self.tok_emb(ids) + self.pos_emb(pos) + self.seg_emb(seg))

    def hidden_states(self, batch, mode: Mode = "baseline"):
        """Run the stack; returns per-layer states and the injection state (or None)."""
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        S = batch.src_ids.shape[1]
        allowed = seq2seq_attention_mask(batch.src_pad, batch.tgt_pad)
        x = self.embed(batch)
        states = [x]
        state = None
        for i, block in enumerate(self.blocks, 1):
            x = block(x, allowed)
            if mode == "inject" and i == self.config.injection_layer_index:
                cs, cs_pad = self.encode_commonsense(batch.evidence_ids, batch.evidence_lens)
                M = build_joint_mask(batch.given, batch.expansion, cs_pad).to(x.device)
                h_attn, state = self.injection(x[:, :S], cs, M, return_state=True)
                x = torch.cat([h_attn, x[:, S:]], dim=1)
            states.append(x)
        return states, state

    def forward(self, batch, mode: Mode = "baseline") -> torch.Tensor:
        """Logits over the target segment, shape ``(B, T, vocab)``."""
        states, _ = self.hidden_states(batch, mode)
        return self.lm_head(states[-1][:, batch.src_ids.shape[1] :])


def masked_lm_loss(logits: torch.Tensor, target: torch.Tensor, mask_positions: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over masked target positions (0 when nothing is masked)."""
    if not bool(mask_positions.any()):
        return logits.sum() * 0.0
    return F.cross_entropy(logits[mask_positions], target[mask_positions])
