"""Shared test oracles: finite differences, scalar LSTM math, recursive edit distance."""

from __future__ import annotations

import math

import numpy as np

from polyg2p.corpus import RESERVED, Vocabulary
from polyg2p.model import ModelConfig, init_params


def rel_err(a: np.ndarray, b: np.ndarray, guard: float = 1e-5) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), guard)
    return float((np.abs(a - b) / denom).max())


def finite_difference(loss_fn, tensor, eps: float = 1e-4) -> np.ndarray:
    """Central differences of a scalar loss w.r.t. one tensor's entries."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = loss_fn()
        flat[i] = orig - eps
        lo = loss_fn()
        flat[i] = orig
        grad_flat[i] = (hi - lo) / (2.0 * eps)
    return grad


def _sig(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def scalar_cell_step(x, h, c, w_in, w_rec, bias):
    """LSTM step in plain python floats, gates ordered i,f,g,o."""
    hidden = len(h)
    pre = []
    for r in range(4 * hidden):
        total = bias[r]
        for k in range(len(x)):
            total += w_in[r][k] * x[k]
        for k in range(hidden):
            total += w_rec[r][k] * h[k]
        pre.append(total)
    i = [_sig(pre[r]) for r in range(hidden)]
    f = [_sig(pre[hidden + r]) for r in range(hidden)]
    g = [math.tanh(pre[2 * hidden + r]) for r in range(hidden)]
    o = [_sig(pre[3 * hidden + r]) for r in range(hidden)]
    c_new = [f[r] * c[r] + i[r] * g[r] for r in range(hidden)]
    h_new = [o[r] * math.tanh(c_new[r]) for r in range(hidden)]
    return h_new, c_new


def _matvec(m, v):
    return [sum(row[k] * v[k] for k in range(len(v))) for row in m]


class OracleModel:
    """Independent plain-python forward pass of the whole architecture.

    Reads parameter buffers into nested lists and recomputes encoder
    annotations, attention, and per-step output distributions with explicit
    loops, for cross-checking the vectorized implementation.
    """

    def __init__(self, params, config):
        self.config = config
        as_list = lambda t: t.data.tolist()
        self.src_emb = as_list(params.src_embedding)
        self.tgt_emb = as_list(params.tgt_embedding)
        self.encoder = [
            {d: (as_list(layer[d].input_weights), as_list(layer[d].recurrent_weights),
                 as_list(layer[d].bias)) for d in ("fwd", "bwd")}
            for layer in params.encoder
        ]
        self.decoder = [
            (as_list(c.input_weights), as_list(c.recurrent_weights), as_list(c.bias))
            for c in params.decoder
        ]
        self.w_score = as_list(params.attention.score_weights)
        self.w_out = as_list(params.attention.output_weights)
        self.b_out = as_list(params.attention.output_bias)
        self.w_gen = as_list(params.generator_weights)
        self.b_gen = as_list(params.generator_bias)

    def encode(self, src_ids):
        half = self.config.hidden_size // 2
        inputs = [list(self.src_emb[i]) for i in src_ids]
        finals = []
        for layer in self.encoder:
            states = {}
            for direction, order in (("fwd", range(len(inputs))),
                                     ("bwd", range(len(inputs) - 1, -1, -1))):
                w_in, w_rec, bias = layer[direction]
                h, c = [0.0] * half, [0.0] * half
                out = [None] * len(inputs)
                for t in order:
                    h, c = scalar_cell_step(inputs[t], h, c, w_in, w_rec, bias)
                    out[t] = h
                states[direction] = (out, h, c)
            inputs = [states["fwd"][0][t] + states["bwd"][0][t] for t in range(len(inputs))]
            finals.append((states["fwd"][1] + states["bwd"][1],
                           states["fwd"][2] + states["bwd"][2]))
        return inputs, finals  # annotations per position, per-layer (h0, c0)

    def attend(self, top, annotations):
        query = _matvec(list(map(list, zip(*self.w_score))), top)  # top @ W  ==  W^T applied
        scores = [sum(q * a for q, a in zip(query, ann)) for ann in annotations]
        peak = max(scores)
        exps = [math.exp(s - peak) for s in scores]
        total = sum(exps)
        weights = [e / total for e in exps]
        h = len(top)
        context = [sum(weights[s] * annotations[s][k] for s in range(len(annotations)))
                   for k in range(h)]
        return context, weights

    def log_probs(self, src_ids, prev_tokens):
        """Distribution after teacher-forcing `prev_tokens` (BOS first)."""
        annotations, finals = self.encode(src_ids)
        layer_states = [([x for x in h0], [x for x in c0]) for h0, c0 in finals]
        attn_prev = [0.0] * self.config.hidden_size
        out = None
        for token in prev_tokens:
            x = list(self.tgt_emb[token])
            if self.config.input_feeding:
                x = x + attn_prev
            for idx, (w_in, w_rec, bias) in enumerate(self.decoder):
                h, c = scalar_cell_step(x, *layer_states[idx], w_in, w_rec, bias)
                layer_states[idx] = (h, c)
                x = h
            context, _ = self.attend(x, annotations)
            combined = context + x
            pre = [sum(self.w_out[r][k] * combined[k] for k in range(len(combined))) + self.b_out[r]
                   for r in range(len(self.b_out))]
            attn_prev = [math.tanh(v) for v in pre]
            logits = [sum(self.w_gen[r][k] * attn_prev[k] for k in range(len(attn_prev)))
                      + self.b_gen[r] for r in range(len(self.b_gen))]
            peak = max(logits)
            lse = peak + math.log(sum(math.exp(v - peak) for v in logits))
            out = [v - lse for v in logits]
        return out


def recursive_levenshtein(a, b) -> int:
    """Plain recursion over token lists; exponential, for short sequences only."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return recursive_levenshtein(a[1:], b[1:])
    return 1 + min(
        recursive_levenshtein(a[1:], b),
        recursive_levenshtein(a, b[1:]),
        recursive_levenshtein(a[1:], b[1:]),
    )


def tiny_model(
    seed: int = 0,
    src_vocab: int = 10,
    tgt_vocab: int = 9,
    hidden: int = 8,
    src_embed: int = 6,
    tgt_embed: int = 5,
    dropout: float = 0.0,
    dtype=np.float32,
    **kwargs,
):
    config = ModelConfig(
        src_vocab_size=src_vocab,
        tgt_vocab_size=tgt_vocab,
        hidden_size=hidden,
        src_embed=src_embed,
        tgt_embed=tgt_embed,
        dropout=dropout,
        **kwargs,
    )
    return config, init_params(config, seed=seed, dtype=dtype)


def toy_tgt_vocab(n_phonemes: int) -> Vocabulary:
    return Vocabulary(RESERVED + tuple(f"p{i}" for i in range(1, n_phonemes + 1)))
