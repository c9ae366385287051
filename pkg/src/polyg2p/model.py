"""Shared encoder-decoder with attention for grapheme-to-phoneme conversion.

Architecture: embeddings on both sides, a stacked bidirectional LSTM encoder
(per-direction hidden = hidden_size/2, outputs concatenated), a stacked LSTM
decoder initialized from the encoder's final states, bilinear ("general")
global attention over encoder annotations, and a softmax generator over the
phoneme vocabulary. The decoder input is the previous target embedding
concatenated with the previous attentional vector (input feeding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import BOS_ID, EOS_ID, PAD_ID

GATE_ORDER = "input,forget,cell,output"


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    hidden_size: int = 150
    src_embed: int = 150
    tgt_embed: int = 150
    enc_layers: int = 2
    dec_layers: int = 2
    dropout: float = 0.3
    input_feeding: bool = True

    def __post_init__(self):
        if self.hidden_size % 2 != 0:
            raise ValueError("hidden_size must be even (split across encoder directions)")
        for name in ("src_vocab_size", "tgt_vocab_size", "hidden_size", "src_embed",
                     "tgt_embed", "enc_layers", "dec_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "src_vocab_size": self.src_vocab_size,
            "tgt_vocab_size": self.tgt_vocab_size,
            "hidden_size": self.hidden_size,
            "src_embed": self.src_embed,
            "tgt_embed": self.tgt_embed,
            "enc_layers": self.enc_layers,
            "dec_layers": self.dec_layers,
            "dropout": self.dropout,
            "input_feeding": self.input_feeding,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class CellParams:
    """One LSTM cell; weights are [4h x in] / [4h x h], gates ordered i,f,g,o."""

    input_weights: Tensor
    recurrent_weights: Tensor
    bias: Tensor


@dataclass
class AttentionParams:
    score_weights: Tensor   # [h x h] bilinear score matrix
    output_weights: Tensor  # [h x 2h], applied to [context; decoder_top]
    output_bias: Tensor


@dataclass
class ModelParams:
    src_embedding: Tensor
    tgt_embedding: Tensor
    encoder: list[dict[str, CellParams]]  # per layer: {"fwd": ..., "bwd": ...}
    decoder: list[CellParams]
    attention: AttentionParams
    generator_weights: Tensor
    generator_bias: Tensor

    def named(self):
        yield "src_embedding", self.src_embedding
        yield "tgt_embedding", self.tgt_embedding
        for i, layer in enumerate(self.encoder):
            for direction in ("fwd", "bwd"):
                cell = layer[direction]
                yield f"encoder.l{i}.{direction}.input_weights", cell.input_weights
                yield f"encoder.l{i}.{direction}.recurrent_weights", cell.recurrent_weights
                yield f"encoder.l{i}.{direction}.bias", cell.bias
        for i, cell in enumerate(self.decoder):
            yield f"decoder.l{i}.input_weights", cell.input_weights
            yield f"decoder.l{i}.recurrent_weights", cell.recurrent_weights
            yield f"decoder.l{i}.bias", cell.bias
        yield "attention.score_weights", self.attention.score_weights
        yield "attention.output_weights", self.attention.output_weights
        yield "attention.output_bias", self.attention.output_bias
        yield "generator.weights", self.generator_weights
        yield "generator.bias", self.generator_bias

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]


def _cell_bias(four_h: int, dtype) -> np.ndarray:
    # forget-gate slice initialized to 1.0 for stable early training
    b = np.zeros(four_h, dtype=dtype)
    h = four_h // 4
    b[h : 2 * h] = 1.0
    return b


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    """Deterministic initialization: weights uniform(-0.1, 0.1), biases zero,
    forget-gate bias 1.0."""
    rng = np.random.default_rng(seed)

    def uniform(*shape):
        return Tensor(rng.uniform(-0.1, 0.1, shape).astype(dtype))

    h = config.hidden_size
    half = h // 2

    def make_cell(in_size: int, hidden: int) -> CellParams:
        return CellParams(
            input_weights=uniform(4 * hidden, in_size),
            recurrent_weights=uniform(4 * hidden, hidden),
            bias=Tensor(_cell_bias(4 * hidden, dtype)),
        )

    encoder = []
    for layer in range(config.enc_layers):
        in_size = config.src_embed if layer == 0 else h
        encoder.append({"fwd": make_cell(in_size, half), "bwd": make_cell(in_size, half)})
    decoder = []
    for layer in range(config.dec_layers):
        if layer == 0:
            in_size = config.tgt_embed + (h if config.input_feeding else 0)
        else:
            in_size = h
        decoder.append(make_cell(in_size, h))

    params = ModelParams(
        src_embedding=uniform(config.src_vocab_size, config.src_embed),
        tgt_embedding=uniform(config.tgt_vocab_size, config.tgt_embed),
        encoder=encoder,
        decoder=decoder,
        attention=AttentionParams(
            score_weights=uniform(h, h),
            output_weights=uniform(h, 2 * h),
            output_bias=Tensor(np.zeros(h, dtype=dtype)),
        ),
        generator_weights=uniform(config.tgt_vocab_size, h),
        generator_bias=Tensor(np.zeros(config.tgt_vocab_size, dtype=dtype)),
    )
    for name, t in params.named():
        t.name = name
    return params


def clone_params(params: ModelParams) -> ModelParams:
    """Deep copy of all parameter buffers (gradients are not copied)."""
    mapping = {name: t.data.copy() for name, t in params.named()}
    return params_from_arrays(_config_of(params), mapping)


def _config_of(params: ModelParams) -> ModelConfig:
    vs, se = params.src_embedding.data.shape
    vt, te = params.tgt_embedding.data.shape
    h = params.attention.score_weights.data.shape[0]
    dec0_in = params.decoder[0].input_weights.data.shape[1]
    return ModelConfig(
        src_vocab_size=vs,
        tgt_vocab_size=vt,
        hidden_size=h,
        src_embed=se,
        tgt_embed=te,
        enc_layers=len(params.encoder),
        dec_layers=len(params.decoder),
        dropout=0.0,
        input_feeding=dec0_in > te,
    )


def params_from_arrays(config: ModelConfig, arrays: dict[str, np.ndarray]) -> ModelParams:
    """Rebuild ModelParams from named arrays (e.g. a loaded checkpoint)."""
    dtype = next(iter(arrays.values())).dtype
    params = init_params(config, seed=0, dtype=dtype)
    for name, t in params.named():
        if name not in arrays:
            raise ValueError(f"missing tensor {name!r}")
        if arrays[name].shape != t.data.shape:
            raise ValueError(f"tensor {name!r}: expected shape {t.data.shape}, got {arrays[name].shape}")
        t.data = np.ascontiguousarray(arrays[name])
    return params


# --- forward computation -----------------------------------------------------


def cell_step(x: Tensor, h: Tensor, c: Tensor, cell: CellParams) -> tuple[Tensor, Tensor]:
    """One LSTM update: c' = f*c + i*g, h' = o*tanh(c')."""
    pre = ad.add(ad.linear(x, cell.input_weights), ad.linear(h, cell.recurrent_weights, cell.bias))
    i_gate, f_gate, g_cand, o_gate = ad.split(pre, 4)
    i_gate = ad.sigmoid(i_gate)
    f_gate = ad.sigmoid(f_gate)
    g_cand = ad.tanh(g_cand)
    o_gate = ad.sigmoid(o_gate)
    c_new = ad.add(ad.mul(f_gate, c), ad.mul(i_gate, g_cand))
    h_new = ad.mul(o_gate, ad.tanh(c_new))
    return h_new, c_new


def _masked_update(new: Tensor, old: Tensor, col: np.ndarray) -> Tensor:
    # col is a [B,1] 0/1 mask: padded rows keep their previous state
    if col.all():
        return new
    return ad.add(ad.mul_const(new, col), ad.mul_const(old, 1.0 - col))


@dataclass
class EncodedSource:
    annotations: Tensor        # [B, S, h]
    mask: np.ndarray           # [B, S] float 0/1, 1 at real tokens
    final_states: list[tuple[Tensor, Tensor]]  # per decoder-init layer: (h0, c0), each [B, h]


@dataclass
class DecoderState:
    layers: list[tuple[Tensor, Tensor]]  # per layer (h, c), each [B, h]
    attn: Tensor                         # previous attentional vector [B, h]


def pad_batch(rows: Sequence[Sequence[int]], pad_id: int = PAD_ID) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad integer sequences into an id matrix plus a 0/1 mask."""
    batch = len(rows)
    width = max(len(r) for r in rows)
    ids = np.full((batch, width), pad_id, dtype=np.intp)
    mask = np.zeros((batch, width), dtype=np.float64)
    for i, r in enumerate(rows):
        ids[i, : len(r)] = r
        mask[i, : len(r)] = 1.0
    return ids, mask


def _zeros(b: int, n: int, dtype) -> Tensor:
    return Tensor(np.zeros((b, n), dtype=dtype))


def _trim_pads(row: Sequence[int]) -> Sequence[int]:
    end = len(row)
    while end > 0 and row[end - 1] == PAD_ID:
        end -= 1
    return row[:end]


def encode(
    src_rows: Sequence[Sequence[int]],
    params: ModelParams,
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> EncodedSource:
    """Run the bidirectional encoder over a batch of source id sequences.

    Trailing PAD ids count as padding, not content."""
    src_rows = [_trim_pads(r) for r in src_rows]
    if not src_rows or any(len(r) == 0 for r in src_rows):
        raise ValueError("empty source")
    dtype = params.src_embedding.data.dtype
    ids, mask = pad_batch(src_rows)
    mask = mask.astype(dtype)
    batch, length = ids.shape
    half = config.hidden_size // 2

    inputs = [ad.embedding_lookup(params.src_embedding, ids[:, t]) for t in range(length)]
    final_states: list[tuple[Tensor, Tensor]] = []
    for layer_idx, layer in enumerate(params.encoder):
        if layer_idx > 0 and training and config.dropout > 0:
            inputs = [ad.dropout(x, config.dropout, rng) for x in inputs]
        outputs: dict[str, list[Tensor]] = {}
        finals: dict[str, tuple[Tensor, Tensor]] = {}
        for direction, order in (("fwd", range(length)), ("bwd", range(length - 1, -1, -1))):
            cell = layer[direction]
            h, c = _zeros(batch, half, dtype), _zeros(batch, half, dtype)
            out = [None] * length
            for t in order:
                h_new, c_new = cell_step(inputs[t], h, c, cell)
                col = mask[:, t : t + 1]
                h = _masked_update(h_new, h, col)
                c = _masked_update(c_new, c, col)
                out[t] = h
            outputs[direction] = out
            finals[direction] = (h, c)
        inputs = [ad.concat([outputs["fwd"][t], outputs["bwd"][t]]) for t in range(length)]
        final_states.append(
            (ad.concat([finals["fwd"][0], finals["bwd"][0]]),
             ad.concat([finals["fwd"][1], finals["bwd"][1]]))
        )

    annotations = ad.stack(inputs, axis=1)
    return EncodedSource(annotations, mask, final_states)


def initial_state(encoded: EncodedSource, config: ModelConfig) -> DecoderState:
    """Decoder start state: encoder final states per layer, zero attentional vector."""
    batch = encoded.mask.shape[0]
    dtype = encoded.annotations.data.dtype
    layers = [encoded.final_states[min(i, len(encoded.final_states) - 1)]
              for i in range(config.dec_layers)]
    return DecoderState(layers=list(layers), attn=_zeros(batch, config.hidden_size, dtype))


_MASK_SCALE = 1e9


def attend(
    decoder_top_h: Tensor,
    annotations: Tensor,
    mask: np.ndarray,
    attention: AttentionParams,
) -> tuple[Tensor, Tensor]:
    """Bilinear attention: weights = softmax(h^T W a_s) over unmasked positions,
    context = sum_s weights_s * a_s. Returns (context [B,h], weights [B,S])."""
    batch, length, h = annotations.data.shape
    if length == 0:
        raise ValueError("attention over an empty source")
    query = ad.matmul(decoder_top_h, attention.score_weights)       # [B, h]
    scores = ad.reshape(ad.bmm(annotations, ad.reshape(query, (batch, h, 1))), (batch, length))
    weights = ad.softmax(scores, mask_add=(mask - 1.0) * _MASK_SCALE)
    context = ad.reshape(ad.bmm(ad.reshape(weights, (batch, 1, length)), annotations), (batch, h))
    return context, weights


def _decoder_logits(
    prev_ids: np.ndarray,
    state: DecoderState,
    encoded: EncodedSource,
    params: ModelParams,
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, DecoderState, Tensor]:
    """One decoder step from raw previous-token ids; returns pre-softmax logits."""
    emb = ad.embedding_lookup(params.tgt_embedding, prev_ids)
    x = ad.concat([emb, state.attn]) if config.input_feeding else emb
    new_layers: list[tuple[Tensor, Tensor]] = []
    for layer_idx, cell in enumerate(params.decoder):
        if layer_idx > 0 and training and config.dropout > 0:
            x = ad.dropout(x, config.dropout, rng)
        h, c = state.layers[layer_idx]
        h, c = cell_step(x, h, c, cell)
        new_layers.append((h, c))
        x = h
    context, weights = attend(x, encoded.annotations, encoded.mask, params.attention)
    attn_vec = ad.tanh(ad.linear(ad.concat([context, x]), params.attention.output_weights,
                                 params.attention.output_bias))
    logits = ad.linear(attn_vec, params.generator_weights, params.generator_bias)
    return logits, DecoderState(new_layers, attn_vec), weights


def decode_step(
    prev_ids,
    state: DecoderState,
    encoded: EncodedSource,
    params: ModelParams,
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, DecoderState]:
    """One decoder step; returns (log_probs [B, Vt], new state)."""
    prev_ids = np.asarray(prev_ids, dtype=np.intp)
    if prev_ids.size and prev_ids.max() >= config.tgt_vocab_size:
        raise IndexError("target id out of range")
    logits, new_state, _ = _decoder_logits(prev_ids, state, encoded, params, config, training, rng)
    return ad.log_softmax(logits), new_state


def forward_loss(
    batch: Sequence[tuple[Sequence[int], Sequence[int]]],
    params: ModelParams,
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Teacher-forced cross-entropy over a batch of (src_ids, tgt_ids) pairs.

    Targets are wrapped as BOS ... EOS internally; PAD positions contribute
    no loss, and attention never sees padded source positions.
    """
    if not batch:
        raise ValueError("empty batch")
    src_rows = [pair[0] for pair in batch]
    tgt_rows = [pair[1] for pair in batch]
    encoded = encode(src_rows, params, config, training=training, rng=rng)
    state = initial_state(encoded, config)

    dec_inputs, _ = pad_batch([[BOS_ID] + list(t) for t in tgt_rows])
    golds, _ = pad_batch([list(t) + [EOS_ID] for t in tgt_rows])
    steps = golds.shape[1]

    step_logits = []
    for t in range(steps):
        logits, state, _ = _decoder_logits(dec_inputs[:, t], state, encoded, params, config,
                                           training=training, rng=rng)
        step_logits.append(logits)
    all_logits = ad.concat(step_logits, axis=0)          # [steps*B, Vt], step-major
    flat_targets = golds.T.reshape(-1)
    return ad.cross_entropy(all_logits, flat_targets, PAD_ID)


def target_token_count(batch: Sequence[tuple[Sequence[int], Sequence[int]]]) -> int:
    """Non-pad target positions in a batch (each target contributes len+1 for EOS)."""
    return sum(len(tgt) + 1 for _, tgt in batch)


# --- training ----------------------------------------------------------------


@dataclass
class TrainingSchedule:
    epochs: int = 13
    batch_size: int = 64
    lr: float = 1.0
    clip: float = 5.0
    seed: int = 1
    lr_decay_factor: float | None = None
    lr_decay_start: int | None = None


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float | None


@dataclass
class TrainResult:
    params: ModelParams
    best_params: ModelParams | None
    best_epoch: int | None
    history: list[EpochStats] = field(default_factory=list)


def make_batches(
    pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
    batch_size: int,
    rng: np.random.Generator,
    pool_factor: int = 20,
) -> list[list[int]]:
    """Shuffle, then sort by source length within windows of batch_size*pool_factor
    to limit padding while keeping batch composition stochastic."""
    order = list(rng.permutation(len(pairs)))
    window = batch_size * pool_factor
    batches: list[list[int]] = []
    for start in range(0, len(order), window):
        chunk = sorted(order[start : start + window], key=lambda i: len(pairs[i][0]))
        for b in range(0, len(chunk), batch_size):
            batches.append(chunk[b : b + batch_size])
    return batches


def _epoch_loss(
    pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
    batches: Sequence[Sequence[int]],
    loss_of_batch: Callable[[list], float],
) -> float:
    total, tokens = 0.0, 0
    for batch_idx in batches:
        batch = [pairs[i] for i in batch_idx]
        n = target_token_count(batch)
        total += loss_of_batch(batch) * n
        tokens += n
    return total / tokens


def validation_loss(
    pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
    params: ModelParams,
    config: ModelConfig,
    batch_size: int = 64,
) -> float:
    """Token-weighted mean loss; independent of batching."""
    order = sorted(range(len(pairs)), key=lambda i: len(pairs[i][0]))
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    with ad.inference_mode():
        return _epoch_loss(pairs, batches, lambda b: float(forward_loss(b, params, config).data))


def train_model(
    train_pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
    val_pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
    config: ModelConfig,
    schedule: TrainingSchedule,
    params: ModelParams | None = None,
    start_epoch: int = 1,
    epoch_callback: Callable[[int, ModelParams, EpochStats], None] | None = None,
) -> TrainResult:
    """SGD training with per-epoch shuffling, length-bucketed batches, global-norm
    gradient clipping, and an optional learning-rate decay.

    Keeps (a copy of) the parameters with the best validation loss alongside the
    final ones. Deterministic for a fixed seed, config, and data.
    """
    if not train_pairs:
        raise ValueError("empty training set")
    if params is None:
        params = init_params(config, seed=schedule.seed)
    tensors = params.tensors()
    shuffle_rng = np.random.default_rng([schedule.seed, 1])
    dropout_rng = np.random.default_rng([schedule.seed, 2])

    result = TrainResult(params=params, best_params=None, best_epoch=None)
    best_val = math.inf
    lr = schedule.lr
    for epoch in range(start_epoch, schedule.epochs + 1):
        if (schedule.lr_decay_factor is not None and schedule.lr_decay_start is not None
                and epoch >= schedule.lr_decay_start):
            lr *= schedule.lr_decay_factor
        batches = make_batches(train_pairs, schedule.batch_size, shuffle_rng)
        total, tokens = 0.0, 0
        for batch_no, batch_idx in enumerate(batches):
            batch = [train_pairs[i] for i in batch_idx]
            with ad.Tape() as tape:
                loss = forward_loss(batch, params, config, training=True, rng=dropout_rng)
                if not np.isfinite(loss.data):
                    raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
                tape.backward(loss)
            ad.clip_gradients(tensors, schedule.clip)
            ad.sgd_step(tensors, lr)
            ad.zero_grads(tensors)
            n = target_token_count(batch)
            total += float(loss.data) * n
            tokens += n
        val = validation_loss(val_pairs, params, config, schedule.batch_size) if val_pairs else None
        stats = EpochStats(epoch=epoch, lr=lr, train_loss=total / tokens, val_loss=val)
        result.history.append(stats)
        if val is not None and val < best_val:
            best_val = val
            result.best_params = clone_params(params)
            result.best_epoch = epoch
        if epoch_callback is not None:
            epoch_callback(epoch, params, stats)
    return result
