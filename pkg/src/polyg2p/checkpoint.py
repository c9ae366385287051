"""Self-describing binary checkpoints.

Layout (all integers little-endian):

    magic   4 bytes  b"MG2P"
    version u32
    count   u32                         named tensors
    per tensor: name_len u32, name utf-8, rank u32, dims rank x u64
    per tensor, manifest order: raw float32 data
    source vocabulary: count u32, per token: len u32 + utf-8 bytes
    target vocabulary: same encoding
    meta    u64 length + utf-8 JSON (model config, gate order, lang_token,
            training languages, schedule snapshot)

Round trips are bit-exact: loading and re-saving reproduces the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .corpus import Vocabulary
from .model import GATE_ORDER, ModelConfig, ModelParams, params_from_arrays

MAGIC = b"MG2P"
VERSION = 1


@dataclass
class ModelBundle:
    """Everything needed to run a trained model: weights, config, vocabularies."""

    params: ModelParams
    config: ModelConfig
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    meta: dict


def _write_str(fh: BinaryIO, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise ValueError("truncated checkpoint file")
    return raw


def _read_str(fh: BinaryIO) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n).decode("utf-8")


def _write_vocab(fh: BinaryIO, vocab: Vocabulary) -> None:
    fh.write(struct.pack("<I", len(vocab)))
    for token in vocab.tokens:
        _write_str(fh, token)


def _read_vocab(fh: BinaryIO) -> Vocabulary:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return Vocabulary([_read_str(fh) for _ in range(n)])


def save_checkpoint(path, bundle: ModelBundle) -> None:
    named = list(bundle.params.named())
    meta = dict(bundle.meta)
    meta["model"] = bundle.config.to_dict()
    meta["gate_order"] = GATE_ORDER
    meta_json = json.dumps(meta, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(named)))
        for name, tensor in named:
            _write_str(fh, name)
            fh.write(struct.pack("<I", tensor.data.ndim))
            fh.write(struct.pack(f"<{tensor.data.ndim}Q", *tensor.data.shape))
        for _, tensor in named:
            fh.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())
        _write_vocab(fh, bundle.src_vocab)
        _write_vocab(fh, bundle.tgt_vocab)
        raw = meta_json.encode("utf-8")
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)


def load_checkpoint(path) -> ModelBundle:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        manifest: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(count):
            name = _read_str(fh)
            (rank,) = struct.unpack("<I", _read_exact(fh, 4))
            dims = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank))
            manifest.append((name, tuple(int(d) for d in dims)))
        arrays: dict[str, np.ndarray] = {}
        for name, dims in manifest:
            n_items = int(np.prod(dims)) if dims else 1
            raw = _read_exact(fh, 4 * n_items)
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        src_vocab = _read_vocab(fh)
        tgt_vocab = _read_vocab(fh)
        (meta_len,) = struct.unpack("<Q", _read_exact(fh, 8))
        meta = json.loads(_read_exact(fh, meta_len).decode("utf-8"))

    config = ModelConfig.from_dict(meta.pop("model"))
    params = params_from_arrays(config, arrays)
    return ModelBundle(params, config, src_vocab, tgt_vocab, meta)
