import numpy as np
import pytest

from helpers import tiny_model, toy_tgt_vocab
from polyg2p.checkpoint import MAGIC, ModelBundle, load_checkpoint, save_checkpoint
from polyg2p.corpus import RESERVED, Vocabulary


def _bundle(seed=0):
    config, params = tiny_model(seed=seed, src_vocab=8, tgt_vocab=7)
    src_vocab = Vocabulary(RESERVED + ("<aaa>", "a", "b", "c"))
    tgt_vocab = toy_tgt_vocab(3)
    meta = {"lang_token": True, "languages": ["aaa"], "epoch": 4}
    return ModelBundle(params, config, src_vocab, tgt_vocab, meta)


def test_checkpoint_roundtrip_preserves_everything(tmp_path):
    bundle = _bundle()
    path = tmp_path / "model.mg2p"
    save_checkpoint(path, bundle)
    loaded = load_checkpoint(path)

    assert loaded.config == bundle.config
    assert loaded.src_vocab.tokens == bundle.src_vocab.tokens
    assert loaded.tgt_vocab.tokens == bundle.tgt_vocab.tokens
    assert loaded.meta["languages"] == ["aaa"]
    assert loaded.meta["epoch"] == 4
    assert loaded.meta["gate_order"] == "input,forget,cell,output"
    for (name_a, t_a), (name_b, t_b) in zip(bundle.params.named(), loaded.params.named()):
        assert name_a == name_b
        assert np.array_equal(t_a.data, t_b.data), name_a


def test_checkpoint_save_load_save_is_bit_exact(tmp_path):
    bundle = _bundle(seed=3)
    first = tmp_path / "a.mg2p"
    second = tmp_path / "b.mg2p"
    save_checkpoint(first, bundle)
    save_checkpoint(second, load_checkpoint(first))
    assert first.read_bytes() == second.read_bytes()


def test_checkpoint_magic_guard(tmp_path):
    path = tmp_path / "junk.mg2p"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="bad magic"):
        load_checkpoint(path)


def test_checkpoint_truncation_guard(tmp_path):
    bundle = _bundle()
    path = tmp_path / "model.mg2p"
    save_checkpoint(path, bundle)
    clipped = tmp_path / "clipped.mg2p"
    clipped.write_bytes(path.read_bytes()[:100])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(clipped)


def test_checkpoint_version_guard(tmp_path):
    bundle = _bundle()
    path = tmp_path / "model.mg2p"
    save_checkpoint(path, bundle)
    raw = bytearray(path.read_bytes())
    raw[4:8] = (99).to_bytes(4, "little")
    bad = tmp_path / "versioned.mg2p"
    bad.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(bad)
    assert bytes(raw[:4]) == MAGIC
