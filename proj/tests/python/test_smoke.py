import itertools
import json
import math

import numpy as np
import pytest

import intent_rnnt as ir


def log_softmax(x):
    x = x - x.max(axis=-1, keepdims=True)
    return x - np.log(np.exp(x).sum(axis=-1, keepdims=True))


def brute_force_nll(lp, target):
    # Every path has T blanks and U labels and ends with the final blank, so
    # it is fixed by where the labels sit among the first T + U - 1 moves.
    T = lp.shape[0]
    U = len(target)
    total = 0.0
    for slots in itertools.combinations(range(T + U - 1), U):
        t = u = 0
        logp = 0.0
        for step in range(T + U):
            if step in slots:
                logp += lp[t, u, target[u]]
                u += 1
            else:
                logp += lp[t, u, 0]
                t += 1
        total += math.exp(logp)
    return -math.log(total)


def test_version():
    assert ir.__version__ == "0.1.0"


def test_rnnt_loss_matches_enumeration():
    rng = np.random.default_rng(0)
    for T, U in [(1, 0), (2, 1), (3, 2), (4, 3)]:
        lp = log_softmax(rng.normal(size=(T, U + 1, 4)))
        target = list(rng.integers(1, 4, size=U))
        loss, grad = ir.rnnt_loss(lp, target)
        assert loss == pytest.approx(brute_force_nll(lp, target), abs=1e-9)
        assert grad.shape == lp.shape


def test_rnnt_loss_rejects_bad_shape():
    with pytest.raises(ir.DimensionError):
        ir.rnnt_loss(np.zeros((2, 3)), [1])


def test_wer_and_edit_distance():
    assert ir.wer(["play the song"], ["play a song"]) == pytest.approx(1 / 3)
    e = ir.edit_distance("a b c", "a c d e")
    assert e["substitutions"] + e["insertions"] + e["deletions"] == 3


def test_lfbe_shapes():
    sr = 16000
    t = np.arange(sr // 10) / sr
    feats = ir.compute_lfbe(np.sin(2 * np.pi * 1000 * t), sr)
    assert feats.shape == (8, 64)
    assert ir.stack_downsample(feats).shape == (3, 192)


def test_bpe_round_trip():
    vocab = ir.bpe_train(["play the song", "play the news", "stop the song"], 20)
    ids = vocab.encode("play the song")
    assert vocab.decode(ids) == "play the song"
    assert len(vocab) <= 20


def test_default_config_is_complete():
    cfg = ir.default_config()
    assert cfg["conditioning"]["kind"] == "baseline_none"
    assert cfg["sweep_fractions"] == [0.0, 0.5, 0.7, 1.0]


def test_unknown_config_key_is_a_config_error():
    with pytest.raises(ir.ConfigError):
        ir.generate_corpus(json.dumps({"learning_rate": 1}))


def test_tiny_pipeline(tmp_path):
    cfg = json.dumps({
        "seed": 2,
        "out_dir": str(tmp_path / "run"),
        "corpus": {"a2i_per_intent": 3, "train_per_intent": 3, "dev_per_intent": 1, "test_per_intent": 1,
                   "feature_dim": 8},
        "a2i": {"lstm_units": 6, "embedding_dim": 3, "train": {"steps": 5, "batch_size": 4}},
        "rnnt": {"vocab_size": 30, "encoder_layers": 1, "encoder_units": 6, "pred_units": 6,
                 "train": {"steps": 5, "batch_size": 4}, "augment": {"max_freq_width": 2}},
        "conditioning": {"kind": "per_frame_posterior"},
    })
    ir.generate_corpus(cfg)
    assert "Per-utterance" in ir.train_a2i(cfg)
    ir.train_rnnt(cfg)
    streaming = ir.decode(cfg, mode="streaming")
    report = ir.evaluate(cfg, hypotheses=streaming)
    assert report["streamable"] is True
    assert 0.0 <= report["overall"]["wer"]
