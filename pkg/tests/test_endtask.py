import numpy as np
import pytest

from neuraltok.corpus import Alphabet
from neuraltok.endtask import (CharBaselineEncoder, LabeledExample, NeuralEncoder, TaskConfig, TaskHead,
                               char_baseline_encode, encode_text, evaluate_task, finetune, read_task_tsv,
                               synthetic_task, task_loss, write_task_tsv)
from neuraltok.errors import EmptyInputError, MalformedFileError
from neuraltok.neural import TaggerConfig, TaggerModel
from neuraltok.neural.autograd import Tensor
from neuraltok.segmentation import is_partition

import oracles

ALPHA = Alphabet(["<PAD>", "<UNK>", "<lang:en>"] + list("abcdefghijklmnopqrstuvwxyz"))
TINY = TaskConfig(proj_dim=6, hidden=4, layers=1, epochs=1, batch_size=4)


def _tagger(dtype=np.float32, **kw):
    cfg = TaggerConfig(**{"embed_dim": 4, "hidden_out_dim": 6, "layers": 1, "seed": 2, **kw})
    m = TaggerModel(cfg, ALPHA)
    return TaggerModel(cfg, ALPHA, {k: v.astype(dtype) for k, v in m.state().items()})


def test_encode_text_counts_segments():
    m = _tagger()
    text = ["abc", "defgh", "i"]
    vecs = encode_text(m, text)
    assert vecs.shape == (sum(len(m.tokenize(w)) for w in text), 6)
    assert encode_text(m, ["a"]).shape == (1, 6)
    pooled = [r for w in text for r in m.pool_representations(w)]
    np.testing.assert_allclose(vecs, np.array(pooled), rtol=1e-6)
    with pytest.raises(EmptyInputError):
        encode_text(m, [])


def test_char_baseline():
    enc = CharBaselineEncoder(ALPHA, dim=5, seed=0)
    emb = enc.params["embedding"].data
    assert char_baseline_encode(enc, ["ab", "c", "dd", "e"]).shape == (4, 5)
    np.testing.assert_array_equal(char_baseline_encode(enc, ["q"])[0], emb[ALPHA.id("q")])
    np.testing.assert_array_equal(char_baseline_encode(enc, ["stop"]), char_baseline_encode(enc, ["post"]))
    with pytest.raises(EmptyInputError):
        char_baseline_encode(enc, [])


def test_one_step_updates_tokenizer_and_frozen_mode_does_not():
    m = _tagger()
    data = synthetic_task(8, seed=0)
    head = TaskHead(6, TINY)
    res = finetune(m, head, data, TINY, max_steps=1)
    assert res.log and res.log[0]["loss"] > 0
    assert np.linalg.norm(res.encoder.tagger.params["embedding"].data - m.params["embedding"].data) > 0
    assert np.linalg.norm(res.encoder.tagger.params["lstm0.fw.U"].data - m.params["lstm0.fw.U"].data) > 0
    frozen = finetune(m, head, data, TaskConfig(**{**TINY.to_dict(), "freeze_tokenizer": True}), max_steps=1)
    for k, t in m.params.items():
        assert np.array_equal(frozen.encoder.tagger.params[k].data, t.data)
    assert any(not np.array_equal(frozen.head.params[k].data, head.params[k].data) for k in head.params)
    for w in ["abcdef", "zz", "q"]:
        assert is_partition(w, res.encoder.tagger.tokenize(w))


def test_composed_gradient_matches_finite_differences():
    m = _tagger(np.float64)
    cfg = TaskConfig(proj_dim=3, hidden=4, layers=1)
    head = TaskHead(6, cfg, {k: v.astype(np.float64) for k, v in TaskHead(6, cfg).state().items()})
    batch = [LabeledExample(["abcd", "ef"], 0), LabeledExample(["gh"], 1)]
    enc = NeuralEncoder(m)
    loss = task_loss(enc, head, batch)
    loss.backward()
    analytic = {**{"enc." + k: m.params[k].grad for k in m.encoder_param_names()},
                **{k: t.grad for k, t in head.params.items()}}
    arrays = {**{"enc." + k: m.params[k].data for k in m.encoder_param_names()},
              **{k: t.data for k, t in head.params.items()}}
    segs_before = [m.tokenize(w) for ex in batch for w in ex.text]
    numeric = oracles.finite_difference(lambda: float(task_loss(enc, head, batch, record=False).data), arrays)
    assert segs_before == [m.tokenize(w) for ex in batch for w in ex.text]
    for k in arrays:
        assert oracles.rel_error(analytic[k], numeric[k]) <= 1e-3, k


def test_evaluate_task_bounds_and_chance_level():
    enc = CharBaselineEncoder(ALPHA, dim=4, seed=0)
    head = TaskHead(4, TINY)
    rng = np.random.default_rng(0)
    data = [LabeledExample(["".join(rng.choice(list("abc"), 3))], int(rng.integers(2))) for _ in range(1000)]
    acc = evaluate_task(enc, head, data)
    assert 0.4 <= acc <= 0.6
    with pytest.raises(EmptyInputError):
        evaluate_task(enc, head, [])


def test_memorised_toy_set():
    enc = CharBaselineEncoder(ALPHA, dim=8, seed=0)
    data = [LabeledExample(["aaa"], 0), LabeledExample(["zzz"], 1)] * 4
    cfg = TaskConfig(proj_dim=8, hidden=8, layers=1, epochs=40, batch_size=8, lr=1e-2)
    res = finetune(enc, TaskHead(8, cfg), data, cfg)
    assert evaluate_task(res.encoder, res.head, data) == 1.0


def test_synthetic_task_and_tsv(tmp_path):
    a, b = synthetic_task(50, seed=3), synthetic_task(50, seed=3)
    assert [(e.text, e.label) for e in a] == [(e.text, e.label) for e in b]
    assert {e.label for e in a} == {0, 1} and all(len(e.text) == 6 for e in a)
    noisy = synthetic_task(50, seed=3, typo_rate=1.0)
    assert any(x.text != y.text for x, y in zip(a, noisy))
    write_task_tsv(a, tmp_path / "t.tsv", seed=3)
    assert (tmp_path / "t.tsv").read_text().startswith("# seed=3\n")
    assert [(e.text, e.label) for e in read_task_tsv(tmp_path / "t.tsv")] == [(e.text, e.label) for e in a]
    (tmp_path / "bad.tsv").write_text("no label here\n")
    with pytest.raises(MalformedFileError):
        read_task_tsv(tmp_path / "bad.tsv")
    with pytest.raises(EmptyInputError):
        LabeledExample([], 0)
