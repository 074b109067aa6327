import numpy as np
import pytest

from emoxl import tensor as T
from emoxl.dataset import UtterancePair, synth_corpus
from emoxl.gradcheck import finite_diff_check
from emoxl.model import (ChatbotParams, ModelConfig, SamplingConfig, chatbot_batch_loss,
                         decoder_forward, encode_utterance, fuse_emotion, generate,
                         init_chatbot, train_chatbot, train_step)
from emoxl.optim import AdamState
from emoxl.rng import Rng
from emoxl.tensor import ShapeError, Tape, Tensor, backward
from emoxl.textproc import BOS_ID, EOS_ID


class TestFuseEmotion:
    def test_constant_sum_maps_to_zeros(self):
        w = Tensor(np.full((4, 6), 2.0))
        e = Tensor(np.full(6, -1.0))
        out = fuse_emotion(w, e)
        np.testing.assert_array_equal(out.data, np.zeros((4, 6)))

    def test_direct_arithmetic(self):
        out = fuse_emotion(Tensor([[0.0, 0.0, 0.0]]), Tensor([1.0, 2.0, 3.0]))
        # z = [1,2,3], mean 2, population std sqrt(2/3)
        denom = np.sqrt(2.0 / 3.0) + 1e-5
        want = np.array([[-1.0 / denom, 0.0, 1.0 / denom]])
        np.testing.assert_allclose(out.data, want, atol=1e-15)
        np.testing.assert_allclose(out.data, [[-1.2247, 0.0, 1.2247]], atol=1e-4)

    def test_wrong_emotion_length(self):
        with pytest.raises(ShapeError):
            fuse_emotion(Tensor(np.zeros((2, 4))), Tensor(np.zeros(5)))

    def test_mean_zero_std_one_contract(self):
        rng = Rng(21)
        for _ in range(200):
            L = 1 + rng.below(6)
            d = 8 + 2 * rng.below(5)
            w = Tensor(rng.normal(0, 1.5, (L, d)))
            e = Tensor(rng.normal(0, 1.5, (d,)))
            z = w.data + e.data
            pre_std = z.std(axis=-1)
            out = fuse_emotion(w, e).data
            assert np.abs(out.mean(axis=-1)).max() <= 1e-6
            if pre_std.min() >= 1e-3:
                assert np.abs(out.std(axis=-1) - 1.0).max() <= 1e-3

    def test_shift_fold_property_bitwise(self):
        # adding c to every word coordinate equals adding c to the emotion;
        # dyadic values keep every addition exact so the fold is bitwise
        rng = Rng(22)
        w = np.floor(rng.uniform(-16, 16, (3, 8))) / 8.0
        e = np.floor(rng.uniform(-16, 16, (8,))) / 8.0
        c = 0.625
        a = fuse_emotion(Tensor(w + c), Tensor(e))
        b = fuse_emotion(Tensor(w), Tensor(e + c))
        assert a.data.tobytes() == b.data.tobytes()


def tiny_config(**kw):
    # rel_base shrunk with the dims so no sinusoid frequency is degenerate
    defaults = dict(vocab_size=16, n_enc_layers=1, n_dec_layers=1, n_heads=2,
                    d_model=8, d_ff=8, mem_len=4, dropout=0.0, max_gen_len=10,
                    rel_base=64.0, seed=0)
    defaults.update(kw)
    return ModelConfig(**defaults)


class TestDecoder:
    def _setup(self, seed=1):
        cfg = tiny_config(seed=seed)
        params = init_chatbot(cfg)
        enc_hidden, _ = encode_utterance([4, 5, 6, EOS_ID], 2, params)
        return params, enc_hidden

    def test_logits_shape(self):
        params, enc = self._setup()
        prefix = [BOS_ID, 7, 8]
        logits = decoder_forward(prefix, enc, params)
        assert logits.shape == (3, 16)

    def test_causality_bitwise(self):
        params, enc = self._setup(seed=2)
        a = decoder_forward([BOS_ID, 4, 5, 6], enc, params)
        b = decoder_forward([BOS_ID, 4, 9, 6], enc, params)  # edit position 2
        assert a.data[:2].tobytes() == b.data[:2].tobytes()
        assert a.data[2:].tobytes() != b.data[2:].tobytes()

    def test_prefix_must_start_with_bos(self):
        params, enc = self._setup()
        with pytest.raises(ValueError):
            decoder_forward([4, 5], enc, params)
        with pytest.raises(ValueError):
            decoder_forward([], enc, params)


def _randomize_params(params: ChatbotParams, seed: int) -> None:
    """Healthy-scale random values so every gradient is well above noise."""
    rng = Rng(seed)
    for name, t in params.named().items():
        if name.endswith("ln_attn.gain") or name.endswith("ln_ffn.gain") or \
                name.endswith("ln_self.gain") or name.endswith("ln_cross.gain"):
            t.data = rng.uniform(0.5, 1.5, t.shape)
        elif name in ("tok_emb", "emo_emb"):
            t.data = rng.normal(0.0, 1.0, t.shape)
        else:
            t.data = rng.normal(0.0, 0.4, t.shape)


def test_full_model_gradient_check():
    cfg = tiny_config()
    params = init_chatbot(cfg)
    _randomize_params(params, seed=77)
    pairs = [
        UtterancePair([4, 5, EOS_ID], [6, 7, EOS_ID], 1, "", ["x"]),
        UtterancePair([8, EOS_ID], [9, 10, 11, EOS_ID], 5, "", ["y"]),
    ]

    def loss_fn(_x):
        return chatbot_batch_loss(pairs, params)

    named = params.named()
    for name in ("tok_emb", "emo_emb", "enc.0.attn.wq", "enc.0.attn.wr",
                 "enc.0.attn.u", "enc.0.attn.v", "enc.0.ffn.w1", "enc.0.ln_attn.gain",
                 "dec.0.self.wk", "dec.0.cross.wq", "dec.0.ffn.w2", "out_w", "out_b"):
        err = finite_diff_check(loss_fn, named[name], h=1e-5)
        assert err < 1e-4, f"{name}: {err}"


class TestTrainStep:
    def _pairs(self, n=4):
        corpus = synth_corpus(seed=3, n_pairs=max(8, n))
        return corpus.pairs[:n], corpus.vocab

    def test_zero_lr_loss_identical_across_calls(self):
        pairs, vocab = self._pairs()
        cfg = tiny_config(vocab_size=vocab.size)
        params = init_chatbot(cfg)
        state = AdamState(lr=0.0)
        losses = [train_step(pairs, params, state, Rng(1)) for _ in range(3)]
        assert max(losses) - min(losses) < 1e-12

    def test_duplicated_batch_mean_invariance(self):
        pairs, vocab = self._pairs(n=2)
        cfg = tiny_config(vocab_size=vocab.size)
        params = init_chatbot(cfg)

        def loss_and_grads(batch):
            plist = params.all()
            with Tape() as tape:
                loss = chatbot_batch_loss(batch, params)
            T.zero_grads(plist)
            backward(loss, tape)
            return loss.item(), [p.grad.copy() for p in plist]

        l1, g1 = loss_and_grads(pairs)
        l3, g3 = loss_and_grads(pairs * 3)
        assert abs(l1 - l3) < 1e-10
        for a, b in zip(g1, g3):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_loss_decreases_on_small_corpus(self):
        pairs, vocab = self._pairs(n=8)
        cfg = tiny_config(vocab_size=vocab.size, d_model=16, d_ff=16)
        params = init_chatbot(cfg)
        state = AdamState(lr=0.01)
        rng = Rng(5)
        first = train_step(pairs, params, state, rng)
        for _ in range(40):
            last = train_step(pairs, params, state, rng)
        assert last < first * 0.5

    def test_empty_batch_rejected(self):
        cfg = tiny_config()
        with pytest.raises(ValueError):
            train_step([], init_chatbot(cfg), AdamState(), Rng(0))


class TestGenerate:
    def _params(self, **kw):
        cfg = tiny_config(**kw)
        return init_chatbot(cfg)

    def test_greedy_deterministic_bitwise(self):
        params = self._params(seed=4)
        a = generate([4, 5, EOS_ID], 3, params)
        b = generate([4, 5, EOS_ID], 3, params)
        assert a == b

    def test_max_gen_len_one(self):
        params = self._params(max_gen_len=1, seed=5)
        out = generate([4, EOS_ID], 0, params)
        assert len(out) <= 1

    def test_empty_utterance_rejected(self):
        params = self._params()
        with pytest.raises(ValueError):
            generate([], 0, params)

    def test_bad_emotion_id_rejected(self):
        params = self._params()
        with pytest.raises(ValueError):
            generate([4, EOS_ID], 8, params)

    def test_sampling_reproducible_and_in_vocab(self):
        params = self._params(seed=6)
        s = SamplingConfig(top_k=5, temperature=0.8, seed=42)
        a = generate([4, 5, EOS_ID], 1, params, sampling=s)
        b = generate([4, 5, EOS_ID], 1, params, sampling=s)
        assert a == b
        assert all(0 <= t < params.config.vocab_size for t in a)

    def test_untrained_fusion_changes_encoder_output(self):
        params = self._params(seed=7)
        a, _ = encode_utterance([4, 5, EOS_ID], 0, params)
        b, _ = encode_utterance([4, 5, EOS_ID], 6, params)
        assert np.abs(a.data - b.data).max() > 1e-8

    def test_fusion_disabled_ignores_emotion(self):
        cfg = tiny_config(use_emotion_fusion=False, seed=8)
        params = init_chatbot(cfg)
        a, _ = encode_utterance([4, 5, EOS_ID], 0, params)
        b, _ = encode_utterance([4, 5, EOS_ID], 6, params)
        assert a.data.tobytes() == b.data.tobytes()


def test_parallel_generate_matches_serial():
    from concurrent.futures import ThreadPoolExecutor
    params = init_chatbot(tiny_config(seed=10))
    inputs = [([4, 5, EOS_ID], 0), ([6, EOS_ID], 3), ([7, 8, 9, EOS_ID], 6)]
    serial = [generate(ids, e, params) for ids, e in inputs]
    with ThreadPoolExecutor(max_workers=3) as pool:
        parallel = list(pool.map(lambda args: generate(args[0], args[1], params), inputs))
    assert serial == parallel


def test_train_chatbot_deterministic_history():
    corpus = synth_corpus(seed=9, n_pairs=8)
    cfg = tiny_config(vocab_size=corpus.vocab.size, epochs=2, batch_size=4, lr=0.005)
    _, h1 = train_chatbot(corpus.pairs, cfg)
    _, h2 = train_chatbot(corpus.pairs, cfg)
    assert [e.loss for e in h1] == [e.loss for e in h2]
