"""Classifier forward/backward correctness and optimizer behavior."""

import numpy as np
import pytest

from advtext.budget import QueryMeter
from advtext.embedding import save_embeddings
from advtext.errors import BudgetExceededError
from advtext.model import (
    OptimizerState,
    backward_to_inputs,
    embed_tokens,
    forward,
    forward_from_pooled,
    init_params,
    load_checkpoint,
    loss,
    parameter_gradients,
    predict,
    save_checkpoint,
    sentence_embedding,
    softmax,
    train_step,
)
from advtext.model import _backprop, _forward_tail  # white-box gradient checks
from advtext.text import tokenize


def _random_text(world, rng, n):
    words = world.store.words()
    return tokenize(" ".join(words[int(i)] for i in rng.integers(0, len(words), n)))


def _fd_input_grads(params, text, y, eps=1e-4):
    """Central finite differences of the loss w.r.t. each token embedding."""
    embs = embed_tokens(params.store, text)
    grads = np.zeros_like(embs)
    for i in range(embs.shape[0]):
        for j in range(embs.shape[1]):
            for sign in (+1, -1):
                pert = embs.copy()
                pert[i, j] += sign * eps
                grads[i, j] += sign * loss(_forward_tail(params, pert), y)
    return grads / (2 * eps)


class TestForward:
    def test_probs_are_distribution(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=1)
        trace = forward(params, _random_text(small_world, rng, 6))
        assert trace.probs.shape == (2,)
        assert np.all(trace.probs > 0)
        assert trace.probs.sum() == pytest.approx(1.0)

    def test_softmax_shift_invariant(self):
        z = np.array([1.0, 2.0, 3.0])
        assert np.allclose(softmax(z), softmax(z + 100.0))

    def test_pooled_is_mean_embedding(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=1)
        text = _random_text(small_world, rng, 5)
        trace = forward(params, text)
        assert np.allclose(trace.pooled, embed_tokens(params.store, text).mean(axis=0))
        assert np.allclose(sentence_embedding(trace), trace.pooled)

    def test_hidden_is_mean_token_hidden(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=1)
        trace = forward(params, _random_text(small_world, rng, 5))
        assert np.allclose(trace.hidden, trace.token_hidden.mean(axis=0))

    def test_oov_tokens_embed_to_zero(self, small_world):
        params = init_params(small_world.store, 8, 2, seed=1)
        embs = embed_tokens(params.store, tokenize("zzzunknown"))
        assert not np.any(embs)

    def test_forward_charges_meter(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=1)
        text = _random_text(small_world, rng, 4)
        meter = QueryMeter(2)
        forward(params, text, meter)
        forward(params, text, meter)
        assert meter.forward_count == 2
        with pytest.raises(BudgetExceededError):
            forward(params, text, meter)

    def test_forward_from_pooled_matches_single_token(self, small_world):
        params = init_params(small_world.store, 8, 2, seed=1)
        word = small_world.store.words()[0]
        trace = forward(params, tokenize(word))
        pooled = forward_from_pooled(params, params.store.vector(word))
        assert np.allclose(trace.probs, pooled.probs)

    def test_predict_is_argmax(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=1)
        text = _random_text(small_world, rng, 4)
        assert predict(params, text) == int(np.argmax(forward(params, text).probs))


class TestGradients:
    def test_input_gradients_match_finite_differences(self, small_world, rng):
        for trial in range(10):
            params = init_params(small_world.store, 8, 2, seed=trial)
            text = _random_text(small_world, rng, int(rng.integers(2, 7)))
            y = int(rng.integers(0, 2))
            analytic = backward_to_inputs(params, text, y).grads
            fd = _fd_input_grads(params, text, y)
            assert np.abs(analytic - fd).max() / (np.abs(fd).max() + 1e-12) < 1e-6

    def test_parameter_gradients_match_finite_differences(self, small_world, rng):
        eps = 1e-5
        params = init_params(small_world.store, 6, 2, seed=9)
        text = _random_text(small_world, rng, 5)
        y = 1
        trace = forward(params, text)
        _, analytic = _backprop(params, trace, y)
        for name, arr in params.trainable().items():
            fd = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + eps
                up = loss(forward(params, text), y)
                arr[idx] = orig - eps
                down = loss(forward(params, text), y)
                arr[idx] = orig
                fd[idx] = (up - down) / (2 * eps)
            assert np.abs(analytic[name] - fd).max() < 1e-6, name

    def test_gradient_query_counts_as_one(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=1)
        meter = QueryMeter(10)
        backward_to_inputs(params, _random_text(small_world, rng, 5), 0, meter)
        assert meter.forward_count == 1


class TestBatchGradients:
    def test_zero_weight_equals_omission(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=2)
        a = _random_text(small_world, rng, 5)
        b = _random_text(small_world, rng, 6)
        c = _random_text(small_world, rng, 4)
        with_zero, loss_zero = parameter_gradients(
            params, [(a, 0, 1.0), (b, 1, 0.0), (c, 1, 2.0)]
        )
        without, loss_without = parameter_gradients(params, [(a, 0, 1.0), (c, 1, 2.0)])
        for name in with_zero:
            assert np.array_equal(with_zero[name], without[name])
        assert loss_zero == loss_without

    def test_weighted_mean_normalization(self, small_world, rng):
        """Doubling every weight leaves the weighted-mean gradient unchanged."""
        params = init_params(small_world.store, 8, 2, seed=2)
        batch = [
            (_random_text(small_world, rng, 5), 0, 1.0),
            (_random_text(small_world, rng, 5), 1, 3.0),
        ]
        doubled = [(t, y, 2 * w) for t, y, w in batch]
        g1, l1 = parameter_gradients(params, batch)
        g2, l2 = parameter_gradients(params, doubled)
        for name in g1:
            assert np.allclose(g1[name], g2[name])
        assert l1 == pytest.approx(l2)

    def test_empty_batch_rejected(self, small_world):
        params = init_params(small_world.store, 8, 2, seed=2)
        with pytest.raises(ValueError):
            parameter_gradients(params, [])

    def test_all_zero_weights_give_zero_gradient(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=2)
        grads, total = parameter_gradients(
            params, [(_random_text(small_world, rng, 4), 0, 0.0)]
        )
        assert total == 0.0
        assert all(not np.any(g) for g in grads.values())


class TestOptimizer:
    def test_step_reduces_loss_on_fixed_batch(self, small_world, rng):
        params = init_params(small_world.store, 16, 2, seed=4)
        batch = [(_random_text(small_world, rng, 5), int(rng.integers(0, 2)), 1.0) for _ in range(8)]
        opt = OptimizerState(lr=1e-2)
        losses = [train_step(params, batch, opt) for _ in range(20)]
        assert losses[-1] < losses[0]

    def test_decay_applies_to_weights_not_biases(self, small_world, rng):
        batch = [(_random_text(small_world, rng, 5), 0, 1.0)]
        runs = {}
        for wd in (0.0, 0.5):
            params = init_params(small_world.store, 8, 2, seed=5)
            train_step(params, batch, OptimizerState(lr=1e-3, weight_decay=wd))
            runs[wd] = params
        assert np.array_equal(runs[0.0].b1, runs[0.5].b1)
        assert np.array_equal(runs[0.0].b2, runs[0.5].b2)
        assert not np.array_equal(runs[0.0].W1, runs[0.5].W1)
        assert not np.array_equal(runs[0.0].W2, runs[0.5].W2)

    def test_warmup_scales_lr(self):
        opt = OptimizerState(lr=1.0, warmup_steps=4)
        opt.step = 1
        assert opt.effective_lr() == pytest.approx(0.25)
        opt.step = 4
        assert opt.effective_lr() == pytest.approx(1.0)
        opt.step = 9
        assert opt.effective_lr() == pytest.approx(1.0)

    def test_embeddings_stay_frozen(self, small_world, rng):
        params = init_params(small_world.store, 8, 2, seed=6)
        before = params.store.matrix.copy()
        batch = [(_random_text(small_world, rng, 5), 1, 1.0)]
        opt = OptimizerState(lr=1e-2)
        for _ in range(3):
            train_step(params, batch, opt)
        assert np.array_equal(params.store.matrix, before)


class TestCheckpoint:
    def test_roundtrip_with_store(self, small_world, tmp_path, rng):
        params = init_params(small_world.store, 8, 2, seed=7)
        opt = OptimizerState(lr=3e-4, weight_decay=0.1)
        train_step(params, [(_random_text(small_world, rng, 4), 0, 1.0)], opt)
        path = tmp_path / "model.npz"
        save_checkpoint(path, params, opt, seed=7)
        loaded, lopt, meta = load_checkpoint(path, store=small_world.store)
        assert np.array_equal(loaded.W1, params.W1)
        assert np.array_equal(loaded.b2, params.b2)
        assert lopt.step == opt.step
        assert np.array_equal(lopt.m["W1"], opt.m["W1"])
        assert meta["seed"] == 7

    def test_embedding_hash_verified(self, small_world, tmp_path):
        emb_path = tmp_path / "emb.txt"
        save_embeddings(small_world.store, emb_path)
        params = init_params(small_world.store, 8, 2, seed=7)
        path = tmp_path / "model.npz"
        save_checkpoint(path, params, emb_path=emb_path)
        loaded, _, _ = load_checkpoint(path)
        assert np.array_equal(loaded.W1, params.W1)
        emb_path.write_text(emb_path.read_text() + "tampered 1 1\n")
        with pytest.raises(ValueError, match="hash mismatch"):
            load_checkpoint(path)

    def test_missing_store_and_path_rejected(self, small_world, tmp_path):
        params = init_params(small_world.store, 8, 2, seed=7)
        path = tmp_path / "model.npz"
        save_checkpoint(path, params)
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestQueryMeter:
    def test_exhaustion_at_exact_boundary(self):
        meter = QueryMeter(3)
        for _ in range(3):
            meter.charge(1)
        assert meter.forward_count == 3
        assert meter.remaining == 0
        assert not meter.can_afford(1)
        with pytest.raises(BudgetExceededError):
            meter.charge(1)
        assert meter.forward_count == 3  # failed charge does not count
