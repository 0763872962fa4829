import math

import numpy as np
import pytest

from oracles import (cross_entropy_ref, finite_difference, lstm_forward_ref,
                     lstm_step_ref, relative_error, rnn_step_ref, softmax_ref)
from sentilstm.embedding import EmbeddingMatrix
from sentilstm.errors import TrainingError
from sentilstm.nnet import (Grads, LstmParams, LstmState, RnnParams, backward,
                            cross_entropy, forward, init_lstm_params, init_rnn_params,
                            lstm_step, predict_label, predict_proba, rnn_step, sigmoid,
                            softmax)


def zero_lstm(hidden=1, input_dim=1, classes=3):
    shape = (hidden, hidden + input_dim)
    return LstmParams(W_f=np.zeros(shape), b_f=np.zeros(hidden),
                      W_i=np.zeros(shape), b_i=np.zeros(hidden),
                      W_c=np.zeros(shape), b_c=np.zeros(hidden),
                      W_o=np.zeros(shape), b_o=np.zeros(hidden),
                      head_W=np.zeros((classes, hidden)), head_b=np.zeros(classes))


def random_lstm(hidden, input_dim, rng, scale=0.7):
    shape = (hidden, hidden + input_dim)
    u = lambda s: rng.uniform(-scale, scale, size=s)
    return LstmParams(W_f=u(shape), b_f=u(hidden), W_i=u(shape), b_i=u(hidden),
                      W_c=u(shape), b_c=u(hidden), W_o=u(shape), b_o=u(hidden),
                      head_W=u((3, hidden)), head_b=u(3))


def random_rnn(hidden, input_dim, rng, scale=0.7):
    return RnnParams(
        W=rng.uniform(-scale, scale, size=(hidden, hidden + input_dim)),
        b=rng.uniform(-scale, scale, size=hidden),
        head_W=rng.uniform(-scale, scale, size=(3, hidden)),
        head_b=rng.uniform(-scale, scale, size=3))


def embedding_for(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return EmbeddingMatrix(rows=rows, vocab_fingerprint=b"\x00" * 32)


class TestActivations:
    def test_sigmoid_against_reference(self):
        xs = np.linspace(-30, 30, 101)
        got = sigmoid(xs)
        want = [1.0 / (1.0 + math.exp(-x)) for x in xs]
        assert np.allclose(got, want, rtol=0, atol=1e-15)

    def test_sigmoid_extremes_stable(self):
        assert sigmoid(np.array([-1000.0]))[0] == 0.0
        assert sigmoid(np.array([1000.0]))[0] == 1.0
        assert np.all(np.isfinite(sigmoid(np.array([-1e308, 1e308]))))

    def test_softmax_matches_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            logits = rng.normal(size=3) * 5
            assert np.allclose(softmax(logits), softmax_ref(logits), atol=1e-14)

    def test_softmax_shift_invariant_and_stable(self):
        probs = softmax(np.array([1000.0, 1000.0, 1000.0]))
        assert np.allclose(probs, [1 / 3] * 3)
        probs = softmax(np.array([-2000.0, 0.0, 2000.0]))
        assert np.all(np.isfinite(probs))
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_cross_entropy_uniform_logits(self):
        # equal logits: loss is ln 3 for any label
        for label in range(3):
            assert abs(cross_entropy(np.zeros(3), label) - math.log(3.0)) < 1e-12

    def test_cross_entropy_matches_reference(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            logits = rng.normal(size=3) * 4
            label = int(rng.integers(0, 3))
            assert abs(cross_entropy(logits, label) - cross_entropy_ref(logits, label)) < 1e-12

    def test_cross_entropy_extreme_logits_finite(self):
        loss = cross_entropy(np.array([800.0, -800.0, 0.0]), 1)
        assert np.isfinite(loss)
        assert loss > 100


class TestLstmStep:
    def test_zero_params_halve_cell(self):
        # all-zero parameters: f = i = o = 1/2, cbar = 0, so c' = c/2 and
        # h' = tanh(c/2)/2
        params = zero_lstm(hidden=1, input_dim=1)
        state = LstmState(h=np.zeros(1), c=np.ones(1))
        new, cache = lstm_step(params, state, np.array([3.7]))
        assert abs(new.c[0] - 0.5) < 1e-15
        assert abs(new.h[0] - 0.5 * math.tanh(0.5)) < 1e-15
        assert abs(new.h[0] - 0.23105857863000487) < 1e-12
        assert cache.f[0] == 0.5 and cache.i[0] == 0.5 and cache.o[0] == 0.5

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            hidden = int(rng.integers(1, 6))
            input_dim = int(rng.integers(1, 5))
            params = random_lstm(hidden, input_dim, rng)
            state = LstmState(h=rng.normal(size=hidden), c=rng.normal(size=hidden))
            x = rng.normal(size=input_dim)
            new, cache = lstm_step(params, state, x)
            weights = {n: getattr(params, n) for n in params.TENSOR_NAMES}
            h_ref, c_ref, gates = lstm_step_ref(weights, state.h, state.c, x)
            assert np.allclose(new.h, h_ref, rtol=0, atol=1e-12)
            assert np.allclose(new.c, c_ref, rtol=0, atol=1e-12)
            assert np.allclose(cache.f, gates["f"], atol=1e-12)
            assert np.allclose(cache.cbar, gates["cbar"], atol=1e-12)

    def test_gate_ranges(self):
        rng = np.random.default_rng(3)
        params = random_lstm(4, 3, rng, scale=2.0)
        state = LstmState(h=rng.normal(size=4), c=rng.normal(size=4))
        _, cache = lstm_step(params, state, rng.normal(size=3) * 3)
        for gate in (cache.f, cache.i, cache.o):
            assert np.all(gate > 0) and np.all(gate < 1)
        assert np.all(cache.cbar > -1) and np.all(cache.cbar < 1)

    def test_rejects_nonfinite(self):
        params = zero_lstm(2, 2)
        state = LstmState.zeros(2)
        with pytest.raises(TrainingError):
            lstm_step(params, state, np.array([np.nan, 0.0]))


class TestRnnStep:
    def test_zero_weight_bias_half(self):
        # zero W and b = 1/2: h = tanh(1/2) regardless of input
        params = RnnParams(W=np.zeros((1, 2)), b=np.array([0.5]),
                           head_W=np.zeros((3, 1)), head_b=np.zeros(3))
        h, cache = rnn_step(params, np.zeros(1), np.array([9.9]))
        assert abs(h[0] - math.tanh(0.5)) < 1e-15
        assert abs(h[0] - 0.46211715726000974) < 1e-12

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            hidden = int(rng.integers(1, 6))
            input_dim = int(rng.integers(1, 5))
            params = random_rnn(hidden, input_dim, rng)
            h0 = rng.normal(size=hidden)
            x = rng.normal(size=input_dim)
            h, _ = rnn_step(params, h0, x)
            ref = rnn_step_ref({"W": params.W, "b": params.b}, h0, x)
            assert np.allclose(h, ref, rtol=0, atol=1e-12)
            assert np.all(np.abs(h) < 1)


class TestInit:
    def test_lstm_init_shapes_and_values(self):
        params = init_lstm_params(5, 4, seed=9)
        bound = 1.0 / math.sqrt(9)
        for name in ("W_f", "W_i", "W_c", "W_o"):
            W = getattr(params, name)
            assert W.shape == (5, 9)
            assert np.all(np.abs(W) <= bound)
        assert np.all(params.b_f == 1.0)
        assert np.all(params.b_i == 0.0)
        assert np.all(params.head_W == 0.0)
        assert params.hidden == 5 and params.input_dim == 4 and params.classes == 3

    def test_rnn_init_shapes(self):
        params = init_rnn_params(4, 3, seed=2)
        assert params.W.shape == (4, 7)
        assert np.all(params.b == 0.0)
        assert params.hidden == 4 and params.input_dim == 3

    def test_deterministic(self):
        a = init_lstm_params(4, 3, seed=5)
        b = init_lstm_params(4, 3, seed=5)
        c = init_lstm_params(4, 3, seed=6)
        assert np.array_equal(a.W_f, b.W_f)
        assert not np.array_equal(a.W_f, c.W_f)

    def test_copy_is_deep(self):
        params = init_lstm_params(3, 2, seed=0)
        clone = params.copy()
        clone.W_f[0, 0] += 1.0
        assert params.W_f[0, 0] != clone.W_f[0, 0]


class TestForward:
    def test_zero_params_uniform_probs(self):
        params = zero_lstm(hidden=2, input_dim=2)
        emb = embedding_for(np.ones((5, 2)))
        trace = forward(params, emb, np.array([2, 3, 4]))
        assert np.allclose(trace.probs, [1 / 3] * 3, atol=1e-15)

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            params = random_lstm(3, 2, rng)
            rows = rng.normal(size=(6, 2))
            rows[0] = 0.0
            indices = rng.integers(1, 6, size=7)
            trace = forward(params, embedding_for(rows), indices)
            weights = {n: getattr(params, n) for n in params.TENSOR_NAMES}
            logits_ref, probs_ref = lstm_forward_ref(weights, rows, indices)
            assert np.allclose(trace.logits, logits_ref, atol=1e-12)
            assert np.allclose(trace.probs, probs_ref, atol=1e-12)

    def test_skips_pad_positions(self):
        rng = np.random.default_rng(6)
        params = random_lstm(3, 2, rng)
        emb = embedding_for(rng.normal(size=(5, 2)))
        bare = forward(params, emb, np.array([2, 3]))
        padded = forward(params, emb, np.array([2, 0, 0, 3, 0]))
        assert np.array_equal(bare.probs, padded.probs)
        assert bare.tokens == padded.tokens == [2, 3]
        assert len(padded.steps) == 2

    def test_empty_sequence_rejected(self):
        params = zero_lstm(2, 2)
        emb = embedding_for(np.zeros((3, 2)))
        with pytest.raises(TrainingError, match="empty sequence"):
            forward(params, emb, np.zeros(4, dtype=np.int32))

    def test_probs_simplex(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            params = random_lstm(4, 3, rng, scale=1.5)
            emb = embedding_for(rng.normal(size=(8, 3)) * 2)
            probs = predict_proba(params, emb, rng.integers(1, 8, size=6))
            assert abs(probs.sum() - 1.0) < 1e-12
            assert np.all(probs >= 0)

    def test_predict_label_argmax(self):
        rng = np.random.default_rng(8)
        params = random_lstm(3, 2, rng)
        emb = embedding_for(rng.normal(size=(4, 2)))
        indices = np.array([1, 2, 3])
        probs = predict_proba(params, emb, indices)
        assert predict_label(params, emb, indices) == int(np.argmax(probs))

    def test_rnn_forward_reference(self):
        rng = np.random.default_rng(9)
        params = random_rnn(3, 2, rng)
        rows = rng.normal(size=(5, 2))
        indices = [1, 4, 2]
        trace = forward(params, embedding_for(rows), indices)
        h = [0.0] * 3
        for idx in indices:
            h = rnn_step_ref({"W": params.W, "b": params.b}, h, rows[idx])
        logits = [float(params.head_b[r] + sum(params.head_W[r][c] * h[c] for c in range(3)))
                  for r in range(3)]
        assert np.allclose(trace.logits, logits, atol=1e-12)


class TestBackward:
    def test_head_bias_gradient_uniform_case(self):
        # zero parameters give uniform probs; d loss / d head_b is
        # probs - onehot(label) = [1/3, 1/3, 1/3] - e_label
        params = zero_lstm(hidden=2, input_dim=2)
        emb = embedding_for(np.ones((4, 2)))
        trace = forward(params, emb, np.array([2, 3]))
        for label in range(3):
            grads = backward(trace, params, label)
            want = np.full(3, 1 / 3)
            want[label] -= 1.0
            assert np.allclose(grads.tensors["head_b"], want, atol=1e-15)

    @pytest.mark.parametrize("hidden,input_dim,seq", [(3, 2, 4), (4, 3, 5), (2, 2, 1)])
    def test_lstm_gradients_match_finite_differences(self, hidden, input_dim, seq):
        rng = np.random.default_rng((10, hidden, seq))
        params = random_lstm(hidden, input_dim, rng)
        rows = rng.normal(size=(6, input_dim))
        rows[0] = 0.0
        emb = embedding_for(rows)
        indices = rng.integers(1, 6, size=seq)
        label = int(rng.integers(0, 3))

        trace = forward(params, emb, indices)
        grads = backward(trace, params, label)

        def loss():
            return cross_entropy(forward(params, emb, indices).logits, label)

        for name, tensor in params.tensors().items():
            numeric = finite_difference(loss, tensor)
            assert relative_error(grads.tensors[name], numeric) < 1e-6, name
        for row, grad in grads.embedding_rows.items():
            numeric = finite_difference(loss, emb.rows[row])
            assert relative_error(grad, numeric) < 1e-6, f"embedding row {row}"

    def test_rnn_gradients_match_finite_differences(self):
        rng = np.random.default_rng(11)
        params = random_rnn(3, 2, rng)
        rows = rng.normal(size=(5, 2))
        emb = embedding_for(rows)
        indices = np.array([1, 3, 4, 2])
        label = 2
        trace = forward(params, emb, indices)
        grads = backward(trace, params, label)

        def loss():
            return cross_entropy(forward(params, emb, indices).logits, label)

        for name, tensor in params.tensors().items():
            numeric = finite_difference(loss, tensor)
            assert relative_error(grads.tensors[name], numeric) < 1e-6, name
        for row, grad in grads.embedding_rows.items():
            numeric = finite_difference(loss, emb.rows[row])
            assert relative_error(grad, numeric) < 1e-6

    def test_repeated_token_accumulates_embedding_grad(self):
        rng = np.random.default_rng(12)
        params = random_lstm(3, 2, rng)
        rows = rng.normal(size=(4, 2))
        emb = embedding_for(rows)
        indices = np.array([2, 2, 2])
        trace = forward(params, emb, indices)
        grads = backward(trace, params, 0)
        assert set(grads.embedding_rows) == {2}

        def loss():
            return cross_entropy(forward(params, emb, indices).logits, 0)

        numeric = finite_difference(loss, emb.rows[2])
        assert relative_error(grads.embedding_rows[2], numeric) < 1e-6


class TestGrads:
    def test_zeros_like_and_norm(self):
        params = init_lstm_params(3, 2, seed=0)
        grads = Grads.zeros_like(params)
        assert grads.global_norm() == 0.0
        grads.tensors["head_b"][:] = [3.0, 0.0, 4.0]
        grads.embedding_rows[5] = np.array([12.0, 0.0])
        assert abs(grads.global_norm() - 13.0) < 1e-12

    def test_add_and_scale(self):
        params = init_lstm_params(2, 2, seed=0)
        a = Grads.zeros_like(params)
        b = Grads.zeros_like(params)
        a.tensors["b_i"][:] = 1.0
        b.tensors["b_i"][:] = 2.0
        b.embedding_rows[1] = np.ones(2)
        a.add_(b)
        assert np.all(a.tensors["b_i"] == 3.0)
        assert np.all(a.embedding_rows[1] == 1.0)
        a.scale_(0.5)
        assert np.all(a.tensors["b_i"] == 1.5)
        assert np.all(a.embedding_rows[1] == 0.5)
