import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gsr.errors import ArgumentError, DimensionError
from gsr.nn.layers import (activation_forward, batchnorm_forward, dense_forward,
                           gcn_forward, log_softmax, log_softmax_nll,
                           sage_forward)
from gsr.nn.model import BatchNormState

from conftest import graph_from_edges


class TestDense:
    def test_identity_input(self):
        W = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = dense_forward(np.eye(2), W, np.zeros(2))
        assert np.array_equal(out, W)

    def test_hand_product(self):
        # triple-loop oracle value for [[1,1]] @ [[1,2],[3,4]] + [10,10]
        out = dense_forward(np.array([[1.0, 1.0]]),
                            np.array([[1.0, 2.0], [3.0, 4.0]]),
                            np.array([10.0, 10.0]))
        assert np.allclose(out, [[14.0, 16.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            dense_forward(np.zeros((1, 3)), np.zeros((2, 2)), np.zeros(2))


class TestGcn:
    def test_identity_propagation(self):
        import scipy.sparse as sp
        H = np.arange(6.0).reshape(3, 2)
        W = np.array([[1.0, 0.0], [0.0, 1.0]])
        out = gcn_forward(H, sp.identity(3, format="csr"), W, np.zeros(2))
        assert np.allclose(out, dense_forward(H, W, np.zeros(2)))

    def test_half_propagation(self):
        import scipy.sparse as sp
        A = sp.csr_matrix(np.full((2, 2), 0.5))
        out = gcn_forward(np.diag([2.0, 2.0]), A, np.eye(2), np.zeros(2))
        assert np.allclose(out, [[1.0, 1.0], [1.0, 1.0]])

    def test_zero_row_gives_bias(self):
        import scipy.sparse as sp
        A = sp.csr_matrix(np.array([[0.0, 0.0], [0.0, 1.0]]))
        b = np.array([3.0, -1.0])
        out = gcn_forward(np.ones((2, 2)), A, np.eye(2), b)
        assert np.allclose(out[0], b)


class TestSage:
    def test_edgeless_is_skip_only(self):
        g = graph_from_edges(3, [])
        H = np.arange(6.0).reshape(3, 2)
        W = np.array([[2.0, 0.0], [0.0, 2.0]])
        out = sage_forward(H, g, W, np.eye(2), np.ones(2))
        assert np.allclose(out, H @ W + 1.0)

    def test_path_neighbor_mean(self):
        g = graph_from_edges(3, [(0, 1), (1, 2)])
        H = np.eye(3)
        out = sage_forward(H, g, np.eye(3), np.eye(3), np.zeros(3))
        assert np.allclose(out[1], [0.5, 1.0, 0.5])

    def test_self_loop_single_node(self):
        g = graph_from_edges(1, [(0, 0)])
        H = np.array([[1.0, 2.0]])
        Ws = np.array([[1.0, 0.0], [0.0, 1.0]])
        Wn = np.array([[3.0, 0.0], [0.0, 3.0]])
        out = sage_forward(H, g, Ws, Wn, np.zeros(2))
        assert np.allclose(out, H @ (Ws + Wn))


class TestBatchNorm:
    def test_infer_identity(self):
        # running stats (0, 1), unit gamma, zero beta: output is the input
        # up to the epsilon in the denominator
        state = BatchNormState.initial(3)
        Z = np.random.default_rng(0).normal(size=(4, 3))
        out, new_state = batchnorm_forward(Z, state, mode="infer")
        assert np.allclose(out, Z, rtol=1e-5)
        assert new_state is state

    def test_train_two_rows(self):
        state = BatchNormState.initial(1)
        out, _ = batchnorm_forward(np.array([[0.0], [2.0]]), state, mode="train")
        want = (np.array([[0.0], [2.0]]) - 1.0) / np.sqrt(1.0 + 1e-5)
        assert np.allclose(out, want)

    def test_momentum_one_adopts_batch_stats(self):
        state = BatchNormState.initial(2)
        state.momentum = 1.0
        Z = np.random.default_rng(1).normal(2.0, 3.0, size=(16, 2))
        trained, state2 = batchnorm_forward(Z, state, mode="train")
        inferred, _ = batchnorm_forward(Z, state2, mode="infer")
        assert np.allclose(trained, inferred, atol=1e-6)

    def test_single_row_train_error(self):
        with pytest.raises(ArgumentError):
            batchnorm_forward(np.zeros((1, 2)), BatchNormState.initial(2),
                              mode="train")


class TestActivation:
    def test_infer_is_relu(self):
        out, mask = activation_forward(np.array([[-1.0, 2.0]]), 0.5, mode="infer")
        assert np.array_equal(out, [[0.0, 2.0]])
        assert np.all(mask == 1.0)

    def test_zero_dropout_matches_infer(self):
        Z = np.random.default_rng(2).normal(size=(5, 4))
        train, _ = activation_forward(Z, 0.0, mode="train", seed=3)
        infer, _ = activation_forward(Z, 0.0, mode="infer")
        assert np.array_equal(train, infer)

    def test_inverted_dropout_scaling(self):
        Z = np.ones((400, 250))
        out, _ = activation_forward(Z, 0.5, mode="train", seed=11)
        survivors = out[out != 0]
        assert np.all(survivors == 2.0)
        rate = survivors.size / Z.size
        sigma = np.sqrt(0.25 / Z.size)
        assert abs(rate - 0.5) < 3 * sigma


class TestLogSoftmax:
    def test_uniform_logits(self):
        loss, lp = log_softmax_nll(np.zeros((1, 4)), [0], [0])
        assert np.allclose(lp, np.log(0.25))

    def test_stabilized(self):
        lp = log_softmax(np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(lp))
        assert abs(lp[0, 0]) < 1e-9 and abs(lp[0, 1] + 1000.0) < 1e-9

    def test_hand_loss(self):
        loss, _ = log_softmax_nll(np.array([[1.0, 2.0]]), [1], [0])
        assert abs(loss - np.log(1 + np.exp(-1.0))) < 1e-12

    def test_empty_mask(self):
        with pytest.raises(ArgumentError):
            log_softmax_nll(np.zeros((2, 2)), [0, 1], [])

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 5),
                  elements=st.floats(-50, 50, allow_nan=False)))
    def test_rows_sum_to_one(self, Z):
        lp = log_softmax(Z)
        assert np.allclose(np.exp(lp).sum(axis=1), 1.0, atol=1e-9)
