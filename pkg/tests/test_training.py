import numpy as np
import pytest

from gsr.errors import ArgumentError, NumericError, StateError
from gsr.graph import generate_sbm_graph
from gsr.nn.backprop import backward_pass, forward_train, prepare_propagation
from gsr.nn.classifier import DnnClassifier, train_dnn
from gsr.nn.infer import forward_full
from gsr.nn.model import TrainConfig, init_model
from gsr.nn.optim import AdamState, adam_step, sgd_step


@pytest.fixture(scope="module")
def sbm600():
    return generate_sbm_graph(600, 4, 0.05, 0.002, 16, 1.0, seed=7)


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState()
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1, t=1)
        assert np.array_equal(params["w"], [1.0, -2.0])

    def test_first_step_bias_correction(self):
        params = {"w": np.array([0.0])}
        adam_step(params, {"w": np.array([1.0])}, AdamState(), lr=0.1, t=1)
        assert abs(params["w"][0] + 0.1) < 1e-7

    def test_non_finite_gradient_named(self):
        with pytest.raises(NumericError, match="W2"):
            adam_step({"W2": np.zeros(1)}, {"W2": np.array([np.nan])},
                      AdamState(), lr=0.1, t=1)

    def test_sgd(self):
        params = {"w": np.array([1.0])}
        sgd_step(params, {"w": np.array([0.5])}, lr=0.2)
        assert np.allclose(params["w"], [0.9])


class TestBackprop:
    def test_zero_loss_gradient_zero_everywhere(self):
        g = generate_sbm_graph(12, 2, 0.3, 0.1, 4, 1.0, seed=1)
        model = init_model("mlp", 4, 3, 2, dropout_p=0.0, seed=0)
        prop = prepare_propagation("mlp", g)
        cache = forward_train(model, prop, g.features, g.labels,
                              g.split.train, dropout_seed=(0, 0))
        # force probabilities to exact one-hots on the labels: the loss
        # gradient vanishes and everything downstream must be exactly zero
        cache.log_probs = np.full_like(cache.log_probs, -np.inf)
        cache.log_probs[np.arange(12), g.labels] = 0.0
        grads = backward_pass(model, cache)
        assert set(grads) == set(model.parameters())
        assert all(np.all(v == 0.0) for v in grads.values())

    def test_stale_intermediates_raise(self):
        g = generate_sbm_graph(12, 2, 0.3, 0.1, 4, 1.0, seed=1)
        model = init_model("mlp", 4, 3, 2, dropout_p=0.0, seed=0)
        prop = prepare_propagation("mlp", g)
        cache = forward_train(model, prop, g.features, g.labels,
                              g.split.train, dropout_seed=(0, 0))
        cache.layers = None
        with pytest.raises(StateError):
            backward_pass(model, cache)

    def test_gradcheck_with_live_dropout(self):
        g = generate_sbm_graph(12, 3, 0.5, 0.2, 5, 1.0, seed=3)
        model = init_model("gcn", 5, 4, 3, dropout_p=0.5, seed=2)
        prop = prepare_propagation("gcn", g)
        from gsr.nn.backprop import training_loss
        cache = forward_train(model, prop, g.features, g.labels,
                              g.split.train, dropout_seed=(9, 1))
        grads = backward_pass(model, cache)
        eps, worst = 1e-4, 0.0
        for name, P in model.parameters().items():
            it = np.nditer(P, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = P[ix]
                P[ix] = orig + eps
                lp = training_loss(model, prop, g.features, g.labels,
                                   g.split.train, (9, 1))
                P[ix] = orig - eps
                lm = training_loss(model, prop, g.features, g.labels,
                                   g.split.train, (9, 1))
                P[ix] = orig
                fd = (lp - lm) / (2 * eps)
                worst = max(worst, abs(fd - grads[name][ix])
                            / max(abs(fd), abs(grads[name][ix]), 1e-8))
        assert worst <= 1e-3


class TestTrainDnn:
    def test_sbm_gcn_accuracy(self, sbm600):
        cfg = TrainConfig(epochs=200, learning_rate=1e-2, dropout_p=0.5,
                          hidden_dim=64, seed=0)
        model = train_dnn(sbm600, "gcn", cfg)
        preds = forward_full(model, sbm600).predictions
        test = sbm600.split.test
        assert (preds[test] == sbm600.labels[test]).mean() >= 0.90

    def test_noop_optimizer_returns_init(self, sbm600):
        cfg = TrainConfig(epochs=1, learning_rate=0.0, dropout_p=0.5,
                          hidden_dim=8, seed=3)
        model = train_dnn(sbm600, "mlp", cfg)
        ref = init_model("mlp", sbm600.feature_dim, 8, 4, 0.5, 3)
        for name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            assert np.array_equal(getattr(model, name), getattr(ref, name))

    def test_deterministic_training(self, sbm600):
        cfg = TrainConfig(epochs=10, learning_rate=1e-2, dropout_p=0.5,
                          hidden_dim=16, seed=5)
        a = train_dnn(sbm600, "gcn", cfg)
        b = train_dnn(sbm600, "gcn", cfg)
        for name in ("W1", "W2", "W3", "b1", "b2", "b3"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_empty_train_mask(self):
        g = generate_sbm_graph(20, 2, 0.2, 0.1, 4, 1.0, seed=0)
        from gsr.graph import Graph, make_split
        empty = Graph(g.num_nodes, g.csr_offsets, g.csr_targets, g.directed,
                      g.features, g.labels, g.num_classes,
                      make_split(20, [], [5], [6]))
        with pytest.raises(ArgumentError):
            train_dnn(empty, "mlp", TrainConfig(epochs=1, seed=0))

    def test_n2v_requires_embeddings(self, sbm600):
        with pytest.raises(ArgumentError):
            train_dnn(sbm600, "n2v", TrainConfig(epochs=1, seed=0))

    def test_monotone_loss_without_dropout(self):
        for seed in range(5):
            g = generate_sbm_graph(600, 4, 0.05, 0.002, 16, 1.0, seed=seed)
            hist = []
            train_dnn(g, "gcn", TrainConfig(epochs=10, learning_rate=1e-3,
                                            dropout_p=0.0, hidden_dim=64,
                                            seed=seed), history=hist)
            losses = [h["train_loss"] for h in hist]
            assert all(losses[i + 1] < losses[i] for i in range(9)), \
                f"seed {seed}: {losses}"

    def test_wikics_mlp_beats_chance(self):
        import os
        from pathlib import Path
        from gsr.graph import load_graph
        path = Path(os.environ.get("GSR_DATA_DIR", "")) / "wikics" / "data.json"
        if not path.exists():
            pytest.skip("WikiCS dataset not present (set GSR_DATA_DIR)")
        g = load_graph(path, "wikics-json")
        hist = []
        train_dnn(g, "mlp", TrainConfig(epochs=30, learning_rate=0.003,
                                        dropout_p=0.35, hidden_dim=35,
                                        seed=0), history=hist)
        assert max(h["val_acc"] for h in hist) > 0.10

    def test_infer_pure(self, sbm600):
        model = train_dnn(sbm600, "mlp", TrainConfig(epochs=3, seed=1))
        a = forward_full(model, sbm600)
        b = forward_full(model, sbm600)
        assert np.array_equal(a.log_probs, b.log_probs)


class TestEstimator:
    def test_fit_predict_score(self, sbm600):
        clf = DnnClassifier(arch="gcn", hidden_dim=32, epochs=50,
                            learning_rate=1e-2, seed=0)
        clf.fit(sbm600)
        assert clf.score(sbm600) > 0.8
        assert len(clf.history_) == 50

    def test_get_params_round_trip(self):
        clf = DnnClassifier(arch="sage", hidden_dim=7, epochs=3)
        params = clf.get_params()
        assert params["arch"] == "sage" and params["hidden_dim"] == 7
        clone = DnnClassifier(**params)
        assert clone.get_params() == params

    def test_unfitted_predict_raises(self, sbm600):
        with pytest.raises(StateError):
            DnnClassifier().predict(sbm600)

    def test_checkpoint_round_trip(self, sbm600, tmp_path):
        from gsr.nn.model import load_model, save_model
        model = train_dnn(sbm600, "sage", TrainConfig(epochs=3, hidden_dim=8,
                                                      seed=2))
        save_model(model, tmp_path / "m.gsrm")
        back = load_model(tmp_path / "m.gsrm")
        assert back.arch == "sage"
        assert np.array_equal(back.W1, model.W1)
        assert np.array_equal(back.bn1.running_var, model.bn1.running_var)
        assert back.train_config.hidden_dim == 8
        a = forward_full(model, sbm600).predictions
        b = forward_full(back, sbm600).predictions
        assert np.array_equal(a, b)
