import numpy as np
import pytest

from gsr.errors import ConfigError, DimensionError
from gsr.graph import generate_sbm_graph
from gsr.nn.classifier import train_dnn
from gsr.nn.infer import extract_representations, forward_full
from gsr.nn.model import TrainConfig, init_model
from gsr.pipeline import DenoisingPipeline, load_pipeline, save_manifest
from gsr.rbm import GaussianBernoulliRBM, save_rbm
from gsr.verify import IdentityRbm


@pytest.fixture(scope="module")
def small_graph():
    return generate_sbm_graph(80, 3, 0.2, 0.02, 6, 1.0, seed=11)


@pytest.fixture(scope="module")
def trained(small_graph):
    cfg = TrainConfig(epochs=30, learning_rate=1e-2, dropout_p=0.3,
                      hidden_dim=10, seed=2)
    return train_dnn(small_graph, "gcn", cfg)


def zero_model(input_dim=4, hidden=3, classes=3, bias3=None):
    model = init_model("mlp", input_dim, hidden, classes, 0.0, seed=0)
    for W in (model.W1, model.W2, model.W3):
        W[:] = 0.0
    if bias3 is not None:
        model.b3[:] = bias3
    return model


class TestForward:
    def test_zero_weight_chain(self, small_graph):
        model = zero_model(input_dim=6, bias3=np.array([0.1, 0.9, 0.2]))
        res = forward_full(model, small_graph)
        assert np.allclose(res.taps[1], 0.0)       # bias b1 is zero
        assert np.all(res.predictions == 1)        # argmax of b3

    def test_log_probs_consistent_with_predictions(self, trained, small_graph):
        from gsr.nn.layers import log_softmax
        res = forward_full(trained, small_graph)
        assert np.array_equal(res.predictions,
                              np.argmax(log_softmax(res.taps[3]), axis=1))

    def test_tie_break_lowest_index(self):
        model = zero_model(bias3=np.zeros(3))
        g = generate_sbm_graph(12, 3, 0.2, 0.1, 4, 1.0, seed=0)
        res = forward_full(model, g)
        assert np.all(res.predictions == 0)


class TestExtract:
    def test_tap0_is_raw_features(self, trained, small_graph):
        model_mlp = train_dnn(small_graph, "mlp",
                              TrainConfig(epochs=2, hidden_dim=10, seed=0))
        Z = extract_representations(model_mlp, small_graph, 0)
        assert np.array_equal(Z, small_graph.features)

    def test_tap_widths(self, small_graph):
        # hidden width 35 and 10 classes: taps 1-2 carry 35 columns, tap 3 ten
        model = init_model("mlp", small_graph.feature_dim, 35, 10, 0.35, seed=1)
        assert model.tap_width(1) == 35
        assert model.tap_width(2) == 35
        assert model.tap_width(3) == 10
        Z = extract_representations(model, small_graph, 2)
        assert Z.shape == (small_graph.num_nodes, 35)

    def test_empty_rows(self, trained, small_graph):
        Z = extract_representations(trained, small_graph, 1, rows=[])
        assert Z.shape == (0, trained.hidden_dim)

    def test_invalid_tap(self, trained, small_graph):
        with pytest.raises(DimensionError):
            extract_representations(trained, small_graph, 4)


class TestBundle:
    def test_width_mismatch_rejected_at_construction(self, trained):
        with pytest.raises(DimensionError):
            DenoisingPipeline(trained, {1: IdentityRbm(trained.hidden_dim + 1)})

    def test_missing_tap_rejected(self, trained, small_graph):
        pipe = DenoisingPipeline(trained, {0: IdentityRbm(trained.input_dim)})
        with pytest.raises(ConfigError):
            pipe.predict_denoised(small_graph, 2)

    def test_identity_stub_equals_plain(self, trained, small_graph):
        stub = DenoisingPipeline(
            trained, {t: IdentityRbm(trained.tap_width(t)) for t in range(4)})
        plain = stub.predict_plain(small_graph)
        for tap in range(4):
            den = stub.predict_denoised(small_graph, tap)
            assert np.array_equal(den.predictions, plain.predictions)
            assert np.array_equal(den.taps[3], plain.taps[3])

    def test_denoised_clean_stays_close(self):
        # a thoroughly trained RBM reconstructs in-distribution rows nearly
        # losslessly: denoising clean input costs at most two points
        g = generate_sbm_graph(600, 4, 0.0125, 0.0005, 32, 1.0, seed=0)
        model = train_dnn(g, "gcn", TrainConfig(epochs=200, learning_rate=1e-2,
                                                dropout_p=0.5, hidden_dim=64,
                                                seed=0))
        rbm = GaussianBernoulliRBM(hidden_units=256, epochs=500, batch_size=64,
                                   lr=0.02, seed=0)
        rbm.fit(g.features[g.split.train])
        pipe = DenoisingPipeline(model, {0: rbm})
        test, labels = g.split.test, g.labels
        plain = pipe.predict_plain(g).predictions
        den = pipe.predict_denoised(g, 0).predictions
        acc_plain = (plain[test] == labels[test]).mean()
        acc_den = (den[test] == labels[test]).mean()
        assert acc_plain - acc_den <= 0.02 + 1e-12

    def test_manifest_round_trip(self, tmp_path, trained, small_graph):
        from gsr.nn.model import save_model
        rbm = GaussianBernoulliRBM(hidden_units=8, epochs=2, batch_size=16,
                                   seed=1)
        rbm.fit(small_graph.features[small_graph.split.train])
        save_model(trained, tmp_path / "model.gsrm")
        save_rbm(rbm, tmp_path / "rbm_tap0.gsrr")
        save_manifest(tmp_path / "pipeline.json", "model.gsrm",
                      {0: "rbm_tap0.gsrr"}, gibbs_rounds=2)
        pipe = load_pipeline(tmp_path / "pipeline.json")
        assert pipe.gibbs_rounds == 2
        assert 0 in pipe.rbms
        res = pipe.predict_denoised(small_graph, 0)
        assert res.predictions.shape == (small_graph.num_nodes,)

    def test_manifest_missing_rbm_file(self, tmp_path, trained):
        from gsr.nn.model import save_model
        save_model(trained, tmp_path / "model.gsrm")
        save_manifest(tmp_path / "pipeline.json", "model.gsrm",
                      {0: "gone.gsrr"})
        with pytest.raises(ConfigError, match="gone.gsrr"):
            load_pipeline(tmp_path / "pipeline.json")
