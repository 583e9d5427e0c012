import json

import numpy as np
import pytest

from gsr.errors import ArgumentError
from gsr.evaluation import AccuracyGrid, accuracy, export_report, run_grid
from gsr.graph import generate_sbm_graph
from gsr.nn.classifier import train_dnn
from gsr.nn.model import TrainConfig
from gsr.pipeline import DenoisingPipeline
from gsr.rbm import GaussianBernoulliRBM
from gsr.verify import IdentityRbm


@pytest.fixture(scope="module")
def setup():
    g = generate_sbm_graph(100, 2, 0.2, 0.02, 6, 1.0, seed=3)
    model = train_dnn(g, "gcn", TrainConfig(epochs=20, learning_rate=1e-2,
                                            dropout_p=0.2, hidden_dim=8,
                                            seed=1))
    rbm = GaussianBernoulliRBM(hidden_units=8, epochs=20, batch_size=16,
                               lr=0.02, seed=0).fit(g.features[g.split.train])
    return g, DenoisingPipeline(model, {0: rbm})


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy(np.array([1, 2, 3]), np.array([1, 2, 3]), [0, 1, 2]) == 1.0

    def test_all_wrong(self):
        preds = (np.arange(10) + 1) % 3
        labels = np.arange(10) % 3
        assert accuracy(preds, labels, np.arange(10)) == 0.0

    def test_three_of_four(self):
        assert accuracy(np.array([0, 1, 2, 0]), np.array([0, 1, 2, 9]),
                        [0, 1, 2, 3]) == 0.75

    def test_empty_mask(self):
        with pytest.raises(ArgumentError):
            accuracy(np.array([0]), np.array([0]), [])


class TestGrid:
    def test_corner_matches_clean(self, setup):
        g, pipe = setup
        run = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test", seed=5)
        clean_plain = accuracy(pipe.predict_plain(g).predictions, g.labels,
                               g.split.test)
        clean_tap0 = accuracy(pipe.predict_denoised(g, 0).predictions,
                              g.labels, g.split.test)
        by_name = {grid.meta["pipeline"]: grid for grid in run.grids}
        assert by_name["plain"].values[0, 0] == clean_plain
        assert by_name["tap0"].values[0, 0] == clean_tap0

    def test_same_seed_bit_identical(self, setup):
        g, pipe = setup
        a = run_grid(pipe, g, "Xc", "Az", taps=(0,), split="val", seed=9)
        b = run_grid(pipe, g, "Xc", "Az", taps=(0,), split="val", seed=9)
        for ga, gb in zip(a.grids, b.grids):
            assert ga.values.tobytes() == gb.values.tobytes()
        assert a.cell_hashes == b.cell_hashes

    def test_cells_share_noisy_instance(self, setup):
        g, pipe = setup
        run = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test", seed=2)
        assert len(run.cell_hashes) == 121

    def test_missing_rbm_for_tap(self, setup):
        g, pipe = setup
        with pytest.raises(ArgumentError):
            run_grid(pipe, g, "Xz", "Ac", taps=(0, 2), split="test", seed=0)

    def test_failed_cells_recorded_not_raised(self, setup):
        g, pipe = setup

        class Broken(IdentityRbm):
            def reconstruct(self, Z, **kwargs):
                raise RuntimeError("boom")

        bad = DenoisingPipeline(pipe.model, {0: Broken(pipe.model.input_dim)})
        run = run_grid(bad, g, "Xz", "Ac", taps=(0,), split="test", seed=1)
        assert len(run.failures) == 121
        for grid in run.grids:
            assert np.all(np.isnan(grid.values))

    def test_total_corruption_destroys_signal(self):
        from gsr.distortion import NoisePlan
        from gsr.nn.infer import forward_full
        g = generate_sbm_graph(600, 4, 0.0125, 0.0005, 32, 1.0, seed=0)
        model = train_dnn(g, "gcn", TrainConfig(epochs=200, learning_rate=1e-2,
                                                dropout_p=0.5, hidden_dim=64,
                                                seed=0))
        clean = accuracy(forward_full(model, g).predictions, g.labels,
                         g.split.test)
        worst = NoisePlan(x_kind="Xz", a_kind="Ac", n_x=100, n_a=100,
                          seed=0).apply(g)
        full = accuracy(forward_full(model, worst).predictions, g.labels,
                        g.split.test)
        assert clean - full >= 0.30

    def test_jobs_parallel_matches_serial(self, setup):
        g, pipe = setup
        serial = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test", seed=4)
        parallel = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test",
                            seed=4, jobs=4)
        for gs, gp in zip(serial.grids, parallel.grids):
            assert gs.values.tobytes() == gp.values.tobytes()


class TestExport:
    def test_csv_shape(self):
        values = np.linspace(0, 1, 121).reshape(11, 11)
        grid = AccuracyGrid(values, {"arch": "mlp", "pipeline": "plain",
                                     "x_kind": "Xz", "a_kind": "Ac",
                                     "split": "test", "seed": 0})
        lines = grid.to_csv().strip().split("\n")
        assert len(lines) == 12
        assert all(len(line.split(",")) == 12 for line in lines)

    def test_absent_cells_blank(self):
        values = np.full((11, 11), np.nan)
        values[0, 0] = 0.5
        grid = AccuracyGrid(values, {"arch": "mlp", "pipeline": "plain",
                                     "x_kind": "Xz", "a_kind": "Ac",
                                     "split": "test", "seed": 0})
        row1 = grid.to_csv().split("\n")[1].split(",")
        assert row1[1] == "0.5" and row1[2] == ""

    def test_nothing_to_export(self, tmp_path):
        with pytest.raises(ArgumentError, match="nothing to export"):
            export_report([], tmp_path)

    def test_reexport_byte_identical(self, setup, tmp_path):
        g, pipe = setup
        run = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test", seed=7)
        first = export_report([run], tmp_path / "a")
        second = export_report([run], tmp_path / "b")
        for fa, fb in zip(first, second):
            if fa.suffix == ".csv":
                assert fa.read_bytes() == fb.read_bytes()

    def test_bundle_contents(self, setup, tmp_path):
        g, pipe = setup
        run = run_grid(pipe, g, "Xc", "Ac", taps=(0,), split="test", seed=7)
        export_report([run], tmp_path)
        payload = json.loads((tmp_path / "results.json").read_text())
        entry = payload["runs"][0]
        assert entry["manifest"]["x_kind"] == "Xc"
        assert entry["manifest"]["toolkit_version"]
        assert len(entry["grids"]) == 2
        html = (tmp_path / "report.html").read_text()
        assert "<svg" in html and "http" not in html.split("xmlns")[0]

    def test_filenames(self, setup, tmp_path):
        g, pipe = setup
        run = run_grid(pipe, g, "Xz", "Az", taps=(0,), split="val", seed=0)
        files = {f.name for f in export_report([run], tmp_path)}
        assert "gcn_plain_xz_az_val.csv" in files
        assert "gcn_tap0_xz_az_val.csv" in files
