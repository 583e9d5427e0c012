import json

import numpy as np
import pytest

from gsr.graph import Graph, build_csr, make_split

ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_acceptance(criterion: str, passed: bool, details: str = "") -> None:
    ACCEPTANCE_RESULTS[criterion] = ("PASS" if passed else "FAIL") + (
        f" — {details}" if details else "")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{criterion}: {ACCEPTANCE_RESULTS[criterion]}")


def graph_from_edges(num_nodes, edges, *, features=None, labels=None,
                     num_classes=None, train=(), val=(), test=()):
    """Small-graph builder for hand-constructed test cases."""
    if edges:
        src, dst = (np.asarray(x, dtype=np.int64) for x in zip(*edges))
    else:
        src = dst = np.empty(0, dtype=np.int64)
    off, tgt = build_csr(num_nodes, src, dst)
    if features is None:
        features = np.zeros((num_nodes, 1))
    features = np.asarray(features, dtype=np.float64)
    if labels is None:
        labels = np.zeros(num_nodes, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if num_nodes else 0
    return Graph(num_nodes, off, tgt, True, features, labels, num_classes,
                 make_split(num_nodes, train, val, test))


@pytest.fixture
def path_graph():
    """0 - 1 - 2 chain (directed edges stored one way)."""
    return graph_from_edges(3, [(0, 1), (1, 2)], train=[0], val=[1], test=[2])


@pytest.fixture
def wikics_json(tmp_path):
    """Miniature file in the hyperlink-dataset JSON schema: 8 nodes, 2 classes."""
    n = 8
    rng = np.random.default_rng(0)
    payload = {
        "features": rng.normal(size=(n, 4)).round(4).tolist(),
        "labels": [0, 1, 0, 1, 0, 1, 0, 1],
        "links": [[1, 2], [0], [3], [2], [5], [4], [7], [6]],
        "train_masks": [[True, True, False, False, False, False, False, False]],
        "val_masks": [[False, False, True, True, False, False, False, False]],
        "test_mask": [False, False, False, False, True, True, False, False],
        "stopping_masks": [[False] * n],
    }
    path = tmp_path / "data.json"
    path.write_text(json.dumps(payload))
    return path


@pytest.fixture
def ogb_dir(tmp_path):
    """Miniature node-prediction directory: raw/ CSVs plus split/time/ indices."""
    root = tmp_path / "mini-arxiv"
    raw = root / "raw"
    split = root / "split" / "time"
    raw.mkdir(parents=True)
    split.mkdir(parents=True)
    rng = np.random.default_rng(1)
    n = 10
    feats = rng.normal(size=(n, 3)).round(4)
    np.savetxt(raw / "node-feat.csv", feats, delimiter=",", fmt="%.4f")
    np.savetxt(raw / "node-label.csv", rng.integers(0, 3, size=n),
               delimiter=",", fmt="%d")
    edges = np.array([(i, (i + 1) % n) for i in range(n)] + [(0, 5), (3, 7)])
    np.savetxt(raw / "edge.csv", edges, delimiter=",", fmt="%d")
    np.savetxt(split / "train.csv", np.arange(0, 6), fmt="%d")
    np.savetxt(split / "valid.csv", np.arange(6, 8), fmt="%d")
    np.savetxt(split / "test.csv", np.arange(8, 10), fmt="%d")
    return root
