"""Assembly of the trained classifier with per-tap RBM denoisers.

The plain pipeline is just the trained network run on (possibly noisy)
input. The denoising pipeline for tap i runs the same network up to the
tap, hands that representation to the RBM fitted on the clean training
rows of the same tap, and re-injects the reconstruction at the layer that
follows: tap 0 feeds the first linear layer, taps 1 and 2 feed their batch
norms, tap 3 feeds the log-softmax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError
from .graph import Graph
from .nn.backprop import Propagation, prepare_propagation
from .nn.infer import InferenceResult, extract_representations, forward_full, input_features, run_stages
from .nn.model import DnnModel, load_model
from .rbm import GaussianBernoulliRBM, load_rbm

TAPS = (0, 1, 2, 3)


@dataclass
class DenoisingPipeline:
    """A trained model plus reconstruction models for a set of taps.

    Tap coverage and visible widths are validated here, at construction, so
    evaluation loops never fail midway on a width mismatch. Any object with
    a ``reconstruct(Z, gibbs_rounds=...)`` method and a ``visible_dim``
    attribute can serve as a denoiser.
    """

    model: DnnModel
    rbms: dict[int, GaussianBernoulliRBM]
    gibbs_rounds: int = 1

    def __post_init__(self):
        for tap, rbm in self.rbms.items():
            if tap not in TAPS:
                raise ConfigError(f"tap {tap} outside {TAPS}")
            want = self.model.tap_width(tap)
            got = rbm.visible_dim
            if got != want:
                raise DimensionError(
                    f"tap {tap} is {want} wide but its RBM has {got} visible units")

    def predict_plain(self, graph: Graph,
                      prop: Propagation | None = None) -> InferenceResult:
        """Run the trained network as-is, capturing every tap."""
        return forward_full(self.model, graph, prop)

    def predict_denoised(self, graph: Graph, tap: int,
                         prop: Propagation | None = None) -> InferenceResult:
        """Denoise at one tap and continue; taps past the injection point
        are recomputed downstream of the reconstruction."""
        if tap not in self.rbms:
            raise ConfigError(f"no reconstruction model configured for tap {tap}")
        if prop is None:
            prop = prepare_propagation(self.model.arch, graph)
        rbm = self.rbms[tap]
        return run_stages(
            self.model, prop, input_features(self.model, graph),
            replace_at=tap,
            replace=lambda Z: rbm.reconstruct(Z, gibbs_rounds=self.gibbs_rounds))

    def training_representations(self, graph: Graph, tap: int) -> np.ndarray:
        """Clean train-split rows of one tap (what the tap's RBM fits on)."""
        return extract_representations(self.model, graph, tap,
                                       rows=graph.split.train)


def save_manifest(path: str | Path, model_path: str, rbm_paths: dict[int, str],
                  gibbs_rounds: int = 1) -> None:
    payload = {
        "model": str(model_path),
        "rbms": {str(t): str(p) for t, p in sorted(rbm_paths.items())},
        "gibbs_rounds": gibbs_rounds,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_pipeline(manifest_path: str | Path) -> DenoisingPipeline:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ConfigError(f"missing pipeline manifest: {manifest_path}")
    payload = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    model_path = Path(payload["model"])
    if not model_path.is_absolute():
        model_path = base / model_path
    if not model_path.exists():
        raise ConfigError(f"missing model checkpoint: {model_path}")
    rbms = {}
    for tap, p in payload.get("rbms", {}).items():
        p = Path(p)
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            raise ConfigError(f"missing RBM checkpoint for tap {tap}: {p}")
        rbms[int(tap)] = load_rbm(p)
    return DenoisingPipeline(load_model(model_path), rbms,
                             gibbs_rounds=int(payload.get("gibbs_rounds", 1)))
