"""Property-check registry behind the ``verify`` subcommand.

Every check is self-contained and uses an independent oracle: finite
differences for gradients, closed-form moments and hidden-state enumeration
for the RBM, exhaustive counting for the noise operators, and an identity
stub for the pipeline plumbing. The acceptance test suite runs the same
registry, so a fresh checkout can be validated either way.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .distortion import NoisePlan, blank_adjacency, blank_features, corrupt_adjacency, corrupt_features
from .evaluation import LEVELS, accuracy, run_grid
from .graph import generate_sbm_graph, load_graph
from .nn.backprop import backward_pass, forward_train, prepare_propagation, training_loss
from .nn.classifier import train_dnn
from .nn.model import TrainConfig, init_model
from .pipeline import DenoisingPipeline
from .rbm import GaussianBernoulliRBM, Scaler
from .tsne import ExactTSNE, joint_affinities, kl_divergence_and_grad


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: str
    skipped: bool = False
    seconds: float = 0.0


# ---------------------------------------------------------------------------
# Gradients against central finite differences


def _fd_worst_rel_err(model, prop, X0, labels, mask, seed, eps=1e-4) -> float:
    cache = forward_train(model, prop, X0, labels, mask, dropout_seed=seed)
    grads = backward_pass(model, cache)
    worst = 0.0
    for name, P in model.parameters().items():
        G = grads[name]
        it = np.nditer(P, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = P[ix]
            P[ix] = orig + eps
            lp = training_loss(model, prop, X0, labels, mask, seed)
            P[ix] = orig - eps
            lm = training_loss(model, prop, X0, labels, mask, seed)
            P[ix] = orig
            fd = (lp - lm) / (2 * eps)
            rel = abs(fd - G[ix]) / max(abs(fd), abs(G[ix]), 1e-8)
            worst = max(worst, rel)
    return worst


def check_gradients() -> CheckResult:
    """Dense, GCN, SAGE, batch-norm, activation, and loss gradients, with the
    dropout mask frozen, plus the 2-D embedding objective."""
    g = generate_sbm_graph(12, 3, 0.5, 0.2, 5, 1.0, seed=3)
    worst = {}
    for arch in ("mlp", "gcn", "sage"):
        model = init_model(arch, 5, 4, 3, dropout_p=0.4, seed=1)
        prop = prepare_propagation(arch, g)
        worst[arch] = _fd_worst_rel_err(model, prop, g.features, g.labels,
                                        g.split.train, seed=(7, 0))

    rng = np.random.default_rng(0)
    P, _ = joint_affinities(rng.normal(size=(10, 3)), 3.0)
    Y = rng.normal(size=(10, 2))
    _, grad = kl_divergence_and_grad(P, Y)
    w = 0.0
    for i in range(10):
        for j in range(2):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[i, j] += 1e-4
            Ym[i, j] -= 1e-4
            fd = (kl_divergence_and_grad(P, Yp)[0]
                  - kl_divergence_and_grad(P, Ym)[0]) / 2e-4
            w = max(w, abs(fd - grad[i, j]) / max(abs(fd), abs(grad[i, j]), 1e-8))
    worst["tsne"] = w
    bad = {k: v for k, v in worst.items() if v > 1e-3}
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items())
    return CheckResult("gradient_suite", not bad, f"worst rel err: {detail}")


# ---------------------------------------------------------------------------
# Conditional distributions against closed forms


def check_rbm_conditionals() -> CheckResult:
    rbm = GaussianBernoulliRBM(hidden_units=1, seed=0)
    rbm.initialize(1)
    rbm.W_ = np.array([[1.0]])
    rbm.b_h_ = np.array([-1.0])
    p = rbm.hidden_probabilities(np.array([[2.0]]))[0, 0]
    want = 1.0 / (1.0 + np.exp(-1.0))
    hidden_ok = abs(p - want) <= 1e-9
    rbm.b_h_ = np.array([1000.0])
    sat = rbm.hidden_probabilities(np.array([[2.0]]))[0, 0]
    hidden_ok &= np.isfinite(sat) and abs(sat - 1.0) <= 1e-12

    rbm.W_ = np.array([[0.5]])
    rbm.b_v_ = np.array([0.3])
    rbm.sigma_ = np.array([2.0])
    rbm.b_h_ = np.array([0.0])
    n = 100_000
    draws = rbm.visible_from_hidden(np.ones((n, 1)), sample=True,
                                    rng=np.random.default_rng(0)).ravel()
    mean_err = abs(draws.mean() - 1.3)
    mean_tol = 3.0 * 2.0 / np.sqrt(n)
    var_err = abs(draws.var() - 4.0)
    var_tol = 3.0 * 4.0 * np.sqrt(2.0 / (n - 1))
    passed = hidden_ok and mean_err <= mean_tol and var_err <= var_tol
    return CheckResult(
        "rbm_conditionals", bool(passed),
        f"hidden |err|<=1e-9: {hidden_ok}; mean err {mean_err:.4f} (tol "
        f"{mean_tol:.4f}); var err {var_err:.4f} (tol {var_tol:.4f})")


# ---------------------------------------------------------------------------
# Exact likelihood by hidden-state enumeration


def exact_log_likelihood(W, b_v, b_h, sigma, V) -> float:
    """Mean log p(v) via enumeration over hidden states.

    For each h, integrating the Boltzmann factor over v gives a Gaussian
    with mean b_v + sigma * (W h) and an un-normalized weight
    exp(b_h.h + sum_i ((b_i + sigma_i m_i)^2 - b_i^2) / (2 sigma_i^2)),
    so p(v) is an explicit mixture; no sampling involved.
    """
    n_h = W.shape[1]
    H = np.array([[(i >> j) & 1 for j in range(n_h)] for i in range(2 ** n_h)],
                 dtype=np.float64)
    M = H @ W.T
    mu = b_v + sigma * M
    log_w = H @ b_h + ((mu ** 2 - b_v ** 2) / (2.0 * sigma ** 2)).sum(axis=1)
    log_norm = logsumexp(log_w)
    const = -0.5 * np.sum(np.log(2.0 * np.pi * sigma ** 2))
    total = 0.0
    for v in np.atleast_2d(V):
        comp = log_w + const - (((v - mu) ** 2) / (2.0 * sigma ** 2)).sum(axis=1)
        total += logsumexp(comp) - log_norm
    return total / len(np.atleast_2d(V))


def check_rbm_likelihood() -> CheckResult:
    deltas = []
    for seed in range(5):
        rng = np.random.default_rng(seed + 100)
        Z = np.vstack([rng.normal([-1.5, -1.5], 0.4, size=(64, 2)),
                       rng.normal([1.5, 1.5], 0.4, size=(64, 2))])
        S = Scaler.fit(Z).transform(Z)
        rbm = GaussianBernoulliRBM(hidden_units=4, seed=seed)
        rbm.initialize(2)
        before = exact_log_likelihood(rbm.W_, rbm.b_v_, rbm.b_h_, rbm.sigma_, S)
        r = np.random.default_rng(seed)
        for _ in range(200):
            rbm.cd_update(S, k=1, lr=0.05, rng=r)
        after = exact_log_likelihood(rbm.W_, rbm.b_v_, rbm.b_h_, rbm.sigma_, S)
        deltas.append(after - before)
    passed = all(d > 0 for d in deltas)
    return CheckResult("rbm_exact_likelihood", passed,
                       "log-likelihood gains over 5 seeds: "
                       + " ".join(f"{d:+.4f}" for d in deltas))


# ---------------------------------------------------------------------------
# Content-addressable memory


def check_rbm_memory() -> CheckResult:
    d = 16
    pattern_a = np.array([1.0] * 8 + [0.0] * 8) * 2.0
    pattern_b = np.array([0.0] * 8 + [1.0] * 8) * 2.0
    Z = np.vstack([np.tile(pattern_a, (64, 1)), np.tile(pattern_b, (64, 1))])
    rbm = GaussianBernoulliRBM(hidden_units=32, epochs=200, batch_size=32,
                               lr=0.05, seed=0).fit(Z)
    rng = np.random.default_rng(7)
    wins, trials = 0, 1000
    for t in range(trials):
        true, other = ((pattern_a, pattern_b) if t % 2 == 0
                       else (pattern_b, pattern_a))
        cue = rbm.scaler_.inverse(
            rbm.scaler_.transform(true[None, :]) + 0.5 * rng.standard_normal((1, d)))
        rec = rbm.reconstruct(cue)
        wins += int(np.linalg.norm(rec - true) < np.linalg.norm(rec - other))
    rate = wins / trials
    return CheckResult("rbm_content_memory", rate >= 0.90,
                       f"correct retrieval in {rate:.1%} of {trials} noisy cues")


# ---------------------------------------------------------------------------
# Noise-operator exactness


def _count_changed(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.sum(a != b))


def check_noise_exactness() -> CheckResult:
    rng = np.random.default_rng(5)
    problems = []

    X = rng.uniform(1.0, 2.0, size=(6, 10))     # strictly positive, no zeros
    rows = np.array([0, 2, 3, 5])
    total = rows.size * X.shape[1]
    for n in LEVELS:
        want = (n * total) // 100
        for op, tag in ((corrupt_features, "Xc"), (blank_features, "Xz")):
            out = op(X, rows, n, seed=(1, n))
            got = _count_changed(out, X)
            if got != want:
                problems.append(f"{tag} n={n}: {got} != {want}")
            if n == 0 and out.tobytes() != X.tobytes():
                problems.append(f"{tag} n=0 not bit-identical")
            untouched = np.setdiff1d(np.arange(6), rows)
            if _count_changed(out[untouched], X[untouched]):
                problems.append(f"{tag} n={n}: non-target rows changed")

    g = generate_sbm_graph(40, 2, 0.4, 0.1, 4, 1.0, seed=2)
    targets = g.split.test
    pool = g.split.train[:5]
    train_rows_before = {int(v): g.out_neighbors(int(v)).tobytes()
                         for v in g.split.train}
    feat_train_before = g.features[g.split.train].tobytes()
    for n in LEVELS:
        noisy = corrupt_adjacency(g, targets, n, pool, seed=(2, n))
        if noisy.num_edges != g.num_edges:
            problems.append(f"Ac n={n}: edge count changed")
        changed_nodes = sum(
            1 for v in targets
            if noisy.out_neighbors(int(v)).tobytes() != g.out_neighbors(int(v)).tobytes())
        want_nodes = (n * targets.size) // 100
        if changed_nodes > want_nodes:
            problems.append(f"Ac n={n}: {changed_nodes} nodes changed > {want_nodes}")
        if n == 100 and any(
                not np.all(np.isin(noisy.out_neighbors(int(v)), pool))
                for v in targets if noisy.out_neighbors(int(v)).size):
            problems.append("Ac n=100: endpoint outside pool")
        for v, blob in train_rows_before.items():
            if noisy.out_neighbors(v).tobytes() != blob:
                problems.append(f"Ac n={n}: train row {v} touched")
                break

        from .distortion import edges_from_nodes
        target_edges = edges_from_nodes(g, np.union1d(g.split.val, g.split.test))
        blanked = blank_adjacency(g, target_edges, n, seed=(3, n))
        want_gone = (n * target_edges.size) // 100
        if g.num_edges - blanked.num_edges != want_gone:
            problems.append(f"Az n={n}: removed {g.num_edges - blanked.num_edges} "
                            f"!= {want_gone}")

    plan = NoisePlan(x_kind="Xz", a_kind="Az", n_x=50, n_a=50, seed=9)
    noisy = plan.apply(g)
    if noisy.features[g.split.train].tobytes() != feat_train_before:
        problems.append("plan: train features touched")
    for v, blob in train_rows_before.items():
        if noisy.out_neighbors(v).tobytes() != blob:
            problems.append("plan: train adjacency touched")
            break

    return CheckResult("noise_exactness", not problems,
                       "; ".join(problems) if problems else
                       "exact floor counts, identity at n=0, train split untouched")


# ---------------------------------------------------------------------------
# Pipeline identity under a stub reconstruction


class IdentityRbm:
    """Reconstruction stub: returns its input unchanged."""

    def __init__(self, visible_dim: int):
        self.visible_dim = visible_dim

    def reconstruct(self, Z, gibbs_rounds=None, sample=False, seed=None):
        return Z


def check_pipeline_identity() -> CheckResult:
    g = generate_sbm_graph(60, 3, 0.2, 0.05, 6, 1.0, seed=4)
    rng = np.random.default_rng(0)
    embeddings = rng.normal(size=(60, 4))
    mismatches = []
    for arch in ("mlp", "n2v", "gcn", "sage"):
        cfg = TrainConfig(epochs=5, learning_rate=1e-2, dropout_p=0.3,
                          hidden_dim=8, seed=1)
        model = train_dnn(g, arch, cfg,
                          n2v_embeddings=embeddings if arch == "n2v" else None)
        stub_pipe = DenoisingPipeline(
            model, {t: IdentityRbm(model.tap_width(t)) for t in range(4)})
        plain = stub_pipe.predict_plain(g)
        for tap in range(4):
            den = stub_pipe.predict_denoised(g, tap)
            if not np.array_equal(den.predictions, plain.predictions):
                mismatches.append(f"{arch} tap{tap}")
    return CheckResult("pipeline_identity", not mismatches,
                       "; ".join(mismatches) if mismatches else
                       "stub reconstruction reproduces plain predictions "
                       "for all taps and architectures")


# ---------------------------------------------------------------------------
# Grid contracts


def check_grid_contracts() -> CheckResult:
    problems = []
    g = generate_sbm_graph(120, 3, 0.15, 0.01, 8, 1.0, seed=6)
    for arch in ("gcn", "mlp"):
        cfg = TrainConfig(epochs=30, learning_rate=1e-2, dropout_p=0.2,
                          hidden_dim=8, seed=2)
        model = train_dnn(g, arch, cfg)
        rbm = GaussianBernoulliRBM(hidden_units=16, epochs=40, batch_size=32,
                                   lr=0.02, seed=0).fit(g.features[g.split.train])
        pipe = DenoisingPipeline(model, {0: rbm})
        run = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test", seed=11)
        clean = {
            "plain": accuracy(pipe.predict_plain(g).predictions, g.labels,
                              g.split.test),
            "tap0": accuracy(pipe.predict_denoised(g, 0).predictions, g.labels,
                             g.split.test),
        }
        for grid in run.grids:
            if grid.values[0, 0] != clean[grid.meta["pipeline"]]:
                problems.append(f"{arch} {grid.meta['pipeline']}: cell (0,0) "
                                f"{grid.values[0, 0]:.4f} != clean "
                                f"{clean[grid.meta['pipeline']]:.4f}")
            if arch == "mlp":
                spread = np.nanmax(grid.values, axis=1) - np.nanmin(grid.values, axis=1)
                if np.any(spread != 0.0):
                    problems.append(f"mlp {grid.meta['pipeline']}: grid varies "
                                    f"along the adjacency axis")
        if arch == "gcn":
            rerun = run_grid(pipe, g, "Xz", "Ac", taps=(0,), split="test", seed=11)
            for g1, g2 in zip(run.grids, rerun.grids):
                if g1.values.tobytes() != g2.values.tobytes():
                    problems.append("same-seed grids not bit-identical")
    return CheckResult("grid_contracts", not problems,
                       "; ".join(problems) if problems else
                       "clean corner, adjacency-blind rows, and rerun "
                       "determinism all hold")


# ---------------------------------------------------------------------------
# 2-D embedding behavior


def check_tsne() -> CheckResult:
    from sklearn.metrics import silhouette_score
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    X = np.vstack([rng.normal(c, 1.0, size=(50, 2)) for c in centers])
    labels = np.repeat([0, 1, 2], 50)
    ts = ExactTSNE(perplexity=30, iterations=600, seed=1)
    Y = ts.fit_transform(X)
    sil = float(silhouette_score(Y, labels))
    kl0, kl500 = ts.kl_history_[0], ts.kl_history_[500]
    passed = sil > 0.5 and kl500 < kl0
    return CheckResult("tsne_descent", passed,
                       f"silhouette {sil:.3f} (>0.5); KL {kl0:.3f} -> {kl500:.3f}")


# ---------------------------------------------------------------------------
# Denoising gain on the synthetic benchmark (slow)


def check_sbm_denoising(seeds=range(5)) -> CheckResult:
    cleans, plains, denoised = [], [], []
    for seed in seeds:
        g = generate_sbm_graph(600, 4, 0.0125, 0.0005, 32, 1.0, seed=seed)
        model = train_dnn(g, "gcn", TrainConfig(
            epochs=200, learning_rate=1e-2, dropout_p=0.5, hidden_dim=64,
            seed=seed))
        rbm = GaussianBernoulliRBM(hidden_units=256, epochs=500, batch_size=64,
                                   lr=0.02, seed=seed)
        rbm.fit(g.features[g.split.train])
        pipe = DenoisingPipeline(model, {0: rbm})
        cleans.append(accuracy(pipe.predict_plain(g).predictions, g.labels,
                               g.split.test))
        noisy = NoisePlan(x_kind="Xz", n_x=60, n_a=0, seed=seed).apply(g)
        prop = prepare_propagation("gcn", noisy)
        plains.append(accuracy(pipe.predict_plain(noisy, prop).predictions,
                               g.labels, g.split.test))
        denoised.append(accuracy(pipe.predict_denoised(noisy, 0, prop).predictions,
                                 g.labels, g.split.test))
    clean_ok = min(cleans) >= 0.90
    gain = float(np.mean(denoised) - np.mean(plains))
    passed = clean_ok and gain >= 0.05
    return CheckResult(
        "sbm_denoising_gain", passed,
        f"clean min {min(cleans):.3f} (>=0.90); blanked-input accuracy "
        f"{np.mean(plains):.3f} vs denoised {np.mean(denoised):.3f} "
        f"(gain {gain:+.3f} >= +0.05 over {len(cleans)} seeds)")


# ---------------------------------------------------------------------------
# Published dataset shape constants (needs the real dataset)


def check_wikics_shape() -> CheckResult:
    data_dir = os.environ.get("GSR_DATA_DIR", "")
    candidates = [Path(data_dir) / "wikics" / "data.json",
                  Path(data_dir) / "data.json"] if data_dir else []
    path = next((p for p in candidates if p.exists()), None)
    if path is None:
        return CheckResult("wikics_shape", True,
                           "dataset file not present (set GSR_DATA_DIR)",
                           skipped=True)
    g = load_graph(path, "wikics-json")
    want = dict(num_nodes=11701, edges=216123, dim=300, classes=10,
                train=4085, val=1769, test=5847)
    got = dict(num_nodes=g.num_nodes, edges=g.num_edges, dim=g.feature_dim,
               classes=g.num_classes, train=g.split.train.size,
               val=g.split.val.size, test=g.split.test.size)
    return CheckResult("wikics_shape", got == want, f"got {got}, want {want}")


FAST_CHECKS = (
    check_gradients,
    check_rbm_conditionals,
    check_rbm_likelihood,
    check_rbm_memory,
    check_noise_exactness,
    check_pipeline_identity,
    check_grid_contracts,
    check_tsne,
)

SLOW_CHECKS = (
    check_sbm_denoising,
    check_wikics_shape,
)


def run_checks(include_slow: bool = False) -> list[CheckResult]:
    results = []
    for fn in FAST_CHECKS + (SLOW_CHECKS if include_slow else ()):
        start = time.monotonic()
        result = fn()
        result.seconds = round(time.monotonic() - start, 2)
        results.append(result)
    return results
