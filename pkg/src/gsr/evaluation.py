"""Accuracy grids over the distortion levels, persistence, and static reports.

A grid run sweeps feature noise and adjacency noise over {0, 10, ..., 100}
percent. Each cell builds one noisy graph (deterministically derived from
the run seed and the cell's noise levels) that the plain pipeline and every
requested denoising tap all see, so within a cell the comparison is always
like for like. Feature noise depends only on the feature level and
adjacency noise only on the adjacency level, which keeps architectures that
ignore the graph exactly constant along the adjacency axis.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .distortion import NoisePlan
from .graph import Graph
from .nn.backprop import prepare_propagation
from .pipeline import DenoisingPipeline
from .serialize import atomic_write_text

LEVELS = tuple(range(0, 101, 10))

TOOLKIT_VERSION = "0.1.0"


def accuracy(predictions: np.ndarray, labels: np.ndarray, mask) -> float:
    """Fraction of masked nodes whose prediction equals the label."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ArgumentError("mask must be non-empty")
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    return float((predictions[mask] == labels[mask]).mean())


@dataclass
class AccuracyGrid:
    """11x11 accuracies indexed (n_X/10, n_A/10); NaN marks a failed cell."""

    values: np.ndarray
    meta: dict

    def __post_init__(self):
        if self.values.shape != (11, 11):
            raise ArgumentError("grid must be 11x11")

    @property
    def name(self) -> str:
        m = self.meta
        return (f"{m['arch']}_{m['pipeline']}_{m['x_kind'].lower()}_"
                f"{m['a_kind'].lower()}_{m['split']}")

    def to_csv(self) -> str:
        """Stable 12x12 layout: header row/col hold the noise levels."""
        lines = ["nX/nA," + ",".join(str(a) for a in LEVELS)]
        for ix, n_x in enumerate(LEVELS):
            cells = [_fmt(v) for v in self.values[ix]]
            lines.append(f"{n_x}," + ",".join(cells))
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else format(float(v), ".6g")


@dataclass
class GridRun:
    grids: list
    manifest: dict
    cell_hashes: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


def _hash_graph(graph: Graph) -> str:
    digest = hashlib.sha256()
    for arr in (graph.csr_offsets, graph.csr_targets, graph.features):
        digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.hexdigest()[:16]


def run_grid(pipeline: DenoisingPipeline, graph: Graph, x_kind: str, a_kind: str,
             taps=(0, 1, 2, 3), split: str = "test", seed: int = 0,
             val_pool: str = "any", test_pool: str = "any",
             jobs: int = 1) -> GridRun:
    """Evaluate the plain pipeline and every requested tap over the grid.

    Cells are independent; with jobs > 1 they are dispatched to a thread
    pool. Results do not depend on scheduling because each cell derives all
    randomness from (seed, n_X, n_A).
    """
    taps = tuple(sorted(taps))
    missing = [t for t in taps if t not in pipeline.rbms]
    if missing:
        raise ArgumentError(f"pipeline has no RBM for taps {missing}")
    if split not in ("val", "test"):
        raise ArgumentError("split must be 'val' or 'test'")
    mask = graph.split.val if split == "val" else graph.split.test

    names = ["plain"] + [f"tap{t}" for t in taps]
    values = {name: np.full((11, 11), np.nan) for name in names}
    cell_hashes: dict[str, str] = {}
    failures: list[dict] = []
    started = datetime.now(timezone.utc).isoformat()

    def eval_cell(ix: int, ia: int):
        n_x, n_a = LEVELS[ix], LEVELS[ia]
        plan = NoisePlan(x_kind=x_kind, a_kind=a_kind, n_x=n_x, n_a=n_a,
                         val_pool=val_pool, test_pool=test_pool, seed=seed)
        noisy = plan.apply(graph)
        prop = prepare_propagation(pipeline.model.arch, noisy)
        out = {"plain": accuracy(pipeline.predict_plain(noisy, prop).predictions,
                                 graph.labels, mask)}
        for t in taps:
            out[f"tap{t}"] = accuracy(
                pipeline.predict_denoised(noisy, t, prop).predictions,
                graph.labels, mask)
        return out, _hash_graph(noisy)

    cells = [(ix, ia) for ix in range(11) for ia in range(11)]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda c: _guard(eval_cell, *c), cells))
    else:
        results = [_guard(eval_cell, ix, ia) for ix, ia in cells]

    for (ix, ia), (out, digest, error) in zip(cells, results):
        if error is not None:
            failures.append({"n_x": LEVELS[ix], "n_a": LEVELS[ia], "error": error})
            continue
        cell_hashes[f"{LEVELS[ix]},{LEVELS[ia]}"] = digest
        for name, acc in out.items():
            values[name][ix, ia] = acc

    finished = datetime.now(timezone.utc).isoformat()
    grids = [AccuracyGrid(values[name], {
        "arch": pipeline.model.arch, "pipeline": name, "x_kind": x_kind,
        "a_kind": a_kind, "split": split, "seed": seed,
        "started": started, "finished": finished,
    }) for name in names]
    manifest = {
        "dataset_nodes": graph.num_nodes,
        "dataset_edges": graph.num_edges,
        "arch": pipeline.model.arch,
        "taps": list(taps),
        "x_kind": x_kind, "a_kind": a_kind, "split": split, "seed": seed,
        "val_pool": val_pool, "test_pool": test_pool,
        "gibbs_rounds": pipeline.gibbs_rounds,
        "toolkit_version": TOOLKIT_VERSION,
    }
    return GridRun(grids, manifest, cell_hashes, failures)


def _guard(fn, ix, ia):
    try:
        out, digest = fn(ix, ia)
        return out, digest, None
    except Exception as exc:  # cell failures must not abort the grid
        return None, None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# Report emission

def export_report(runs: list[GridRun], out_dir: str | Path,
                  snapshots: list | None = None) -> list[Path]:
    """Write per-grid CSVs, a combined JSON bundle, and a static HTML report.

    CSV bytes depend only on grid values, so re-exporting identical grids
    reproduces identical files.
    """
    if not runs or not any(r.grids for r in runs):
        raise ArgumentError("nothing to export")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for run in runs:
        for grid in run.grids:
            path = out_dir / f"{grid.name}.csv"
            atomic_write_text(path, grid.to_csv())
            written.append(path)

    bundle = {"runs": [{
        "manifest": run.manifest,
        "cell_hashes": run.cell_hashes,
        "failures": run.failures,
        "grids": [{"meta": g.meta,
                   "values": [[None if np.isnan(v) else round(float(v), 6)
                               for v in row] for row in g.values]}
                  for g in run.grids],
    } for run in runs]}
    json_path = out_dir / "results.json"
    atomic_write_text(json_path, json.dumps(bundle, indent=2, sort_keys=True) + "\n")
    written.append(json_path)

    html_path = out_dir / "report.html"
    atomic_write_text(html_path, render_report(runs, snapshots or []))
    written.append(html_path)
    return written


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_line_chart(series: dict[str, list], title: str) -> str:
    """Accuracy vs feature-noise chart as a self-contained SVG."""
    w, h, pad = 420, 300, 42
    parts = [f'<svg width="{w}" height="{h}" xmlns="http://www.w3.org/2000/svg">',
             f'<text x="{w/2}" y="16" text-anchor="middle" font-size="13">{title}</text>']
    x0, y0, x1, y1 = pad, h - pad, w - 10, 24
    sx = lambda nx: x0 + (x1 - x0) * nx / 100.0
    sy = lambda acc: y0 - (y0 - y1) * acc
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#333"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#333"/>')
    for lev in LEVELS:
        parts.append(f'<text x="{sx(lev):.1f}" y="{y0+14}" font-size="9" '
                     f'text-anchor="middle">{lev}</text>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{x0-6}" y="{sy(tick)+3:.1f}" font-size="9" '
                     f'text-anchor="end">{tick:g}</text>')
        parts.append(f'<line x1="{x0}" y1="{sy(tick):.1f}" x2="{x1}" '
                     f'y2="{sy(tick):.1f}" stroke="#ddd"/>')
    parts.append(f'<text x="{(x0+x1)/2}" y="{h-8}" font-size="10" '
                 f'text-anchor="middle">feature noise %</text>')
    for idx, (name, pts) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = [(sx(nx), sy(acc)) for nx, acc in pts if acc is not None]
        if coords:
            d = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
            parts.append(f'<polyline points="{d}" fill="none" stroke="{color}" '
                         f'stroke-width="1.5"/>')
        ly = 30 + 13 * idx
        parts.append(f'<rect x="{x1-92}" y="{ly-8}" width="10" height="3" '
                     f'fill="{color}"/>')
        parts.append(f'<text x="{x1-78}" y="{ly-3}" font-size="10">{name}</text>')
    parts.append("</svg>")
    return "".join(parts)


def _svg_scatter(coords: np.ndarray, labels: np.ndarray, title: str) -> str:
    w, h = 320, 300
    parts = [f'<svg width="{w}" height="{h}" xmlns="http://www.w3.org/2000/svg">',
             f'<text x="{w/2}" y="14" text-anchor="middle" font-size="12">{title}</text>']
    if coords.size:
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        for (x, y), lab in zip(coords, labels):
            px = 15 + (x - lo[0]) / span[0] * (w - 30)
            py = h - 12 - (y - lo[1]) / span[1] * (h - 36)
            color = _PALETTE[int(lab) % len(_PALETTE)]
            parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="2" '
                         f'fill="{color}" fill-opacity="0.7"/>')
    parts.append("</svg>")
    return "".join(parts)


def render_report(runs: list[GridRun], snapshots: list) -> str:
    """One HTML page: per adjacency level, accuracy-vs-feature-noise charts."""
    body = ["<html><head><meta charset='utf-8'><title>noise robustness report"
            "</title><style>body{font-family:sans-serif;margin:20px} "
            ".row{display:flex;flex-wrap:wrap}</style></head><body>",
            "<h1>Noise robustness report</h1>"]
    for run in runs:
        m = run.manifest
        body.append(f"<h2>{m['arch']} / X={m['x_kind']} A={m['a_kind']} "
                    f"split={m['split']} seed={m['seed']}</h2>")
        for ia, n_a in enumerate(LEVELS):
            series = {}
            for grid in run.grids:
                col = grid.values[:, ia]
                series[grid.meta["pipeline"]] = [
                    (LEVELS[ix], None if np.isnan(col[ix]) else float(col[ix]))
                    for ix in range(11)]
            if all(all(v is None for _, v in pts) for pts in series.values()):
                continue
            body.append("<div class='row'>")
            body.append(_svg_line_chart(
                series, f"{m['arch']} {m['x_kind']} vs accuracy at "
                        f"{m['a_kind']}={n_a}%"))
            body.append("</div>")
        if run.failures:
            body.append(f"<p>{len(run.failures)} failed cells (recorded in "
                        f"results.json)</p>")
    if snapshots:
        body.append("<h2>Representation snapshots</h2><div class='row'>")
        for snap in snapshots:
            body.append(_svg_scatter(
                snap.coords, snap.labels,
                f"tap{snap.tap} {snap.variant} "
                f"(nX={snap.meta.get('n_x')}, nA={snap.meta.get('n_a')})"))
        body.append("</div>")
    body.append("</body></html>")
    return "".join(body)
