"""Command-line entry point orchestrating the full workflow.

Subcommands: data, train, embed, rbm, grid, project, report, verify. Every
subcommand prints one machine-readable JSON summary line on success. Exit
codes: 0 success, 1 usage or configuration error, 2 runtime failure. All
outputs are written atomically, so an interrupted run never leaves corrupt
artifacts behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import load_config, section
from .errors import ArgumentError, ConfigError, ToolkitError
from .evaluation import export_report, render_report, run_grid
from .graph import Graph, generate_sbm_graph, load_graph, load_native, save_native
from .distortion import NoisePlan
from .nn.backprop import prepare_propagation
from .nn.classifier import train_dnn
from .nn.infer import forward_full
from .nn.model import ARCHS, TrainConfig, load_model, save_model
from .node2vec import Node2VecEmbedding, load_embeddings, save_embeddings
from .pipeline import DenoisingPipeline, load_pipeline, save_manifest
from .rbm import GaussianBernoulliRBM, save_rbm
from .serialize import atomic_write_text
from .tsne import EmbeddingSnapshot, ExactTSNE
from .verify import run_checks


class _Parser(argparse.ArgumentParser):
    def error(self, message):       # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _require_file(path: str | Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing {what}: {path}")
    return path


def _data_dir() -> Path:
    return Path(os.environ.get("GSR_DATA_DIR", "."))


def _load_dataset(args, cfg) -> Graph:
    ds = section(cfg, "dataset")
    source = args.dataset or ds.get("source", "sbm")
    if source == "sbm":
        p = ds.get("sbm", {})
        return generate_sbm_graph(
            num_nodes=p.get("num_nodes", 600), num_classes=p.get("num_classes", 4),
            p_in=p.get("p_in", 0.0125), p_out=p.get("p_out", 0.0005),
            feature_dim=p.get("feature_dim", 32),
            feature_shift=p.get("feature_shift", 1.0),
            seed=args.seed)
    path = getattr(args, "path", None) or ds.get("path")
    if source == "wikics":
        path = path or _data_dir() / "wikics" / "data.json"
        return load_graph(_require_file(path, "wikics data.json"), "wikics-json")
    if source == "ogbn-arxiv":
        path = path or _data_dir() / "ogbn-arxiv"
        return load_graph(_require_file(path, "ogbn-arxiv directory"), "ogb-dir")
    raise ConfigError(f"unknown dataset source {source!r}")


def _graph_stats(g: Graph) -> dict:
    return {
        "num_nodes": g.num_nodes, "num_edges": g.num_edges,
        "feature_dim": g.feature_dim, "num_classes": g.num_classes,
        "train": int(g.split.train.size), "val": int(g.split.val.size),
        "test": int(g.split.test.size),
    }


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.get("out", "runs/latest"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_taps(raw: str | None, cfg) -> tuple[int, ...]:
    if raw is None:
        return tuple(cfg.get("taps", [0, 1, 2, 3]))
    try:
        taps = tuple(sorted({int(t) for t in raw.split(",") if t != ""}))
    except ValueError as exc:
        raise ArgumentError(f"bad --taps value {raw!r}") from exc
    if any(t not in (0, 1, 2, 3) for t in taps):
        raise ArgumentError("taps must be within 0,1,2,3")
    return taps


# ---------------------------------------------------------------------------
# Subcommands

def cmd_data(args, cfg) -> dict:
    g = _load_dataset(args, cfg)
    out = _out_dir(args, cfg)
    graph_path = out / "graph.gsr"
    save_native(g, graph_path)
    return {"command": "data", "graph": str(graph_path), "stats": _graph_stats(g)}


def cmd_train(args, cfg) -> dict:
    tr = section(cfg, "train")
    arch = args.arch or tr.get("arch", "mlp")
    if arch not in ARCHS:
        raise ConfigError(f"unknown architecture {arch!r}")
    out = _out_dir(args, cfg)
    g = load_native(_require_file(args.graph or out / "graph.gsr", "graph artifact"))
    embeddings = None
    if arch == "n2v":
        emb_path = args.embeddings or out / "embeddings.gsre"
        embeddings = load_embeddings(_require_file(emb_path, "embedding artifact"))
    train_cfg = TrainConfig(
        epochs=args.epochs or tr.get("epochs", 200),
        learning_rate=args.learning_rate or tr.get("learning_rate", 1e-2),
        dropout_p=tr.get("dropout_p", 0.5),
        hidden_dim=tr.get("hidden_dim", 64),
        seed=args.seed, optimizer=tr.get("optimizer", "adam"))
    history: list = []
    model = train_dnn(g, arch, train_cfg, n2v_embeddings=embeddings,
                      history=history)
    model_path = out / f"model_{arch}.gsrm"
    save_model(model, model_path)
    result = forward_full(model, g)
    accs = {split: float((result.predictions[ids] == g.labels[ids]).mean())
            for split, ids in (("train", g.split.train), ("val", g.split.val),
                               ("test", g.split.test)) if ids.size}
    return {"command": "train", "arch": arch, "model": str(model_path),
            "epochs": train_cfg.epochs, "accuracy": accs,
            "best_val": max((h["val_acc"] for h in history), default=None)}


def cmd_embed(args, cfg) -> dict:
    em = section(cfg, "embed")
    out = _out_dir(args, cfg)
    g = load_native(_require_file(args.graph or out / "graph.gsr", "graph artifact"))
    n2v = Node2VecEmbedding(
        walks_per_node=em.get("walks_per_node", 10),
        walk_length=em.get("walk_length", 40),
        p=em.get("p", 1.0), q=em.get("q", 1.0), window=em.get("window", 5),
        embedding_dim=em.get("embedding_dim", 64),
        negatives=em.get("negatives", 5), epochs=em.get("epochs", 1),
        lr=em.get("lr", 0.025), seed=args.seed)
    n2v.fit(g)
    emb_path = out / "embeddings.gsre"
    save_embeddings(n2v.embeddings_, emb_path)
    return {"command": "embed", "embeddings": str(emb_path),
            "dim": int(n2v.embeddings_.shape[1]),
            "isolated_nodes": len(n2v.skipped_nodes_)}


def cmd_rbm(args, cfg) -> dict:
    rb = section(cfg, "rbm")
    out = _out_dir(args, cfg)
    g = load_native(_require_file(args.graph or out / "graph.gsr", "graph artifact"))
    model = load_model(_require_file(args.model, "model checkpoint"))
    taps = _parse_taps(args.taps, cfg)
    pipe = DenoisingPipeline(model, {})
    gibbs_rounds = rb.get("gibbs_rounds", 1)
    rbm_paths: dict[int, str] = {}
    errors: dict[str, float] = {}
    for tap in taps:
        Z = pipe.training_representations(g, tap)
        rbm = GaussianBernoulliRBM(
            hidden_units=rb.get("hidden_units", 256),
            epochs=rb.get("epochs", 100), batch_size=rb.get("batch_size", 64),
            cd_steps=rb.get("cd_steps", 1), lr=rb.get("lr", 1e-2),
            seed=args.seed, gibbs_rounds=gibbs_rounds)
        rbm.fit(Z)
        path = out / f"rbm_tap{tap}.gsrr"
        save_rbm(rbm, path)
        rbm_paths[tap] = path.name
        errors[str(tap)] = (round(rbm.reconstruction_errors_[-1], 6)
                            if rbm.reconstruction_errors_ else None)
    manifest_path = out / "pipeline.json"
    save_manifest(manifest_path, Path(args.model).name
                  if Path(args.model).parent == out else str(args.model),
                  rbm_paths, gibbs_rounds)
    return {"command": "rbm", "manifest": str(manifest_path),
            "taps": list(taps), "final_reconstruction_error": errors}


def cmd_grid(args, cfg) -> dict:
    noise = section(cfg, "noise")
    out = _out_dir(args, cfg)
    g = load_native(_require_file(args.graph or out / "graph.gsr", "graph artifact"))
    pipe = load_pipeline(_require_file(args.manifest or out / "pipeline.json",
                                       "pipeline manifest"))
    taps = _parse_taps(args.taps, cfg)
    x_kind = "Xc" if (args.x_noise or noise.get("x_kind", "z")) == "c" else "Xz"
    a_kind = "Ac" if (args.a_noise or noise.get("a_kind", "c")) == "c" else "Az"
    split = args.split or cfg.get("split", "test")
    run = run_grid(pipe, g, x_kind, a_kind, taps=taps, split=split,
                   seed=args.seed, val_pool=noise.get("val_pool", "any"),
                   test_pool=noise.get("test_pool", "any"),
                   jobs=args.jobs or cfg.get("jobs", os.cpu_count() or 1))
    grid_dir = out / "grids"
    files = export_report([run], grid_dir)
    return {"command": "grid", "out": str(grid_dir),
            "files": [f.name for f in files],
            "failed_cells": len(run.failures)}


def cmd_project(args, cfg) -> dict:
    noise = section(cfg, "noise")
    ts = section(cfg, "tsne")
    out = _out_dir(args, cfg)
    g = load_native(_require_file(args.graph or out / "graph.gsr", "graph artifact"))
    pipe = load_pipeline(_require_file(args.manifest or out / "pipeline.json",
                                       "pipeline manifest"))
    tap = int(args.tap)
    if tap not in pipe.rbms:
        raise ConfigError(f"pipeline manifest has no RBM for tap {tap}")
    split = args.split or cfg.get("split", "test")
    rows = g.split.val if split == "val" else g.split.test
    x_kind = "Xc" if (args.x_noise or noise.get("x_kind", "z")) == "c" else "Xz"
    a_kind = "Ac" if (args.a_noise or noise.get("a_kind", "c")) == "c" else "Az"
    plan = NoisePlan(x_kind=x_kind, a_kind=a_kind, n_x=args.nx, n_a=args.na,
                     val_pool=noise.get("val_pool", "any"),
                     test_pool=noise.get("test_pool", "any"), seed=args.seed)
    noisy = plan.apply(g)
    prop = prepare_propagation(pipe.model.arch, noisy)

    variants = {
        "desired": pipe.predict_plain(g).taps[tap],
        "noisy": pipe.predict_plain(noisy, prop).taps[tap],
        "denoised": pipe.predict_denoised(noisy, tap, prop).taps[tap],
    }
    meta = {"n_x": args.nx, "n_a": args.na, "x_kind": x_kind, "a_kind": a_kind}
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    snapshots = []
    embedder = ExactTSNE(perplexity=ts.get("perplexity", 30.0),
                         iterations=ts.get("iterations", 1000),
                         learning_rate=ts.get("learning_rate"), seed=args.seed)
    for variant, Z in variants.items():
        coords = embedder.fit_transform(Z[rows])
        snap = EmbeddingSnapshot(tap, variant, coords, g.labels[rows],
                                 meta | {"perplexity": embedder.perplexity,
                                         "iterations": embedder.iterations})
        atomic_write_text(snap_dir / f"tap{tap}_{variant}.csv", snap.to_csv())
        snapshots.append(snap)
    html = render_report([], snapshots)
    atomic_write_text(snap_dir / f"tap{tap}_snapshots.html", html)
    return {"command": "project", "out": str(snap_dir), "tap": tap,
            "variants": sorted(variants), "rows": int(rows.size)}


def cmd_report(args, cfg) -> dict:
    out = _out_dir(args, cfg)
    results = sorted(Path(p) for p in args.results) or [out / "grids"]
    import json as _json

    from .evaluation import AccuracyGrid, GridRun
    runs = []
    for path in results:
        bundle = _require_file(path / "results.json" if path.is_dir() else path,
                               "results bundle")
        payload = _json.loads(bundle.read_text())
        for entry in payload["runs"]:
            grids = [AccuracyGrid(
                np.array([[np.nan if v is None else v for v in row]
                          for row in gd["values"]]), gd["meta"])
                for gd in entry["grids"]]
            runs.append(GridRun(grids, entry["manifest"],
                                entry.get("cell_hashes", {}),
                                entry.get("failures", [])))
    if not runs:
        raise ConfigError("no results bundles found to report on")
    report_path = out / "report.html"
    atomic_write_text(report_path, render_report(runs, []))
    return {"command": "report", "report": str(report_path),
            "runs": len(runs)}


def cmd_verify(args, cfg) -> dict:
    results = run_checks(include_slow=args.full)
    for r in results:
        status = "SKIP" if r.skipped else ("PASS" if r.passed else "FAIL")
        print(f"[{status}] {r.name} ({r.seconds:.1f}s): {r.details}",
              file=sys.stderr)
    failed = [r.name for r in results if not r.passed]
    summary = {"command": "verify",
               "suites": {r.name: ("skipped" if r.skipped else
                                   "passed" if r.passed else "failed")
                          for r in results},
               "passed": len(results) - len(failed), "failed": len(failed)}
    if failed:
        _emit(summary)
        raise ToolkitError(f"property suites failed: {', '.join(failed)}")
    return summary


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="gsr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("data", help="load or generate a dataset")
    common(p)
    p.add_argument("--dataset", choices=("wikics", "ogbn-arxiv", "sbm"))
    p.add_argument("--path", default=None, help="explicit dataset location")

    p = sub.add_parser("train", help="train a classifier on the clean graph")
    common(p)
    p.add_argument("--arch", choices=ARCHS)
    p.add_argument("--graph", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)

    p = sub.add_parser("embed", help="train node embeddings by biased walks")
    common(p)
    p.add_argument("--graph", default=None)

    p = sub.add_parser("rbm", help="fit reconstruction models on chosen taps")
    common(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--taps", default=None, help="comma-separated, e.g. 0,1")

    p = sub.add_parser("grid", help="run the noise-level accuracy grid")
    common(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--taps", default=None)
    p.add_argument("--x-noise", choices=("c", "z"))
    p.add_argument("--a-noise", choices=("c", "z"))
    p.add_argument("--split", choices=("val", "test"))

    p = sub.add_parser("project", help="2-D snapshots of tap representations")
    common(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--tap", type=int, required=True)
    p.add_argument("--nx", type=int, default=0)
    p.add_argument("--na", type=int, default=0)
    p.add_argument("--x-noise", choices=("c", "z"))
    p.add_argument("--a-noise", choices=("c", "z"))
    p.add_argument("--split", choices=("val", "test"))

    p = sub.add_parser("report", help="assemble an HTML report from results")
    common(p)
    p.add_argument("results", nargs="*", help="results.json files or grid dirs")

    p = sub.add_parser("verify", help="run the property-check suite")
    common(p)
    p.add_argument("--full", action="store_true",
                   help="include the slow benchmark checks")
    return parser


COMMANDS = {
    "data": cmd_data, "train": cmd_train, "embed": cmd_embed, "rbm": cmd_rbm,
    "grid": cmd_grid, "project": cmd_project, "report": cmd_report,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = cfg.get("seed", 0)
        summary = COMMANDS[args.command](args, cfg)
        _emit(summary)
        return 0
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ToolkitError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
