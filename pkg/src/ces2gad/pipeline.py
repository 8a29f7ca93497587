"""Experiment orchestration: separate -> encode -> train -> evaluate, the
ablation runner and the synthetic-data commands, all writing to disk."""

from __future__ import annotations

import contextlib
import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .causal import routing_agreement
from .config import RunConfig
from .exceptions import CES2Error, ConfigError, DegenerateInputError
from .io import load_dataset, load_model, read_separation, save_model, write_dataset, write_separation
from .model import CES2GAD
from .synth import InjectionConfig, barabasi_albert, inject_anomalies, spectral_shift_experiment, summarize_shift
from .training import PART_NAMES, SplitAssignment, evaluate, predict_proba

TIMESTAMP_KEY = "created_at"


@contextlib.contextmanager
def stage(name: str):
    """Tag toolkit errors raised inside the block with the pipeline stage."""
    try:
        yield
    except CES2Error as err:
        if err.stage is None:
            err.stage = name
        raise


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, rows: list[dict], columns=None) -> Path:
    path = Path(path)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in columns})
    return path


def strip_timestamps(obj):
    if isinstance(obj, dict):
        return {k: strip_timestamps(v) for k, v in obj.items() if k != TIMESTAMP_KEY}
    if isinstance(obj, list):
        return [strip_timestamps(v) for v in obj]
    return obj


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, cfg: RunConfig, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    write_json(
        out / "manifest.json",
        {
            "command": command,
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "toolkit_version": __version__,
            TIMESTAMP_KEY: _now(),
        },
    )


def estimator_from_config(cfg: RunConfig, **overrides) -> CES2GAD:
    params = dict(
        k_se=cfg.k_se,
        d_z=cfg.d_z,
        h_g=cfg.h_g,
        n_nonedge=cfg.nonedge_per_node,
        sep_epochs=cfg.sep_epochs,
        sep_lr=cfg.sep_lr,
        n_layers=cfg.layers,
        hidden=cfg.hidden,
        alpha=cfg.alpha,
        head_hidden=cfg.head_hidden,
        lr=cfg.lr,
        epochs=cfg.epochs,
        weight_decay=cfg.weight_decay,
        residual=cfg.residual,
        branches=cfg.branches,
        separation=cfg.separation,
        class_weight=cfg.class_weight,
        refine=cfg.refine,
        split_ratios=tuple(cfg.split_ratios),
        random_state=cfg.seed,
    )
    params.update(overrides)
    return CES2GAD(**params)


def load_config_dataset(cfg: RunConfig):
    if not cfg.dataset:
        raise ConfigError("no dataset given (set dataset=... or pass --dataset)")
    with stage("load"):
        return load_dataset(cfg.dataset)


def separation_summary(g, sep) -> dict:
    rows = []
    for r, counts in enumerate(sep.counts()):
        try:
            agreement = routing_agreement(g, sep, r)
        except DegenerateInputError:
            agreement = None
        rows.append({**counts, "label_agreement": agreement})
    return {"relations": rows}


def write_split(path, split: SplitAssignment) -> None:
    with open(path, "w") as fh:
        fh.write("node_id,part\n")
        for v, tag in enumerate(split.tags):
            fh.write(f"{v},{PART_NAMES[int(tag)]}\n")


def read_split(path, seed=0) -> SplitAssignment:
    codes = {name: tag for tag, name in PART_NAMES.items()}
    rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=str, ndmin=2)
    tags = np.full(len(rows), -1, dtype=np.int64)
    tags[rows[:, 0].astype(np.int64)] = [codes[s] for s in rows[:, 1]]
    return SplitAssignment(tags, seed)


def train_run(cfg: RunConfig, g=None, out=None, command="train") -> dict:
    """Separate, train and write separation CSVs, checkpoint, split, loss curve."""
    g = load_config_dataset(cfg) if g is None else g
    out = Path(out or cfg.output_dir)
    write_manifest(out, cfg, command)
    est = estimator_from_config(cfg)
    with stage("train"):
        est.fit(g)
    with stage("separate"):
        write_separation(est.separation_, out / "separation")
        write_json(out / "separation" / "summary.json", separation_summary(g, est.separation_))
    write_split(out / "split.csv", est.split_)
    save_model(out / "checkpoint.ckpt", est.model_, {"seed": cfg.seed, "best_epoch": est.best_epoch_})
    write_csv(
        out / "loss_curve.csv",
        [
            {"epoch": i, "train_loss": loss, "val_f1_macro": f1}
            for i, (loss, f1) in enumerate(zip(est.loss_curve_, est.val_f1_curve_))
        ],
    )
    return {"estimator": est, "graph": g, "out": out}


def eval_run(run_dir, cfg: RunConfig = None, g=None) -> dict:
    """Evaluate a trained run directory and write ``report.json``."""
    run_dir = Path(run_dir)
    cfg = cfg or RunConfig.from_file(run_dir / "config.txt")
    g = load_config_dataset(cfg) if g is None else g
    with stage("eval"):
        model, meta = load_model(run_dir / "checkpoint.ckpt")
        sep = read_separation(run_dir / "separation", g)
        split = read_split(run_dir / "split.csv", cfg.seed)
        probs = predict_proba(g, sep, model)
        curve = []
        curve_path = run_dir / "loss_curve.csv"
        if curve_path.exists():
            with open(curve_path) as fh:
                curve = [float(r["train_loss"]) for r in csv.DictReader(fh)]
        metrics = {}
        for part in ("train", "val", "test"):
            idx = split.indices(part)
            if len(idx) and len(np.unique(g.labels[idx])) == 2:
                metrics[part] = evaluate(probs, g.labels, idx).to_dict()
    report = {
        "toolkit_version": __version__,
        TIMESTAMP_KEY: _now(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "split_sizes": split.sizes(),
        "best_epoch": meta.get("best_epoch"),
        "metrics": metrics,
        "final_train_loss": curve[-1] if curve else None,
        "separation": separation_summary(g, sep),
    }
    write_json(run_dir / "report.json", report)
    return report


def run_pipeline(cfg: RunConfig) -> dict:
    """Full pipeline. With an ``alpha_grid`` every grid point runs in its own
    subdirectory with seed ``seed + index`` and a combined ``grid.csv`` is
    written."""
    g = load_config_dataset(cfg)
    out = Path(cfg.output_dir)
    if not cfg.alpha_grid:
        train_run(cfg, g, out, command="pipeline")
        return {"reports": [eval_run(out, cfg, g)], "out": out}
    write_manifest(out, cfg, "pipeline")
    reports, rows = [], []
    for i, a in enumerate(cfg.alpha_grid):
        sub = cfg.replace(alpha=float(a), seed=cfg.seed + i, alpha_grid=(), output_dir=str(out / f"alpha_{i}"))
        train_run(sub, g, sub.output_dir, command="pipeline")
        rep = eval_run(sub.output_dir, sub, g)
        reports.append(rep)
        test = rep["metrics"].get("test", {})
        rows.append(
            {
                "index": i,
                "alpha": a,
                "seed": sub.seed,
                "test_auc": test.get("auc"),
                "test_f1_macro": test.get("f1_macro"),
            }
        )
    write_csv(out / "grid.csv", rows)
    return {"reports": reports, "out": out}


ABLATION_VARIANTS = {"full": "both", "low_pass_only": "low", "high_pass_only": "high"}


def run_ablation(cfg: RunConfig, g=None, variants=("full", "low_pass_only")) -> list[dict]:
    """Train each filter variant on the same split and edge separation."""
    g = load_config_dataset(cfg) if g is None else g
    out = Path(cfg.output_dir)
    write_manifest(out, cfg, "ablate")
    rows = []
    sep = split = None
    for name in variants:
        est = estimator_from_config(cfg, branches=ABLATION_VARIANTS[name])
        with stage("train"):
            est.fit(g, split=split, separation=sep)
        sep, split = est.separation_, est.split_
        rep = est.evaluate(g, "test")
        rows.append({"variant": name, "test_auc": rep.auc, "test_f1_macro": rep.f1_macro, "best_epoch": est.best_epoch_})
    write_csv(out / "ablation.csv", rows)
    write_json(out / "ablation.json", {"seed": cfg.seed, "config": cfg.to_dict(), "variants": rows, TIMESTAMP_KEY: _now()})
    return rows


def inject_run(cfg: RunConfig, out=None) -> Path:
    """Generate a Barabasi-Albert graph with injected anomalies as a dataset directory."""
    out = Path(out or cfg.output_dir)
    inj = InjectionConfig(cfg.anomaly_ratio, cfg.sigma, cfg.rewire, cfg.seed, cfg.n_features)
    g = inject_anomalies(barabasi_albert(cfg.n_nodes, cfg.ba_m, cfg.seed), inj)
    write_dataset(g, out)
    write_manifest(out / "_run", cfg, "inject")
    return out


def shift_experiment_run(cfg: RunConfig, out_csv=None) -> tuple[list, list]:
    inj = InjectionConfig(cfg.anomaly_ratio, cfg.sigma, cfg.rewire, cfg.seed, cfg.n_features)
    seeds = range(cfg.seed, cfg.seed + cfg.n_seeds)
    with stage("shift-experiment"):
        rows = spectral_shift_experiment(cfg.n_nodes, cfg.ba_m, cfg.ratio_grid, inj, seeds)
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        write_csv(out_csv, rows)
    return rows, summarize_shift(rows)
