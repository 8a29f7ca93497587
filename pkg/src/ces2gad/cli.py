"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 data error, 4 capacity error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_pairs
from .exceptions import CapacityError, ConfigError, DataError
from .graph import laplacian
from .io import load_dataset_with_summary
from .spectral import eigendecompose, spectrum_report

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CAPACITY = 0, 2, 3, 4


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    pairs = parse_pairs(args.set or [], "--set")
    for key in ("dataset", "output_dir", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            pairs[key] = str(value)
    return cfg.with_overrides(pairs)


def _signal(g, name: str) -> np.ndarray:
    if name == "labels":
        if np.any(g.labels < 0):
            raise DataError("label signal needs every node labeled")
        return g.labels.astype(np.float64)
    if name == "features":
        return g.features
    if name.startswith("feature:"):
        col = int(name.split(":", 1)[1])
        if not 0 <= col < g.num_features:
            raise ConfigError(f"feature column {col} out of range")
        return g.features[:, col]
    raise ConfigError(f"unknown signal {name!r}; use labels, features or feature:<col>")


def cmd_spectrum(args) -> int:
    g, _ = load_dataset_with_summary(args.dataset)
    x = _signal(g, args.signal)
    lap = laplacian(g.relation(args.relation), args.form)
    rep = spectrum_report(lap, x, args.k, decomposition=eigendecompose(lap))
    to_stdout = args.out is None
    fh = sys.stdout if to_stdout else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "energy", "cumulative_ratio"])
        for i, (lam, e, c) in enumerate(zip(rep.eigenvalues, rep.distribution, rep.cumulative_ratio), 1):
            w.writerow([i, repr(float(lam)), repr(float(e)), repr(float(c))])
    finally:
        if not to_stdout:
            fh.close()
    summary = f"S_high={rep.high_freq_area:.10g} k={rep.split_index} eta_k={rep.eta_k:.10g}"
    print(summary, file=sys.stderr if to_stdout else sys.stdout)
    return EXIT_OK


def cmd_inject(args) -> int:
    from .pipeline import inject_run

    cfg = _config(args)
    out = inject_run(cfg, args.out or cfg.output_dir)
    _, summary = load_dataset_with_summary(out)
    print(f"wrote {out}")
    print(summary.format())
    return EXIT_OK


def cmd_shift(args) -> int:
    from .pipeline import shift_experiment_run

    cfg = _config(args)
    out = args.out or str(Path(cfg.output_dir) / "shift_experiment.csv")
    _, summary = shift_experiment_run(cfg, out)
    print(f"wrote {out}")
    print("ratio  eta_k(features)  eta_k(labels)  S_high(labels)  heterophily")
    for s in summary:
        print(
            f"{s['ratio']:<6g} {s['eta_k_features']:<16.6f} {s['eta_k_labels']:<14.6f} "
            f"{s['s_high_labels']:<15.6f} {s['graph_heterophily']:.6f}"
        )
    return EXIT_OK


def cmd_separate(args) -> int:
    from .io import write_separation
    from .pipeline import estimator_from_config, load_config_dataset, separation_summary, write_json
    from .training import split_nodes

    cfg = _config(args)
    g = load_config_dataset(cfg)
    est = estimator_from_config(cfg)
    out = Path(cfg.output_dir)
    sep_seed = est._seeds()[0]
    if args.all_labels:
        mask = g.labeled_mask
    else:
        mask = split_nodes(g, cfg.split_ratios, cfg.seed).mask("train")
    sep = est._separate(g, mask, sep_seed)
    write_separation(sep, out)
    summary = separation_summary(g, sep)
    write_json(out / "summary.json", summary)
    for row in summary["relations"]:
        agree = row["label_agreement"]
        agree = "n/a" if agree is None else f"{agree:.4f}"
        print(f"{row['relation']}: homophilic={row['homophilic']} heterophilic={row['heterophilic']} label_agreement={agree}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import train_run

    res = train_run(_config(args))
    est = res["estimator"]
    print(f"wrote {res['out']}  best_epoch={est.best_epoch_}  final_loss={est.loss_curve_[-1]:.6g}")
    return EXIT_OK


def _print_report(rep: dict) -> None:
    for part, m in rep["metrics"].items():
        print(f"{part:5s}  auc={m['auc']:.4f}  f1_macro={m['f1_macro']:.4f}  n={m['n_nodes']}")


def cmd_eval(args) -> int:
    from .pipeline import eval_run

    cfg = RunConfig.from_file(Path(args.run) / "config.txt")
    if args.dataset:
        cfg = cfg.replace(dataset=args.dataset)
    _print_report(eval_run(args.run, cfg))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from .pipeline import run_pipeline

    res = run_pipeline(_config(args))
    for rep in res["reports"]:
        print(f"alpha={rep['config']['alpha']} seed={rep['seed']}")
        _print_report(rep)
    print(f"wrote {res['out']}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .pipeline import run_ablation

    rows = run_ablation(_config(args), variants=tuple(args.variants))
    for r in rows:
        print(f"{r['variant']:15s} test_auc={r['test_auc']:.4f} test_f1_macro={r['test_f1_macro']:.4f}")
    return EXIT_OK


def _add_config_args(p, dataset=True):
    p.add_argument("-c", "--config", help="key=value config file")
    p.add_argument("-s", "--set", action="append", metavar="KEY=VALUE", help="override a config key")
    if dataset:
        p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--output-dir", dest="output_dir", help="output directory")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ces2gad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigen-spectrum and energy distribution of a signal")
    p.add_argument("--dataset", required=True)
    p.add_argument("--relation", default="0", help="relation name or index")
    p.add_argument("--signal", default="labels", help="labels, features or feature:<col>")
    p.add_argument("--form", choices=("regular", "normalized"), default="regular")
    p.add_argument("--k", type=int, help="low/high split index (default ceil(N/4))")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("inject", help="write a synthetic graph with injected anomalies")
    _add_config_args(p, dataset=False)
    p.add_argument("--out", help="dataset directory (default output_dir)")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("shift-experiment", help="spectral energy shift over anomaly ratios")
    _add_config_args(p, dataset=False)
    p.add_argument("--out", help="results CSV")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("separate", help="causal edge separation only")
    _add_config_args(p)
    p.add_argument("--all-labels", action="store_true", help="fit on every label instead of the training split")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("train", help="separate and train; writes checkpoint and loss curve")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run directory")
    p.add_argument("run", help="run directory written by train")
    p.add_argument("--dataset", help="override the dataset path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="separate, train and evaluate")
    _add_config_args(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("ablate", help="compare filter variants on one split")
    _add_config_args(p)
    p.add_argument(
        "--variants",
        nargs="+",
        default=["full", "low_pass_only"],
        choices=["full", "low_pass_only", "high_pass_only"],
    )
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "relation", None) is not None and args.relation.isdigit():
        args.relation = int(args.relation)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as err:
        where = f" [{err.stage}]" if err.stage else ""
        print(f"capacity error{where}: {err}", file=sys.stderr)
        return EXIT_CAPACITY
    except (DataError, OSError) as err:
        where = f" [{getattr(err, 'stage', None)}]" if getattr(err, "stage", None) else ""
        print(f"data error{where}: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
