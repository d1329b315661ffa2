"""Command-line entry point.

Subcommands: ingest, synth, compose, train, eval, interpret, gradcheck.
Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .hetgraph import add_reverse_relations, load_dataset, save_dataset
from .interpret import (
    relation_weight_summary,
    render_weight_chart,
    weight_degree_correlation,
    write_correlation_csv,
    write_summary_csv,
)
from .model import LatteModel, ModelConfig, checkpoint_meta
from .relations import build_relation_sets, prune
from .synth import FIRST_ORDER, SECOND_ORDER, SynthConfig, synth_generate
from .trainer import TrainConfig, evaluate, train, write_history_csv
from .verify import end_to_end_grad_check

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _dataset_fingerprint(path: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(path.iterdir()):
        if f.is_file():
            h.update(f.name.encode())
            h.update(hashlib.sha256(f.read_bytes()).digest())
    return h.hexdigest()


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=128, help="embedding width per layer")
    p.add_argument("--layers", type=int, default=2, help="number of stacked layers")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=2048)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--neg-ratio", type=float, default=5.0)
    p.add_argument("--fanouts", default="25,20", help="comma list, one per layer")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--mode", choices=["transductive", "inductive"], default="transductive")
    p.add_argument("--proximity", action="store_true", help="add link-preserving loss terms")
    p.add_argument("--normalize-features", action="store_true")
    p.add_argument("--activation", choices=["relu", "sigmoid", "identity"], default="relu")
    p.add_argument("--seed", type=int, default=0)


def _parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="latte")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset directory")
    p.add_argument("data")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--rule", choices=[FIRST_ORDER, SECOND_ORDER], default=SECOND_ORDER)
    p.add_argument("--n-target", type=int, default=450)
    p.add_argument("--n-bridge", type=int, default=150)
    p.add_argument("--n-noise", type=int, default=0)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("compose", help="dump higher-order relations")
    p.add_argument("data")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=None, help="prune entries below epsilon")

    p = sub.add_parser("train", help="train a model")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint, JSON to stdout")
    p.add_argument("data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--normalize-features", action="store_true")

    p = sub.add_parser("interpret", help="export attention analyses")
    p.add_argument("data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--unweighted-degree", action="store_true")

    p = sub.add_parser("gradcheck", help="end-to-end finite-difference check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    return root


def _load_for_model(data_dir: str):
    g = add_reverse_relations(load_dataset(data_dir))
    return g


def _model_from_checkpoint(g, checkpoint: str) -> LatteModel:
    meta = checkpoint_meta(checkpoint)
    cfg = ModelConfig(**meta["config"])
    model = LatteModel(g, cfg)
    model.load_parameters(checkpoint)
    return model


def cmd_ingest(args) -> int:
    g = load_dataset(args.data)
    summary = {
        "node_types": [
            {"name": nt.name, "count": nt.count, "feature_dim": nt.feature_dim}
            for nt in g.node_types
        ],
        "relations": [
            {"name": rel.name, "nnz": mat.nnz} for rel, mat in g.relations.items()
        ],
        "target_type": g.target_type,
        "num_classes": g.num_classes,
        "labeled": int(np.sum(g.labels >= 0)),
        "splits": {k: len(v) for k, v in g.splits.items()},
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        rule=args.rule,
        n_target=args.n_target,
        n_bridge=args.n_bridge,
        n_noise=args.n_noise,
        num_classes=args.classes,
    )
    g = synth_generate(cfg, seed=args.seed)
    save_dataset(g, args.out)
    print(f"wrote synthetic dataset to {args.out}")
    return EXIT_OK


def cmd_compose(args) -> int:
    g = _load_for_model(args.data)
    relsets = build_relation_sets(g.relations, args.order)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for rel, mat in relsets[args.order - 1]:
        if args.epsilon is not None:
            mat = prune(mat, epsilon=args.epsilon)
        rows, cols, w = mat.entries()
        fname = out / f"edges_{rel.name}.tsv"
        with open(fname, "w", encoding="utf-8") as fh:
            for i, j, wij in zip(rows, cols, w):
                fh.write(f"{i}\t{j}\t{float(wij)!r}\n")
        density = mat.nnz / (mat.n_rows * mat.n_cols)
        summary.append({"name": rel.name, "nnz": mat.nnz, "density": density})
    print(f"{'name':<16}{'nnz':>10}{'density':>12}")
    for row in summary:
        print(f"{row['name']:<16}{row['nnz']:>10}{row['density']:>12.6f}")
    return EXIT_OK


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        raise ValidationError(f"{manifest_path} already exists; use a fresh output dir")
    g = _load_for_model(args.data)
    fanouts = tuple(int(v) for v in args.fanouts.split(","))
    mcfg = ModelConfig(
        layers=args.layers,
        dim=args.dim,
        activation=args.activation,
        dropout=args.dropout,
        seed=args.seed,
    )
    tcfg = TrainConfig(
        lr=args.lr,
        batch_size=args.batch,
        patience=args.patience,
        weight_decay=args.weight_decay,
        epochs_max=args.epochs,
        mode=args.mode,
        use_proximity=args.proximity,
        neg_ratio=args.neg_ratio,
        fanouts=fanouts,
        normalize_features=args.normalize_features,
        seed=args.seed,
    )
    manifest = {
        "dataset": str(Path(args.data).resolve()),
        "dataset_fingerprint": _dataset_fingerprint(Path(args.data)),
        "model_config": dict(vars(mcfg)),
        "train_config": dict(vars(tcfg)) | {"fanouts": list(tcfg.fanouts)},
        "seed": args.seed,
        "artifacts": {"checkpoint": "checkpoint.npz", "history": "train_log.csv"},
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)

    model = LatteModel(g, mcfg)
    history = train(model, g, tcfg)
    model.save(str(out / "checkpoint.npz"))
    write_history_csv(history, str(out / "train_log.csv"))
    best = min(history, key=lambda r: r["val_loss"])
    print(
        f"trained {len(history)} epochs; best val loss {best['val_loss']:.4f} "
        f"(epoch {best['epoch']}), val macro-F1 {best['val_macro_f1']:.4f}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    g = _load_for_model(args.data)
    model = _model_from_checkpoint(g, args.checkpoint)
    metrics = evaluate(
        model, g, args.split, normalize_features=args.normalize_features
    )
    print(
        json.dumps(
            {
                "macro_f1": metrics.macro_f1,
                "per_class": metrics.per_class,
                "n_test": metrics.n,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_interpret(args) -> int:
    g = _load_for_model(args.data)
    model = _model_from_checkpoint(g, args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = relation_weight_summary(model, g)
    if args.unweighted_degree:
        report.correlations = weight_degree_correlation(model, g, weighted=False)
    write_summary_csv(report, str(out / "attention_summary.csv"))
    write_correlation_csv(report.correlations, str(out / "correlation.csv"))
    if args.svg:
        render_weight_chart(report, str(out / "attention_summary.svg"))
    print(f"wrote attention reports to {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    err = end_to_end_grad_check(seed=args.seed)
    print(f"max relative gradient error: {err:.6e}")
    if err >= args.tol:
        raise NumericalError(f"gradient check failed: {err:.3e} >= {args.tol:.3e}")
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "compose": cmd_compose,
    "train": cmd_train,
    "eval": cmd_eval,
    "interpret": cmd_interpret,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    threads = os.environ.get("LATTE_THREADS")
    if threads:
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(int(threads))
        except ImportError:
            pass
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
