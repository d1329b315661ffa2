"""Optimization loop, early stopping, and classification metrics."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .hetgraph import HetGraph
from .model import LatteModel
from .ndtensor import Tape, Tensor, backward
from .objectives import NegSampleConfig, cross_entropy, sample_negatives, total_loss
from .relations import RelationSet, build_relation_sets
from .sampler import full_view, inductive_mask, sample_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 2048
    patience: int = 10
    weight_decay: float = 0.01
    epochs_max: int = 200
    mode: str = "transductive"
    use_proximity: bool = False
    neg_ratio: float = 5.0
    fanouts: tuple[int, ...] = (25, 20)
    normalize_features: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValidationError("lr must be >= 0")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.mode not in ("transductive", "inductive"):
            raise ValidationError(f"unknown mode {self.mode!r}")


@dataclass
class Metrics:
    macro_f1: float
    per_class: list[dict[str, float]]
    n: int


class AdamW:
    """Adaptive moments with decoupled weight decay.

    Decay multiplies the parameter directly (never routed through the
    moment estimates) and is skipped for parameters flagged no-decay
    (biases and attention scales).
    """

    def __init__(
        self,
        params: list[tuple[str, Tensor, bool]],
        lr: float,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p, _ in params}
        self._v = {name: np.zeros_like(p.data) for name, p, _ in params}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.betas
        for name, p, decay in self.params:
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            if decay and self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class EarlyStopper:
    """Stops after `patience` consecutive epochs without a val-loss decrease."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.bad = 0

    def update(self, epoch: int, val_loss: float) -> tuple[bool, bool]:
        """Returns (improved, should_stop)."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.bad = 0
            return True, False
        self.bad += 1
        return False, self.bad >= self.patience


def macro_f1(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> float:
    """Unweighted mean of per-class F1; unsupported classes count as 0."""
    return float(np.mean([m["f1"] for m in per_class_metrics(pred, truth, num_classes)]))


def per_class_metrics(
    pred: np.ndarray, truth: np.ndarray, num_classes: int
) -> list[dict[str, float]]:
    out = []
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    for c in range(num_classes):
        tp = float(np.sum((pred == c) & (truth == c)))
        fp = float(np.sum((pred == c) & (truth != c)))
        fn = float(np.sum((pred != c) & (truth == c)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out.append({"precision": precision, "recall": recall, "f1": f1})
    return out


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _l2_normalized(g: HetGraph) -> HetGraph:
    feats = {}
    for name, x in g.features.items():
        if x is None:
            feats[name] = None
        else:
            norms = np.linalg.norm(x, axis=1, keepdims=True)
            feats[name] = x / np.maximum(norms, 1e-12)
    return HetGraph(
        node_types=g.node_types,
        features=feats,
        relations=g.relations,
        target_type=g.target_type,
        num_classes=g.num_classes,
        labels=g.labels.copy(),
        splits={k: v.copy() for k, v in g.splits.items()},
        id_maps=g.id_maps,
    )


def _batch_negatives(view, relsets, ratio, base_seed, epoch, batch_idx):
    negs = {}
    for t, layer_edges in enumerate(view.edges):
        rel_list = list(relsets[t].members)
        for rel, (src, dst, _w) in layer_edges.items():
            mat = relsets[t].members[rel]
            cfg = NegSampleConfig(
                ratio=ratio,
                seed=_derived_seed(base_seed, epoch, batch_idx, t, rel_list.index(rel)),
            )
            res = sample_negatives(
                mat,
                len(src),
                cfg,
                row_ids=view.node_ids[rel.source_type],
                col_ids=view.node_ids[rel.target_type],
            )
            negs[(t, rel)] = (res.src, res.dst)
    return negs


def train(
    model: LatteModel,
    g: HetGraph,
    cfg: TrainConfig,
    on_epoch=None,
) -> list[dict]:
    """Optimize the model on g's train split; returns the epoch history.

    Validation loss drives early stopping; the best-validation parameters
    are restored before returning. `on_epoch`, when given, is called with
    each history row (used by the CLI for incremental logging).
    """
    T = model.config.layers
    fanouts = list(cfg.fanouts)[:T]
    if len(fanouts) < T:
        fanouts += [fanouts[-1] if fanouts else 25] * (T - len(fanouts))

    work = _l2_normalized(g) if cfg.normalize_features else g
    if cfg.mode == "inductive":
        train_graph, _ = inductive_mask(work)
    else:
        train_graph = work
    relsets_train = build_relation_sets(train_graph.relations, T)

    train_ids = work.splits["train"]
    valid_ids = work.splits["valid"]
    if not len(train_ids):
        raise ValidationError("train split is empty")

    # the validation loss mirrors the training objective: when proximity
    # terms are optimized they are also tracked, on negatives fixed once so
    # the series is comparable across epochs
    val_view = full_view(train_graph, relsets_train, seeds=valid_ids)
    val_negs = None
    if cfg.use_proximity:
        val_negs = _batch_negatives(val_view, relsets_train, cfg.neg_ratio, cfg.seed, 0, 0)

    opt = AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    stopper = EarlyStopper(cfg.patience)
    best_snap = model.snapshot()
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []

    for epoch in range(1, cfg.epochs_max + 1):
        order = rng.permutation(train_ids)
        epoch_parts: dict[str, list[float]] = {}
        train_losses = []
        for b in range(0, len(order), cfg.batch_size):
            chunk = np.sort(order[b : b + cfg.batch_size])
            batch_idx = b // cfg.batch_size
            view = sample_batch(
                train_graph,
                relsets_train,
                chunk,
                fanouts,
                seed=_derived_seed(cfg.seed, epoch, batch_idx),
            )
            negs = None
            if cfg.use_proximity:
                negs = _batch_negatives(
                    view, relsets_train, cfg.neg_ratio, cfg.seed, epoch, batch_idx
                )
            with Tape() as tape:
                result = model.forward(
                    view,
                    train=True,
                    dropout_seed=_derived_seed(cfg.seed, epoch, batch_idx, 7),
                    neg_pairs=negs,
                )
                loss, parts = total_loss(result, view.seed_labels, cfg.use_proximity)
            if not np.isfinite(loss.item()):
                raise NumericalError(f"non-finite loss at epoch {epoch}: {parts}")
            model.zero_grads()
            backward(tape, loss)
            opt.step()
            train_losses.append(parts["total"])
            for key, val in parts.items():
                epoch_parts.setdefault(key, []).append(val)

        val_result = model.forward(val_view, train=False, neg_pairs=val_negs)
        if cfg.use_proximity:
            val_loss = total_loss(val_result, val_view.seed_labels, True)[0].item()
        else:
            val_loss = cross_entropy(val_result.probs, val_view.seed_labels).item()
        val_pred = np.argmax(val_result.probs.data, axis=1)
        val_f1 = macro_f1(val_pred, val_view.seed_labels, model.num_classes)

        row = {
            "epoch": epoch,
            "train_loss": float(np.mean(train_losses)),
            "val_loss": val_loss,
            "val_macro_f1": val_f1,
        }
        for key, vals in epoch_parts.items():
            if key.startswith("prox_"):
                row[key] = float(np.mean(vals))
        history.append(row)
        if on_epoch:
            on_epoch(row)

        improved, stop = stopper.update(epoch, val_loss)
        if improved:
            best_snap = model.snapshot()
        if stop:
            log.info("early stop at epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break

    model.restore(best_snap)
    return history


def evaluate(
    model: LatteModel,
    g: HetGraph,
    split: str,
    relsets: list[RelationSet] | None = None,
    normalize_features: bool = False,
) -> Metrics:
    """Argmax-class predictions and Macro-F1 over one split, inference mode."""
    work = _l2_normalized(g) if normalize_features else g
    ids = work.splits[split]
    if not len(ids):
        raise ValidationError(f"split {split!r} is empty")
    if relsets is None:
        relsets = build_relation_sets(work.relations, model.config.layers)
    view = full_view(work, relsets, seeds=ids)
    result = model.forward(view, train=False)
    pred = np.argmax(result.probs.data, axis=1)
    truth = view.seed_labels
    return Metrics(
        macro_f1=macro_f1(pred, truth, model.num_classes),
        per_class=per_class_metrics(pred, truth, model.num_classes),
        n=len(ids),
    )


def write_history_csv(history: list[dict], path: str) -> None:
    keys: list[str] = []
    for row in history:
        for key in row:
            if key not in keys:
                keys.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(history)
