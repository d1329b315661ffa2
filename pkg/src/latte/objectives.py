"""Training objectives: contrastive link preservation and classification.

The link term reuses the attention scores as logits of a logistic
noise-contrastive objective: observed links (weighted) are scored high,
uniformly sampled non-links low. The classification term is plain
cross-entropy summed over labeled nodes. The joint loss adds the link term
of every relation at every order when proximity preservation is enabled.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import ndtensor as nd
from .errors import ValidationError
from .ndtensor import Tensor
from .sparse import SparseBiadj

log = logging.getLogger(__name__)


@dataclass
class NegSampleConfig:
    ratio: float = 5.0  # negatives per positive
    seed: int = 0

    def __post_init__(self):
        if self.ratio < 0:
            raise ValidationError("negative sampling ratio must be >= 0")


@dataclass
class NegSampleResult:
    src: np.ndarray
    dst: np.ndarray
    exhausted: bool  # True when rejection could not find enough non-links


def sample_negatives(
    biadj: SparseBiadj,
    n_pos: int,
    cfg: NegSampleConfig,
    row_ids: np.ndarray | None = None,
    col_ids: np.ndarray | None = None,
) -> NegSampleResult:
    """Uniform (source, target) pairs that are not links of the relation.

    Draws round(ratio * n_pos) pairs by rejection; for relations too dense
    to reject against, returns fewer pairs with the exhausted flag set.
    Deterministic for a fixed seed. When `row_ids`/`col_ids` are given,
    sampling is uniform over those subsets and the returned indices are
    positions into them (membership is still checked on the full relation).
    """
    if biadj.nnz == 0:
        raise ValidationError("cannot sample negatives of an empty relation")
    k = int(round(cfg.ratio * n_pos))
    if k == 0:
        return NegSampleResult(
            np.array([], dtype=np.int64), np.array([], dtype=np.int64), False
        )
    rng = np.random.default_rng(cfg.seed)
    n_rows = len(row_ids) if row_ids is not None else biadj.n_rows
    n_cols = len(col_ids) if col_ids is not None else biadj.n_cols
    out_src: list[np.ndarray] = []
    out_dst: list[np.ndarray] = []
    found = 0
    attempts = 0
    max_attempts = 50 * k + 1000
    while found < k and attempts < max_attempts:
        draw = min(4 * (k - found), max_attempts - attempts)
        u = rng.integers(0, n_rows, size=draw)
        v = rng.integers(0, n_cols, size=draw)
        attempts += draw
        gu = row_ids[u] if row_ids is not None else u
        gv = col_ids[v] if col_ids is not None else v
        ok = ~biadj.contains(gu, gv)
        u, v = u[ok], v[ok]
        take = min(len(u), k - found)
        out_src.append(u[:take])
        out_dst.append(v[:take])
        found += take
    exhausted = found < k
    if exhausted:
        log.warning(
            "negative sampling exhausted: %d of %d pairs found", found, k
        )
    return NegSampleResult(
        np.concatenate(out_src) if out_src else np.array([], dtype=np.int64),
        np.concatenate(out_dst) if out_dst else np.array([], dtype=np.int64),
        exhausted,
    )


def nce_loss(
    pos_scores: Tensor, pos_weights: np.ndarray, neg_scores: Tensor | None
) -> Tensor:
    """Weighted logistic loss over links plus mean logistic loss over non-links.

    log(sigmoid(e)) is evaluated as -softplus(-e) for stability; the link
    term is averaged over the number of links, the non-link term over the
    number of sampled pairs.
    """
    n_pos = pos_scores.shape[0]
    if n_pos == 0:
        raise ValidationError("nce_loss needs at least one positive score")
    if pos_weights.shape != (n_pos,):
        raise ValidationError("positive weights must match positive scores")
    term = nd.scale(
        nd.reduce_sum(
            nd.mul(nd.softplus(nd.scale(pos_scores, -1.0)), pos_weights[:, None])
        ),
        1.0 / n_pos,
    )
    if neg_scores is not None and neg_scores.shape[0] > 0:
        k = neg_scores.shape[0]
        term = nd.add(
            term, nd.scale(nd.reduce_sum(nd.softplus(neg_scores)), 1.0 / k)
        )
    return term


def cross_entropy(probs: Tensor, labels: np.ndarray) -> Tensor:
    """-sum over nodes of log probability at the true class.

    Probabilities are clamped at 1e-12 before the log; a clamp is logged
    since it signals a saturated prediction.
    """
    n, g = probs.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValidationError("labels must match probability rows")
    if labels.size and (labels.min() < 0 or labels.max() >= g):
        raise ValidationError("label id out of range")
    onehot = np.zeros((n, g))
    onehot[np.arange(n), labels] = 1.0
    picked = probs.data[np.arange(n), labels]
    if np.any(picked < 1e-12):
        log.warning("cross_entropy clamped %d probabilities at 1e-12", int(np.sum(picked < 1e-12)))
    return nd.scale(nd.reduce_sum(nd.mul(nd.log(probs, floor=1e-12), onehot)), -1.0)


def proximity_loss_terms(result, neg_cfg_used: bool = True) -> dict:
    """Per-relation contrastive losses from a forward result."""
    terms = {}
    for key, (score, weights) in result.pos_scores.items():
        neg = result.neg_scores.get(key)
        terms[key] = nce_loss(score, weights, neg)
    return terms


def total_loss(
    result,
    labels: np.ndarray,
    use_proximity: bool,
) -> tuple[Tensor, dict]:
    """Cross-entropy plus (optionally) every relation's contrastive term.

    Returns the scalar loss tensor and a dict of float parts for logging.
    """
    loss = cross_entropy(result.probs, labels)
    parts = {"ce": loss.item()}
    if use_proximity:
        for (t, rel), term in proximity_loss_terms(result).items():
            loss = nd.add(loss, term)
            parts[f"prox_L{t + 1}_{rel.name}"] = term.item()
    parts["total"] = loss.item()
    return loss, parts
