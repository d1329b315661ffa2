"""Synthetic attributed heterogeneous networks with planted label rules.

Two rules are supported for the target type "A" connected to a bridge type
"B" through the bipartite relation AB:

* first-order: every bridge node carries a latent class encoded in its
  features; a target node's label is the majority class of its direct
  bridge neighbors.
* second-order: every target node carries a signal class encoded in its
  features; a target node's label is the majority signal among its 2-hop
  target-type neighbors (paths A-B-A, path-multiplicity weighted, self
  excluded). Bridge features are pure noise, so one-hop aggregation is
  uninformative. Latent assortative communities keep 2-hop majorities
  well-separated: nodes prefer bridges of their own community and signals
  lean towards the community id, so the rule is learnable from 2-hop
  structure while direct neighbors reveal nothing.

Node degrees follow log-normal propensities which are also exposed as a
feature column, so that link likelihood is predictable from attributes.
An optional pure-noise relation to a third type "C" is available for
interpretability experiments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hetgraph import HetGraph, NodeType
from .relations import MetaRelation
from .sparse import SparseBiadj

FIRST_ORDER = "first-order"
SECOND_ORDER = "second-order"


@dataclass
class SynthConfig:
    rule: str = SECOND_ORDER
    n_target: int = 450
    n_bridge: int = 150
    n_noise: int = 0  # >0 adds noise type "C" and relation AC
    num_classes: int = 3
    noise_dims: int = 4  # uninformative feature columns appended per type
    avg_degree: float = 3.0
    propensity_sigma: float = 1.5
    feature_noise: float = 0.1
    community_boost: float = 15.0  # edge preference for same-community bridges
    signal_fidelity: float = 0.75  # P(signal class == community id)
    train_frac: float = 0.3
    valid_frac: float = 0.2


def _propensities(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    return np.exp(rng.normal(0.0, sigma, size=n))


def _degree_counts(prop: np.ndarray, avg_degree: float, cap: int) -> np.ndarray:
    d = np.rint(avg_degree * prop / prop.mean()).astype(np.int64)
    return np.clip(d, 1, cap)


def _features(
    rng: np.random.Generator,
    classes: np.ndarray | None,
    num_classes: int,
    noise_dims: int,
    prop: np.ndarray,
    noise_scale: float,
    n: int,
) -> np.ndarray:
    blocks = []
    if classes is not None:
        onehot = np.zeros((n, num_classes))
        onehot[np.arange(n), classes] = 1.0
        blocks.append(onehot + rng.normal(0.0, noise_scale, size=(n, num_classes)))
    else:
        blocks.append(rng.normal(0.0, 1.0, size=(n, num_classes)))
    blocks.append(rng.normal(0.0, 1.0, size=(n, noise_dims)))
    logp = np.log(prop)
    blocks.append(((logp - logp.mean()) / max(logp.std(), 1e-9))[:, None])
    return np.hstack(blocks)


def _majority(votes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Argmax per row; exact ties are broken by a seeded jitter so that no
    class is systematically favored."""
    return np.argmax(votes + 1e-9 * rng.random(votes.shape), axis=1)


def synth_generate(cfg: SynthConfig, seed: int) -> HetGraph:
    if cfg.n_target < cfg.num_classes or cfg.n_bridge < 1:
        raise ValidationError("invalid node counts")
    if cfg.rule not in (FIRST_ORDER, SECOND_ORDER):
        raise ValidationError(f"unknown planted rule {cfg.rule!r}")
    rng = np.random.default_rng(seed)
    nA, nB, G = cfg.n_target, cfg.n_bridge, cfg.num_classes

    prop_a = _propensities(rng, nA, cfg.propensity_sigma)
    prop_b = _propensities(rng, nB, cfg.propensity_sigma)
    deg_a = _degree_counts(prop_a, cfg.avg_degree, cap=min(nB, 12))

    a_comm = rng.integers(0, G, size=nA)
    b_comm = rng.integers(0, G, size=nB)

    rows, cols = [], []
    for i in range(nA):
        w = prop_b.copy()
        if cfg.rule == SECOND_ORDER:
            w[b_comm == a_comm[i]] *= cfg.community_boost
        picked = rng.choice(nB, size=deg_a[i], replace=False, p=w / w.sum())
        rows.append(np.full(deg_a[i], i, dtype=np.int64))
        cols.append(np.sort(picked))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    ab = SparseBiadj.from_edges(rows, cols, np.ones(len(rows)), shape=(nA, nB))

    if cfg.rule == FIRST_ORDER:
        b_class = b_comm
        votes = np.zeros((nA, G))
        np.add.at(votes, (rows, b_class[cols]), 1.0)
        labels = _majority(votes, rng)
        feats_a = _features(rng, None, G, cfg.noise_dims, prop_a, cfg.feature_noise, nA)
        feats_b = _features(
            rng, b_class, G, cfg.noise_dims, prop_b, cfg.feature_noise, nB
        )
    else:
        flip = rng.random(nA) >= cfg.signal_fidelity
        a_signal = np.where(flip, rng.integers(0, G, size=nA), a_comm)
        two_hop = (ab.mat @ ab.mat.T).toarray()
        np.fill_diagonal(two_hop, 0.0)
        onehot = np.zeros((nA, G))
        onehot[np.arange(nA), a_signal] = 1.0
        votes = two_hop @ onehot
        labels = _majority(votes, rng)
        isolated = votes.sum(axis=1) == 0
        labels[isolated] = a_signal[isolated]
        feats_a = _features(
            rng, a_signal, G, cfg.noise_dims, prop_a, cfg.feature_noise, nA
        )
        feats_b = _features(rng, None, G, cfg.noise_dims, prop_b, cfg.feature_noise, nB)

    node_types = [
        NodeType("A", nA, feats_a.shape[1]),
        NodeType("B", nB, feats_b.shape[1]),
    ]
    features = {"A": feats_a, "B": feats_b}
    relations = {MetaRelation(("A", "B"), ("AB",)): ab}

    if cfg.n_noise > 0:
        nC = cfg.n_noise
        prop_c = _propensities(rng, nC, cfg.propensity_sigma)
        deg_ac = _degree_counts(
            _propensities(rng, nA, cfg.propensity_sigma), cfg.avg_degree, min(nC, 12)
        )
        crows, ccols = [], []
        for i in range(nA):
            crows.append(np.full(deg_ac[i], i, dtype=np.int64))
            ccols.append(np.sort(rng.choice(nC, size=deg_ac[i], replace=False)))
        feats_c = _features(rng, None, G, cfg.noise_dims, prop_c, cfg.feature_noise, nC)
        node_types.append(NodeType("C", nC, feats_c.shape[1]))
        features["C"] = feats_c
        relations[MetaRelation(("A", "C"), ("AC",))] = SparseBiadj.from_edges(
            np.concatenate(crows),
            np.concatenate(ccols),
            np.ones(int(deg_ac.sum())),
            shape=(nA, nC),
        )

    perm = rng.permutation(nA)
    n_train = int(round(cfg.train_frac * nA))
    n_valid = int(round(cfg.valid_frac * nA))
    splits = {
        "train": np.sort(perm[:n_train]),
        "valid": np.sort(perm[n_train : n_train + n_valid]),
        "test": np.sort(perm[n_train + n_valid :]),
    }

    return HetGraph(
        node_types=node_types,
        features=features,
        relations=relations,
        target_type="A",
        num_classes=G,
        labels=labels,
        splits=splits,
    )


def one_hop_majority_predict(g: HetGraph) -> np.ndarray:
    """Majority vote over direct bridge neighbors' feature-encoded classes.

    The independent check for the planted rules: bridge classes are read
    back from the one-hot block of the bridge features.
    """
    ab = next(m for r, m in g.relations.items() if r.path == ("A", "B"))
    b_class = np.argmax(g.features["B"][:, : g.num_classes], axis=1)
    rows, cols, _ = ab.entries()
    votes = np.zeros((g.count("A"), g.num_classes))
    np.add.at(votes, (rows, b_class[cols]), 1.0)
    return np.argmax(votes, axis=1)
