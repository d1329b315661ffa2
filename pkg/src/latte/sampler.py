"""Mini-batch subnetwork construction and transductive/inductive masking.

A batch is grown from seed nodes of the target type by recursively sampling
a fixed number of neighbors per node per relation (without replacement),
across every relation order the model aggregates. The resulting view keeps
all relation edges among retained nodes, re-indexed locally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .hetgraph import HetGraph
from .relations import MetaRelation, RelationSet
from .sparse import SparseBiadj

Edge = tuple[np.ndarray, np.ndarray, np.ndarray]  # local (src, dst, weight)


@dataclass
class GraphView:
    """What a forward pass sees: per-type nodes, features and local edges."""

    counts: dict[str, int]
    node_ids: dict[str, np.ndarray]  # local index -> global id
    features: dict[str, np.ndarray | None]
    edges: list[dict[MetaRelation, Edge]]  # one dict per relation order
    seeds_local: np.ndarray
    seed_labels: np.ndarray
    seed_global: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))


def _local_edges(
    mat: SparseBiadj, src_ids: np.ndarray, dst_ids: np.ndarray
) -> Edge:
    sub = mat.mat[src_ids][:, dst_ids].tocoo()
    order = np.lexsort((sub.col, sub.row))
    return (
        sub.row[order].astype(np.int64),
        sub.col[order].astype(np.int64),
        sub.data[order],
    )


def _build_view(
    g: HetGraph,
    relsets: list[RelationSet],
    node_ids: dict[str, np.ndarray],
    seeds: np.ndarray,
) -> GraphView:
    counts = {t: len(ids) for t, ids in node_ids.items()}
    features = {}
    for t, ids in node_ids.items():
        feats = g.features[t]
        features[t] = feats[ids] if feats is not None else None
    edges: list[dict[MetaRelation, Edge]] = []
    for rs in relsets:
        layer_edges: dict[MetaRelation, Edge] = {}
        for rel, mat in rs:
            src_ids = node_ids.get(rel.source_type)
            dst_ids = node_ids.get(rel.target_type)
            if src_ids is None or dst_ids is None or not len(src_ids) or not len(dst_ids):
                continue
            e = _local_edges(mat, src_ids, dst_ids)
            if len(e[0]):
                layer_edges[rel] = e
        edges.append(layer_edges)
    tgt_ids = node_ids[g.target_type]
    pos_of = {int(gid): i for i, gid in enumerate(tgt_ids)}
    seeds_local = np.array([pos_of[int(s)] for s in seeds], dtype=np.int64)
    return GraphView(
        counts=counts,
        node_ids=node_ids,
        features=features,
        edges=edges,
        seeds_local=seeds_local,
        seed_labels=g.labels[seeds].copy(),
        seed_global=np.asarray(seeds, dtype=np.int64),
    )


def full_view(g: HetGraph, relsets: list[RelationSet], seeds=None) -> GraphView:
    """View of the entire graph; seeds default to all labeled target nodes."""
    if seeds is None:
        seeds = np.flatnonzero(g.labels >= 0)
    node_ids = {nt.name: np.arange(nt.count, dtype=np.int64) for nt in g.node_types}
    return _build_view(g, relsets, node_ids, np.asarray(seeds, dtype=np.int64))


def sample_batch(
    g: HetGraph,
    relsets: list[RelationSet],
    seeds,
    fanouts: list[int],
    seed: int,
) -> GraphView:
    """Fixed-fanout recursive neighbor sampling from target-type seeds.

    Hop h expands every node on the frontier through every relation (of all
    orders) where it is the source, keeping min(fanout_h, degree) distinct
    neighbors. All relation edges among retained nodes are included.
    Deterministic for a fixed seed.
    """
    seeds = np.asarray(seeds, dtype=np.int64)
    if not len(seeds):
        raise ValidationError("seeds must be non-empty")
    rng = np.random.default_rng(seed)
    retained: dict[str, set[int]] = {nt.name: set() for nt in g.node_types}
    retained[g.target_type].update(seeds.tolist())
    frontier: dict[str, list[int]] = {g.target_type: sorted(seeds.tolist())}

    for fanout in fanouts:
        discovered: dict[str, set[int]] = {nt.name: set() for nt in g.node_types}
        for rs in relsets:
            for rel, mat in rs:
                src_t, dst_t = rel.source_type, rel.target_type
                for i in frontier.get(src_t, ()):
                    cols, _ = mat.row(i)
                    if len(cols) > fanout:
                        cols = rng.choice(cols, size=fanout, replace=False)
                    discovered[dst_t].update(int(c) for c in cols)
        frontier = {}
        for t, new in discovered.items():
            fresh = new - retained[t]
            if fresh:
                retained[t].update(fresh)
                frontier[t] = sorted(fresh)

    node_ids = {
        t: np.array(sorted(ids), dtype=np.int64) for t, ids in retained.items() if ids
    }
    return _build_view(g, relsets, node_ids, seeds)


def inductive_mask(g: HetGraph) -> tuple[HetGraph, HetGraph]:
    """Split into a training graph with test nodes severed and the full graph.

    Every base-relation edge incident to a test node of the target type is
    removed; higher-order relations must be recomposed from the masked base
    relations so no meta path can route through a test node.
    """
    test = set(g.splits["test"].tolist())
    masked: dict[MetaRelation, SparseBiadj] = {}
    for rel, mat in g.relations.items():
        rows, cols, w = mat.entries()
        keep = np.ones(len(rows), dtype=bool)
        if rel.source_type == g.target_type and test:
            keep &= ~np.isin(rows, list(test))
        if rel.target_type == g.target_type and test:
            keep &= ~np.isin(cols, list(test))
        masked[rel] = SparseBiadj.from_edges(
            rows[keep], cols[keep], w[keep], shape=(mat.n_rows, mat.n_cols)
        )
    train_graph = HetGraph(
        node_types=g.node_types,
        features=g.features,
        relations=masked,
        target_type=g.target_type,
        num_classes=g.num_classes,
        labels=g.labels,
        splits={k: v.copy() for k, v in g.splits.items()},
        id_maps=g.id_maps,
    )
    return train_graph, g
