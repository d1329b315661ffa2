"""Meta-relation algebra.

Composes matching relation pairs into degree-normalized higher-order
biadjacency matrices and enumerates the length-t relation sets a layer
aggregates over. The composition of A(m,n) with A(n,p) is

    A(m,n) @ inv(D) @ A(n,p),   D_jj = colsum_j(A(m,n)) + rowsum_j(A(n,p))

where intermediate nodes with zero combined degree contribute nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .sparse import SparseBiadj


@dataclass(frozen=True)
class MetaRelation:
    """An ordered sequence of node types naming a (possibly composed) relation.

    `path` holds t+1 node-type ids for an order-t relation; `edge_names`
    optionally names each hop so that two relations over the same type
    sequence stay distinct.
    """

    path: tuple[str, ...]
    edge_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.path) < 2:
            raise ValidationError("meta relation path needs at least 2 node types")
        if self.edge_names is not None and len(self.edge_names) != len(self.path) - 1:
            raise ValidationError("edge_names length must be path length - 1")

    @property
    def source_type(self) -> str:
        return self.path[0]

    @property
    def target_type(self) -> str:
        return self.path[-1]

    @property
    def order(self) -> int:
        return len(self.path) - 1

    @property
    def name(self) -> str:
        if all(len(p) == 1 for p in self.path):
            return "".join(self.path)
        return "-".join(self.path)


@dataclass
class RelationSet:
    """All order-t meta relations of a graph, keyed by MetaRelation."""

    order: int
    members: dict[MetaRelation, SparseBiadj] = field(default_factory=dict)

    def add(self, rel: MetaRelation, mat: SparseBiadj) -> None:
        if rel.order != self.order:
            raise ValidationError(
                f"relation order {rel.order} does not match set order {self.order}"
            )
        if rel in self.members:
            raise ValidationError(f"duplicate relation {rel.name}")
        self.members[rel] = mat

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members.items())


def compose(a_mn: SparseBiadj, a_np: SparseBiadj) -> SparseBiadj:
    """Degree-normalized product of two chained biadjacency matrices."""
    if a_mn.n_cols != a_np.n_rows:
        raise ValidationError(
            f"inner dimension mismatch: {a_mn.n_cols} vs {a_np.n_rows}"
        )
    d = a_mn.col_sums() + a_np.row_sums()
    inv = np.zeros_like(d)
    nz = d > 0
    inv[nz] = 1.0 / d[nz]
    out = a_mn.mat @ sp.diags(inv) @ a_np.mat
    return SparseBiadj(out)


def lift(prev: RelationSet, base: RelationSet) -> RelationSet:
    """Extend every order-(t-1) relation by each matching order-1 relation."""
    if base.order != 1:
        raise ValidationError("base set must have order 1")
    out = RelationSet(order=prev.order + 1)
    for r1, m1 in prev:
        for r2, m2 in base:
            if r1.target_type != r2.source_type:
                continue
            names = None
            if r1.edge_names is not None and r2.edge_names is not None:
                names = r1.edge_names + r2.edge_names
            rel = MetaRelation(path=r1.path + r2.path[1:], edge_names=names)
            out.add(rel, compose(m1, m2))
    return out


def relations_from(rs: RelationSet, source_type: str) -> RelationSet:
    """The members whose source type matches, insertion order preserved."""
    out = RelationSet(order=rs.order)
    for rel, mat in rs:
        if rel.source_type == source_type:
            out.add(rel, mat)
    return out


def prune(
    a: SparseBiadj,
    epsilon: float | None = None,
    top_k: int | None = None,
) -> SparseBiadj:
    """Drop entries below epsilon, or keep the k largest per row.

    Per-row ties at the top-k boundary keep the smaller column index.
    """
    if (epsilon is None) == (top_k is None):
        raise ValidationError("specify exactly one of epsilon, top_k")
    if epsilon is not None:
        if epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        m = a.mat.copy()
        m.data = np.where(m.data < epsilon, 0.0, m.data)
        return SparseBiadj(m)
    if top_k < 1:
        raise ValidationError("top_k must be >= 1")
    keep_rows, keep_cols, keep_w = [], [], []
    for i in range(a.n_rows):
        cols, w = a.row(i)
        if len(cols) > top_k:
            # stable sort on (-weight, col): ties keep smaller column index
            order = np.lexsort((cols, -w))[:top_k]
            cols, w = cols[order], w[order]
        keep_rows.append(np.full(len(cols), i, dtype=np.int64))
        keep_cols.append(cols)
        keep_w.append(w)
    return SparseBiadj.from_edges(
        np.concatenate(keep_rows) if keep_rows else [],
        np.concatenate(keep_cols) if keep_cols else [],
        np.concatenate(keep_w) if keep_w else [],
        shape=(a.n_rows, a.n_cols),
    )


def build_relation_sets(
    base_relations: dict[MetaRelation, SparseBiadj], num_orders: int
) -> list[RelationSet]:
    """Relation sets of order 1..num_orders, each lifted from the previous."""
    base = RelationSet(order=1)
    for rel, mat in base_relations.items():
        base.add(rel, mat)
    sets = [base]
    for _ in range(1, num_orders):
        sets.append(lift(sets[-1], base))
    return sets
