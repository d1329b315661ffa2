"""Shared fixtures: small hand-checkable graphs."""
import numpy as np
import pytest

from latte.hetgraph import HetGraph, NodeType
from latte.relations import MetaRelation
from latte.sparse import SparseBiadj


@pytest.fixture
def tiny_graph():
    """4 A-nodes, 3 B-nodes, one A->B relation, all A labeled.

    Edges (A -> B): 0-0, 0-1, 1-1, 2-2, 3-0 (weight 2.0 on 0-1).
    """
    ab = SparseBiadj.from_edges(
        [0, 0, 1, 2, 3], [0, 1, 1, 2, 0], [1.0, 2.0, 1.0, 1.0, 1.0], shape=(4, 3)
    )
    feats_a = np.arange(8, dtype=np.float64).reshape(4, 2)
    feats_b = np.arange(9, dtype=np.float64).reshape(3, 3)
    return HetGraph(
        node_types=[NodeType("A", 4, 2), NodeType("B", 3, 3)],
        features={"A": feats_a, "B": feats_b},
        relations={MetaRelation(("A", "B"), ("AB",)): ab},
        target_type="A",
        num_classes=2,
        labels=np.array([0, 1, 0, 1]),
        splits={
            "train": np.array([0, 1]),
            "valid": np.array([2]),
            "test": np.array([3]),
        },
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
