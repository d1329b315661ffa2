import numpy as np
import pytest

from latte.errors import ValidationError
from latte.hetgraph import add_reverse_relations
from latte.relations import build_relation_sets
from latte.sampler import full_view, inductive_mask, sample_batch
from latte.synth import SECOND_ORDER, SynthConfig, synth_generate


@pytest.fixture(scope="module")
def synth():
    cfg = SynthConfig(rule=SECOND_ORDER, n_target=80, n_bridge=30, avg_degree=3.0)
    return add_reverse_relations(synth_generate(cfg, seed=0))


def test_full_view_covers_graph(synth):
    relsets = build_relation_sets(synth.relations, 2)
    view = full_view(synth, relsets)
    assert view.counts["A"] == 80 and view.counts["B"] == 30
    assert len(view.edges) == 2
    rel = next(r for r in synth.relations if r.path == ("A", "B"))
    src, dst, w = view.edges[0][rel]
    assert len(src) == synth.relations[rel].nnz
    assert np.all(np.diff(src) >= 0)  # row-major ordering
    np.testing.assert_array_equal(view.seeds_local, view.seed_global)
    np.testing.assert_array_equal(view.seed_labels, synth.labels[view.seed_global])


def test_full_view_custom_seeds(synth):
    relsets = build_relation_sets(synth.relations, 1)
    view = full_view(synth, relsets, seeds=[5, 7])
    np.testing.assert_array_equal(view.seed_global, [5, 7])
    np.testing.assert_array_equal(view.seed_labels, synth.labels[[5, 7]])


def test_sample_batch_deterministic(synth):
    relsets = build_relation_sets(synth.relations, 2)
    seeds = synth.splits["train"][:8]
    v1 = sample_batch(synth, relsets, seeds, [3, 2], seed=5)
    v2 = sample_batch(synth, relsets, seeds, [3, 2], seed=5)
    for t in ("A", "B"):
        np.testing.assert_array_equal(v1.node_ids[t], v2.node_ids[t])
    v3 = sample_batch(synth, relsets, seeds, [3, 2], seed=6)
    same = all(
        np.array_equal(v1.node_ids[t], v3.node_ids[t]) for t in v1.node_ids
    )
    assert not same


def test_sample_batch_subgraph_edges_consistent(synth):
    """Every sampled edge exists in the full relation with the same weight."""
    relsets = build_relation_sets(synth.relations, 2)
    seeds = synth.splits["train"][:6]
    view = sample_batch(synth, relsets, seeds, [3, 2], seed=1)
    for t, layer in enumerate(view.edges):
        for rel, (src, dst, w) in layer.items():
            mat = relsets[t].members[rel]
            gsrc = view.node_ids[rel.source_type][src]
            gdst = view.node_ids[rel.target_type][dst]
            assert mat.contains(gsrc, gdst).all()
            dense = mat.to_dense()
            np.testing.assert_allclose(dense[gsrc, gdst], w)


def test_sample_batch_requires_seeds(synth):
    relsets = build_relation_sets(synth.relations, 1)
    with pytest.raises(ValidationError):
        sample_batch(synth, relsets, [], [3], seed=0)


def test_large_fanout_embeds_like_full_graph(synth):
    """With fanouts above the max degree, seed rows match the full forward."""
    from latte.model import LatteModel, ModelConfig

    relsets = build_relation_sets(synth.relations, 2)
    model = LatteModel(synth, ModelConfig(layers=2, dim=8, dropout=0.0, seed=0))
    seeds = synth.splits["train"][:10]
    full = model.forward(full_view(synth, relsets, seeds=seeds))
    batch_view = sample_batch(synth, relsets, seeds, [1000, 1000], seed=0)
    batch = model.forward(batch_view)
    np.testing.assert_allclose(
        full.probs.data, batch.probs.data, atol=1e-10
    )


def test_inductive_mask_severs_test_nodes(synth):
    train_graph, full_graph = inductive_mask(synth)
    test = set(synth.splits["test"].tolist())
    for rel, mat in train_graph.relations.items():
        rows, cols, _ = mat.entries()
        if rel.source_type == synth.target_type:
            assert not any(int(i) in test for i in rows)
        if rel.target_type == synth.target_type:
            assert not any(int(j) in test for j in cols)
    assert full_graph is synth


def test_inductive_mask_keeps_non_test_edges(synth):
    train_graph, _ = inductive_mask(synth)
    test = set(synth.splits["test"].tolist())
    rel = next(r for r in synth.relations if r.path == ("A", "B"))
    rows, cols, _ = synth.relations[rel].entries()
    kept = sum(1 for i in rows if int(i) not in test)
    assert train_graph.relations[rel].nnz == kept
