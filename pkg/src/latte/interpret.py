"""Attention interpretation: relation-weight summaries and degree correlations.

For every node type and layer, the per-node relation softmax is summarized
by its mean and standard deviation across nodes, with the "self" choice
reported under the bare type name (suffixed with the prior layer index for
stacked layers, e.g. M for layer 1 and M1 for layer 2). First-order
relation weights are additionally correlated with each node's degree in
that relation; the self weight is correlated with total degree.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hetgraph import HetGraph
from .model import LatteModel
from .relations import build_relation_sets
from .sampler import full_view


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValidationError("pearson needs two equal-length vectors of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    if denom == 0:
        raise ValidationError("zero variance input")
    return float(np.sum(xc * yc) / denom)


@dataclass
class WeightRow:
    layer: int
    relation: str
    mean_beta: float
    std_beta: float


@dataclass
class CorrelationRow:
    relation: str
    pearson_r: float
    n_nodes: int
    zero_variance: bool


@dataclass
class RelationWeightReport:
    weights: list[WeightRow]
    correlations: list[CorrelationRow]


def _self_name(type_name: str, layer_index: int) -> str:
    return type_name if layer_index == 0 else f"{type_name}{layer_index}"


def _collect_betas(model: LatteModel, g: HetGraph):
    relsets = build_relation_sets(g.relations, model.config.layers)
    view = full_view(g, relsets)
    result = model.forward(view, train=False)
    return result


def relation_weight_summary(model: LatteModel, g: HetGraph) -> RelationWeightReport:
    """Mean/std of the per-node relation weights, all types and layers."""
    result = _collect_betas(model, g)
    rows: list[WeightRow] = []
    for (t, m), beta in sorted(result.betas.items(), key=lambda kv: (kv[0][0], model.type_order.index(kv[0][1]))):
        rels = result.beta_layouts[(t, m)]
        rows.append(
            WeightRow(t + 1, _self_name(m, t), float(beta[:, 0].mean()), float(beta[:, 0].std()))
        )
        for j, rel in enumerate(rels):
            col = beta[:, j + 1]
            rows.append(WeightRow(t + 1, rel.name, float(col.mean()), float(col.std())))
    report = RelationWeightReport(weights=rows, correlations=[])
    report.correlations = _degree_correlations(model, g, result)
    return report


def weight_degree_correlation(
    model: LatteModel, g: HetGraph, weighted: bool = True
) -> list[CorrelationRow]:
    """Per first-order relation: Pearson r between node weight and degree."""
    result = _collect_betas(model, g)
    return _degree_correlations(model, g, result, weighted=weighted)


def _degree_correlations(model, g, result, weighted: bool = True) -> list[CorrelationRow]:
    out: list[CorrelationRow] = []
    for m in model.type_order:
        key = (0, m)
        if key not in result.betas:
            continue
        beta = result.betas[key]
        rels = result.beta_layouts[key]
        if not rels:
            continue
        degs = []
        for rel in rels:
            mat = g.relations[rel]
            degs.append(mat.row_sums() if weighted else mat.row_degrees().astype(float))
        total = np.sum(degs, axis=0)
        out.append(_corr_row(_self_name(m, 0), beta[:, 0], total))
        for j, rel in enumerate(rels):
            out.append(_corr_row(rel.name, beta[:, j + 1], degs[j]))
    return out


def _corr_row(name: str, beta: np.ndarray, degree: np.ndarray) -> CorrelationRow:
    try:
        r = pearson(beta, degree)
        flagged = False
    except ValidationError:
        r = 0.0
        flagged = True
    return CorrelationRow(name, r, len(beta), flagged)


def write_summary_csv(report: RelationWeightReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "relation_path", "mean_beta", "std_beta"])
        for row in report.weights:
            writer.writerow([row.layer, row.relation, f"{row.mean_beta:.6f}", f"{row.std_beta:.6f}"])


def write_correlation_csv(rows: list[CorrelationRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["relation_path", "pearson_r", "n_nodes"])
        for row in rows:
            writer.writerow([row.relation, f"{row.pearson_r:.6f}", row.n_nodes])


def render_weight_chart(report: RelationWeightReport, path: str) -> None:
    """Static bar chart of mean relation weights with std whiskers (SVG)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [f"L{w.layer}:{w.relation}" for w in report.weights]
    means = [w.mean_beta for w in report.weights]
    stds = [w.std_beta for w in report.weights]
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(labels)), 4))
    ax.bar(range(len(labels)), means, yerr=stds, capsize=3)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel("mean relation weight")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
