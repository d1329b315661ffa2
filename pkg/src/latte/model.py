"""Layer-stacked attention model over typed relations.

Each layer t scores edges of the order-t relations with a per-relation
additive attention kernel on [source transform || target transform],
sharpens the per-neighborhood softmax with a learnable positive scale,
soft-selects among a node type's relations (plus a "self" choice) from the
node's prior-layer state, and aggregates. Layer outputs are concatenated
into the final embedding; a small MLP head maps embeddings to class
probabilities.

Conventions baked in:
* the target side of every score always consumes raw features, only the
  source side consumes the prior layer's state;
* a node's relation softmax is masked to the relations where it actually
  has neighbors in the presented (sub)graph, which renormalizes the
  remaining choices; with no neighbors anywhere the "self" choice gets
  weight 1;
* the per-relation scale is stored unconstrained and passed through
  softplus, initialized so the effective scale starts at 1;
* dropout is applied once, on the concatenated embedding before the head.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import ndtensor as nd
from .errors import ValidationError
from .hetgraph import HetGraph
from .ndtensor import Tape, Tensor
from .relations import MetaRelation, RelationSet, build_relation_sets

_NEG_MASK = -1e30

_ACTIVATIONS = {
    "relu": nd.relu,
    "sigmoid": nd.sigmoid,
    "identity": lambda t: nd.scale(t, 1.0),
}


@dataclass
class ModelConfig:
    layers: int = 2
    dim: int = 128
    activation: str = "relu"
    dropout: float = 0.3
    mlp_hidden: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.dim < 1:
            raise ValidationError("layers and dim must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")


@dataclass
class ForwardResult:
    probs: Tensor | None
    embeddings: dict[str, Tensor]
    betas: dict[tuple[int, str], np.ndarray]
    beta_layouts: dict[tuple[int, str], list[MetaRelation]]
    pos_scores: dict[tuple[int, MetaRelation], tuple[Tensor, np.ndarray]]
    neg_scores: dict[tuple[int, MetaRelation], Tensor]
    alphas: dict[tuple[int, MetaRelation], tuple[np.ndarray, np.ndarray, np.ndarray]] = field(
        default_factory=dict
    )


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    limit = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-limit, limit, size=(rows, cols)), requires_grad=True)


class LatteModel:
    """Holds parameters and runs forward passes over graph views."""

    def __init__(self, graph: HetGraph, config: ModelConfig):
        self.config = config
        T, F = config.layers, config.dim
        self.target_type = graph.target_type
        self.num_classes = graph.num_classes
        self.type_order = graph.type_names
        self.feature_dims = {
            nt.name: (nt.feature_dim if nt.feature_dim is not None else F)
            for nt in graph.node_types
        }
        self.unattributed = [nt.name for nt in graph.node_types if nt.feature_dim is None]
        self.counts = {nt.name: nt.count for nt in graph.node_types}
        self.relation_sets: list[RelationSet] = build_relation_sets(graph.relations, T)
        # source-grouped relation lists fix the relation-softmax layout per layer
        self.layer_rels: list[dict[str, list[MetaRelation]]] = []
        for rs in self.relation_sets:
            by_src: dict[str, list[MetaRelation]] = {m: [] for m in self.type_order}
            for rel, _ in rs:
                by_src[rel.source_type].append(rel)
            self.layer_rels.append(by_src)

        rng = np.random.default_rng(config.seed)
        tau0 = float(np.log(np.expm1(1.0)))  # softplus(tau0) == 1
        self.embed_tables: dict[str, Tensor] = {
            m: _glorot(rng, self.counts[m], F) for m in self.unattributed
        }
        self.layers: list[dict] = []
        for t in range(T):
            layer = {"U": {}, "V": {}, "q": {}, "tau": {}, "W": {}, "b": {}}
            for m in self.type_order:
                in_dim = self.feature_dims[m] if t == 0 else F
                layer["U"][m] = _glorot(rng, F, in_dim)
                layer["V"][m] = _glorot(rng, F, self.feature_dims[m])
                k = len(self.layer_rels[t][m])
                layer["W"][m] = _glorot(rng, k + 1, in_dim)
                layer["b"][m] = Tensor(np.zeros((1, k + 1)), requires_grad=True)
            for rel, _ in self.relation_sets[t]:
                layer["q"][rel] = _glorot(rng, 2 * F, 1)
                layer["tau"][rel] = Tensor(np.array([[tau0]]), requires_grad=True)
            self.layers.append(layer)

        hidden = config.mlp_hidden or F
        self.head = {
            "W1": _glorot(rng, hidden, T * F),
            "b1": Tensor(np.zeros((1, hidden)), requires_grad=True),
            "W2": _glorot(rng, self.num_classes, hidden),
            "b2": Tensor(np.zeros((1, self.num_classes)), requires_grad=True),
        }

    # ------------------------------------------------------------------
    # parameter registry

    def parameters(self) -> list[tuple[str, Tensor, bool]]:
        """(name, tensor, weight_decay_applies) triples."""
        out: list[tuple[str, Tensor, bool]] = []
        for m, tbl in self.embed_tables.items():
            out.append((f"embed/{m}", tbl, True))
        for t, layer in enumerate(self.layers):
            for m in self.type_order:
                out.append((f"layer{t + 1}/U/{m}", layer["U"][m], True))
                out.append((f"layer{t + 1}/V/{m}", layer["V"][m], True))
                out.append((f"layer{t + 1}/W/{m}", layer["W"][m], True))
                out.append((f"layer{t + 1}/b/{m}", layer["b"][m], False))
            for rel in self.layers[t]["q"]:
                out.append((f"layer{t + 1}/q/{rel.name}", layer["q"][rel], True))
                out.append((f"layer{t + 1}/tau/{rel.name}", layer["tau"][rel], False))
        out.append(("head/W1", self.head["W1"], True))
        out.append(("head/b1", self.head["b1"], False))
        out.append(("head/W2", self.head["W2"], True))
        out.append(("head/b2", self.head["b2"], False))
        return out

    def zero_grads(self) -> None:
        for _, p, _ in self.parameters():
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.data.size for _, p, _ in self.parameters())

    # ------------------------------------------------------------------
    # forward

    def forward(
        self,
        view,
        train: bool = False,
        dropout_seed: int = 0,
        neg_pairs: dict | None = None,
        out_rows: np.ndarray | None = None,
        collect_alphas: bool = False,
    ) -> ForwardResult:
        """Run the model over a GraphView (full graph or sampled subnetwork).

        `neg_pairs` maps (layer_index, relation) to local (src, dst) index
        arrays whose scores are returned for contrastive objectives.
        """
        act = _ACTIVATIONS[self.config.activation]
        T, F = self.config.layers, self.config.dim
        present = [m for m in self.type_order if view.counts.get(m, 0) > 0]

        raw: dict[str, Tensor] = {}
        for m in present:
            if m in self.embed_tables:
                raw[m] = nd.gather_rows(self.embed_tables[m], view.node_ids[m])
            else:
                raw[m] = Tensor(view.features[m])

        result = ForwardResult(
            probs=None,
            embeddings={},
            betas={},
            beta_layouts={},
            pos_scores={},
            neg_scores={},
        )

        h_prev = raw
        per_layer: dict[str, list[Tensor]] = {m: [] for m in present}
        for t in range(T):
            layer = self.layers[t]
            edges_t = view.edges[t] if t < len(view.edges) else {}
            vx_cache: dict[str, Tensor] = {}

            def vx_for(p: str) -> Tensor:
                if p not in vx_cache:
                    vx_cache[p] = nd.matmul(raw[p], nd.transpose(layer["V"][p]))
                return vx_cache[p]

            h_new: dict[str, Tensor] = {}
            for m in present:
                n_m = view.counts[m]
                rels = self.layer_rels[t][m]
                k = len(rels)
                uh = nd.matmul(h_prev[m], nd.transpose(layer["U"][m]))

                mask = np.zeros((n_m, k + 1))
                aggs: list[tuple[int, Tensor]] = []
                for j, rel in enumerate(rels):
                    edge = edges_t.get(rel)
                    if edge is None or len(edge[0]) == 0 or rel.target_type not in raw:
                        mask[:, j + 1] = _NEG_MASK
                        continue
                    src, dst, w = edge
                    has = np.zeros(n_m, dtype=bool)
                    has[src] = True
                    mask[~has, j + 1] = _NEG_MASK

                    vx = vx_for(rel.target_type)
                    score = nd.matmul(
                        nd.concat(nd.gather_rows(uh, src), nd.gather_rows(vx, dst)),
                        layer["q"][rel],
                    )
                    tau = nd.softplus(layer["tau"][rel])
                    dense_seg = np.cumsum(np.r_[0, np.diff(src) != 0])
                    alpha = nd.segment_softmax(score, dense_seg, tau)
                    agg = nd.segment_weighted_sum(
                        alpha, nd.gather_rows(vx, dst), src, n_m
                    )
                    aggs.append((j, agg))
                    result.pos_scores[(t, rel)] = (score, w)
                    if collect_alphas:
                        result.alphas[(t, rel)] = (src, dst, alpha.data[:, 0].copy())
                    if neg_pairs and (t, rel) in neg_pairs:
                        nu, nv = neg_pairs[(t, rel)]
                        if len(nu):
                            nscore = nd.matmul(
                                nd.concat(
                                    nd.gather_rows(uh, nu), nd.gather_rows(vx, nv)
                                ),
                                layer["q"][rel],
                            )
                            result.neg_scores[(t, rel)] = nscore

                logits = nd.add(
                    nd.matmul(h_prev[m], nd.transpose(layer["W"][m])), layer["b"][m]
                )
                masked = nd.add(logits, Tensor(mask))
                flat = nd.reshape(masked, n_m * (k + 1), 1)
                beta_flat = nd.segment_softmax(
                    flat, np.repeat(np.arange(n_m), k + 1), None
                )
                beta = nd.reshape(beta_flat, n_m, k + 1)
                result.betas[(t, m)] = beta.data.copy()
                result.beta_layouts[(t, m)] = rels

                h = nd.scale_rows(uh, nd.slice_cols(beta, 0, 1))
                for j, agg in aggs:
                    h = nd.add(h, nd.scale_rows(agg, nd.slice_cols(beta, j + 1, j + 2)))
                h_new[m] = act(h)
            for m in present:
                per_layer[m].append(h_new[m])
            h_prev = h_new

        for m in present:
            emb = per_layer[m][0]
            for part in per_layer[m][1:]:
                emb = nd.concat(emb, part)
            result.embeddings[m] = emb

        tgt = self.target_type
        if tgt in result.embeddings:
            rows = out_rows if out_rows is not None else view.seeds_local
            emb = nd.gather_rows(result.embeddings[tgt], rows)
            if train and self.config.dropout > 0:
                emb = nd.dropout(emb, self.config.dropout, dropout_seed)
            z = nd.relu(nd.add(nd.matmul(emb, nd.transpose(self.head["W1"])), self.head["b1"]))
            logits = nd.add(nd.matmul(z, nd.transpose(self.head["W2"])), self.head["b2"])
            n, G = logits.shape
            flat = nd.reshape(logits, n * G, 1)
            probs_flat = nd.segment_softmax(flat, np.repeat(np.arange(n), G), None)
            result.probs = nd.reshape(probs_flat, n, G)
        return result

    # ------------------------------------------------------------------
    # checkpointing

    def save(self, path: str) -> None:
        """Self-describing checkpoint: parameter blocks plus relation paths."""
        arrays = {name: p.data for name, p, _ in self.parameters()}
        meta = {
            "config": {
                "layers": self.config.layers,
                "dim": self.config.dim,
                "activation": self.config.activation,
                "dropout": self.config.dropout,
                "mlp_hidden": self.config.mlp_hidden,
                "seed": self.config.seed,
            },
            "target_type": self.target_type,
            "num_classes": self.num_classes,
            "relation_paths": [
                {"path": list(rel.path), "edge_names": list(rel.edge_names or [])}
                for rel, _ in self.relation_sets[0]
            ],
        }
        np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    def load_parameters(self, path: str) -> None:
        with np.load(path) as data:
            for name, p, _ in self.parameters():
                if name not in data:
                    raise ValidationError(f"checkpoint missing parameter {name}")
                if data[name].shape != p.data.shape:
                    raise ValidationError(f"checkpoint shape mismatch for {name}")
                p.data[:] = data[name]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p, _ in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, p, _ in self.parameters():
            p.data[:] = snap[name]


def checkpoint_meta(path: str) -> dict:
    with np.load(path) as data:
        return json.loads(bytes(data["__meta__"]).decode())
