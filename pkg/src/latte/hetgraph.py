"""In-memory attributed heterogeneous network plus dataset ingestion.

A graph holds typed node sets with dense per-type ids (0..count-1), optional
per-type feature matrices, relation-indexed sparse biadjacency matrices,
labels and train/valid/test splits for one target node type.

Dataset directory layout (UTF-8, tab-separated):
    meta.json          node types, relations, target type, class count
    nodes_<type>.tsv   <id>\\t<f1,...,fD>       (absent file => unattributed)
    edges_<rel>.tsv    <src_id>\\t<dst_id>[\\t<weight>]
    labels_<type>.tsv  <id>\\t<class_int>
    splits.json        {"train": [...], "valid": [...], "test": [...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .relations import MetaRelation
from .sparse import SparseBiadj


@dataclass(frozen=True)
class NodeType:
    name: str
    count: int
    feature_dim: int | None  # None marks an unattributed type


@dataclass
class HetGraph:
    """Immutable after construction; share freely across readers."""

    node_types: list[NodeType]
    features: dict[str, np.ndarray | None]
    relations: dict[MetaRelation, SparseBiadj]
    target_type: str
    num_classes: int
    labels: np.ndarray  # per target-type node, -1 when unlabeled
    splits: dict[str, np.ndarray]
    id_maps: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        counts = {nt.name: nt.count for nt in self.node_types}
        if self.target_type not in counts:
            raise ValidationError(f"unknown target type {self.target_type!r}")
        for nt in self.node_types:
            feats = self.features.get(nt.name)
            if nt.feature_dim is None:
                if feats is not None:
                    raise ValidationError(f"unattributed type {nt.name} has features")
            else:
                if feats is None or feats.shape != (nt.count, nt.feature_dim):
                    raise ValidationError(
                        f"feature matrix of type {nt.name} must be "
                        f"{nt.count}x{nt.feature_dim}"
                    )
        for rel, mat in self.relations.items():
            if rel.source_type not in counts or rel.target_type not in counts:
                raise ValidationError(f"relation {rel.name} references unknown type")
            expect = (counts[rel.source_type], counts[rel.target_type])
            if (mat.n_rows, mat.n_cols) != expect:
                raise ValidationError(
                    f"relation {rel.name} shape {(mat.n_rows, mat.n_cols)} "
                    f"does not match type counts {expect}"
                )
        if self.labels.shape != (counts[self.target_type],):
            raise ValidationError("labels length must equal target type count")
        valid_labels = self.labels[self.labels >= 0]
        if valid_labels.size and valid_labels.max() >= self.num_classes:
            raise ValidationError("label id out of range")
        seen: set[int] = set()
        for name in ("train", "valid", "test"):
            ids = np.asarray(self.splits.get(name, []), dtype=np.int64)
            self.splits[name] = ids
            if ids.size:
                if ids.min() < 0 or ids.max() >= counts[self.target_type]:
                    raise ValidationError(f"split {name} has out-of-range node id")
                if np.any(self.labels[ids] < 0):
                    raise ValidationError(f"split {name} contains unlabeled nodes")
            overlap = seen.intersection(ids.tolist())
            if overlap:
                raise ValidationError(f"splits overlap at ids {sorted(overlap)[:5]}")
            seen.update(ids.tolist())
        for arr in list(self.features.values()) + [self.labels]:
            if arr is not None:
                arr.setflags(write=False)

    def count(self, type_name: str) -> int:
        for nt in self.node_types:
            if nt.name == type_name:
                return nt.count
        raise ValidationError(f"unknown node type {type_name!r}")

    def node_type(self, type_name: str) -> NodeType:
        for nt in self.node_types:
            if nt.name == type_name:
                return nt
        raise ValidationError(f"unknown node type {type_name!r}")

    @property
    def type_names(self) -> list[str]:
        return [nt.name for nt in self.node_types]


def neighbors(
    g: HetGraph, r: MetaRelation, node_type: str, index: int
) -> list[tuple[int, float]]:
    """Entries of row `index` of relation r: (target index, weight) pairs."""
    if node_type != r.source_type:
        raise ValidationError(
            f"node type {node_type!r} does not match relation source {r.source_type!r}"
        )
    mat = g.relations[r]
    cols, w = mat.row(index)
    return list(zip(cols.tolist(), w.tolist()))


def add_reverse_relations(g: HetGraph) -> HetGraph:
    """Inject the transposed relation for every relation missing one.

    Idempotent: a reverse is skipped when some existing relation over the
    reversed type path already equals the transpose entrywise.
    """
    relations = dict(g.relations)
    for rel, mat in g.relations.items():
        transposed = mat.transpose()
        rev_path = tuple(reversed(rel.path))
        exists = any(
            other.path == rev_path and relations[other].equal(transposed)
            for other in relations
        )
        if exists:
            continue
        base_name = rel.edge_names[0] if rel.edge_names else rel.name
        rev = MetaRelation(path=rev_path, edge_names=(base_name + "_rev",))
        if rev in relations:
            continue
        relations[rev] = transposed
    return HetGraph(
        node_types=g.node_types,
        features=g.features,
        relations=relations,
        target_type=g.target_type,
        num_classes=g.num_classes,
        labels=g.labels,
        splits={k: v.copy() for k, v in g.splits.items()},
        id_maps=g.id_maps,
    )


# ---------------------------------------------------------------------------
# dataset directory ingestion / export


def _read_meta(path: Path) -> dict:
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise ValidationError(f"missing file {meta_path}")
    with open(meta_path, encoding="utf-8") as fh:
        return json.load(fh)


def load_dataset(path: str | Path) -> HetGraph:
    """Load and validate a dataset directory into a HetGraph.

    Duplicate edges are summed; a missing weight column defaults to 1.0;
    self-loops in same-type relations are rejected.
    """
    path = Path(path)
    meta = _read_meta(path)

    node_types: list[NodeType] = []
    features: dict[str, np.ndarray | None] = {}
    id_maps: dict[str, list[str]] = {}
    id_lookup: dict[str, dict[str, int]] = {}
    for spec in meta["node_types"]:
        name, count = spec["name"], int(spec["count"])
        if count <= 0:
            raise ValidationError(f"node type {name} has non-positive count")
        dim = spec.get("feature_dim")
        node_file = path / f"nodes_{name}.tsv"
        if node_file.exists():
            raw_ids: list[str] = []
            rows: list[np.ndarray] = []
            with open(node_file, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    parts = line.split("\t")
                    if len(parts) != 2:
                        raise ValidationError(
                            f"{node_file}:{lineno}: expected '<id>\\t<features>'"
                        )
                    raw_ids.append(parts[0])
                    rows.append(
                        np.array([float(v) for v in parts[1].split(",")], np.float64)
                    )
            if len(raw_ids) != count:
                raise ValidationError(
                    f"{node_file}: {len(raw_ids)} rows but meta says {count}"
                )
            feats = np.vstack(rows)
            if dim is not None and feats.shape[1] != dim:
                raise ValidationError(
                    f"{node_file}: feature dim {feats.shape[1]} != meta {dim}"
                )
            dim = feats.shape[1]
            node_types.append(NodeType(name, count, dim))
            features[name] = feats
            id_maps[name] = raw_ids
            id_lookup[name] = {rid: i for i, rid in enumerate(raw_ids)}
        else:
            # unattributed type; a learnable embedding table substitutes later
            node_types.append(NodeType(name, count, None))
            features[name] = None
            id_maps[name] = [str(i) for i in range(count)]
            id_lookup[name] = {str(i): i for i in range(count)}

    counts = {nt.name: nt.count for nt in node_types}

    def resolve(type_name: str, raw: str, where: str) -> int:
        table = id_lookup[type_name]
        if raw in table:
            return table[raw]
        raise ValidationError(f"{where}: dangling node id {raw!r} of type {type_name}")

    relations: dict[MetaRelation, SparseBiadj] = {}
    for rspec in meta["relations"]:
        rname, src, dst = rspec["name"], rspec["src"], rspec["dst"]
        if src not in counts or dst not in counts:
            raise ValidationError(f"relation {rname} references unknown node type")
        edge_file = path / f"edges_{rname}.tsv"
        if not edge_file.exists():
            raise ValidationError(f"missing file {edge_file}")
        srcs, dsts, weights = [], [], []
        with open(edge_file, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) not in (2, 3):
                    raise ValidationError(f"{edge_file}:{lineno}: malformed edge line")
                i = resolve(src, parts[0], f"{edge_file}:{lineno}")
                j = resolve(dst, parts[1], f"{edge_file}:{lineno}")
                w = float(parts[2]) if len(parts) == 3 else 1.0
                if w < 0:
                    raise ValidationError(f"{edge_file}:{lineno}: negative edge weight")
                if src == dst and i == j:
                    raise ValidationError(f"{edge_file}:{lineno}: self-loop ({i},{i})")
                srcs.append(i)
                dsts.append(j)
                weights.append(w)
        rel = MetaRelation(path=(src, dst), edge_names=(rname,))
        relations[rel] = SparseBiadj.from_edges(
            srcs, dsts, weights, shape=(counts[src], counts[dst])
        )

    target = meta["target_type"]
    num_classes = int(meta["num_classes"])
    labels = np.full(counts[target], -1, dtype=np.int64)
    label_file = path / f"labels_{target}.tsv"
    if label_file.exists():
        with open(label_file, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                raw, cls = line.split("\t")
                labels[resolve(target, raw, f"{label_file}:{lineno}")] = int(cls)

    splits = {"train": [], "valid": [], "test": []}
    split_file = path / "splits.json"
    if split_file.exists():
        with open(split_file, encoding="utf-8") as fh:
            loaded = json.load(fh)
        for key in splits:
            splits[key] = [resolve(target, str(v), "splits.json") for v in loaded.get(key, [])]

    return HetGraph(
        node_types=node_types,
        features=features,
        relations=relations,
        target_type=target,
        num_classes=num_classes,
        labels=labels,
        splits={k: np.asarray(v, dtype=np.int64) for k, v in splits.items()},
        id_maps=id_maps,
    )


def save_dataset(g: HetGraph, path: str | Path) -> None:
    """Write a HetGraph back out in the dataset directory format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "node_types": [
            {"name": nt.name, "count": nt.count, "feature_dim": nt.feature_dim}
            for nt in g.node_types
        ],
        "relations": [
            {
                "name": rel.edge_names[0] if rel.edge_names else rel.name,
                "src": rel.source_type,
                "dst": rel.target_type,
                "directed": True,
            }
            for rel in g.relations
        ],
        "target_type": g.target_type,
        "num_classes": g.num_classes,
    }
    with open(path / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    for nt in g.node_types:
        feats = g.features[nt.name]
        if feats is None:
            continue
        ids = g.id_maps.get(nt.name) or [str(i) for i in range(nt.count)]
        with open(path / f"nodes_{nt.name}.tsv", "w", encoding="utf-8") as fh:
            for i in range(nt.count):
                fh.write(f"{ids[i]}\t{','.join(repr(float(v)) for v in feats[i])}\n")
    for rel, mat in g.relations.items():
        name = rel.edge_names[0] if rel.edge_names else rel.name
        src_ids = g.id_maps.get(rel.source_type)
        dst_ids = g.id_maps.get(rel.target_type)
        rows, cols, w = mat.entries()
        with open(path / f"edges_{name}.tsv", "w", encoding="utf-8") as fh:
            for i, j, wij in zip(rows, cols, w):
                si = src_ids[i] if src_ids else str(i)
                sj = dst_ids[j] if dst_ids else str(j)
                fh.write(f"{si}\t{sj}\t{float(wij)!r}\n")
    tgt_ids = g.id_maps.get(g.target_type) or [
        str(i) for i in range(g.count(g.target_type))
    ]
    with open(path / f"labels_{g.target_type}.tsv", "w", encoding="utf-8") as fh:
        for i, y in enumerate(g.labels):
            if y >= 0:
                fh.write(f"{tgt_ids[i]}\t{int(y)}\n")
    with open(path / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(
            {k: [tgt_ids[i] for i in v] for k, v in g.splits.items()}, fh, indent=2
        )
