"""Layer-stacked attention embeddings for attributed heterogeneous networks."""

from .hetgraph import HetGraph, NodeType, add_reverse_relations, load_dataset, neighbors, save_dataset
from .model import LatteModel, ModelConfig
from .relations import MetaRelation, RelationSet, build_relation_sets, compose, lift, prune, relations_from
from .sparse import SparseBiadj
from .synth import SynthConfig, synth_generate
from .trainer import Metrics, TrainConfig, evaluate, macro_f1, train

__all__ = [
    "HetGraph",
    "NodeType",
    "SparseBiadj",
    "MetaRelation",
    "RelationSet",
    "LatteModel",
    "ModelConfig",
    "SynthConfig",
    "TrainConfig",
    "Metrics",
    "add_reverse_relations",
    "build_relation_sets",
    "compose",
    "evaluate",
    "lift",
    "load_dataset",
    "macro_f1",
    "neighbors",
    "prune",
    "relations_from",
    "save_dataset",
    "synth_generate",
    "train",
]

__version__ = "0.1.0"
