"""Hypercomplex embeddings of nested factual knowledge graphs."""

__version__ = "0.1.0"

from .errors import LoadIssue, NesteError
from .evaluation import (
    RankingReport,
    eval_base_link_prediction,
    eval_conditional_link_prediction,
    eval_triple_prediction,
)
from .graph_data import NestedGraph, load_graph
from .hypercomplex import Algebra, Hyper4Vector
from .patterns import run_pattern_suite
from .scoring import EmbeddingStore, load_checkpoint, save_checkpoint, score_atomic, score_nested
from .training import TrainConfig, train

__all__ = [
    "Algebra",
    "EmbeddingStore",
    "Hyper4Vector",
    "LoadIssue",
    "NestedGraph",
    "NesteError",
    "RankingReport",
    "TrainConfig",
    "eval_base_link_prediction",
    "eval_conditional_link_prediction",
    "eval_triple_prediction",
    "load_checkpoint",
    "load_graph",
    "run_pattern_suite",
    "save_checkpoint",
    "score_atomic",
    "score_nested",
    "train",
]
