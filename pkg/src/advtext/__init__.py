"""Adversarial training and evaluation for small text classifiers."""

__version__ = "0.1.0"

from .attack import (
    EXHAUSTED,
    FAILED,
    SUCCESS,
    AttackConfig,
    AttackResult,
    attack,
    greedy_search,
)
from .budget import QueryMeter
from .embedding import EmbeddingStore, MeanEmbeddingEncoder, NeighborCache, build_neighbor_cache
from .model import ModelParams, OptimizerState, forward, init_params, train_step
from .text import Dataset, LabeledExample, POSLexicon, TokenizedText, tokenize
from .trainer import EpochReport, TrainingConfig, train

__all__ = [
    "AttackConfig",
    "AttackResult",
    "Dataset",
    "EXHAUSTED",
    "EmbeddingStore",
    "EpochReport",
    "FAILED",
    "LabeledExample",
    "MeanEmbeddingEncoder",
    "ModelParams",
    "NeighborCache",
    "OptimizerState",
    "POSLexicon",
    "QueryMeter",
    "SUCCESS",
    "TokenizedText",
    "TrainingConfig",
    "attack",
    "build_neighbor_cache",
    "forward",
    "greedy_search",
    "init_params",
    "tokenize",
    "train",
]
