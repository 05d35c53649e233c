"""Adversarial training loop: clean epochs, then epochs that regenerate a
gamma-fraction adversarial set against the current parameters and train on
the alpha-weighted union."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attack import SUCCESS, AttackConfig, AttackResult, attack
from .embedding import NeighborCache
from .errors import EmptyDatasetError
from .model import (
    DEFAULT_LR,
    DEFAULT_WEIGHT_DECAY,
    ModelParams,
    OptimizerState,
    forward,
    loss,
    train_step,
)
from .text import Dataset, LabeledExample, POSLexicon

_TRAIN_STREAM = 0
_ATTACK_STREAM = 1


@dataclass
class TrainingConfig:
    n_clean: int = 1
    n_adv: int = 3
    gamma: float = 0.2
    alpha: float = 1.0
    attack_cfg: AttackConfig = field(default_factory=AttackConfig)
    batch_size: int = 32
    seed: int = 0
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    warmup_steps: int = 0
    workers: int = 1

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if self.n_clean + self.n_adv < 1:
            raise ValueError("need at least one epoch")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.attack_cfg.validate()

    def make_optimizer(self) -> OptimizerState:
        return OptimizerState(
            lr=self.lr, weight_decay=self.weight_decay, warmup_steps=self.warmup_steps
        )


@dataclass
class EpochReport:
    epoch: int
    kind: str  # "clean" | "adversarial"
    mean_clean_loss: float
    mean_adv_loss: float = 0.0
    adv_generated: int = 0
    adv_failed_skipped: int = 0
    attack_queries: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "kind": self.kind,
            "mean_clean_loss": self.mean_clean_loss,
            "mean_adv_loss": self.mean_adv_loss,
            "adv_generated": self.adv_generated,
            "adv_failed_skipped": self.adv_failed_skipped,
            "attack_queries": self.attack_queries,
            "wall_time": self.wall_time,
        }


def combined_loss(clean_loss: float, adv_loss: float, alpha: float) -> float:
    """Clean loss plus alpha-weighted adversarial loss."""
    return clean_loss + alpha * adv_loss


def _epoch_rng(base_seed: int, stream: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, stream, epoch]))


def _mean_loss(params: ModelParams, examples: list[LabeledExample]) -> float:
    if not examples:
        return 0.0
    total = 0.0
    for ex in examples:
        total += loss(forward(params, ex.text), ex.label)
    return total / len(examples)


def generate_adversarial_set(
    params: ModelParams,
    dataset: Dataset,
    gamma: float,
    attack_cfg: AttackConfig,
    seed: int,
    cache: NeighborCache,
    lexicon: POSLexicon,
    encoder,
    epoch: int = 0,
    workers: int = 1,
):
    """Attack a shuffled pass over the dataset until gamma * |D| successes.

    Failed and budget-exhausted attacks are skipped; the walk keeps sampling
    further examples to compensate, stopping at dataset exhaustion. Returns
    (adversarial examples, (original, adversarial) text pairs, stats dict).
    """
    n = len(dataset)
    target = gamma * n
    adv: list[LabeledExample] = []
    pairs: list[tuple[LabeledExample, AttackResult]] = []
    stats = {"attempted": 0, "failed_skipped": 0, "queries": 0}
    if target <= 0:
        return adv, pairs, stats
    rng = _epoch_rng(seed, _ATTACK_STREAM, epoch)
    order = rng.permutation(n)

    def _run(idx: int) -> AttackResult:
        return attack(params, dataset.examples[idx], attack_cfg, cache, lexicon, encoder)

    chunk = max(1, workers)
    i = 0
    with ThreadPoolExecutor(max_workers=chunk) as pool:
        while len(adv) < target and i < n:
            batch = [int(j) for j in order[i : i + chunk]]
            results = list(pool.map(_run, batch)) if chunk > 1 else [_run(batch[0])]
            for idx, result in zip(batch, results):
                stats["attempted"] += 1
                stats["queries"] += result.queries_used
                if result.status == SUCCESS:
                    if len(adv) < target:
                        ex = dataset.examples[idx]
                        adv.append(LabeledExample(text=result.perturbed, label=ex.label))
                        pairs.append((ex, result))
                else:
                    stats["failed_skipped"] += 1
            i += len(batch)
    return adv, pairs, stats


def _train_pass(
    params: ModelParams,
    entries: list[tuple],
    opt: OptimizerState,
    batch_size: int,
    rng: np.random.Generator,
) -> None:
    """One shuffled pass over weighted (text, label, weight) entries."""
    order = rng.permutation(len(entries))
    for start in range(0, len(order), batch_size):
        batch = [entries[j] for j in order[start : start + batch_size]]
        train_step(params, batch, opt)


def run_clean_epoch(
    params: ModelParams,
    dataset: Dataset,
    cfg: TrainingConfig,
    opt: OptimizerState,
    epoch: int,
) -> EpochReport:
    """One standard training pass over the shuffled dataset."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    start = time.perf_counter()
    entries = [(ex.text, ex.label, 1.0) for ex in dataset.examples]
    rng = _epoch_rng(cfg.seed, _TRAIN_STREAM, epoch)
    _train_pass(params, entries, opt, cfg.batch_size, rng)
    return EpochReport(
        epoch=epoch,
        kind="clean",
        mean_clean_loss=_mean_loss(params, dataset.examples),
        wall_time=time.perf_counter() - start,
    )


def run_adversarial_epoch(
    params: ModelParams,
    dataset: Dataset,
    cfg: TrainingConfig,
    opt: OptimizerState,
    epoch: int,
    cache: NeighborCache,
    lexicon: POSLexicon,
    encoder,
) -> EpochReport:
    """Regenerate the adversarial set against the current parameters, then
    train one pass over the union with alpha-weighted adversarial loss."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    start = time.perf_counter()
    adv, _, stats = generate_adversarial_set(
        params,
        dataset,
        cfg.gamma,
        cfg.attack_cfg,
        cfg.seed,
        cache,
        lexicon,
        encoder,
        epoch=epoch,
        workers=cfg.workers,
    )
    entries = [(ex.text, ex.label, 1.0) for ex in dataset.examples]
    entries += [(ex.text, ex.label, cfg.alpha) for ex in adv]
    rng = _epoch_rng(cfg.seed, _TRAIN_STREAM, epoch)
    _train_pass(params, entries, opt, cfg.batch_size, rng)
    return EpochReport(
        epoch=epoch,
        kind="adversarial",
        mean_clean_loss=_mean_loss(params, dataset.examples),
        mean_adv_loss=_mean_loss(params, adv),
        adv_generated=len(adv),
        adv_failed_skipped=stats["failed_skipped"],
        attack_queries=stats["queries"],
        wall_time=time.perf_counter() - start,
    )


def train(
    params: ModelParams,
    dataset: Dataset,
    cfg: TrainingConfig,
    cache: NeighborCache | None = None,
    lexicon: POSLexicon | None = None,
    encoder=None,
    checkpoint_fn=None,
) -> list[EpochReport]:
    """Run n_clean clean epochs, then n_adv adversarial epochs, in place.

    `checkpoint_fn(epoch, params, opt, report)` runs after every epoch when
    given. The attack stack (cache, lexicon, encoder) is only required when
    n_adv > 0.
    """
    cfg.validate()
    if cfg.n_adv > 0 and (cache is None or lexicon is None or encoder is None):
        raise ValueError("adversarial epochs need cache, lexicon, and encoder")
    opt = cfg.make_optimizer()
    reports: list[EpochReport] = []
    epoch = 0
    for _ in range(cfg.n_clean):
        report = run_clean_epoch(params, dataset, cfg, opt, epoch)
        reports.append(report)
        if checkpoint_fn is not None:
            checkpoint_fn(epoch, params, opt, report)
        epoch += 1
    for _ in range(cfg.n_adv):
        report = run_adversarial_epoch(
            params, dataset, cfg, opt, epoch, cache, lexicon, encoder
        )
        reports.append(report)
        if checkpoint_fn is not None:
            checkpoint_fn(epoch, params, opt, report)
        epoch += 1
    return reports
