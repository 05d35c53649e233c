"""Evaluation harness: attack success rate, robust/standard accuracy,
local surrogate explanations, deletion-curve (AOPC) scores, and sentence
representation distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attack import SUCCESS, AttackResult
from .errors import DegenerateDesignError, EmptyDatasetError, EmptyResultsError
from .model import ModelParams, forward, forward_from_pooled, sentence_embedding
from .text import Dataset, LabeledExample, TokenizedText

LIME_SAMPLES = 1000
LIME_KERNEL_WIDTH = 0.25
LIME_RIDGE = 1e-3
AOPC_K = 10


@dataclass
class AttackSummary:
    total_attacked: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.total_attacked


@dataclass
class ExplanationWeights:
    weights: np.ndarray  # one coefficient per token
    n_samples: int
    kernel_width: float

    def ranking(self) -> list[int]:
        """Token order by descending weight (most label-supporting first)."""
        return [int(i) for i in np.argsort(-self.weights, kind="stable")]


@dataclass
class AOPCReport:
    k: int
    per_example_deltas: list[list[float]]

    @property
    def mean_aopc(self) -> float:
        n = len(self.per_example_deltas)
        total = sum(sum(deltas) for deltas in self.per_example_deltas)
        return total / ((self.k + 1) * n)


def attack_success_rate(results: list[AttackResult]) -> AttackSummary:
    """Successes over total; Failed and Exhausted both count as unsuccessful."""
    if not results:
        raise EmptyResultsError("no attack results to summarize")
    successes = sum(1 for r in results if r.status == SUCCESS)
    return AttackSummary(total_attacked=len(results), successes=successes)


def accuracy(params: ModelParams, dataset: Dataset) -> float:
    """Standard top-1 accuracy; also serves cross-domain evaluation."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot compute accuracy on an empty dataset")
    correct = 0
    for ex in dataset.examples:
        if int(np.argmax(forward(params, ex.text).probs)) == ex.label:
            correct += 1
    return correct / len(dataset)


def robust_accuracy(params: ModelParams, adversarial_set: list[LabeledExample]) -> float:
    """Fraction of adversarial examples the model still classifies correctly.

    The set is expected to come from attacking a different (baseline) model.
    """
    if not adversarial_set:
        raise EmptyDatasetError("empty adversarial set")
    correct = 0
    for ex in adversarial_set:
        if int(np.argmax(forward(params, ex.text).probs)) == ex.label:
            correct += 1
    return correct / len(adversarial_set)


def _confidence(params: ModelParams, text: TokenizedText, keep: np.ndarray, y: int) -> float:
    """Model confidence in y with only the masked-in tokens kept."""
    if keep.all():
        return float(forward(params, text).probs[y])
    kept = [i for i in range(len(text)) if keep[i]]
    if not kept:
        # All tokens deleted: classify from the zero pooled vector.
        pooled = np.zeros(params.store.dim)
        return float(forward_from_pooled(params, pooled).probs[y])
    dropped = [i for i in range(len(text)) if not keep[i]]
    return float(forward(params, text.delete_tokens(dropped)).probs[y])


def lime_explain(
    params: ModelParams,
    text: TokenizedText,
    y: int,
    n_samples: int = LIME_SAMPLES,
    seed: int = 0,
    kernel_width: float = LIME_KERNEL_WIDTH,
    ridge: float = LIME_RIDGE,
) -> ExplanationWeights:
    """Local linear surrogate over random keep/drop token masks.

    Each token is kept independently with probability 0.5; the surrogate is a
    ridge-regularized weighted least-squares fit of the model's confidence in
    y on the mask vector, with kernel weight exp(-(1 - kept_fraction)^2 / w^2).
    """
    n = len(text)
    if n < 2:
        raise ValueError("explanations need at least 2 tokens")
    for attempt in range(3):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        masks = rng.random((n_samples, n)) < 0.5
        if not np.all(masks == masks[0]):
            break
    else:
        raise DegenerateDesignError("all sampled masks identical after 3 retries")
    f = np.array([_confidence(params, text, masks[s], y) for s in range(n_samples)])
    kept_frac = masks.mean(axis=1)
    kernel = np.exp(-((1.0 - kept_frac) ** 2) / kernel_width**2)
    # Weighted ridge regression with an unpenalized-by-symmetry intercept
    # column appended last.
    X = np.hstack([masks.astype(np.float64), np.ones((n_samples, 1))])
    XtW = X.T * kernel
    A = XtW @ X + ridge * np.eye(n + 1)
    b = XtW @ f
    beta = np.linalg.solve(A, b)
    return ExplanationWeights(
        weights=beta[:n], n_samples=n_samples, kernel_width=kernel_width
    )


def aopc(
    params: ModelParams,
    examples: list[LabeledExample],
    rankings: list[list[int]],
    k: int = AOPC_K,
) -> AOPCReport:
    """Mean confidence drop when deleting the top-ranked tokens.

    delta_j = f(x with 0 deletions) - f(x with top-j deletions), averaged as
    sum over j = 1..k divided by (k + 1), then over examples. For texts
    shorter than k tokens, k truncates per example but the example still
    averages with weight 1.
    """
    if not examples:
        raise EmptyDatasetError("no examples for the deletion curve")
    if k < 1:
        raise ValueError("k must be >= 1")
    per_example: list[list[float]] = []
    for ex, ranking in zip(examples, rankings):
        n = len(ex.text)
        if sorted(ranking) != list(range(n)):
            raise ValueError("ranking must be a permutation of the token positions")
        keep = np.ones(n, dtype=bool)
        f0 = _confidence(params, ex.text, keep, ex.label)
        deltas = []
        for j in range(1, min(k, n) + 1):
            keep[ranking[j - 1]] = False
            deltas.append(f0 - _confidence(params, ex.text, keep, ex.label))
        per_example.append(deltas)
    return AOPCReport(k=k, per_example_deltas=per_example)


def representation_distance(
    params: ModelParams,
    pairs: list[tuple[TokenizedText, TokenizedText]],
    layer: str = "hidden",
) -> float:
    """Mean L2 distance between sentence representations of (x, x_adv) pairs.

    `layer` picks the representation: "hidden" is the model's mean-pooled
    hidden state (the layer training actually shapes, so it can distinguish
    models); "pooled" is the mean of the frozen input embeddings, which is
    identical for every model sharing an embedding store and only useful as
    an input-space baseline.
    """
    if not pairs:
        raise EmptyDatasetError("no text pairs")
    if layer not in ("hidden", "pooled"):
        raise ValueError(f"unknown layer {layer!r}; expected 'hidden' or 'pooled'")
    total = 0.0
    for original, perturbed in pairs:
        ta = forward(params, original)
        tb = forward(params, perturbed)
        if layer == "hidden":
            a, b = ta.hidden, tb.hidden
        else:
            a, b = sentence_embedding(ta), sentence_embedding(tb)
        total += float(np.linalg.norm(a - b))
    return total / len(pairs)
