"""Constrained greedy word-substitution attack with gradient- or
deletion-based word importance ranking, run under a hard query budget."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .budget import QueryMeter
from .embedding import EmbeddingStore, NeighborCache, cosine
from .errors import BudgetExceededError, NoKnownWordsError
from .model import ModelParams, backward_to_inputs, forward
from .text import UNKNOWN, LabeledExample, POSLexicon, Token, TokenizedText

SUCCESS = "Success"
FAILED = "Failed"
EXHAUSTED = "Exhausted"

TRAINING_QUERY_BUDGET = 200
EVAL_QUERY_BUDGET = 2000

# Proposer plugins map (text, position) to a ranked list of replacement words.
ProposerFn = Callable[[TokenizedText, int], list[str]]


@dataclass
class AttackConfig:
    k_candidates: int = 20
    min_word_cos: float = 0.8
    min_sentence_sim: float = 0.9
    max_mod_rate: float = 0.1
    query_budget: int = TRAINING_QUERY_BUDGET
    ranking: Literal["gradient", "deletion"] = "gradient"
    proposer: ProposerFn | None = None  # None selects embedding-kNN
    require_improvement: bool = False

    def validate(self) -> None:
        for name in ("min_word_cos", "min_sentence_sim", "max_mod_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.query_budget < 1:
            raise ValueError("query_budget must be >= 1")
        if self.k_candidates < 1:
            raise ValueError("k_candidates must be >= 1")
        if self.ranking not in ("gradient", "deletion"):
            raise ValueError(f"unknown ranking {self.ranking!r}")


@dataclass
class PerturbationCandidate:
    position: int
    replacement: str
    candidate_text: TokenizedText
    goal: float = float("nan")
    constraint_flags: dict[str, bool] = field(default_factory=dict)

    def passes(self) -> bool:
        return all(self.constraint_flags.values())


@dataclass
class AttackResult:
    status: str
    original: LabeledExample
    perturbed: TokenizedText
    queries_used: int
    words_modified: int
    final_goal: float


def goal_score(probs: np.ndarray, y: int) -> float:
    """Untargeted goal: one minus the model's confidence in the true label."""
    return float(1.0 - probs[y])


def max_modifications(n_tokens: int, rate: float) -> int:
    """Modification cap; the floor of 1 keeps short texts attackable."""
    return max(1, math.floor(rate * n_tokens))


def rank_words_gradient(
    params: ModelParams,
    text: TokenizedText,
    y: int,
    meter: QueryMeter | None = None,
) -> list[int]:
    """Token order by descending L1 norm of the input-embedding gradient.

    Costs exactly one metered query (a single forward + backward pass).
    Ties break by ascending position.
    """
    grads = backward_to_inputs(params, text, y, meter)
    importance = grads.l1_norms()
    return [int(i) for i in np.argsort(-importance, kind="stable")]


def rank_words_deletion(
    params: ModelParams,
    text: TokenizedText,
    y: int,
    meter: QueryMeter | None = None,
) -> list[int]:
    """Token order by confidence drop when the token is deleted.

    Costs exactly n + 1 metered forward passes.
    """
    base = forward(params, text, meter).probs[y]
    importance = np.empty(len(text))
    for i in range(len(text)):
        if len(text) == 1:
            # Deleting the only token leaves nothing to classify; its
            # importance is the full confidence.
            importance[i] = base
            forward(params, text, meter)  # charged like any deletion query
            continue
        deleted = text.delete_token(i)
        importance[i] = base - forward(params, deleted, meter).probs[y]
    return [int(i) for i in np.argsort(-importance, kind="stable")]


def constraint_pos(original_token: Token, replacement_word: str, lexicon: POSLexicon) -> bool:
    """Equal POS tags, with UNKNOWN acting as a wildcard on either side."""
    orig = original_token.pos
    repl = lexicon.tag(replacement_word)
    if orig == UNKNOWN or repl == UNKNOWN:
        return True
    return orig == repl


def constraint_word_cos(
    original_word: str,
    replacement_word: str,
    store: EmbeddingStore,
    min_cos: float,
) -> bool:
    """Swapped words must be close in the embedding space (inclusive bound)."""
    u = store.vector(original_word)
    v = store.vector(replacement_word)
    if u is None or v is None:
        return False
    return cosine(u, v) >= min_cos


def constraint_sentence_sim(
    original_text: TokenizedText,
    candidate_text: TokenizedText,
    encoder,
    min_sim: float,
) -> bool:
    """Full perturbed text must stay close to the full original text."""
    try:
        a = encoder(original_text)
        b = encoder(candidate_text)
    except NoKnownWordsError:
        return False
    return cosine(a, b) >= min_sim


def constraint_mod_rate(n_tokens: int, candidate_total_mods: int, rate: float) -> bool:
    return candidate_total_mods <= max_modifications(n_tokens, rate)


def propose_replacements(
    text: TokenizedText,
    position: int,
    cache: NeighborCache,
    cfg: AttackConfig,
    store: EmbeddingStore,
    lexicon: POSLexicon,
    encoder,
    original: TokenizedText | None = None,
    total_mods: int = 1,
    return_all: bool = False,
) -> list[PerturbationCandidate]:
    """Single-position swap candidates that pass every constraint.

    `original` is the unperturbed text the similarity and modification-rate
    constraints compare against (defaults to `text`). `total_mods` is the
    modification count the candidate would reach, including this swap.
    Constraint evaluation never queries the victim model.
    """
    if original is None:
        original = text
    token = text.tokens[position]
    if cfg.proposer is not None:
        words = list(cfg.proposer(text, position))[: cfg.k_candidates]
    else:
        if token.normalized not in store:
            return []
        words = [w for w, _ in cache.get(token.normalized)[: cfg.k_candidates]]
    out: list[PerturbationCandidate] = []
    for word in words:
        if word == token.normalized:
            continue
        cand_text = text.replace_token(position, word, pos=lexicon.tag(word))
        flags = {
            "pos": constraint_pos(token, word, lexicon),
            "word_cos": constraint_word_cos(
                token.normalized, word, store, cfg.min_word_cos
            ),
            "mod_rate": constraint_mod_rate(len(original), total_mods, cfg.max_mod_rate),
        }
        # The sentence encoder is the most expensive check; short-circuit it.
        if all(flags.values()):
            flags["sentence_sim"] = constraint_sentence_sim(
                original, cand_text, encoder, cfg.min_sentence_sim
            )
        elif return_all:
            flags["sentence_sim"] = constraint_sentence_sim(
                original, cand_text, encoder, cfg.min_sentence_sim
            )
        cand = PerturbationCandidate(
            position=position,
            replacement=word,
            candidate_text=cand_text,
            constraint_flags=flags,
        )
        if return_all or cand.passes():
            out.append(cand)
    return out


def greedy_search(
    params: ModelParams,
    example: LabeledExample,
    cfg: AttackConfig,
    cache: NeighborCache,
    lexicon: POSLexicon,
    encoder,
    meter: QueryMeter | None = None,
) -> AttackResult:
    """Greedy word-importance-ranked search for an adversarial example.

    Ranks positions once, then walks them in importance order, swapping in
    the goal-argmax constraint-passing candidate at each position until the
    model mispredicts, the ranking is exhausted, or the budget runs out.
    """
    cfg.validate()
    if meter is None:
        meter = QueryMeter(cfg.query_budget)
    text = example.text
    y = example.label
    cap = max_modifications(len(text), cfg.max_mod_rate)

    current = text
    mods = 0
    current_goal = 0.0

    def _result(status: str) -> AttackResult:
        return AttackResult(
            status=status,
            original=example,
            perturbed=current,
            queries_used=meter.forward_count,
            words_modified=mods,
            final_goal=current_goal,
        )

    try:
        trace = forward(params, text, meter)
        current_goal = goal_score(trace.probs, y)
        if int(np.argmax(trace.probs)) != y:
            return _result(SUCCESS)
        if cfg.ranking == "gradient":
            order = rank_words_gradient(params, text, y, meter)
        else:
            order = rank_words_deletion(params, text, y, meter)
        for position in order:
            if mods >= cap:
                continue
            candidates = propose_replacements(
                current,
                position,
                cache,
                cfg,
                params.store,
                lexicon,
                encoder,
                original=text,
                total_mods=mods + 1,
            )
            if not candidates:
                continue
            # Lexicographic iteration + strict improvement makes goal-score
            # ties resolve to the alphabetically first replacement.
            candidates.sort(key=lambda c: c.replacement)
            best: PerturbationCandidate | None = None
            best_pred = y
            for cand in candidates:
                ctrace = forward(params, cand.candidate_text, meter)
                cand.goal = goal_score(ctrace.probs, y)
                if best is None or cand.goal > best.goal:
                    best = cand
                    best_pred = int(np.argmax(ctrace.probs))
            if cfg.require_improvement and best.goal <= current_goal:
                continue
            current = best.candidate_text
            current_goal = best.goal
            mods += 1
            if best_pred != y:
                return _result(SUCCESS)
        return _result(FAILED)
    except BudgetExceededError:
        return _result(EXHAUSTED)


class AttackValidationError(RuntimeError):
    """A returned Success result failed its own invariants on re-check."""


def validate_success(
    result: AttackResult,
    params: ModelParams,
    cfg: AttackConfig,
    lexicon: POSLexicon,
    encoder,
) -> None:
    """Independently re-check every Success invariant (unmetered)."""
    ex = result.original
    probs = forward(params, result.perturbed).probs
    if int(np.argmax(probs)) == ex.label:
        raise AttackValidationError("perturbed text does not fool the model")
    diffs = [
        i
        for i, (a, b) in enumerate(zip(ex.text.tokens, result.perturbed.tokens))
        if a.normalized != b.normalized
    ]
    if len(ex.text) != len(result.perturbed):
        raise AttackValidationError("perturbed text changed length")
    if len(diffs) != result.words_modified:
        raise AttackValidationError("words_modified does not match the diff")
    cap = max_modifications(len(ex.text), cfg.max_mod_rate)
    if result.words_modified > cap:
        raise AttackValidationError("modification cap exceeded")
    for i in diffs:
        orig_tok = ex.text.tokens[i]
        repl = result.perturbed.tokens[i].normalized
        if not constraint_pos(orig_tok, repl, lexicon):
            raise AttackValidationError(f"POS constraint violated at {i}")
        if not constraint_word_cos(orig_tok.normalized, repl, params.store, cfg.min_word_cos):
            raise AttackValidationError(f"word-cosine constraint violated at {i}")
    if diffs and not constraint_sentence_sim(
        ex.text, result.perturbed, encoder, cfg.min_sentence_sim
    ):
        raise AttackValidationError("sentence-similarity constraint violated")
    if result.queries_used > cfg.query_budget:
        raise AttackValidationError("query budget overrun")


def attack(
    params: ModelParams,
    example: LabeledExample,
    cfg: AttackConfig,
    cache: NeighborCache,
    lexicon: POSLexicon,
    encoder,
) -> AttackResult:
    """Run one budgeted attack and re-validate any Success before returning."""
    meter = QueryMeter(cfg.query_budget)
    result = greedy_search(params, example, cfg, cache, lexicon, encoder, meter)
    if result.status == SUCCESS:
        validate_success(result, params, cfg, lexicon, encoder)
    return result
