"""Synthetic sentiment world for experiments and tests.

Builds a vocabulary of synonym groups with counter-fitted-style embeddings.
Members of a sentiment group sit close together (cosine >= 0.8) and share a
POS tag, so they are exactly the swaps the attack's constraint stack admits;
neutral filler groups are spread below the similarity threshold, mirroring
the bulk of a counter-fitted vocabulary that has no usable synonyms.

Labels depend only on group-level sentiment, which is linearly readable
along a shared sentiment axis that synonym swaps cannot touch. Each member
additionally carries an "intensity" sign along a second axis, and sentence
sampling aligns that sign with the label most of the time. The intensity
axis is therefore spuriously predictive: a model that picks it up is
foolable by within-group swaps, while a model relying on group sentiment is
robust. Adversarial training has a real, learnable invariance to find.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingStore
from .text import ADJ, ADV, NOUN, VERB, Dataset, LabeledExample, POSLexicon, pos_tag, tokenize

_TAG_CYCLE = (ADJ, NOUN, VERB, ADV)


@dataclass
class ToyWorldConfig:
    seed: int = 0
    n_pos_groups: int = 50
    n_neg_groups: int = 50
    n_neutral_groups: int = 50
    group_size: int = 5
    dim: int = 24
    # Cosine between a sentiment-group member and its group base; 0.95 keeps
    # every within-group pair above the 0.8 word-similarity constraint.
    base_cos: float = 0.95
    # Neutral groups are deliberately looser so their members fall below the
    # word-similarity constraint: like most words in counter-fitted spaces,
    # the filler vocabulary has no admissible substitutes.
    neutral_base_cos: float = 0.75
    # Fraction of a sentiment group's base aligned with the shared sentiment
    # axis (the robust, swap-invariant signal).
    sentiment_mix: float = 0.6
    # Fraction of the within-group noise aligned with the intensity axis
    # (the spurious, swap-sensitive signal).
    intensity_mix: float = 0.9


@dataclass
class ToyWorld:
    config: ToyWorldConfig
    store: EmbeddingStore
    lexicon: POSLexicon
    # word -> group sentiment in {-1, 0, +1}; determines labels
    polarity: dict[str, float]
    # word -> intensity sign in {-1, +1}; label-irrelevant by construction
    intensity: dict[str, float]
    # word -> group key; group key -> member words in index order
    group_of: dict[str, str]
    group_members: dict[str, list[str]]
    pos_words: list[str] = field(default_factory=list)
    neg_words: list[str] = field(default_factory=list)
    neutral_words: list[str] = field(default_factory=list)


def _word_name(kind: str, group: int, member: int) -> str:
    return f"{kind}{group:03d}{chr(ord('a') + member)}"


def make_toy_world(cfg: ToyWorldConfig | None = None) -> ToyWorld:
    cfg = cfg or ToyWorldConfig()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    d = cfg.dim
    intensity_axis = rng.normal(size=d)
    intensity_axis /= np.linalg.norm(intensity_axis)
    sentiment_axis = rng.normal(size=d)
    sentiment_axis -= (sentiment_axis @ intensity_axis) * intensity_axis
    sentiment_axis /= np.linalg.norm(sentiment_axis)

    mix = cfg.intensity_mix

    vectors: dict[str, np.ndarray] = {}
    polarity: dict[str, float] = {}
    intensity: dict[str, float] = {}
    group_of: dict[str, str] = {}
    group_members: dict[str, list[str]] = {}
    tag_counts: dict[str, dict[str, int]] = {}
    words_by_kind = {"pos": [], "neg": [], "neu": []}

    specs = (
        [("pos", g, 1.0) for g in range(cfg.n_pos_groups)]
        + [("neg", g, -1.0) for g in range(cfg.n_neg_groups)]
        + [("neu", g, 0.0) for g in range(cfg.n_neutral_groups)]
    )
    def _residual() -> np.ndarray:
        # Residual noise lives orthogonal to both signal axes, so the
        # sentiment axis carries the group signal exactly and the intensity
        # axis carries the member signal exactly.
        r = rng.normal(size=d)
        r -= (r @ intensity_axis) * intensity_axis
        r -= (r @ sentiment_axis) * sentiment_axis
        return r / np.linalg.norm(r)

    for group_index, (kind, g, sentiment) in enumerate(specs):
        residual_base = _residual()
        if sentiment != 0.0:
            nu = cfg.sentiment_mix
            base = nu * sentiment * sentiment_axis + np.sqrt(1.0 - nu**2) * residual_base
            base /= np.linalg.norm(base)
        else:
            base = residual_base
        cos_b = cfg.base_cos if sentiment != 0.0 else cfg.neutral_base_cos
        sin_b = float(np.sqrt(1.0 - cos_b**2))
        tag = _TAG_CYCLE[group_index % len(_TAG_CYCLE)]
        group_key = f"{kind}{g:03d}"
        group_members[group_key] = []
        for j in range(cfg.group_size):
            # Alternate intensity signs so every sentiment group offers
            # members on both sides of the spurious axis; neutral groups
            # stay off it entirely.
            delta = (1.0 if j % 2 == 0 else -1.0) if sentiment != 0.0 else 0.0
            if delta != 0.0:
                noise = mix * delta * intensity_axis + np.sqrt(1.0 - mix**2) * _residual()
            else:
                noise = _residual()
            noise /= np.linalg.norm(noise)
            vec = cos_b * base + sin_b * noise
            vec /= np.linalg.norm(vec)
            word = _word_name(kind, g, j)
            vectors[word] = vec
            polarity[word] = sentiment
            intensity[word] = delta
            group_of[word] = group_key
            group_members[group_key].append(word)
            tag_counts[word] = {tag: 1}
            words_by_kind[kind].append(word)

    store = EmbeddingStore.from_word_vectors(vectors)
    lexicon = POSLexicon.from_counts(tag_counts)
    return ToyWorld(
        config=cfg,
        store=store,
        lexicon=lexicon,
        polarity=polarity,
        intensity=intensity,
        group_of=group_of,
        group_members=group_members,
        pos_words=words_by_kind["pos"],
        neg_words=words_by_kind["neg"],
        neutral_words=words_by_kind["neu"],
    )


def make_dataset(
    world: ToyWorld,
    n_examples: int,
    seed: int,
    split: str = "train",
    min_len: int = 8,
    max_len: int = 14,
    min_sentiment: int = 3,
    max_sentiment: int = 7,
    min_margin: float = 1.0,
    spurious_align: float = 0.9,
    label_noise: float = 0.0,
) -> Dataset:
    """Sample labeled sentences: sentiment words plus neutral filler.

    The label is the sign of the summed group sentiments, optionally flipped
    with probability `label_noise`. With probability `spurious_align`, each
    sentiment word is then replaced by a same-group member whose intensity
    sign matches the observed label, planting the spurious correlation the
    attack exploits; under label noise the intensity axis explains training
    labels better than the robust sentiment axis does, so naturally trained
    models keep depending on it.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    sentiment_pool = world.pos_words + world.neg_words
    examples: list[LabeledExample] = []
    while len(examples) < n_examples:
        length = int(rng.integers(min_len, max_len + 1))
        n_sent = int(rng.integers(min_sentiment, min(max_sentiment, length) + 1))
        picks = [sentiment_pool[int(i)] for i in rng.integers(0, len(sentiment_pool), n_sent)]
        score = sum(world.polarity[w] for w in picks)
        if abs(score) < min_margin:
            continue
        label = 1 if score > 0 else 0
        if label_noise > 0.0 and rng.random() < label_noise:
            label = 1 - label
        wanted_delta = 1.0 if label == 1 else -1.0
        aligned = []
        for w in picks:
            if rng.random() < spurious_align and world.intensity[w] != wanted_delta:
                members = [
                    m
                    for m in world.group_members[world.group_of[w]]
                    if world.intensity[m] == wanted_delta
                ]
                w = members[int(rng.integers(0, len(members)))]
            aligned.append(w)
        aligned += [
            world.neutral_words[int(i)]
            for i in rng.integers(0, len(world.neutral_words), length - n_sent)
        ]
        rng.shuffle(aligned)
        text = pos_tag(tokenize(" ".join(aligned)), world.lexicon)
        examples.append(LabeledExample(text=text, label=label))
    return Dataset(examples=examples, class_names=["neg", "pos"], split=split)


def make_shifted_dataset(
    world: ToyWorld,
    n_examples: int,
    seed: int,
    split: str = "test",
) -> Dataset:
    """A cross-domain variant: shorter texts with heavier neutral filler."""
    return make_dataset(
        world,
        n_examples,
        seed,
        split=split,
        min_len=5,
        max_len=9,
        min_sentiment=2,
        max_sentiment=4,
    )
