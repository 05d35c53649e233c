"""Word embedding store, neighbor cache, and the default sentence encoder."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NoKnownWordsError, ParseError, ZeroVectorError
from .text import TokenizedText

# Row 0 of every store is the reserved all-zero OOV row.
OOV_ROW = 0

DEFAULT_TOP_K = 20
DEFAULT_MIN_WORD_COS = 0.8


class EmbeddingStore:
    """Case-insensitive word -> vector store backed by a single matrix."""

    def __init__(self, vocab: dict[str, int], matrix: np.ndarray):
        if matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding matrix contains non-finite values")
        self.vocab = vocab
        self.matrix = matrix
        self.dim = matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.vocab

    def words(self) -> list[str]:
        return sorted(self.vocab)

    def row(self, word: str) -> int:
        """Matrix row for `word`, or the zero OOV row when absent."""
        return self.vocab.get(word.lower(), OOV_ROW)

    def vector(self, word: str) -> np.ndarray | None:
        idx = self.vocab.get(word.lower())
        return None if idx is None else self.matrix[idx]

    @classmethod
    def from_word_vectors(cls, vectors: dict[str, np.ndarray]) -> "EmbeddingStore":
        words = sorted(w.lower() for w in vectors)
        dim = len(next(iter(vectors.values())))
        matrix = np.zeros((len(words) + 1, dim), dtype=np.float64)
        vocab = {}
        lowered = {w.lower(): np.asarray(v, dtype=np.float64) for w, v in vectors.items()}
        for i, word in enumerate(words, start=1):
            vec = lowered[word]
            if not np.any(vec):
                raise ValueError(f"all-zero embedding for {word!r}")
            matrix[i] = vec
            vocab[word] = i
        return cls(vocab, matrix)


def load_embeddings(path) -> EmbeddingStore:
    """Read a text embedding file: `word v_1 ... v_d` per line.

    An optional first line `|V| d` (two integers) is accepted and checked.
    """
    declared = None
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    declared = (int(parts[0]), int(parts[1]))
                    continue
                except ValueError:
                    pass
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError("non-numeric embedding component", line=lineno) from None
            if vec.size == 0:
                raise ParseError("embedding line has no components", line=lineno)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ParseError(
                    f"dimension mismatch: expected {dim}, got {vec.size}", line=lineno
                )
            vectors[word.lower()] = vec
    if not vectors:
        raise ParseError("embedding file contains no vectors")
    if declared is not None:
        if declared != (len(vectors), dim):
            raise ParseError(
                f"header declares {declared} but file holds ({len(vectors)}, {dim})"
            )
    return EmbeddingStore.from_word_vectors(vectors)


def save_embeddings(store: EmbeddingStore, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(store)} {store.dim}\n")
        for word in store.words():
            vec = store.vector(word)
            fh.write(word + " " + " ".join(f"{x:.8g}" for x in vec) + "\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine undefined for the zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass
class NeighborCache:
    """Precomputed top-k nearest neighbors per word, descending by cosine."""

    neighbors: dict[str, list[tuple[str, float]]]
    k: int
    min_cos: float

    def get(self, word: str) -> list[tuple[str, float]]:
        return self.neighbors.get(word.lower(), [])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"k": self.k, "min_cos": self.min_cos}) + "\n")
            for word in sorted(self.neighbors):
                rec = {
                    "word": word,
                    "nbrs": [[w, round(s, 8)] for w, s in self.neighbors[word]],
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path) -> "NeighborCache":
        neighbors: dict[str, list[tuple[str, float]]] = {}
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                neighbors[rec["word"]] = [(w, float(s)) for w, s in rec["nbrs"]]
        return cls(neighbors=neighbors, k=int(header["k"]), min_cos=float(header["min_cos"]))


def build_neighbor_cache(
    store: EmbeddingStore,
    k: int = DEFAULT_TOP_K,
    min_cos: float = DEFAULT_MIN_WORD_COS,
) -> NeighborCache:
    """Exact top-k neighbor search over the whole vocabulary.

    Keeps only pairs with cosine >= min_cos; ties break lexicographically.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= min_cos <= 1.0:
        raise ValueError("min_cos must lie in [0, 1]")
    words = store.words()
    if len(words) <= 1:
        return NeighborCache({w: [] for w in words}, k=k, min_cos=min_cos)
    rows = np.array([store.vocab[w] for w in words])
    mat = store.matrix[rows]
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    unit = mat / norms
    sims = unit @ unit.T
    np.clip(sims, -1.0, 1.0, out=sims)
    neighbors: dict[str, list[tuple[str, float]]] = {}
    for i, word in enumerate(words):
        row = sims[i]
        cands = [
            (words[j], float(row[j]))
            for j in range(len(words))
            if j != i and row[j] >= min_cos
        ]
        cands.sort(key=lambda ws: (-ws[1], ws[0]))
        neighbors[word] = cands[:k]
    return NeighborCache(neighbors=neighbors, k=k, min_cos=min_cos)


def sentence_encode(text: TokenizedText, store: EmbeddingStore) -> np.ndarray:
    """Normalized mean of the normalized embeddings of in-vocabulary tokens."""
    vecs = []
    for tok in text.tokens:
        v = store.vector(tok.normalized)
        if v is not None:
            vecs.append(v / np.linalg.norm(v))
    if not vecs:
        raise NoKnownWordsError("no in-vocabulary token to encode")
    mean = np.mean(vecs, axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        # Exactly cancelling word vectors; fall back to the unnormalized mean.
        return mean
    return mean / norm


class MeanEmbeddingEncoder:
    """Default pluggable sentence encoder: normalized mean word embedding."""

    def __init__(self, store: EmbeddingStore):
        self.store = store

    def __call__(self, text: TokenizedText) -> np.ndarray:
        return sentence_encode(text, self.store)
