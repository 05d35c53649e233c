"""Small differentiable text classifier: frozen embeddings, a per-token
tanh layer, mean pooling over hidden activations, softmax output. The
per-token nonlinearity makes the loss gradient w.r.t. each input embedding
position-dependent, which is what word importance ranking needs. Exposes
exactly what the attack and the trainer need: probabilities, loss,
input-embedding gradients, and one AdamW-style update step."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .budget import QueryMeter
from .embedding import EmbeddingStore
from .text import TokenizedText

LOG_CLAMP = 1e-12

# Desk-scale defaults; the 5e-5 transformer fine-tuning rate is kept around
# as a config preset for anyone pointing this at a bigger victim.
DEFAULT_LR = 1e-3
FINETUNE_LR = 5e-5
DEFAULT_WEIGHT_DECAY = 0.01


@dataclass
class ModelParams:
    """Trainable parameters plus a frozen reference embedding store."""

    store: EmbeddingStore
    W1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (C, h)
    b2: np.ndarray  # (C,)

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def num_classes(self) -> int:
        return self.W2.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            store=self.store,
            W1=self.W1.copy(),
            b1=self.b1.copy(),
            W2=self.W2.copy(),
            b2=self.b2.copy(),
        )

    def trainable(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


@dataclass
class ForwardTrace:
    """Intermediate activations of one forward pass."""

    input_embs: np.ndarray    # (n, d)
    pooled: np.ndarray        # (d,) mean of input embeddings
    token_hidden: np.ndarray  # (n, h) per-token tanh activations
    hidden: np.ndarray        # (h,) mean-pooled hidden state
    logits: np.ndarray        # (C,)
    probs: np.ndarray         # (C,)


@dataclass
class InputGradients:
    """d(loss)/d(e_i) for every input token embedding."""

    grads: np.ndarray  # (n, d)

    def l1_norms(self) -> np.ndarray:
        return np.abs(self.grads).sum(axis=1)


def init_params(store: EmbeddingStore, hidden_size: int, num_classes: int, seed: int) -> ModelParams:
    rng = np.random.default_rng(seed)
    d = store.dim
    scale1 = 1.0 / np.sqrt(d)
    scale2 = 1.0 / np.sqrt(hidden_size)
    return ModelParams(
        store=store,
        W1=rng.normal(0.0, scale1, size=(hidden_size, d)),
        b1=np.zeros(hidden_size),
        W2=rng.normal(0.0, scale2, size=(num_classes, hidden_size)),
        b2=np.zeros(num_classes),
    )


def embed_tokens(store: EmbeddingStore, text: TokenizedText) -> np.ndarray:
    """Per-token embedding rows; OOV tokens map to the zero row."""
    rows = [store.row(tok.normalized) for tok in text.tokens]
    return store.matrix[rows]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def forward(params: ModelParams, text: TokenizedText, meter: QueryMeter | None = None) -> ForwardTrace:
    """One forward pass; charges one query against `meter` when attached."""
    if meter is not None:
        meter.charge(1)
    embs = embed_tokens(params.store, text)
    return _forward_tail(params, embs)


def forward_from_pooled(params: ModelParams, pooled: np.ndarray) -> ForwardTrace:
    """Forward pass treating `pooled` as the embedding of a single token."""
    return _forward_tail(params, pooled[None, :])


def _forward_tail(params: ModelParams, embs: np.ndarray) -> ForwardTrace:
    token_hidden = np.tanh(embs @ params.W1.T + params.b1)
    hidden = token_hidden.mean(axis=0)
    logits = params.W2 @ hidden + params.b2
    return ForwardTrace(
        input_embs=embs,
        pooled=embs.mean(axis=0),
        token_hidden=token_hidden,
        hidden=hidden,
        logits=logits,
        probs=softmax(logits),
    )


def predict(params: ModelParams, text: TokenizedText, meter: QueryMeter | None = None) -> int:
    return int(np.argmax(forward(params, text, meter).probs))


def loss(trace: ForwardTrace, y: int) -> float:
    """Cross-entropy of the true label, clamped away from log(0)."""
    if y >= trace.probs.shape[0]:
        raise ValueError(f"label {y} out of range for {trace.probs.shape[0]} classes")
    return float(-np.log(max(trace.probs[y], LOG_CLAMP)))


def _backprop(params: ModelParams, trace: ForwardTrace, y: int):
    """Shared backward pass; returns (input_grads, param_grads)."""
    n = trace.input_embs.shape[0]
    dlogits = trace.probs.copy()
    dlogits[y] -= 1.0
    dW2 = np.outer(dlogits, trace.hidden)
    db2 = dlogits
    dhidden = params.W2.T @ dlogits
    # Mean pooling spreads the hidden gradient evenly over tokens; the
    # per-token tanh then makes the input gradients position-dependent.
    dpre = (dhidden / n) * (1.0 - trace.token_hidden**2)  # (n, h)
    dW1 = dpre.T @ trace.input_embs
    db1 = dpre.sum(axis=0)
    dinputs = dpre @ params.W1  # (n, d)
    return dinputs, {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


def backward_to_inputs(
    params: ModelParams,
    text: TokenizedText,
    y: int,
    meter: QueryMeter | None = None,
) -> InputGradients:
    """Exact gradient of the loss w.r.t. each token embedding.

    The forward + backward pair counts as a single metered query.
    """
    trace = forward(params, text, meter)
    dinputs, _ = _backprop(params, trace, y)
    return InputGradients(grads=dinputs)


def parameter_gradients(
    params: ModelParams,
    batch: list[tuple[TokenizedText, int, float]],
) -> tuple[dict[str, np.ndarray], float]:
    """Weighted-mean loss gradient over a batch of (text, label, weight).

    Normalization is by the sum of weights, so zero-weight examples are
    exactly equivalent to omitting them.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    total_w = sum(w for _, _, w in batch)
    if total_w <= 0.0:
        zero = {k: np.zeros_like(v) for k, v in params.trainable().items()}
        return zero, 0.0
    acc = {k: np.zeros_like(v) for k, v in params.trainable().items()}
    acc_loss = 0.0
    for text, y, w in batch:
        if w == 0.0:
            continue
        trace = forward(params, text)
        _, grads = _backprop(params, trace, y)
        for k in acc:
            acc[k] += w * grads[k]
        acc_loss += w * loss(trace, y)
    for k in acc:
        acc[k] /= total_w
    return acc, acc_loss / total_w


@dataclass
class OptimizerState:
    """AdamW-style moments with optional linear warm-up."""

    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_steps: int = 0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def _ensure(self, trainable: dict[str, np.ndarray]) -> None:
        for k, p in trainable.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)

    def effective_lr(self) -> float:
        if self.warmup_steps > 0 and self.step <= self.warmup_steps:
            return self.lr * self.step / self.warmup_steps
        return self.lr


def train_step(
    params: ModelParams,
    batch: list[tuple[TokenizedText, int, float]],
    opt: OptimizerState,
) -> float:
    """One decoupled-weight-decay Adam update in place; returns the batch loss.

    Embeddings stay frozen; decay applies to weight matrices only.
    """
    grads, batch_loss = parameter_gradients(params, batch)
    trainable = params.trainable()
    opt._ensure(trainable)
    opt.step += 1
    lr = opt.effective_lr()
    bc1 = 1.0 - opt.beta1**opt.step
    bc2 = 1.0 - opt.beta2**opt.step
    for k, p in trainable.items():
        g = grads[k]
        opt.m[k] = opt.beta1 * opt.m[k] + (1.0 - opt.beta1) * g
        opt.v[k] = opt.beta2 * opt.v[k] + (1.0 - opt.beta2) * g**2
        m_hat = opt.m[k] / bc1
        v_hat = opt.v[k] / bc2
        update = m_hat / (np.sqrt(v_hat) + opt.eps)
        if k in ("W1", "W2"):
            update = update + opt.weight_decay * p
        p -= lr * update
    return batch_loss


def sentence_embedding(trace: ForwardTrace) -> np.ndarray:
    """The pooled vector; this model's analog of a [CLS] sentence embedding."""
    return trace.pooled


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(
    path,
    params: ModelParams,
    opt: OptimizerState | None = None,
    seed: int | None = None,
    emb_path: str | None = None,
) -> None:
    """Persist parameters + optimizer state + embedding provenance as .npz."""
    meta = {
        "hidden_size": params.hidden_size,
        "num_classes": params.num_classes,
        "dim": params.store.dim,
        "seed": seed,
        "emb_path": str(emb_path) if emb_path else None,
        "emb_sha256": _file_sha256(emb_path) if emb_path else None,
    }
    arrays = {"W1": params.W1, "b1": params.b1, "W2": params.W2, "b2": params.b2}
    if opt is not None:
        meta["opt"] = {
            "lr": opt.lr,
            "weight_decay": opt.weight_decay,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "warmup_steps": opt.warmup_steps,
            "step": opt.step,
        }
        for k in opt.m:
            arrays[f"opt_m_{k}"] = opt.m[k]
            arrays[f"opt_v_{k}"] = opt.v[k]
    np.savez(path, meta=json.dumps(meta, sort_keys=True), **arrays)


def load_checkpoint(path, store: EmbeddingStore | None = None):
    """Load (params, opt, meta); reloads the referenced embedding file when
    no store is passed, and verifies its content hash if one was recorded."""
    from .embedding import load_embeddings

    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    if store is None:
        if not meta.get("emb_path"):
            raise ValueError("checkpoint records no embedding path; pass a store")
        if meta.get("emb_sha256"):
            actual = _file_sha256(meta["emb_path"])
            if actual != meta["emb_sha256"]:
                raise ValueError(
                    f"embedding file {meta['emb_path']} hash mismatch: "
                    f"{actual} != {meta['emb_sha256']}"
                )
        store = load_embeddings(meta["emb_path"])
    params = ModelParams(
        store=store, W1=data["W1"], b1=data["b1"], W2=data["W2"], b2=data["b2"]
    )
    opt = None
    if "opt" in meta:
        o = meta["opt"]
        opt = OptimizerState(
            lr=o["lr"],
            weight_decay=o["weight_decay"],
            beta1=o["beta1"],
            beta2=o["beta2"],
            eps=o["eps"],
            warmup_steps=o["warmup_steps"],
            step=o["step"],
        )
        for k in ("W1", "b1", "W2", "b2"):
            if f"opt_m_{k}" in data:
                opt.m[k] = data[f"opt_m_{k}"]
                opt.v[k] = data[f"opt_v_{k}"]
    return params, opt, meta
