"""Command-line surface: reproducible experiment runs over the library.

Subcommands: precompute-neighbors, train, attack, eval, aopc, sweep-gamma.
Every run reads an optional JSON config file (flags win over file values),
derives all randomness from a single base seed, and writes a manifest
recording the config snapshot, content hashes of all inputs, and summary
metrics next to its outputs.

Exit codes: 0 on success, 1 on runtime errors, 2 on config errors
(including unresolvable input paths).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attack import EVAL_QUERY_BUDGET, AttackConfig, attack
from .embedding import (
    DEFAULT_MIN_WORD_COS,
    DEFAULT_TOP_K,
    MeanEmbeddingEncoder,
    NeighborCache,
    build_neighbor_cache,
    load_embeddings,
)
from .errors import AdvTextError, ConfigError
from .metrics import (
    AOPC_K,
    LIME_SAMPLES,
    accuracy,
    aopc,
    attack_success_rate,
    lime_explain,
    robust_accuracy,
)
from .model import init_params, load_checkpoint, save_checkpoint
from .text import POSLexicon, detokenize, load_dataset
from .trainer import TrainingConfig, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

# Relative output paths are resolved against this directory when set.
OUT_DIR_ENV = "ADVTEXT_OUT_DIR"

DEFAULT_HIDDEN_SIZE = 64

_ATTACK_CONFIG_KEYS = {
    "k_candidates",
    "min_word_cos",
    "min_sentence_sim",
    "max_mod_rate",
    "query_budget",
    "ranking",
    "require_improvement",
}
_TRAIN_CONFIG_KEYS = {
    "n_clean",
    "n_adv",
    "gamma",
    "alpha",
    "batch_size",
    "seed",
    "lr",
    "weight_decay",
    "warmup_steps",
    "workers",
    "hidden_size",
    "attack",
}


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    command: str
    version: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    started_at: float = field(default_factory=time.time)
    finished_at: float | None = None

    def add_input(self, path) -> None:
        self.inputs[str(path)] = _sha256(path)

    def write(self, path) -> None:
        """Atomic write: serialize to a sibling temp file, then rename."""
        self.finished_at = time.time()
        path = Path(path)
        payload = {
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "summary": self.summary,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, path)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_out(path_str: str) -> Path:
    base = os.environ.get(OUT_DIR_ENV)
    p = Path(path_str)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _require_input(path_str: str, what: str) -> Path:
    p = Path(path_str)
    if not p.exists():
        raise ConfigError(f"{what} path does not exist: {p}")
    return p


def _load_json_config(path_str: str | None) -> dict:
    if path_str is None:
        return {}
    p = _require_input(path_str, "config")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _attack_config_from(cfg: dict, args=None) -> AttackConfig:
    unknown = set(cfg) - _ATTACK_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown attack config keys: {sorted(unknown)}")
    atk = AttackConfig(**cfg)
    if args is not None:
        if getattr(args, "budget", None) is not None:
            atk.query_budget = args.budget
        if getattr(args, "ranking", None) is not None:
            atk.ranking = args.ranking
    try:
        atk.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return atk


def _training_config_from(cfg: dict, args) -> tuple[TrainingConfig, int]:
    unknown = set(cfg) - _TRAIN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
    hidden_size = int(cfg.pop("hidden_size", DEFAULT_HIDDEN_SIZE))
    attack_cfg = _attack_config_from(cfg.pop("attack", {}))
    tc = TrainingConfig(attack_cfg=attack_cfg, **cfg)
    for name in (
        "n_clean",
        "n_adv",
        "gamma",
        "alpha",
        "batch_size",
        "seed",
        "lr",
        "weight_decay",
        "workers",
    ):
        value = getattr(args, name, None)
        if value is not None:
            setattr(tc, name, value)
    try:
        tc.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return tc, hidden_size


def _config_snapshot(tc: TrainingConfig) -> dict:
    snap = {
        "n_clean": tc.n_clean,
        "n_adv": tc.n_adv,
        "gamma": tc.gamma,
        "alpha": tc.alpha,
        "batch_size": tc.batch_size,
        "seed": tc.seed,
        "lr": tc.lr,
        "weight_decay": tc.weight_decay,
        "warmup_steps": tc.warmup_steps,
        "workers": tc.workers,
        "attack": {
            "k_candidates": tc.attack_cfg.k_candidates,
            "min_word_cos": tc.attack_cfg.min_word_cos,
            "min_sentence_sim": tc.attack_cfg.min_sentence_sim,
            "max_mod_rate": tc.attack_cfg.max_mod_rate,
            "query_budget": tc.attack_cfg.query_budget,
            "ranking": tc.attack_cfg.ranking,
            "require_improvement": tc.attack_cfg.require_improvement,
        },
    }
    return snap


def _load_lexicon(args) -> POSLexicon:
    if getattr(args, "lexicon", None):
        return POSLexicon.load(_require_input(args.lexicon, "lexicon"))
    return POSLexicon({})


def _load_model(args):
    ckpt = _require_input(args.model, "model checkpoint")
    params, _, meta = load_checkpoint(ckpt)
    return ckpt, params, meta


def _load_attack_stack(args, store):
    cache_path = _require_input(args.neighbors, "neighbor cache")
    cache = NeighborCache.load(cache_path)
    lexicon = _load_lexicon(args)
    encoder = MeanEmbeddingEncoder(store)
    return cache_path, cache, lexicon, encoder


# --- subcommands ------------------------------------------------------------


def cmd_precompute_neighbors(args) -> int:
    emb_path = _require_input(args.emb, "embedding")
    store = load_embeddings(emb_path)
    cache = build_neighbor_cache(store, k=args.k, min_cos=args.min_cos)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cache.save(out)
    manifest = RunManifest(
        command="precompute-neighbors",
        version=__version__,
        config={"k": args.k, "min_cos": args.min_cos},
    )
    manifest.add_input(emb_path)
    manifest.outputs.append(str(out))
    manifest.summary = {
        "vocab_size": len(store),
        "mean_neighbors": float(
            np.mean([len(cache.get(w)) for w in store.words()])
        ),
    }
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"cached neighbors for {len(store)} words -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    data_path = _require_input(args.data, "data")
    emb_path = _require_input(args.emb, "embedding")
    cfg_dict = _load_json_config(args.config)
    tc, hidden_size = _training_config_from(cfg_dict, args)

    store = load_embeddings(emb_path)
    lexicon = _load_lexicon(args)
    dataset = load_dataset(data_path, split="train", lexicon=lexicon)
    if len(dataset) == 0:
        raise ConfigError("training dataset is empty")

    cache = None
    encoder = None
    if tc.n_adv > 0:
        if not args.neighbors:
            raise ConfigError("adversarial epochs need --neighbors")
        _, cache, lexicon, encoder = _load_attack_stack(args, store)

    out_dir = _resolve_out(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = init_params(store, hidden_size, dataset.num_classes, seed=tc.seed)

    report_path = out_dir / "epochs.jsonl"
    with open(report_path, "w", encoding="utf-8") as report_fh:

        def _checkpoint(epoch, params, opt, report):
            report_fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
            report_fh.flush()
            save_checkpoint(
                out_dir / "model.npz", params, opt, seed=tc.seed, emb_path=emb_path
            )

        reports = train(
            params, dataset, tc, cache, lexicon, encoder, checkpoint_fn=_checkpoint
        )

    ckpt_path = out_dir / "model.npz"
    manifest = RunManifest(
        command="train",
        version=__version__,
        config={**_config_snapshot(tc), "hidden_size": hidden_size},
    )
    for p in (data_path, emb_path):
        manifest.add_input(p)
    if args.lexicon:
        manifest.add_input(args.lexicon)
    if args.neighbors and tc.n_adv > 0:
        manifest.add_input(args.neighbors)
    manifest.outputs = [str(ckpt_path), str(report_path)]
    manifest.summary = {
        "epochs": len(reports),
        "final_clean_loss": reports[-1].mean_clean_loss,
        "adv_generated_total": sum(r.adv_generated for r in reports),
        "train_accuracy": accuracy(params, dataset),
    }
    manifest.write(out_dir / "manifest.json")
    print(
        f"trained {len(reports)} epochs; final clean loss "
        f"{reports[-1].mean_clean_loss:.4f} -> {ckpt_path}"
    )
    return EXIT_OK


def cmd_attack(args) -> int:
    ckpt_path, params, _ = _load_model(args)
    data_path = _require_input(args.data, "data")
    cfg_dict = _load_json_config(args.config)
    atk = _attack_config_from(cfg_dict.get("attack", cfg_dict), args)
    cache_path, cache, lexicon, encoder = _load_attack_stack(args, params.store)
    dataset = load_dataset(data_path, split="eval", lexicon=lexicon)
    if len(dataset) == 0:
        raise ConfigError("attack dataset is empty")

    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    results = []
    with open(out, "w", encoding="utf-8") as fh:
        for i, ex in enumerate(dataset.examples):
            result = attack(params, ex, atk, cache, lexicon, encoder)
            results.append(result)
            fh.write(
                json.dumps(
                    {
                        "id": i,
                        "status": result.status,
                        "queries": result.queries_used,
                        "mods": result.words_modified,
                        "goal": result.final_goal,
                        "perturbed_text": detokenize(result.perturbed),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        summary = attack_success_rate(results)
        fh.write(
            json.dumps(
                {
                    "summary": {
                        "total_attacked": summary.total_attacked,
                        "successes": summary.successes,
                        "attack_success_rate": summary.success_rate,
                    }
                },
                sort_keys=True,
            )
            + "\n"
        )

    manifest = RunManifest(
        command="attack",
        version=__version__,
        config={
            "k_candidates": atk.k_candidates,
            "min_word_cos": atk.min_word_cos,
            "min_sentence_sim": atk.min_sentence_sim,
            "max_mod_rate": atk.max_mod_rate,
            "query_budget": atk.query_budget,
            "ranking": atk.ranking,
            "require_improvement": atk.require_improvement,
        },
    )
    for p in (ckpt_path, data_path, cache_path):
        manifest.add_input(p)
    if args.lexicon:
        manifest.add_input(args.lexicon)
    manifest.outputs = [str(out)]
    manifest.summary = {
        "total_attacked": summary.total_attacked,
        "successes": summary.successes,
        "attack_success_rate": summary.success_rate,
    }
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(
        f"attacked {summary.total_attacked} examples: "
        f"{summary.successes} successes "
        f"(rate {summary.success_rate:.3f}) -> {out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt_path, params, _ = _load_model(args)
    data_path = _require_input(args.data, "data")
    lexicon = _load_lexicon(args)
    dataset = load_dataset(data_path, split="eval", lexicon=lexicon)
    if len(dataset) == 0:
        raise ConfigError("evaluation dataset is empty")
    report = {"accuracy": accuracy(params, dataset), "n_examples": len(dataset)}

    adv_path = None
    if args.adv:
        adv_path = _require_input(args.adv, "adversarial data")
        adv_ds = load_dataset(adv_path, split="adv", lexicon=lexicon)
        if len(adv_ds) == 0:
            raise ConfigError("adversarial dataset is empty")
        report["robust_accuracy"] = robust_accuracy(params, adv_ds.examples)
        report["n_adversarial"] = len(adv_ds)

    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    manifest = RunManifest(command="eval", version=__version__, config={})
    for p in (ckpt_path, data_path):
        manifest.add_input(p)
    if adv_path is not None:
        manifest.add_input(adv_path)
    if args.lexicon:
        manifest.add_input(args.lexicon)
    manifest.outputs = [str(out)]
    manifest.summary = report
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    line = f"accuracy {report['accuracy']:.3f} (n={report['n_examples']})"
    if "robust_accuracy" in report:
        line += (
            f"; robust accuracy {report['robust_accuracy']:.3f}"
            f" (n={report['n_adversarial']})"
        )
    print(line + f" -> {out}")
    return EXIT_OK


def cmd_aopc(args) -> int:
    ckpt_path, params, _ = _load_model(args)
    data_path = _require_input(args.data, "data")
    lexicon = _load_lexicon(args)
    dataset = load_dataset(data_path, split="eval", lexicon=lexicon)
    # Surrogate explanations need at least two tokens to rank.
    usable = [
        (i, ex) for i, ex in enumerate(dataset.examples) if len(ex.text) >= 2
    ]
    if not usable:
        raise ConfigError("no example with >= 2 tokens to explain")

    rankings = []
    for offset, (_, ex) in enumerate(usable):
        expl = lime_explain(
            params,
            ex.text,
            ex.label,
            n_samples=args.samples,
            seed=args.seed + offset,
        )
        rankings.append(expl.ranking())
    report = aopc(params, [ex for _, ex in usable], rankings, k=args.k)

    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        header = ["example_id"] + [f"aopc_delta_k{j}" for j in range(1, args.k + 1)]
        fh.write("\t".join(header) + "\n")
        for (example_id, _), deltas in zip(usable, report.per_example_deltas):
            row = [str(example_id)] + [f"{d:.6f}" for d in deltas]
            row += [""] * (args.k - len(deltas))
            fh.write("\t".join(row) + "\n")

    manifest = RunManifest(
        command="aopc",
        version=__version__,
        config={"samples": args.samples, "k": args.k, "seed": args.seed},
    )
    for p in (ckpt_path, data_path):
        manifest.add_input(p)
    if args.lexicon:
        manifest.add_input(args.lexicon)
    manifest.outputs = [str(out)]
    manifest.summary = {"mean_aopc": report.mean_aopc, "n_examples": len(usable)}
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"mean AOPC {report.mean_aopc:.4f} over {len(usable)} examples -> {out}")
    return EXIT_OK


def cmd_sweep_gamma(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad --values list: {args.values!r}") from None
    if not values:
        raise ConfigError("--values must name at least one gamma")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"gamma {v} outside [0, 1]")

    data_path = _require_input(args.data, "data")
    eval_path = _require_input(args.eval_data, "eval data")
    emb_path = _require_input(args.emb, "embedding")
    cfg_dict = _load_json_config(args.config)
    tc, hidden_size = _training_config_from(cfg_dict, args)

    store = load_embeddings(emb_path)
    _, cache, lexicon, encoder = _load_attack_stack(args, store)
    train_ds = load_dataset(data_path, split="train", lexicon=lexicon)
    eval_ds = load_dataset(eval_path, split="eval", lexicon=lexicon)
    if len(train_ds) == 0 or len(eval_ds) == 0:
        raise ConfigError("sweep needs non-empty train and eval datasets")

    eval_attack = AttackConfig(
        k_candidates=tc.attack_cfg.k_candidates,
        min_word_cos=tc.attack_cfg.min_word_cos,
        min_sentence_sim=tc.attack_cfg.min_sentence_sim,
        max_mod_rate=tc.attack_cfg.max_mod_rate,
        query_budget=EVAL_QUERY_BUDGET,
        ranking=tc.attack_cfg.ranking,
    )

    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for gamma in values:
        run_cfg = TrainingConfig(
            n_clean=tc.n_clean,
            n_adv=tc.n_adv,
            gamma=gamma,
            alpha=tc.alpha,
            attack_cfg=tc.attack_cfg,
            batch_size=tc.batch_size,
            seed=tc.seed,
            lr=tc.lr,
            weight_decay=tc.weight_decay,
            warmup_steps=tc.warmup_steps,
            workers=tc.workers,
        )
        params = init_params(store, hidden_size, train_ds.num_classes, seed=tc.seed)
        train(params, train_ds, run_cfg, cache, lexicon, encoder)
        results = [
            attack(params, ex, eval_attack, cache, lexicon, encoder)
            for ex in eval_ds.examples
        ]
        asr = attack_success_rate(results).success_rate
        acc = accuracy(params, eval_ds)
        rows.append((gamma, asr, acc))
        print(f"gamma={gamma:g}: attack success {asr:.3f}, accuracy {acc:.3f}")

    with open(out, "w", encoding="utf-8") as fh:
        fh.write("gamma\tattack_success_rate\tstandard_accuracy\n")
        for gamma, asr, acc in rows:
            fh.write(f"{gamma:g}\t{asr:.6f}\t{acc:.6f}\n")

    manifest = RunManifest(
        command="sweep-gamma",
        version=__version__,
        config={**_config_snapshot(tc), "hidden_size": hidden_size, "values": values},
    )
    for p in (data_path, eval_path, emb_path, args.neighbors):
        manifest.add_input(p)
    if args.lexicon:
        manifest.add_input(args.lexicon)
    manifest.outputs = [str(out)]
    manifest.summary = {
        "rows": [
            {"gamma": g, "attack_success_rate": a, "standard_accuracy": c}
            for g, a, c in rows
        ]
    }
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    return EXIT_OK


# --- argument parsing -------------------------------------------------------


def _add_train_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-clean", dest="n_clean", type=int, default=None)
    p.add_argument("--n-adv", dest="n_adv", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advtext",
        description="Adversarial training and evaluation for text classifiers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "precompute-neighbors", help="build and cache nearest-neighbor lists"
    )
    p.add_argument("--emb", required=True, help="word embedding text file")
    p.add_argument("--k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--min-cos", dest="min_cos", type=float, default=DEFAULT_MIN_WORD_COS)
    p.add_argument("--out", required=True, help="neighbor cache output (JSONL)")
    p.set_defaults(fn=cmd_precompute_neighbors)

    p = sub.add_parser("train", help="train a classifier, optionally adversarially")
    p.add_argument("--data", required=True, help="training data (JSONL)")
    p.add_argument("--emb", required=True, help="word embedding text file")
    p.add_argument("--config", default=None, help="JSON training config")
    p.add_argument("--lexicon", default=None, help="POS lexicon TSV")
    p.add_argument("--neighbors", default=None, help="neighbor cache (JSONL)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_train_overrides(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("attack", help="attack a trained model over a dataset")
    p.add_argument("--model", required=True, help="model checkpoint (.npz)")
    p.add_argument("--data", required=True, help="data to attack (JSONL)")
    p.add_argument("--config", default=None, help="JSON attack config")
    p.add_argument("--neighbors", required=True, help="neighbor cache (JSONL)")
    p.add_argument("--lexicon", default=None, help="POS lexicon TSV")
    p.add_argument("--budget", type=int, default=None, help="query budget override")
    p.add_argument(
        "--ranking", choices=("gradient", "deletion"), default=None
    )
    p.add_argument("--out", required=True, help="per-example results (JSONL)")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("eval", help="accuracy and optional robust accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--adv", default=None, help="adversarial examples (JSONL)")
    p.add_argument("--lexicon", default=None)
    p.add_argument("--out", required=True, help="metrics report (JSON)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("aopc", help="surrogate-explanation deletion curves")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--samples", type=int, default=LIME_SAMPLES)
    p.add_argument("--k", type=int, default=AOPC_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--out", required=True, help="per-example deltas (TSV)")
    p.set_defaults(fn=cmd_aopc)

    p = sub.add_parser("sweep-gamma", help="train/attack across gamma values")
    p.add_argument("--values", required=True, help="comma-separated gammas")
    p.add_argument("--data", required=True, help="training data (JSONL)")
    p.add_argument("--eval-data", dest="eval_data", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="sweep table (TSV)")
    _add_train_overrides(p)
    p.set_defaults(fn=cmd_sweep_gamma)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except AdvTextError as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
