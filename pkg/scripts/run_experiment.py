"""Head-to-head robustness experiment: natural vs adversarial training.

For each seed, trains a naturally trained baseline (clean epochs only) and
an adversarially trained model (1 clean + 3 adversarial epochs, gamma=0.2,
alpha=1) on the same synthetic data, then compares:

  * attack success rate under the evaluation budget (2000 queries),
  * robust accuracy on the adversarial examples that fooled the baseline,
  * mean hidden-representation L2 distance over (original, perturbed) pairs,
  * standard and domain-shifted accuracy.

Run from the repository root:

    python3 scripts/run_experiment.py --seeds 0,1,2
"""

import argparse
import time

from advtext.attack import EVAL_QUERY_BUDGET, SUCCESS, AttackConfig, attack
from advtext.embedding import MeanEmbeddingEncoder, build_neighbor_cache
from advtext.metrics import (
    accuracy,
    attack_success_rate,
    representation_distance,
    robust_accuracy,
)
from advtext.model import init_params
from advtext.synth import ToyWorldConfig, make_dataset, make_shifted_dataset, make_toy_world
from advtext.text import LabeledExample
from advtext.trainer import TrainingConfig, train

from make_toy_fixtures import DATASET_KWARGS, TEST_SEED, TRAIN_SEED, WORLD_SEED

HIDDEN_SIZE = 64
LR = 5e-3
N_EVAL = 150


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--n-train", type=int, default=2000)
    parser.add_argument("--n-eval", type=int, default=N_EVAL)
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]

    world = make_toy_world(ToyWorldConfig(seed=WORLD_SEED))
    cache = build_neighbor_cache(world.store)
    encoder = MeanEmbeddingEncoder(world.store)
    train_ds = make_dataset(
        world, args.n_train, seed=TRAIN_SEED, split="train", **DATASET_KWARGS
    )
    test_ds = make_dataset(
        world, max(300, args.n_eval), seed=TEST_SEED, split="test", **DATASET_KWARGS
    )
    shifted_ds = make_shifted_dataset(world, 300, seed=19)
    eval_attack = AttackConfig(query_budget=EVAL_QUERY_BUDGET)

    for seed in seeds:
        t0 = time.time()
        natural = init_params(world.store, HIDDEN_SIZE, 2, seed=seed)
        train(
            natural,
            train_ds,
            TrainingConfig(n_clean=4, n_adv=0, seed=seed, lr=LR),
        )

        defended = init_params(world.store, HIDDEN_SIZE, 2, seed=seed)
        reports = train(
            defended,
            train_ds,
            TrainingConfig(n_clean=1, n_adv=3, gamma=0.2, alpha=1.0, seed=seed, lr=LR),
            cache,
            world.lexicon,
            encoder,
        )

        subset = test_ds.examples[: args.n_eval]
        nat_results = [
            attack(natural, ex, eval_attack, cache, world.lexicon, encoder)
            for ex in subset
        ]
        def_results = [
            attack(defended, ex, eval_attack, cache, world.lexicon, encoder)
            for ex in subset
        ]

        fooled = [
            (r.original, r)
            for r in nat_results
            if r.status == SUCCESS and r.words_modified > 0
        ]
        adv_set = [LabeledExample(r.perturbed, ex.label) for ex, r in fooled]
        pairs = [(ex.text, r.perturbed) for ex, r in fooled]

        print(f"seed {seed} ({time.time() - t0:.0f}s)")
        print(
            f"  accuracy          natural {accuracy(natural, test_ds):.3f}"
            f"  defended {accuracy(defended, test_ds):.3f}"
        )
        print(
            f"  shifted accuracy  natural {accuracy(natural, shifted_ds):.3f}"
            f"  defended {accuracy(defended, shifted_ds):.3f}"
        )
        print(
            f"  attack success    natural {attack_success_rate(nat_results).success_rate:.3f}"
            f"  defended {attack_success_rate(def_results).success_rate:.3f}"
        )
        if adv_set:
            print(
                f"  robust accuracy   natural {robust_accuracy(natural, adv_set):.3f}"
                f"  defended {robust_accuracy(defended, adv_set):.3f}"
                f"  (n={len(adv_set)})"
            )
            print(
                f"  repr distance     natural {representation_distance(natural, pairs):.3f}"
                f"  defended {representation_distance(defended, pairs):.3f}"
            )
        print(
            "  adversarial epochs: "
            + ", ".join(
                f"e{r.epoch} gen={r.adv_generated} skip={r.adv_failed_skipped}"
                for r in reports
                if r.kind == "adversarial"
            )
        )


if __name__ == "__main__":
    main()
