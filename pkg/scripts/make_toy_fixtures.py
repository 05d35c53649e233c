"""Generate the bundled toy experiment fixtures.

Writes a counter-fitted-style embedding file, a POS lexicon, and train /
test / domain-shifted datasets built from the synthetic sentiment world, in
the on-disk formats the CLI consumes. Run from the repository root:

    python3 scripts/make_toy_fixtures.py --out-dir fixtures
"""

import argparse
import json
from pathlib import Path

from advtext.embedding import save_embeddings
from advtext.synth import (
    ToyWorldConfig,
    make_dataset,
    make_shifted_dataset,
    make_toy_world,
)
from advtext.text import save_dataset

# Sentence composition used throughout the experiments: texts long enough
# that the 10% modification cap covers the 2-3 sentiment-bearing words, a
# fully planted spurious correlation, and enough label noise that the
# spurious feature explains the training labels better than the robust one.
DATASET_KWARGS = dict(
    min_len=20,
    max_len=35,
    min_sentiment=2,
    max_sentiment=3,
    spurious_align=1.0,
    label_noise=0.1,
)

WORLD_SEED = 7
TRAIN_SEED = 11
TEST_SEED = 13
SHIFT_SEED = 17


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="fixtures")
    parser.add_argument("--n-train", type=int, default=2000)
    parser.add_argument("--n-test", type=int, default=300)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    world = make_toy_world(ToyWorldConfig(seed=WORLD_SEED))
    save_embeddings(world.store, out / "embeddings.txt")
    world.lexicon.save(out / "lexicon.tsv")

    train_ds = make_dataset(
        world, args.n_train, seed=TRAIN_SEED, split="train", **DATASET_KWARGS
    )
    test_ds = make_dataset(
        world, args.n_test, seed=TEST_SEED, split="test", **DATASET_KWARGS
    )
    shifted_ds = make_shifted_dataset(world, args.n_test, seed=SHIFT_SEED)
    save_dataset(train_ds, out / "train.jsonl")
    save_dataset(test_ds, out / "test.jsonl")
    save_dataset(shifted_ds, out / "shifted.jsonl")

    (out / "train_config.json").write_text(
        json.dumps(
            {
                "n_clean": 1,
                "n_adv": 3,
                "gamma": 0.2,
                "alpha": 1.0,
                "lr": 5e-3,
                "seed": 0,
                "hidden_size": 64,
                "attack": {"query_budget": 200},
            },
            indent=2,
        )
        + "\n"
    )

    print(f"wrote fixtures for {len(world.store)}-word vocabulary to {out}/")
    print(f"  train: {len(train_ds)}  test: {len(test_ds)}  shifted: {len(shifted_ds)}")


if __name__ == "__main__":
    main()
