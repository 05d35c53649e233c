"""Shared fixtures: a small synthetic world for unit tests and the
reporting hook that prints one line per acceptance criterion."""

import numpy as np
import pytest

from advtext.embedding import MeanEmbeddingEncoder, build_neighbor_cache
from advtext.model import init_params
from advtext.synth import ToyWorldConfig, make_dataset, make_toy_world
from advtext.trainer import TrainingConfig, train

# --- acceptance criterion reporting ----------------------------------------

ACCEPTANCE_RESULTS: list[str] = []


def record_criterion(num: int, name: str, ok: bool, detail: str = "") -> None:
    """Record and assert one acceptance criterion outcome."""
    status = "PASS" if ok else "FAIL"
    line = f"[criterion {num:2d}] {name}: {status}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_RESULTS.append(line)
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)


# --- small world fixtures ---------------------------------------------------


@pytest.fixture(scope="session")
def small_world():
    """90-word world: fast enough for brute-force oracles."""
    return make_toy_world(
        ToyWorldConfig(
            seed=3,
            n_pos_groups=6,
            n_neg_groups=6,
            n_neutral_groups=6,
            group_size=5,
            dim=16,
        )
    )


@pytest.fixture(scope="session")
def small_cache(small_world):
    return build_neighbor_cache(small_world.store)


@pytest.fixture(scope="session")
def small_encoder(small_world):
    return MeanEmbeddingEncoder(small_world.store)


@pytest.fixture(scope="session")
def small_train_data(small_world):
    return make_dataset(
        small_world,
        300,
        seed=21,
        split="train",
        min_len=12,
        max_len=20,
        min_sentiment=2,
        max_sentiment=3,
        spurious_align=1.0,
        label_noise=0.1,
    )


@pytest.fixture(scope="session")
def small_test_data(small_world):
    return make_dataset(
        small_world,
        60,
        seed=23,
        split="test",
        min_len=12,
        max_len=20,
        min_sentiment=2,
        max_sentiment=3,
        spurious_align=1.0,
        label_noise=0.1,
    )


@pytest.fixture(scope="session")
def small_model(small_world, small_train_data):
    """A naturally trained model on the small world."""
    params = init_params(small_world.store, 32, 2, seed=0)
    train(
        params,
        small_train_data,
        TrainingConfig(n_clean=3, n_adv=0, seed=0, lr=5e-3),
    )
    return params


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
