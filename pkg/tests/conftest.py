from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from densaug.phantom import CorpusConfig, generate_corpus  # noqa: E402
from densaug.records import Health  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus():
    """Tiny mixed corpus shared by fast tests (desk canvas, all categories)."""
    config = CorpusConfig(
        counts={
            "A": {"normal": 4, "with_masses": 2},
            "B": {"normal": 2, "with_masses": 2},
            "C": {"normal": 2, "with_masses": 2},
            "D": {"normal": 4, "with_masses": 2},
        },
        seed=123,
        canvas=(128, 80),
    )
    return generate_corpus(config)


@pytest.fixture(scope="session")
def healthy_records(small_corpus):
    return [r for r in small_corpus if r.health is Health.NORMAL]


@pytest.fixture(scope="session")
def mass_records(small_corpus):
    return [r for r in small_corpus if r.annotations]


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(20240809))
