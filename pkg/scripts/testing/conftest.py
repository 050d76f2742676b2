"""Shared fixtures; puts the repository root on sys.path so de_redist imports without installing."""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[2]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from de_redist.core import Bounds, Population  # noqa: E402


def make_population(genomes, low=-100.0, up=100.0, fitness=None) -> Population:
    """Population on a uniform box; 1-D lists become one-dimensional genomes"""
    genomes = np.asarray(genomes, dtype=float)
    if genomes.ndim == 1:
        genomes = genomes[:, None]
    pop = Population.from_genomes(genomes, Bounds.box(genomes.shape[1], low, up))
    if fitness is not None:
        for member, f in zip(pop, fitness):
            member.fitness = float(f)
    return pop


@pytest.fixture
def population_factory():
    return make_population
