"""
Numeric foundation
==================

Bounds, individuals and populations, the population geometry used by the
redistribution controller (median center, normalized Manhattan diversity),
opposite vectors, midpoint boundary repair and the seeded random stream
every run owns.

All functions here are pure; RngStream is single-owner (one per run).
"""

import hashlib
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np


# ============================================================================
# ERRORS
# ============================================================================

class DERedistError(Exception):
    """Base class for every error raised by de_redist"""


class UsageError(DERedistError):
    """An operation was called outside its preconditions"""


class ConfigurationError(DERedistError):
    """Engine, benchmark or controller settings are invalid"""


class ObjectiveError(DERedistError):
    """The objective raised or produced a non-finite value"""


# ============================================================================
# RANDOMNESS
# ============================================================================

class RngStream:
    """
    Seeded random stream (PCG64).

    Same seed + same call sequence gives the same draws, bit for bit.
    Never share one stream between runs.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def standard_cauchy(self, size=None):
        return self._gen.standard_cauchy(size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def permutation(self, x):
        return self._gen.permutation(x)


def derive_seed(master: int, *keys) -> int:
    """
    Stable 64-bit seed for a cell: master seed plus a sha256 hash of the keys.

    Example: derive_seed(0, "sr_rastrigin", "IRV", 0.01, 3)
    """
    key = "|".join(str(k) for k in keys)
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    return (int(master) + int(digest[:16], 16)) & 0xFFFFFFFFFFFFFFFF


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class Bounds:
    """Per-dimension box [low_j, up_j]"""
    low: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        low = np.asarray(self.low, dtype=float).reshape(-1)
        up = np.asarray(self.up, dtype=float).reshape(-1)
        if low.size == 0:
            raise ConfigurationError("bounds need at least one dimension")
        if low.shape != up.shape:
            raise ConfigurationError(
                f"bounds length mismatch: low has {low.size}, up has {up.size}")
        if not np.all(np.isfinite(low)) or not np.all(np.isfinite(up)):
            raise ConfigurationError("bounds must be finite")
        if not np.all(low < up):
            raise ConfigurationError("every dimension needs low_j < up_j")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "up", up)

    @classmethod
    def box(cls, dim: int, low: float, up: float) -> "Bounds":
        """Same [low, up] on every dimension"""
        if dim < 1:
            raise ConfigurationError(f"dim must be positive, got {dim}")
        return cls(np.full(dim, float(low)), np.full(dim, float(up)))

    @property
    def dim(self) -> int:
        return int(self.low.size)

    @property
    def width(self) -> np.ndarray:
        return self.up - self.low

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == self.low.shape and bool(np.all((x >= self.low) & (x <= self.up)))

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        """n points drawn uniformly from the box, shape (n, dim)"""
        return rng.uniform(self.low, self.up, (n, self.dim))


@dataclass
class Individual:
    """Decision vector plus cached fitness (None until evaluated)"""
    genome: np.ndarray
    fitness: Optional[float] = None

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    def copy(self) -> "Individual":
        return Individual(self.genome.copy(), self.fitness)


@dataclass
class Population:
    """Ordered members sharing one Bounds, tagged with the generation index g"""
    members: List[Individual]
    bounds: Bounds
    generation: int = 0

    def __post_init__(self):
        if not self.members:
            raise UsageError("a population needs at least one member")
        for member in self.members:
            if member.genome.shape != (self.bounds.dim,):
                raise UsageError(
                    f"genome length {member.genome.size} does not match bounds dim {self.bounds.dim}")

    @classmethod
    def from_genomes(cls, genomes: Iterable, bounds: Bounds, generation: int = 0) -> "Population":
        members = [Individual(np.array(g, dtype=float)) for g in genomes]
        return cls(members, bounds, generation)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i: int) -> Individual:
        return self.members[i]

    def genomes(self) -> np.ndarray:
        """Member genomes stacked, shape (NP, dim)"""
        return np.array([m.genome for m in self.members])

    def fitnesses(self) -> np.ndarray:
        if not self.is_evaluated():
            raise UsageError("population has unevaluated members")
        return np.array([m.fitness for m in self.members], dtype=float)

    def is_evaluated(self) -> bool:
        return all(m.evaluated for m in self.members)

    def best_index(self) -> int:
        return int(np.argmin(self.fitnesses()))

    def best_fitness(self) -> float:
        return float(np.min(self.fitnesses()))

    def copy(self) -> "Population":
        return Population([m.copy() for m in self.members], self.bounds, self.generation)


# ============================================================================
# POPULATION GEOMETRY
# ============================================================================

def population_center(pop: Population) -> np.ndarray:
    """
    Per-dimension median of the member genomes.

    Even member counts give the midpoint of the two central order statistics.
    """
    if pop is None or len(pop) == 0:
        raise UsageError("population_center needs a non-empty population")
    return np.median(pop.genomes(), axis=0)


def diversity(pop: Population) -> float:
    """
    Mean normalized Manhattan distance from the members to the median center:

        div = sum_i sum_j |x_ij - m_j| / (up_j - low_j) / NP

    Zero iff all genomes coincide; never above dim / 2.
    """
    genomes = pop.genomes()
    center = np.median(genomes, axis=0)
    deviation = np.abs(genomes - center) / pop.bounds.width
    return float(deviation.sum() / len(pop))


def opposite_vector(x, bounds: Bounds) -> np.ndarray:
    """
    x°_j = up_j + low_j - x_j

    Limits map exactly onto each other and rounding never leaves the box.
    """
    x = np.asarray(x, dtype=float)
    if not bounds.contains(x):
        raise UsageError("opposite_vector needs a point inside the bounds")
    out = np.clip(bounds.up + bounds.low - x, bounds.low, bounds.up)
    out = np.where(x == bounds.low, bounds.up, out)
    return np.where(x == bounds.up, bounds.low, out)


def repair_bounds(child, parent, bounds: Bounds) -> np.ndarray:
    """
    Midpoint repair: a component that left the box is reset halfway between
    the parent's value and the violated limit. In-bounds components are kept.
    """
    child = np.array(child, dtype=float)
    parent = np.asarray(parent, dtype=float)
    below = child < bounds.low
    above = child > bounds.up
    child[below] = 0.5 * (parent[below] + bounds.low[below])
    child[above] = 0.5 * (parent[above] + bounds.up[above])
    return child
