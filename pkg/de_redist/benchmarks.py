"""
Benchmark Suite
===============

Desk-scale stand-ins for the CEC suites:
1. Six textbook bases: sphere, rosenbrock, rastrigin, ackley, griewank, schwefel
2. Shifted-rotated builder: eval(x) = base(M·(x - o)), optimum moved to o
3. CEC-style composition builder with distance-weighted components
4. Suite manifest (CSV) so landscapes can be rebuilt from (name, dim, seed)

Canonical bounds are [-100, 100]^n, Schwefel [-500, 500]^n.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .core import Bounds, ConfigurationError, RngStream, UsageError, derive_seed

ORTHOGONALITY_TOL = 1e-9
COMPOSITION_SINGULARITY = 1e-12
SCHWEFEL_OPTIMUM = 420.9687462275036
SCHWEFEL_CONSTANT = 418.9828872724339


# ============================================================================
# BASE FUNCTIONS
# ============================================================================

def sphere(x: np.ndarray) -> float:
    return float(np.sum(x ** 2))


def rosenbrock(x: np.ndarray) -> float:
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (x[:-1] - 1.0) ** 2))


def rastrigin(x: np.ndarray) -> float:
    return float(10.0 * x.size + np.sum(x ** 2 - 10.0 * np.cos(2.0 * np.pi * x)))


def ackley(x: np.ndarray) -> float:
    d = x.size
    sum1 = np.sum(x ** 2)
    sum2 = np.sum(np.cos(2.0 * np.pi * x))
    return float(-20.0 * np.exp(-0.2 * np.sqrt(sum1 / d)) - np.exp(sum2 / d) + 20.0 + np.e)


def griewank(x: np.ndarray) -> float:
    sum_term = np.sum(x ** 2) / 4000.0
    prod_term = np.prod(np.cos(x / np.sqrt(np.arange(1, x.size + 1))))
    return float(sum_term - prod_term + 1.0)


def schwefel(x: np.ndarray) -> float:
    """
    418.9829·n - sum x_j·sin(sqrt|x_j|) inside [-500, 500]; outside, the
    coordinate is folded back and penalized quadratically (CEC form) so the
    optimum at x_j = 420.9687... stays global everywhere.
    """
    d = x.size
    g = np.empty(d)
    inside = np.abs(x) <= 500.0
    g[inside] = x[inside] * np.sin(np.sqrt(np.abs(x[inside])))

    high = x > 500.0
    y = 500.0 - np.mod(x[high], 500.0)
    g[high] = y * np.sin(np.sqrt(np.abs(y))) - (x[high] - 500.0) ** 2 / (10000.0 * d)

    low = x < -500.0
    y = np.mod(x[low], 500.0) - 500.0
    g[low] = y * np.sin(np.sqrt(np.abs(y))) - (x[low] + 500.0) ** 2 / (10000.0 * d)

    return float(SCHWEFEL_CONSTANT * d - np.sum(g))


@dataclass(frozen=True)
class BaseFunction:
    """Textbook function with canonical box and optimum coordinate (same on every dimension)"""
    name: str
    func: Callable[[np.ndarray], float]
    low: float
    up: float
    optimum: float = 0.0
    f_star: float = 0.0


BASE_FUNCTIONS: Dict[str, BaseFunction] = {
    "sphere": BaseFunction("sphere", sphere, -100.0, 100.0),
    "rosenbrock": BaseFunction("rosenbrock", rosenbrock, -100.0, 100.0, optimum=1.0),
    "rastrigin": BaseFunction("rastrigin", rastrigin, -100.0, 100.0),
    "ackley": BaseFunction("ackley", ackley, -100.0, 100.0),
    "griewank": BaseFunction("griewank", griewank, -100.0, 100.0),
    "schwefel": BaseFunction("schwefel", schwefel, -500.0, 500.0, optimum=SCHWEFEL_OPTIMUM),
}


def eval_base(name: str, x) -> float:
    """Evaluate a base function by name"""
    if name not in BASE_FUNCTIONS:
        raise UsageError(f"unknown base function '{name}' (known: {', '.join(BASE_FUNCTIONS)})")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise UsageError(f"{name} needs a non-empty 1-D vector, got shape {x.shape}")
    return BASE_FUNCTIONS[name].func(x)


# ============================================================================
# OBJECTIVE FUNCTION
# ============================================================================

class ObjectiveFunction:
    """
    Counted objective: every call adds exactly one to `evaluations`.

    The counter belongs to one run; use fresh() to hand a clean copy to
    another run.
    """

    def __init__(self, name: str, dim: int, bounds: Bounds,
                 func: Callable[[np.ndarray], float], f_star: float, x_star,
                 base: str = "", seed: Optional[int] = None, shift=None):
        if bounds.dim != dim:
            raise ConfigurationError(f"{name}: bounds dim {bounds.dim} != dim {dim}")
        self.name = name
        self.dim = int(dim)
        self.bounds = bounds
        self.func = func
        self.f_star = float(f_star)
        self.x_star = np.asarray(x_star, dtype=float)
        self.base = base or name
        self.seed = seed
        self.shift = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float)
        self.evaluations = 0

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise UsageError(f"{self.name} expects a vector of length {self.dim}, got shape {x.shape}")
        self.evaluations += 1
        return float(self.func(x))

    def error(self, fitness: float) -> float:
        return float(fitness) - self.f_star

    def fresh(self) -> "ObjectiveFunction":
        return ObjectiveFunction(self.name, self.dim, self.bounds, self.func, self.f_star,
                                 self.x_star, base=self.base, seed=self.seed, shift=self.shift)

    def __repr__(self):
        return f"ObjectiveFunction({self.name!r}, dim={self.dim}, evaluations={self.evaluations})"


def make_base(name: str, dim: int) -> ObjectiveFunction:
    """Unshifted base function on its canonical box"""
    if name not in BASE_FUNCTIONS:
        raise ConfigurationError(f"unknown base function '{name}'")
    spec = BASE_FUNCTIONS[name]
    bounds = Bounds.box(dim, spec.low, spec.up)
    return ObjectiveFunction(name, dim, bounds, spec.func, spec.f_star,
                             np.full(dim, spec.optimum), base=name)


# ============================================================================
# SHIFT / ROTATE
# ============================================================================

@dataclass(frozen=True)
class Transform:
    """z = M·(x - o); M optional, must be orthogonal"""
    shift: np.ndarray
    rotation: Optional[np.ndarray] = None

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=float).reshape(-1)
        object.__setattr__(self, "shift", shift)
        if self.rotation is not None:
            m = np.asarray(self.rotation, dtype=float)
            if m.shape != (shift.size, shift.size):
                raise ConfigurationError(
                    f"rotation shape {m.shape} does not match shift length {shift.size}")
            if not np.allclose(m.T @ m, np.eye(shift.size), rtol=0.0, atol=ORTHOGONALITY_TOL):
                raise ConfigurationError("rotation matrix is not orthogonal (MᵀM != I)")
            object.__setattr__(self, "rotation", m)

    @property
    def dim(self) -> int:
        return int(self.shift.size)

    def apply(self, x: np.ndarray) -> np.ndarray:
        z = x - self.shift
        if self.rotation is not None:
            z = self.rotation @ z
        return z


def random_rotation(dim: int, rng: RngStream) -> np.ndarray:
    """Orthonormalized seeded Gaussian matrix (QR with sign fix)"""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def make_shifted_rotated(base: ObjectiveFunction, transform: Transform,
                         name: Optional[str] = None, seed: Optional[int] = None) -> ObjectiveFunction:
    """
    eval(x) = base(M·(x - o)), with the base optimum recentred to the origin
    first, so the new optimum sits at o with the same f_star.
    """
    if transform.dim != base.dim:
        raise ConfigurationError(
            f"transform dim {transform.dim} does not match {base.name} dim {base.dim}")
    if not base.bounds.contains(transform.shift):
        raise ConfigurationError(f"shift for {base.name} lies outside its bounds")

    inner = base.func
    centre = base.x_star.copy()

    def shifted_rotated(x: np.ndarray) -> float:
        return inner(transform.apply(x) + centre)

    return ObjectiveFunction(
        name or f"sr_{base.name}", base.dim, base.bounds, shifted_rotated, base.f_star,
        transform.shift.copy(), base=base.base, seed=seed, shift=transform.shift)


# ============================================================================
# COMPOSITION
# ============================================================================

@dataclass(frozen=True)
class CompositionComponent:
    function: ObjectiveFunction
    sigma: float
    bias: float
    lam: float = 1.0


def make_composition(components: Sequence[CompositionComponent], name: str = "composition",
                     seed: Optional[int] = None) -> ObjectiveFunction:
    """
    CEC-style composition:

        w_i = exp(-|x - o_i|^2 / (2·dim·sigma_i^2)) / |x - o_i|
        f(x) = sum_i w_i/sum(w) · (lam_i·f_i(x) + bias_i)

    o_i is each component's optimum. The first component carries the global
    optimum, so its lam·f* + bias must be the smallest.
    """
    if len(components) < 2:
        raise ConfigurationError("a composition needs at least two components")
    dim = components[0].function.dim
    for c in components:
        if c.function.dim != dim:
            raise ConfigurationError(
                f"component {c.function.name} has dim {c.function.dim}, expected {dim}")
        if c.sigma <= 0:
            raise ConfigurationError(f"component {c.function.name}: sigma must be positive")

    levels = [c.lam * c.function.f_star + c.bias for c in components]
    if levels[0] > min(levels):
        raise ConfigurationError("the first component must hold the lowest lam·f* + bias")

    optima = np.array([c.function.x_star for c in components])
    funcs = [c.function.func for c in components]
    sigmas = np.array([c.sigma for c in components], dtype=float)
    biases = np.array([c.bias for c in components], dtype=float)
    lams = np.array([c.lam for c in components], dtype=float)

    def composed(x: np.ndarray) -> float:
        dist2 = np.sum((x - optima) ** 2, axis=1)
        dist = np.sqrt(dist2)
        hit = np.flatnonzero(dist < COMPOSITION_SINGULARITY)
        if hit.size:
            i = int(hit[0])
            return float(lams[i] * funcs[i](x) + biases[i])

        weights = np.exp(-dist2 / (2.0 * dim * sigmas ** 2)) / dist
        total = weights.sum()
        if total == 0.0:
            weights = np.ones_like(weights)
            total = weights.sum()
        values = np.array([lam * f(x) for lam, f in zip(lams, funcs)]) + biases
        return float(np.dot(weights / total, values))

    first = components[0].function
    return ObjectiveFunction(name, dim, first.bounds, composed, levels[0], first.x_star.copy(),
                             base="composition", seed=seed, shift=first.x_star)


# ============================================================================
# SUITE
# ============================================================================

COMPOSITIONS = {
    "composition_2": [("rastrigin", 10.0, 0.0), ("griewank", 20.0, 100.0)],
    "composition_3": [("rastrigin", 10.0, 0.0), ("ackley", 20.0, 100.0), ("sphere", 30.0, 200.0)],
}


def list_functions() -> List[str]:
    names = list(BASE_FUNCTIONS)
    names += [f"sr_{b}" for b in BASE_FUNCTIONS]
    names += list(COMPOSITIONS)
    return names


def _shifted_rotated(base_name: str, dim: int, seed: int) -> ObjectiveFunction:
    base = make_base(base_name, dim)
    rng = RngStream(seed)
    spec = BASE_FUNCTIONS[base_name]
    shift = rng.uniform(0.8 * spec.low, 0.8 * spec.up, dim)
    rotation = random_rotation(dim, rng)
    return make_shifted_rotated(base, Transform(shift, rotation), seed=seed)


def build_function(name: str, dim: int, seed: int) -> ObjectiveFunction:
    """Rebuild one suite function from (name, dim, seed)"""
    if name in BASE_FUNCTIONS:
        fn = make_base(name, dim)
        fn.seed = seed
        return fn
    if name.startswith("sr_") and name[3:] in BASE_FUNCTIONS:
        return _shifted_rotated(name[3:], dim, seed)
    if name in COMPOSITIONS:
        components = []
        for k, (base_name, sigma, bias) in enumerate(COMPOSITIONS[name]):
            fn = _shifted_rotated(base_name, dim, derive_seed(seed, name, "component", k))
            components.append(CompositionComponent(fn, sigma, bias))
        return make_composition(components, name=name, seed=seed)
    raise ConfigurationError(f"unknown suite function '{name}' (known: {', '.join(list_functions())})")


def build_suite(dim: int, seed: int, names: Optional[Iterable[str]] = None) -> Dict[str, ObjectiveFunction]:
    """Every requested function, each with its own seed derived from the suite seed"""
    names = list(names) if names is not None else list_functions()
    return {name: build_function(name, dim, derive_seed(seed, name, dim)) for name in names}


# ============================================================================
# MANIFEST
# ============================================================================

MANIFEST_FIELDS = ["name", "base", "dim", "seed", "shift", "f_star"]
NO_SEED = "none"


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    base: str
    dim: int
    seed: Optional[int]
    shift: np.ndarray
    f_star: float


def write_manifest(functions: Iterable[ObjectiveFunction], path) -> Path:
    """One CSV row per function; the shift vector is one space-separated field"""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_FIELDS)
        for fn in functions:
            writer.writerow([
                fn.name,
                fn.base,
                fn.dim,
                NO_SEED if fn.seed is None else fn.seed,
                " ".join(repr(float(v)) for v in fn.shift),
                repr(fn.f_star),
            ])
    return path


def read_manifest(path) -> List[ManifestEntry]:
    entries = []
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != MANIFEST_FIELDS:
            raise ConfigurationError(f"{path}: expected columns {MANIFEST_FIELDS}, got {reader.fieldnames}")
        for row in reader:
            entries.append(ManifestEntry(
                name=row["name"],
                base=row["base"],
                dim=int(row["dim"]),
                seed=None if row["seed"] == NO_SEED else int(row["seed"]),
                shift=np.array([float(v) for v in row["shift"].split()]),
                f_star=float(row["f_star"]),
            ))
    return entries


def suite_from_manifest(path) -> Dict[str, ObjectiveFunction]:
    """Rebuild every manifest entry and check its stored shift and f_star"""
    suite = {}
    for entry in read_manifest(path):
        if entry.seed is not None:
            fn = build_function(entry.name, entry.dim, entry.seed)
        elif entry.name in BASE_FUNCTIONS:
            fn = make_base(entry.name, entry.dim)
        else:
            raise ConfigurationError(f"{entry.name}: no seed in the manifest, cannot rebuild")
        if not np.array_equal(fn.shift, entry.shift) or not math.isclose(fn.f_star, entry.f_star):
            raise ConfigurationError(f"{entry.name}: manifest does not match the rebuilt function")
        suite[entry.name] = fn
    return suite
