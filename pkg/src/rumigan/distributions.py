"""Synthetic distributions, positive/negative splits, and grid discretization.

Scenario geometry lives in :data:`SCENARIOS`. Every Gaussian is written as
``N(mean, std)``.

========================  ===============================================  ==================================
scenario                  positive                                         negative
========================  ===============================================  ==================================
disjoint-1d               1/2 N(-4, .5) + 1/2 N(-1.5, .5)                  1/2 N(1.5, .5) + 1/2 N(4, .5)
overlapping-1d            1/2 N(-3, .5) + 1/2 N(0, .5)                     1/2 N(0, .5) + 1/2 N(3, .5)
disjoint-2d               4 modes at even angles of a radius-4 ring, sd .25  the 4 odd-angle modes
unbalanced-1d             1/2 N(-3, .4) + 1/2 N(3, .4), 5% pool            N(0, .7)
unbalanced-2d             even ring modes, 5% pool                         odd ring modes
========================  ===============================================  ==================================

In the unbalanced scenarios the positive sampler draws with replacement from
a fixed pool of ``ceil(minority_fraction * NOMINAL_POOL)`` points (200 by
default); the full parent distribution is kept on the split as ``reference``
for evaluation. ``mnist-*`` scenarios are built by :mod:`rumigan.mnist`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

NOMINAL_POOL = 4000
DEFAULT_MINORITY_FRACTION = 0.05


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def isotropic(cls, mean, std: float) -> "Gaussian":
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        return cls(mean, np.eye(mean.size) * std ** 2)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class Mixture:
    components: tuple[tuple[float, "DistSpec"], ...]

    def __post_init__(self):
        comps = tuple((float(w), c) for w, c in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if len({c.dim for _, c in comps}) != 1:
            raise ValueError("mixture components must share a dimension")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0][1].dim


@dataclass(frozen=True)
class GridDensity:
    """Probability mass on a finite set of distinct points."""

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.float64)
        if support.ndim == 1:
            support = support[:, None]
        mass = np.asarray(self.mass, dtype=np.float64).reshape(-1)
        if support.shape[0] != mass.size:
            raise ValueError("support and mass lengths differ")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError("mass must be non-negative and sum to 1")
        if np.unique(support, axis=0).shape[0] != support.shape[0]:
            raise ValueError("support points must be distinct")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @property
    def dim(self) -> int:
        return self.support.shape[1]


@dataclass(frozen=True)
class Grid:
    density: GridDensity

    @property
    def dim(self) -> int:
        return self.density.dim


@dataclass(frozen=True, eq=False)
class Dataset:
    """Finite point set sampled uniformly with replacement; ``points=None`` means not loaded."""

    points: np.ndarray | None
    dim_: int
    name: str = "dataset"

    @property
    def dim(self) -> int:
        return self.dim_


DistSpec = Union[Gaussian, Mixture, Grid, Dataset]


@dataclass(frozen=True, eq=False)
class SplitSpec:
    positive: DistSpec
    negative: DistSpec
    mode: str
    minority_fraction: float = 1.0
    reference: DistSpec | None = None
    name: str = ""

    def __post_init__(self):
        if self.mode not in ("disjoint", "overlapping", "unbalanced"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.positive.dim != self.negative.dim:
            raise ValueError("positive and negative dimensions differ")
        if not 0.0 < self.minority_fraction <= 1.0:
            raise ValueError("minority_fraction must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return self.positive.dim

    @property
    def target(self) -> DistSpec:
        """Distribution the generator should match (the parent class when unbalanced)."""
        return self.reference if self.reference is not None else self.positive

    def swapped(self) -> "SplitSpec":
        return SplitSpec(self.negative, self.positive, self.mode, 1.0, None, self.name + ":swapped")


# -- sampling / density ------------------------------------------------------

def sample(spec: DistSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` points as an ``(n, dim)`` array; deterministic under ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    if isinstance(spec, Gaussian):
        return spec.mean + rng.standard_normal((n, spec.dim)) @ spec._chol.T
    if isinstance(spec, Mixture):
        weights = np.array([w for w, _ in spec.components])
        counts = rng.multinomial(n, weights)
        parts = [sample(c, k, rng) for (_, c), k in zip(spec.components, counts) if k > 0]
        out = np.concatenate(parts, axis=0)
        return out[rng.permutation(n)]
    if isinstance(spec, Grid):
        idx = rng.choice(spec.density.mass.size, size=n, p=spec.density.mass)
        return spec.density.support[idx].copy()
    if isinstance(spec, Dataset):
        if spec.points is None:
            raise RuntimeError(f"dataset {spec.name!r} is not loaded")
        idx = rng.integers(0, spec.points.shape[0], size=n)
        return spec.points[idx].copy()
    raise TypeError(f"not a distribution spec: {spec!r}")


def log_pdf(spec: DistSpec, x) -> np.ndarray:
    """Log density at each row of ``x``; ``-inf`` where the density vanishes."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1 and spec.dim > 1 or x.ndim == 0
    x = np.atleast_2d(x) if spec.dim > 1 else x.reshape(-1, 1)
    if isinstance(spec, Gaussian):
        d = x - spec.mean
        z = np.linalg.solve(spec._chol, d.T)
        logdet = 2.0 * np.sum(np.log(np.diag(spec._chol)))
        out = -0.5 * np.sum(z * z, axis=0) - 0.5 * (spec.dim * math.log(2 * math.pi) + logdet)
    elif isinstance(spec, Mixture):
        with np.errstate(divide="ignore"):
            terms = np.stack([math.log(w) + log_pdf(c, x) if w > 0 else np.full(len(x), -np.inf)
                              for w, c in spec.components])
        m = terms.max(axis=0)
        safe = np.where(np.isfinite(m), m, 0.0)
        with np.errstate(divide="ignore"):
            out = safe + np.log(np.sum(np.exp(terms - safe), axis=0))
        out = np.where(np.isfinite(m), out, -np.inf)
    elif isinstance(spec, Grid):
        sup = spec.density.support
        hit = np.all(x[:, None, :] == sup[None, :, :], axis=2)
        mass = hit.astype(np.float64) @ spec.density.mass
        with np.errstate(divide="ignore"):
            out = np.log(mass)
    elif isinstance(spec, Dataset):
        raise TypeError("dataset distributions have no density")
    else:
        raise TypeError(f"not a distribution spec: {spec!r}")
    return out[0] if single else out


def pdf(spec: DistSpec, x) -> np.ndarray:
    """Exact density (grid specs: point mass, 0 off-support)."""
    return np.exp(log_pdf(spec, x))


def discretize(spec: DistSpec, support) -> GridDensity:
    """Mass proportional to ``pdf`` at ``support`` points, renormalized."""
    support = np.asarray(support, dtype=np.float64)
    if support.ndim == 1:
        support = support[:, None]
    lp = log_pdf(spec, support)
    if not np.any(np.isfinite(lp)):
        raise ValueError("density vanishes on the whole support")
    w = np.exp(lp - lp[np.isfinite(lp)].max())
    return GridDensity(support, w / w.sum())


# -- scenarios -----------------------------------------------------------------

def _mix1d(means: Sequence[float], std: float) -> Mixture:
    w = 1.0 / len(means)
    return Mixture(tuple((w, Gaussian.isotropic([m], std)) for m in means))


def _ring(indices: Sequence[int], radius: float = 4.0, std: float = 0.25, modes: int = 8) -> Mixture:
    w = 1.0 / len(indices)
    comps = []
    for k in indices:
        ang = 2 * math.pi * k / modes
        comps.append((w, Gaussian.isotropic([radius * math.cos(ang), radius * math.sin(ang)], std)))
    return Mixture(tuple(comps))


def _minority_pool(parent: DistSpec, fraction: float, seed) -> Dataset:
    size = math.ceil(fraction * NOMINAL_POOL - 1e-9)
    points = sample(parent, size, np.random.default_rng([int(seed), 0x5EED]))
    return Dataset(points, parent.dim, "minority-pool")


def _unbalanced(name, parent, negative, seed, fraction) -> SplitSpec:
    pool = _minority_pool(parent, fraction, seed)
    return SplitSpec(pool, negative, "unbalanced", fraction, parent, name)


SCENARIOS = {
    "disjoint-1d": lambda seed, frac: SplitSpec(
        _mix1d([-4.0, -1.5], 0.5), _mix1d([1.5, 4.0], 0.5), "disjoint", name="disjoint-1d"),
    "overlapping-1d": lambda seed, frac: SplitSpec(
        _mix1d([-3.0, 0.0], 0.5), _mix1d([0.0, 3.0], 0.5), "overlapping", name="overlapping-1d"),
    "disjoint-2d": lambda seed, frac: SplitSpec(
        _ring([0, 2, 4, 6]), _ring([1, 3, 5, 7]), "disjoint", name="disjoint-2d"),
    "unbalanced-1d": lambda seed, frac: _unbalanced(
        "unbalanced-1d", _mix1d([-3.0, 3.0], 0.4), Gaussian.isotropic([0.0], 0.7), seed, frac),
    "unbalanced-2d": lambda seed, frac: _unbalanced(
        "unbalanced-2d", _ring([0, 2, 4, 6]), _ring([1, 3, 5, 7]), seed, frac),
}
DATASET_SCENARIOS = ("mnist-even-odd", "mnist-overlap", "mnist-heldout")


def make_split(scenario: str, seed: int = 0, minority_fraction: float = DEFAULT_MINORITY_FRACTION,
               dataset=None) -> SplitSpec:
    """Build the named positive/negative split; ``mnist-*`` need an IDX dataset."""
    if scenario in SCENARIOS:
        return SCENARIOS[scenario](seed, minority_fraction)
    if scenario in DATASET_SCENARIOS:
        if dataset is None:
            raise RuntimeError(f"scenario {scenario!r} needs an MNIST dataset")
        from .mnist import make_mnist_split
        return make_mnist_split(dataset, scenario, seed=seed)
    raise ValueError(f"unknown scenario {scenario!r}; known: "
                     f"{sorted(SCENARIOS) + list(DATASET_SCENARIOS)}")


def mixture_of(pos: DistSpec, neg: DistSpec, w_pos: float = 0.5) -> Mixture:
    """The pooled background distribution ``w_pos * pos + (1 - w_pos) * neg``."""
    return Mixture(((w_pos, pos), (1.0 - w_pos, neg)))
