"""Deformed-GUE sampling: H = n^{-1/2} W + diag(h0).

W is a Hermitian Gaussian matrix (off-diagonal real/imaginary parts of
variance 1/2 each, real diagonal of variance 1) and h0 is a deterministic
or random diagonal deformation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InsufficientDataError, InvalidDimensionError, NumericalFailureError, RecipeError
from .seeding import STREAM_GUE, STREAM_H0, generator, trial_seed


# ---------------------------------------------------------------------------
# H0 recipes


@dataclass(frozen=True)
class UniformLaw:
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise RecipeError(f"uniform law needs lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class GaussianLaw:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise RecipeError(f"gaussian law needs sigma > 0, got {self.sigma}")


@dataclass(frozen=True)
class AtomsLaw:
    """Discrete law on finitely many points with given probabilities."""

    locations: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.locations) != len(self.weights) or not self.locations:
            raise RecipeError("atoms law needs matching, nonempty locations/weights")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise RecipeError("atoms law weights must be positive and sum to 1")


Law = Union[UniformLaw, GaussianLaw, AtomsLaw]


@dataclass(frozen=True)
class Explicit:
    """Fixed list of H0 eigenvalues."""

    values: tuple

    def __init__(self, values: Sequence[float]):
        object.__setattr__(self, "values", tuple(float(v) for v in values))


@dataclass(frozen=True)
class TwoPoint:
    """n/2 eigenvalues at -a and n/2 at +a; requires even n."""

    a: float


@dataclass(frozen=True)
class IID:
    """H0 eigenvalues drawn i.i.d. from a law with finite second moment."""

    law: Law


H0Recipe = Union[Explicit, TwoPoint, IID]


@dataclass(frozen=True)
class EnsembleSpec:
    """Complete description of one deformed-GUE draw."""

    n: int
    h0: H0Recipe
    seed: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise InvalidDimensionError(f"matrix dimension must be a positive integer, got {self.n}")
        if not 0 <= int(self.seed) < 2**64:
            raise RecipeError(f"seed must fit in 64 unsigned bits, got {self.seed}")


@dataclass(frozen=True)
class SpectralSample:
    """Sorted eigenvalues of one draw plus the H0 diagonal that produced it."""

    eigenvalues: np.ndarray
    h0_used: np.ndarray

    def __post_init__(self):
        for name in ("eigenvalues", "h0_used"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.all(np.isfinite(self.eigenvalues)):
            raise NumericalFailureError("non-finite eigenvalues in sample")

    @property
    def n(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class EmpiricalMeasure:
    """A collection of samples sharing one dimension."""

    samples: tuple
    n: int

    def __post_init__(self):
        if any(s.n != self.n for s in self.samples):
            raise RecipeError("all samples in an empirical measure must share n")

    @property
    def trials(self) -> int:
        return len(self.samples)


# ---------------------------------------------------------------------------
# Sampling


def sample_gue(n: int, seed: int) -> np.ndarray:
    """One draw of the scaled GUE matrix n^{-1/2} W.

    Hermitian symmetry is exact: only the upper triangle is drawn and the
    lower triangle is its conjugate.
    """
    if not isinstance(n, int) or n < 1:
        raise InvalidDimensionError(f"matrix dimension must be a positive integer, got {n}")
    rng = generator(seed, STREAM_GUE)
    diag = rng.standard_normal(n)
    re = rng.standard_normal((n, n)) * math.sqrt(0.5)
    im = rng.standard_normal((n, n)) * math.sqrt(0.5)
    upper = np.triu(re + 1j * im, k=1)
    w = upper + upper.conj().T + np.diag(diag.astype(complex))
    return w / math.sqrt(n)


def realize_h0(recipe: H0Recipe, n: int, seed: int) -> np.ndarray:
    """Diagonal of H0 for this recipe, sorted ascending."""
    if not isinstance(n, int) or n < 1:
        raise InvalidDimensionError(f"matrix dimension must be a positive integer, got {n}")
    if isinstance(recipe, Explicit):
        if len(recipe.values) != n:
            raise RecipeError(f"explicit H0 has {len(recipe.values)} entries, expected {n}")
        h = np.asarray(recipe.values, dtype=float)
    elif isinstance(recipe, TwoPoint):
        if n % 2 != 0:
            raise RecipeError(f"two-point H0 needs even n, got {n}")
        h = np.concatenate([np.full(n // 2, -recipe.a), np.full(n // 2, recipe.a)])
    elif isinstance(recipe, IID):
        rng = generator(seed, STREAM_H0)
        law = recipe.law
        if isinstance(law, UniformLaw):
            h = rng.uniform(law.lo, law.hi, size=n)
        elif isinstance(law, GaussianLaw):
            h = law.mu + law.sigma * rng.standard_normal(n)
        elif isinstance(law, AtomsLaw):
            idx = rng.choice(len(law.locations), size=n, p=np.asarray(law.weights, dtype=float))
            h = np.asarray(law.locations, dtype=float)[idx]
        else:
            raise RecipeError(f"unknown IID law {law!r}")
    else:
        raise RecipeError(f"unknown H0 recipe {recipe!r}")
    if not np.all(np.isfinite(h)):
        raise RecipeError("H0 diagonal contains non-finite entries")
    return np.sort(h)


def sample_deformed(spec: EnsembleSpec) -> SpectralSample:
    """Eigenvalues of n^{-1/2} W + diag(h0) for one seed.

    The H0 mean is subtracted before the solve and added back afterwards,
    which makes shift equivariance exact for constant deformations.
    """
    h = realize_h0(spec.h0, spec.n, spec.seed)
    shift = float(h.mean())
    m = sample_gue(spec.n, spec.seed)
    try:
        eig = np.linalg.eigvalsh(m + np.diag((h - shift).astype(complex)))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigensolver failed: {exc}", context=spec) from exc
    return SpectralSample(eigenvalues=np.sort(eig + shift), h0_used=h)


def run_trials(n: int, recipe: H0Recipe, master_seed: int, trials: int, parallelism: int = 1) -> EmpiricalMeasure:
    """Independent deformed-GUE draws; trial k is keyed by hash(master_seed, k).

    Results do not depend on parallelism: the per-trial seeds are derived
    up front and the samples are assembled in trial order.
    """
    if trials < 1:
        raise InsufficientDataError("at least one trial is required")
    specs = [EnsembleSpec(n=n, h0=recipe, seed=trial_seed(master_seed, k)) for k in range(trials)]
    if parallelism <= 1:
        samples = [sample_deformed(s) for s in specs]
    else:
        with ThreadPoolExecutor(max_workers=int(parallelism)) as pool:
            samples = list(pool.map(sample_deformed, specs))
    return EmpiricalMeasure(samples=tuple(samples), n=n)


# ---------------------------------------------------------------------------
# Spectral statistics


def empirical_ncm(sample, interval) -> float:
    """Fraction of eigenvalues in the half-open interval [lo, hi)."""
    lo, hi = interval
    if not lo <= hi:
        raise RecipeError(f"interval endpoints must be ordered, got [{lo}, {hi}]")
    eig = sample.eigenvalues if isinstance(sample, SpectralSample) else np.asarray(sample, dtype=float)
    return float(np.count_nonzero((eig >= lo) & (eig < hi))) / eig.size


def estimate_gap_probability(measure: EmpiricalMeasure, interval) -> tuple:
    """Fraction of samples with no eigenvalue in the closed interval, plus its standard error."""
    lo, hi = interval
    if not lo <= hi:
        raise RecipeError(f"interval endpoints must be ordered, got [{lo}, {hi}]")
    if measure.trials < 2:
        raise InsufficientDataError("gap probability needs at least two samples")
    hits = np.fromiter(
        (np.any((s.eigenvalues >= lo) & (s.eigenvalues <= hi)) for s in measure.samples),
        dtype=bool,
        count=measure.trials,
    )
    p = 1.0 - hits.mean()
    se = math.sqrt(p * (1.0 - p) / measure.trials)
    return float(p), float(se)
