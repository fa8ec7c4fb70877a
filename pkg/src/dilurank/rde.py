"""Population dynamics for the distributional fixed point on [0, 1].

One step maps a pool of samples through

    Y = 1 / (1 + sum_{i<=N} (sum_{j<=N'_i} X_ij)^{-1}),

N from the outer law, N'_i from the inner law, X_ij resampled uniformly from
the pool.  The zero atom must stay exact: an empty or all-zero inner sum has
reciprocal +inf, forcing Y = 0.0 exactly, while N = 0 gives Y = 1.0 exactly.
Both branches fall out of IEEE arithmetic (positive floats cannot sum to
zero, 1/(1+inf) == 0.0), so no mass ever leaks through underflow.

Each iteration draws from its own stream derived from (seed, iteration), so
a run is bit-identical no matter how work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple
import warnings

import numpy as np

from .cavity import xbarbar
from .degrees import DegreeModel, OffspringModel, size_biased


@dataclass(frozen=True)
class Population:
    """Multiset of samples in [0, 1] with exact zero-atom bookkeeping."""

    samples: np.ndarray
    rng_seed: object = None

    @property
    def pool(self) -> int:
        return len(self.samples)

    @property
    def zero_mass(self) -> float:
        return float(np.mean(self.samples == 0.0))

    @property
    def nonzero_mass(self) -> float:
        return 1.0 - self.zero_mass

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @staticmethod
    def bernoulli(p: float, pool: int, rng_seed=None) -> "Population":
        """Deterministic Bernoulli start: round(p*pool) ones, rest zeros."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        ones = int(round(p * pool))
        samples = np.zeros(pool)
        samples[:ones] = 1.0
        return Population(samples=samples, rng_seed=rng_seed)


def _sample_counts(law, rng: np.random.Generator, size: int) -> np.ndarray:
    return law.sample(rng, size).astype(np.int64)


def _theta_arrays(samples: np.ndarray, outer, inner, rng: np.random.Generator,
                  out_size: int | None = None) -> np.ndarray:
    pool = len(samples)
    m = out_size if out_size is not None else pool
    n_outer = _sample_counts(outer, rng, m)
    tot = int(n_outer.sum())
    n_inner = _sample_counts(inner, rng, tot)
    k = int(n_inner.sum())
    x = samples[rng.integers(0, pool, size=k)]
    inner_sums = np.bincount(np.repeat(np.arange(tot), n_inner), weights=x, minlength=tot)
    with np.errstate(divide="ignore"):
        inv = 1.0 / inner_sums            # empty/all-zero sums -> +inf
    r = np.bincount(np.repeat(np.arange(m), n_outer), weights=inv, minlength=m)
    return 1.0 / (1.0 + r)                # inf -> 0.0 exactly, 0 -> 1.0 exactly


def theta_step(pop: Population, outer: OffspringModel | DegreeModel,
               inner: OffspringModel, seed=None,
               out_size: int | None = None) -> Population:
    """One application of the distributional operator to the pool."""
    rng = seed if isinstance(seed, np.random.Generator) else \
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    new = _theta_arrays(pop.samples, outer, inner, rng, out_size)
    return Population(samples=new, rng_seed=seed)


class RdeDiagnostics(NamedTuple):
    nonzero_mass: np.ndarray   # per iteration, including the start
    mean: np.ndarray
    start_p: float
    start_fixed_point_gap: float


def solve_rde(model: DegreeModel, start_p: float, iters: int = 300,
              pool: int = 100_000, seed: int = 0) -> tuple[Population, RdeDiagnostics]:
    """Iterate the operator from a Bernoulli(start_p) pool.

    Starting at a fixed point of the doubled map makes the iteration settle
    onto the corresponding solution from above; other starts are allowed but
    flagged, since the nonzero mass then drifts before stabilizing.
    """
    seed = 0 if seed is None else int(seed)
    gap = abs(float(xbarbar(model, start_p)) - start_p)
    if gap > 1e-6:
        warnings.warn(f"start_p={start_p:.6g} is not a fixed point of the doubled map "
                      f"(gap {gap:.2e}); the stationary mass will differ", stacklevel=2)
    off = size_biased(model)
    pop = Population.bernoulli(start_p, pool, rng_seed=seed)
    masses = [pop.nonzero_mass]
    means = [pop.mean]
    for it in range(iters):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, it))))
        pop = Population(samples=_theta_arrays(pop.samples, off, off, rng), rng_seed=seed)
        masses.append(pop.nonzero_mass)
        means.append(pop.mean)
    diag = RdeDiagnostics(nonzero_mass=np.array(masses), mean=np.array(means),
                          start_p=start_p, start_fixed_point_gap=gap)
    return pop, diag


class RootMean(NamedTuple):
    mean: float
    stderr: float
    resamples: int


def root_mean(pop: Population, model: DegreeModel, resamples: int = 200_000,
              seed: int = 0, batches: int = 20) -> RootMean:
    """Mean of one root application: outer law is the degree law itself,
    inner law its size-biased shift.  Standard error by batch means."""
    seed = 0 if seed is None else int(seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x726F6F74))))
    off = size_biased(model)
    y = _theta_arrays(pop.samples, model, off, rng, out_size=resamples)
    bm = np.array([b.mean() for b in np.array_split(y, batches) if len(b)])
    stderr = float(bm.std(ddof=1) / np.sqrt(len(bm))) if len(bm) > 1 else 0.0
    return RootMean(mean=float(y.mean()), stderr=stderr, resamples=resamples)
