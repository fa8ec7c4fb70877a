"""Finite-support degree distributions and their generating functions.

A degree model is a pmf on {0, 1, 2, ...} with finite support.  Everything
downstream (cavity curves, fixed-point solvers, tree samplers) consumes the
generating function phi(x) = sum_k p_k x^k and its first three derivatives,
so those are evaluated here once, by Horner recurrence on dense coefficient
arrays, to machine precision.

Infinite laws (Poisson) enter via tail truncation at mass 1e-12 followed by
renormalization; with finite support all moments exist, so every result that
needs a finite second moment applies to every constructible model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

DEFAULT_DEGREE_CAP = 10_000
_NORM_TOL = 1e-12
POISSON_TAIL_MASS = 1e-12


class DegreeModelError(ValueError):
    """Malformed spec string or invalid pmf."""


@dataclass(frozen=True)
class DegreeModel:
    """Immutable finite-support pmf with cached generating-function data.

    ``degrees`` and ``probs`` are parallel sorted arrays; ``pmf`` exposes the
    same data as a dict.  Instances are safe to share across workers.
    """

    degrees: np.ndarray
    probs: np.ndarray
    mean: float
    second_moment: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def pmf(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.degrees, self.probs)}

    @property
    def max_degree(self) -> int:
        return int(self.degrees[-1])

    @property
    def cdf(self) -> np.ndarray:
        if "cdf" not in self._cache:
            self._cache["cdf"] = np.cumsum(self.probs)
        return self._cache["cdf"]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. degrees (inverse-cdf on the finite support)."""
        idx = np.searchsorted(self.cdf, rng.random(size), side="right")
        idx = np.minimum(idx, len(self.degrees) - 1)
        return self.degrees[idx]

    def coeffs(self, order: int) -> np.ndarray:
        """Dense coefficients of the order-th derivative of phi."""
        if order not in self._cache:
            c = np.zeros(self.max_degree + 1)
            c[self.degrees] = self.probs
            for _ in range(order):
                c = npoly.polyder(c) if len(c) > 1 else np.zeros(1)
            self._cache[order] = c
        return self._cache[order]

    def gf(self, x, order: int = 0):
        """phi^(order)(x), vectorized over x."""
        return npoly.polyval(np.asarray(x, dtype=float), self.coeffs(order))

    def to_json(self) -> str:
        return json.dumps({"pmf": {str(int(k)): float(p) for k, p in zip(self.degrees, self.probs)}})

    @staticmethod
    def from_pmf(pmf: dict[int, float], degree_cap: int = DEFAULT_DEGREE_CAP) -> "DegreeModel":
        return _build(pmf, degree_cap)


@dataclass(frozen=True)
class OffspringModel:
    """Size-biased, shifted offspring law derived from a DegreeModel.

    Satisfies pmf[k-1] = k * parent.pmf[k] / parent.mean.  The generating
    function is evaluated through the parent as phi'(x)/phi'(1), which keeps
    the identity exact at machine precision.
    """

    degrees: np.ndarray
    probs: np.ndarray
    parent: DegreeModel
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def pmf(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.degrees, self.probs)}

    @property
    def mean(self) -> float:
        # E[offspring] = phi''(1)/phi'(1)
        return float(self.parent.gf(1.0, 2) / self.parent.gf(1.0, 1))

    @property
    def cdf(self) -> np.ndarray:
        if "cdf" not in self._cache:
            self._cache["cdf"] = np.cumsum(self.probs)
        return self._cache["cdf"]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(size), side="right")
        idx = np.minimum(idx, len(self.degrees) - 1)
        return self.degrees[idx]

    def gf(self, x):
        return self.parent.gf(x, 1) / self.parent.gf(1.0, 1)


def _build(pmf: dict[int, float], degree_cap: int = DEFAULT_DEGREE_CAP) -> DegreeModel:
    if not pmf:
        raise DegreeModelError("empty support")
    degrees = np.array(sorted(int(k) for k in pmf), dtype=np.int64)
    probs = np.array([float(pmf[int(k)]) for k in degrees], dtype=float)
    if degrees[0] < 0:
        raise DegreeModelError("negative degree in support")
    if degrees[-1] > degree_cap:
        raise DegreeModelError(f"degree {degrees[-1]} exceeds cap {degree_cap}")
    if np.any(probs < 0):
        raise DegreeModelError("negative probability")
    total = probs.sum()
    if total <= 0:
        raise DegreeModelError("probabilities sum to zero")
    probs = probs / total
    keep = probs > 0
    degrees, probs = degrees[keep], probs[keep]
    mean = float(np.dot(degrees, probs))
    second = float(np.dot(degrees.astype(float) ** 2, probs))
    return DegreeModel(degrees=degrees, probs=probs, mean=mean, second_moment=second)


def _truncated_poisson(c: float, degree_cap: int) -> dict[int, float]:
    if c <= 0:
        raise DegreeModelError("poisson rate must be positive")
    pmf = {}
    pk = math.exp(-c)
    cum = 0.0
    k = 0
    while True:
        pmf[k] = pk
        cum += pk
        if 1.0 - cum < POISSON_TAIL_MASS:
            break
        k += 1
        if k > degree_cap:
            raise DegreeModelError("poisson truncation exceeds degree cap")
        pk *= c / k
    return pmf


def parse_model(spec: str, degree_cap: int = DEFAULT_DEGREE_CAP) -> DegreeModel:
    """Parse a degree-model DSL string.

    Accepted forms::

        poisson:c=<real>       truncated Poisson(c), tail mass < 1e-12
        regular:d=<int>        point mass at d
        mixture:d=<int>        pmf {d: d/(1+d), d^3: 1/(1+d)}
        pmf:<k>:<p>,<k>:<p>    explicit pmf, renormalized
    """
    spec = spec.strip()
    head, sep, rest = spec.partition(":")
    if not sep:
        raise DegreeModelError(f"malformed model spec {spec!r}")
    head = head.lower()
    try:
        if head == "poisson":
            key, val = rest.split("=")
            if key.strip() != "c":
                raise ValueError
            return _build(_truncated_poisson(float(val), degree_cap), degree_cap)
        if head == "regular":
            key, val = rest.split("=")
            if key.strip() != "d":
                raise ValueError
            d = int(val)
            if d < 0:
                raise DegreeModelError("regular degree must be nonnegative")
            return _build({d: 1.0}, degree_cap)
        if head == "mixture":
            key, val = rest.split("=")
            if key.strip() != "d":
                raise ValueError
            d = int(val)
            if d < 1:
                raise DegreeModelError("mixture degree must be >= 1")
            return _build({d: d / (1.0 + d), d ** 3: 1.0 / (1.0 + d)}, degree_cap)
        if head == "pmf":
            pmf: dict[int, float] = {}
            for item in rest.split(","):
                kstr, pstr = item.split(":")
                k = int(kstr)
                if k in pmf:
                    raise DegreeModelError(f"duplicate degree {k} in pmf spec")
                pmf[k] = float(pstr)
            return _build(pmf, degree_cap)
    except DegreeModelError:
        raise
    except (ValueError, TypeError) as exc:
        raise DegreeModelError(f"malformed model spec {spec!r}") from exc
    raise DegreeModelError(f"unknown model family {head!r}")


def size_biased(model: DegreeModel) -> OffspringModel:
    """Offspring law: pmf[k-1] = k * pmf[k] / mean.

    Requires mean > 0 (the model must put mass off zero).
    """
    if model.mean <= 0:
        raise DegreeModelError("degenerate degree model")
    keep = model.degrees >= 1
    deg = model.degrees[keep] - 1
    probs = model.degrees[keep] * model.probs[keep] / model.mean
    return OffspringModel(degrees=deg, probs=probs, parent=model)


def gf_eval(model: DegreeModel, x, order: int = 0):
    """Evaluate phi or one of its first three derivatives at x in [0, 1]."""
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0, 1, 2 or 3")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise ValueError("x must lie in [0, 1]")
    return model.gf(x, order)


@dataclass(frozen=True)
class LogConcavityReport:
    ok: bool
    vacuous: bool
    first_violation: float | None
    max_excess: float

    def __bool__(self) -> bool:
        return self.ok


def is_phi2_logconcave(model: DegreeModel, grid_points: int = 10_001,
                       slack: float = 1e-12) -> LogConcavityReport:
    """Grid check of log-concavity of phi'' on [0, 1].

    Uses second differences of log phi'' on a uniform grid; points where
    phi'' vanishes (only possible at the ends, coefficients being
    nonnegative) are dropped.  A model supported inside {0, 1} has
    phi'' identically zero and the check is vacuous.
    """
    if model.max_degree <= 1:
        return LogConcavityReport(ok=True, vacuous=True, first_violation=None, max_excess=0.0)
    xs = np.linspace(0.0, 1.0, grid_points)
    ys = np.asarray(model.gf(xs, 2), dtype=float)
    pos = ys > 0
    xs, ys = xs[pos], ys[pos]
    if len(ys) < 3:
        return LogConcavityReport(ok=True, vacuous=True, first_violation=None, max_excess=0.0)
    logy = np.log(ys)
    second = logy[:-2] - 2.0 * logy[1:-1] + logy[2:]
    bad = second > slack
    if not np.any(bad):
        return LogConcavityReport(ok=True, vacuous=False, first_violation=None,
                                  max_excess=float(second.max()))
    i = int(np.argmax(bad))
    return LogConcavityReport(ok=False, vacuous=False, first_violation=float(xs[1:-1][i]),
                              max_excess=float(second.max()))
