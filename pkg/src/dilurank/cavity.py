"""Closed-form cavity side: the mass curve M, its records, and leaf-removal
trajectories.

For a degree model with generating function phi and offspring generating
function phibar(x) = phi'(x)/phi'(1), define

    xbar(x)  = phibar(1 - x)
    M(x)     = phi'(1) * x * xbar(x) + phi(1 - x) + phi(1 - xbar(x)) - 1

M is the variational objective whose maximum over [0, 1] equals the expected
kernel mass of the limiting tree; its derivative factorizes as

    M'(x) = phi''(1 - x) * (xbar(xbar(x)) - x)

so local extrema of M sit exactly at fixed points of the doubled map
x -> xbar(xbar(x)).  Between consecutive fixed points M is monotone, which is
what makes record classification by extremum values (rather than raw grid
values) numerically robust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .degrees import DegreeModel, DegreeModelError

RECORD_SLACK = 1e-11
FIXED_POINT_XTOL = 1e-12
TANGENT_THRESHOLD = 1e-8


def xbar(model: DegreeModel, x):
    """Single-step map xbar(x) = phi'(1-x)/phi'(1)."""
    d1 = model.gf(1.0, 1)
    if d1 <= 0:
        raise DegreeModelError("degenerate degree model")
    return model.gf(1.0 - np.asarray(x, dtype=float), 1) / d1


def xbarbar(model: DegreeModel, x):
    """Doubled map; its fixed points locate the extrema of M."""
    return xbar(model, xbar(model, x))


def eval_M(model: DegreeModel, x):
    """The mass objective M(x), vectorized over x in [0, 1]."""
    d1 = model.gf(1.0, 1)
    if d1 <= 0:
        raise DegreeModelError("degenerate degree model")
    xa = np.asarray(x, dtype=float)
    xb = model.gf(1.0 - xa, 1) / d1
    return d1 * xa * xb + model.gf(1.0 - xa) + model.gf(1.0 - xb) - 1.0


def eval_M_derivative(model: DegreeModel, x):
    """M'(x) = phi''(1-x) * (xbarbar(x) - x)."""
    xa = np.asarray(x, dtype=float)
    return model.gf(1.0 - xa, 2) * (xbarbar(model, xa) - xa)


@dataclass(frozen=True)
class MCurve:
    model: DegreeModel
    x: np.ndarray
    m: np.ndarray
    xbar: np.ndarray
    mprime: np.ndarray

    @staticmethod
    def build(model: DegreeModel, grid_points: int = 1001) -> "MCurve":
        xs = np.linspace(0.0, 1.0, grid_points)
        return MCurve(model=model, x=xs, m=eval_M(model, xs),
                      xbar=xbar(model, xs), mprime=eval_M_derivative(model, xs))


@dataclass(frozen=True)
class RecordSet:
    """Historical records of M plus the full fixed-point inventory.

    ``locations``/``values`` hold the records p_1 < ... < p_r with strictly
    increasing M values.  ``first_extremum`` is the smallest fixed point of
    the doubled map.  Ties within RECORD_SLACK are never silently resolved;
    they land in ``ambiguous``.
    """

    locations: list[float]
    values: list[float]
    first_extremum: float
    global_max: float
    global_argmax: float
    fixed_points: list[float]
    fixed_values: list[float]
    ambiguous: list[float]
    tangential: list[float]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "locations": self.locations,
            "values": self.values,
            "first_extremum": self.first_extremum,
            "global_max": self.global_max,
            "global_argmax": self.global_argmax,
            "fixed_points": self.fixed_points,
            "fixed_values": self.fixed_values,
            "ambiguous": self.ambiguous,
            "tangential": self.tangential,
            "degenerate": self.degenerate,
        }


def _bisect_fixed_point(model: DegreeModel, lo: float, hi: float,
                        glo: float, ghi: float) -> float:
    # g = xbarbar - x changes sign on [lo, hi]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < FIXED_POINT_XTOL:
            return mid
        gm = float(xbarbar(model, mid)) - mid
        if gm == 0.0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
    return 0.5 * (lo + hi)


def find_records(model: DegreeModel, grid_points: int = 100_001) -> RecordSet:
    """Locate all fixed points of the doubled map and classify records.

    Fixed points are found by sign-change scan refined by bisection; a
    secondary scan flags tangential touches (local minima of |g| below
    1e-8 that do not change sign).  Records are decided by comparing M at
    extrema only: M is monotone between consecutive fixed points, so the
    supremum of M over [0, p) is attained at an earlier extremum or at 0.
    """
    if model.mean <= 0:
        raise DegreeModelError("degenerate degree model")
    f0 = float(model.probs[model.degrees == 0].sum())
    if model.max_degree <= 1:
        # offspring law is a point mass at zero; the single record sits at 1
        m1 = float(eval_M(model, 1.0))
        return RecordSet(locations=[1.0], values=[m1], first_extremum=1.0,
                         global_max=max(m1, f0), global_argmax=1.0,
                         fixed_points=[1.0], fixed_values=[m1],
                         ambiguous=[], tangential=[], degenerate=True)

    xs = np.linspace(0.0, 1.0, grid_points)
    g = np.asarray(xbarbar(model, xs), dtype=float) - xs

    roots: list[float] = []
    zero_here = g == 0.0
    for i in np.flatnonzero(zero_here):
        roots.append(float(xs[i]))
    s = np.sign(g)
    flips = np.flatnonzero((s[:-1] * s[1:]) < 0)
    for i in flips:
        roots.append(_bisect_fixed_point(model, float(xs[i]), float(xs[i + 1]),
                                         float(g[i]), float(g[i + 1])))

    # tangential candidates: interior local minima of |g| below threshold
    # that are not already roots
    tangential: list[float] = []
    ag = np.abs(g)
    interior = np.flatnonzero((ag[1:-1] <= ag[:-2]) & (ag[1:-1] <= ag[2:]) &
                              (ag[1:-1] < TANGENT_THRESHOLD)) + 1
    for i in interior:
        x0 = float(xs[i])
        if all(abs(x0 - r) > 10 * (xs[1] - xs[0]) for r in roots):
            tangential.append(x0)
            roots.append(x0)

    roots = sorted(roots)
    dedup: list[float] = []
    for r in roots:
        if not dedup or r - dedup[-1] > 1e-10:
            dedup.append(r)
    roots = dedup
    if not roots:
        # M is analytic on a compact interval; fall back to the grid argmax
        # (can only happen if every extremum was missed, which the tangential
        # scan makes implausible; keep a defensive answer rather than raise)
        mvals = np.asarray(eval_M(model, xs), dtype=float)
        j = int(np.argmax(mvals))
        roots = [float(xs[j])]

    fixed_values = [float(eval_M(model, r)) for r in roots]
    m0 = float(eval_M(model, 0.0))
    m1 = float(eval_M(model, 1.0))

    locations: list[float] = []
    values: list[float] = []
    ambiguous: list[float] = []
    prior = m0
    for r, mv in zip(roots, fixed_values):
        if r <= FIXED_POINT_XTOL:
            # record over the empty prefix
            locations.append(r)
            values.append(mv)
        elif mv > prior + RECORD_SLACK:
            locations.append(r)
            values.append(mv)
        elif mv > prior - RECORD_SLACK:
            ambiguous.append(r)
        prior = max(prior, mv)

    global_max = max([m0, m1] + fixed_values)
    candidates = [(m0, 0.0), (m1, 1.0)] + list(zip(fixed_values, roots))
    global_argmax = max(candidates, key=lambda t: t[0])[1]
    return RecordSet(locations=locations, values=values,
                     first_extremum=roots[0], global_max=global_max,
                     global_argmax=global_argmax,
                     fixed_points=roots, fixed_values=fixed_values,
                     ambiguous=ambiguous, tangential=tangential)


class ErQ(NamedTuple):
    q: float
    kernel_mass: float


def er_q(c: float) -> ErQ:
    """Smallest solution of q = exp(-c exp(-c q)) and the kernel mass.

    Monotone fixed-point iteration from 0 (the map is increasing, so the
    iterates increase to the smallest solution), then a few Newton steps to
    polish; the Newton stage matters near c = e where the iteration is only
    algebraically fast.
    """
    if c <= 0:
        raise ValueError("connectivity c must be positive")
    q = 0.0
    for _ in range(200_000):
        qn = math.exp(-c * math.exp(-c * q))
        if abs(qn - q) < 1e-14:
            q = qn
            break
        q = qn
    for _ in range(100):
        e1 = math.exp(-c * q)
        fq = math.exp(-c * e1)
        f = q - fq
        fp = 1.0 - c * c * e1 * fq
        if fp <= 0:
            break
        step = f / fp
        qn = q - step
        if not 0.0 < qn < 1.0:
            break
        q = qn
        if abs(step) < 1e-16:
            break
    mass = q + math.exp(-c * q) + c * q * math.exp(-c * q) - 1.0
    return ErQ(q=q, kernel_mass=mass)


@dataclass(frozen=True)
class KSTrajectory:
    """Leaf-removal round probabilities on the limiting tree.

    alpha[t] iterates the doubled map from 0, beta[t] = 1 - phibar(1 -
    alpha[t]), and lr[t] = P(root joins A by round t) - P(root joins B by
    round t); lr[t] increases to M(x0) with x0 the first extremum.
    """

    alpha: np.ndarray
    beta: np.ndarray
    a_prob: np.ndarray
    b_prob: np.ndarray
    lr: np.ndarray


def ks_trajectory(model: DegreeModel, rounds: int) -> KSTrajectory:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    d1 = float(model.gf(1.0, 1))
    if d1 <= 0:
        raise DegreeModelError("degenerate degree model")

    def phibar(x: float) -> float:
        return float(model.gf(x, 1)) / d1

    f0 = float(model.probs[model.degrees == 0].sum())
    alpha = np.zeros(rounds + 1)
    beta = np.zeros(rounds + 1)
    a_prob = np.zeros(rounds + 1)
    b_prob = np.zeros(rounds + 1)
    a_prob[0] = f0
    for t in range(1, rounds + 1):
        alpha[t] = phibar(1.0 - phibar(1.0 - alpha[t - 1]))
        beta[t] = 1.0 - phibar(1.0 - alpha[t])
        bprev = beta[t - 1]
        a_prob[t] = float(model.gf(bprev)) + (1.0 - bprev - alpha[t]) * float(model.gf(bprev, 1))
        b_prob[t] = 1.0 - float(model.gf(1.0 - alpha[t])) - alpha[t] * float(model.gf(bprev, 1))
    return KSTrajectory(alpha=alpha, beta=beta, a_prob=a_prob, b_prob=b_prob,
                        lr=a_prob - b_prob)
