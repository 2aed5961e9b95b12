"""Central-limit layer: Gaussian fluctuation parameters and the binary
limit curve.

At the root-n scale the excess-cost probability of a binary pair converges
to a Strassen value between two centered Gaussians, which collapses to a
one-dimensional formula: the supremum over thresholds of
F_X(a') - F_Y(a' + delta).  The supremum is attained at the larger point
where the two normal densities cross, giving a closed form; a direct grid
maximization of the same objective serves as its independent check.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .measures import Dist


@dataclass(frozen=True)
class GaussParams:
    """Mean and covariance of the limiting empirical fluctuation."""

    mean: tuple
    cov: tuple

    def __post_init__(self) -> None:
        mean = tuple(float(v) for v in self.mean)
        cov = tuple(tuple(float(v) for v in row) for row in self.cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        k = len(mean)
        if len(cov) != k or any(len(row) != k for row in cov):
            raise ValidationError("covariance shape must match the mean")
        if any(v != 0.0 for v in mean):
            raise ValidationError("fluctuation mean must be zero")
        arr = np.asarray(cov)
        if not np.allclose(arr, arr.T, atol=1e-12):
            raise ValidationError("covariance must be symmetric")
        if k and np.linalg.eigvalsh(arr).min() < -1e-12:
            raise ValidationError("covariance must be positive semidefinite")
        if k and np.abs(arr.sum(axis=1)).max() > 1e-12:
            raise ValidationError(
                "covariance rows must sum to zero along the simplex normal"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.cov, dtype=float)


def gauss_params(p: Dist) -> GaussParams:
    """Multinomial covariance p(x)1{x=x'} - p(x)p(x') with zero mean."""
    mass = p.as_array()
    cov = np.diag(mass) - np.outer(mass, mass)
    return GaussParams(mean=(0.0,) * len(mass), cov=tuple(map(tuple, cov)))


@dataclass(frozen=True)
class BinaryCltInstance:
    """Variance pair and shift for the one-dimensional limit problem."""

    sigma_x2: float
    sigma_y2: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("sigma_x2", "sigma_y2"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not 0.0 < v <= 0.25:
                raise ValidationError(
                    f"{name} = {v!r} outside (0, 1/4]; binary variances "
                    "are a(1-a)"
                )
        object.__setattr__(self, "delta", float(self.delta))


def crossing_points(inst: BinaryCltInstance) -> list:
    """Points where the two centered normal densities phi_X(t) and
    phi_Y(t + delta) agree.

    Equal variances give the single midpoint -delta/2; otherwise the log
    ratio is a genuine quadratic with two roots (its discriminant is a sum
    of two same-signed terms, so emptiness is flagged, never expected).
    """
    sx2, sy2, d = inst.sigma_x2, inst.sigma_y2, inst.delta
    if sx2 == sy2:
        return [-d / 2.0]
    disc = d * d + 2.0 * (sx2 - sy2) * 0.5 * math.log(sx2 / sy2)
    if disc < 0.0:
        warnings.warn(
            "density crossings vanished (negative discriminant); this "
            "cannot happen for binary variance pairs", RuntimeWarning,
        )
        return []
    root = math.sqrt(sx2 * sy2 * disc)
    return sorted([(-sx2 * d + root) / (sx2 - sy2),
                   (-sx2 * d - root) / (sx2 - sy2)])


def normal_cdf(x: float, sigma2: float) -> float:
    if sigma2 <= 0.0:
        raise ValidationError(f"variance must be positive, got {sigma2!r}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0 * sigma2))


def _tail(x: float, sigma2: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0 * sigma2))


def _step_cdf(x: float) -> float:
    return 1.0 if x >= 0.0 else 0.0


def _dual_objective(ap: float, sx2: float, sy2: float, d: float) -> float:
    """F_X(a') - F_Y(a' + delta), evaluated cancellation-free.

    Both CDFs sit near 1 when both arguments are in the upper bulk; the
    complementary form keeps relative accuracy there.
    """
    zx = ap / math.sqrt(sx2)
    zy = (ap + d) / math.sqrt(sy2)
    if zx + zy > 0.0:
        return _tail(ap + d, sy2) - _tail(ap, sx2)
    return normal_cdf(ap, sx2) - normal_cdf(ap + d, sy2)


def lambda_binary(a: float, b: float, delta: float) -> float:
    """Closed-form limit curve of the binary excess-cost probability.

    Requires 0 <= a <= b <= 1/2.  Equal parameters use the midpoint
    threshold with the positive-shift cutoff; otherwise the optimal
    threshold is the larger density crossing.  Zero-variance edges (a = 0)
    degenerate to step CDFs and are evaluated as such.
    """
    if not (0.0 <= a <= b <= 0.5):
        raise ValidationError(
            f"need 0 <= a <= b <= 1/2, got a={a!r}, b={b!r}"
        )
    sx2 = a * (1.0 - a)
    sy2 = b * (1.0 - b)
    if a == b:
        if delta > 0.0:
            return 0.0
        if sx2 == 0.0:
            val = _step_cdf(-delta / 2.0) - _step_cdf(delta / 2.0)
        else:
            val = (normal_cdf(-delta / 2.0, sx2)
                   - normal_cdf(delta / 2.0, sy2))
        return min(1.0, max(0.0, val))
    if sx2 == 0.0:
        # X fluctuation is a point mass; the best threshold is its atom.
        return min(1.0, max(0.0, _tail(delta, sy2)))
    inst = BinaryCltInstance(sigma_x2=sx2, sigma_y2=sy2, delta=delta)
    roots = crossing_points(inst)
    if not roots:
        return 0.0
    a2 = roots[-1]
    return min(1.0, max(0.0, _dual_objective(a2, sx2, sy2, delta)))


def lambda_dual_grid(a: float, b: float, delta: float,
                     grid: int = 2001) -> float:
    """Grid maximization of F_X(a') - F_Y(a' + delta) with a golden polish.

    Independent oracle for lambda_binary: no crossing formula, just the
    supremum definition over a threshold range of six standard deviations.
    """
    if not (0.0 <= a <= b <= 0.5):
        raise ValidationError(
            f"need 0 <= a <= b <= 1/2, got a={a!r}, b={b!r}"
        )
    sx2 = a * (1.0 - a)
    sy2 = b * (1.0 - b)
    if sy2 == 0.0:
        return 1.0 if delta < 0.0 else 0.0
    smax = math.sqrt(max(sx2, sy2))
    pts = np.linspace(-6.0 * smax, 6.0 * smax, max(int(grid), 3))

    if sx2 == 0.0:
        fun = lambda ap: _step_cdf(ap) - normal_cdf(ap + delta, sy2)
    else:
        fun = lambda ap: _dual_objective(ap, sx2, sy2, delta)

    vals = [fun(p) for p in pts]
    idx = int(np.argmax(vals))
    lo = pts[max(idx - 1, 0)]
    hi = pts[min(idx + 1, len(pts) - 1)]
    for _ in range(60):
        m1 = lo + (hi - lo) * 0.382
        m2 = lo + (hi - lo) * 0.618
        if fun(m1) >= fun(m2):
            hi = m2
        else:
            lo = m1
    best = max(vals[idx], fun(0.5 * (lo + hi)))
    return min(1.0, max(0.0, best))
