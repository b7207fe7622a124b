"""Witness bounds when only the mean particle number is fixed.

For an operator that does not couple sectors of different particle number
(the Hamiltonian is one), the separable minimum over Fock-space states with
mean ``Nbar`` is

    min  sum_N f(N) p_N   s.t.  sum p_N = 1,  sum N p_N = Nbar,

where ``f(N)`` is the fixed-``N`` separable minimum.  For convex ``f`` the
optimum mixes only ``floor(Nbar)`` and ``floor(Nbar) + 1``; the multipliers
of the two constraints define a supporting line of ``f``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .visibility import VisibilityReport, separable_gap, visibility

__all__ = [
    "NumberDistribution",
    "ConvexSolution",
    "separable_min_per_n",
    "ground_energy_per_n",
    "default_n_max",
    "convex_min_over_distribution",
    "sep_min_energy_mean_n",
    "ground_energy_mean_n",
    "mean_n_visibility",
]

PerN = Union[Callable[[int], float], Sequence[float], np.ndarray]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class NumberDistribution:
    support: tuple[tuple[int, float], ...]
    mean: float

    def __post_init__(self) -> None:
        probs = [p for _, p in self.support]
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > _SUM_TOL:
            raise ValueError("probabilities must sum to one")
        if abs(math.fsum(n * p for n, p in self.support) - self.mean) > _SUM_TOL * max(1.0, self.mean):
            raise ValueError("support does not reproduce the mean particle number")

    def as_dict(self) -> dict[int, float]:
        return dict(self.support)


@dataclass(frozen=True)
class ConvexSolution:
    distribution: NumberDistribution
    value: float
    intercept: float
    slope: float

    def line(self, n):
        return self.intercept + self.slope * np.asarray(n, dtype=float)


def separable_min_per_n(n, r: float):
    """Fully separable minimum energy at fixed particle number (0 for N=0)."""
    n = np.asarray(n, dtype=float)
    out = 0.5 * n * np.sqrt(1.0 + np.maximum(n - 1.0, 0.0) * r)
    return float(out) if out.ndim == 0 else out


def ground_energy_per_n(n, r: float):
    """Ground energy at fixed particle number (0 for N=0)."""
    n = np.asarray(n, dtype=float)
    out = np.where(n == 0, 0.0, 0.5 * (1.0 + (n - 1.0) * np.sqrt(1.0 + n * r)))
    return float(out) if out.ndim == 0 else out


def default_n_max(mean: float) -> int:
    return max(50, 4 * math.ceil(mean))


def _tabulate(f: PerN, n_max: int) -> np.ndarray:
    if callable(f):
        return np.array([float(f(n)) for n in range(n_max + 1)])
    values = np.asarray(f, dtype=float)
    if values.shape[0] < n_max + 1:
        raise ValueError(f"need values for N = 0..{n_max}, got {values.shape[0]}")
    return values[: n_max + 1]


def _is_convex(values: np.ndarray) -> bool:
    if values.size < 3:
        return True
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    scale = np.maximum(np.abs(values[2:]) + np.abs(values[:-2]), 1.0)
    return bool(np.all(second >= -1e-12 * scale))


def _two_point(lo: int, hi: int, mean: float) -> tuple[tuple[int, float], ...]:
    if lo == hi:
        return ((lo, 1.0),)
    p_hi = (mean - lo) / (hi - lo)
    return ((lo, 1.0 - p_hi), (hi, p_hi))


def _best_two_point(values: np.ndarray, mean: float) -> tuple[int, int, float]:
    n = np.arange(values.size)
    lo = n[n <= mean][:, None]
    hi = n[n >= mean][None, :]
    span = (hi - lo).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hi = np.where(span > 0, (mean - lo) / span, 0.0)
    cost = (1.0 - p_hi) * values[lo] + p_hi * values[hi]
    i, j = np.unravel_index(np.argmin(cost), cost.shape)
    return int(lo[i, 0]), int(hi[0, j]), float(cost[i, j])


def convex_min_over_distribution(
    f: PerN, mean: float, n_max: int | None = None
) -> ConvexSolution:
    """Minimize ``sum f(N) p_N`` over distributions on ``0..n_max`` with mean ``mean``.

    Convex ``f`` gets the floor/ceiling mixture directly.  Otherwise every
    two-point support is scanned (three-point supports are checked not to
    improve on it) and a warning is emitted.

    The returned line ``intercept + slope * N`` passes through the support
    and lies below ``f`` on ``0..n_max``.
    """
    if n_max is None:
        n_max = default_n_max(mean)
    if not 0 <= mean <= n_max:
        raise ValueError(f"mean particle number {mean} infeasible on 0..{n_max}")
    values = _tabulate(f, n_max)

    if _is_convex(values):
        lo = int(math.floor(mean))
        hi = min(lo + 1, n_max) if mean > lo else lo
        support = _two_point(lo, hi, mean)
    else:
        warnings.warn(
            "per-N values are not convex; falling back to an exhaustive support scan",
            RuntimeWarning,
            stacklevel=2,
        )
        lo, hi, best = _best_two_point(values, mean)
        from .oracle import three_point_min

        three, _ = three_point_min(values, mean)
        if three < best - 1e-10 * max(1.0, abs(best)):
            raise ArithmeticError("three-point support beats every two-point support")
        support = _two_point(lo, hi, mean)

    value = math.fsum(values[n] * p for n, p in support)
    if lo != hi:
        slope = float(values[hi] - values[lo]) / (hi - lo)
    else:
        left = values[lo] - values[lo - 1] if lo > 0 else None
        right = values[lo + 1] - values[lo] if lo < n_max else None
        candidates = [d for d in (left, right) if d is not None]
        slope = float(np.mean(candidates)) if candidates else 0.0
    intercept = float(values[lo]) - slope * lo

    gap = values - (intercept + slope * np.arange(n_max + 1))
    if np.min(gap) < -1e-9 * max(1.0, float(np.max(np.abs(values)))):
        raise ArithmeticError("supporting-line certificate violated")
    return ConvexSolution(NumberDistribution(support, mean), value, intercept, slope)


def _floor_weights(mean: float) -> tuple[int, float, float]:
    if mean < 0:
        raise ValueError(f"mean particle number must be >= 0, got {mean}")
    m = math.floor(mean)
    return m, m + 1.0 - mean, mean - m


def sep_min_energy_mean_n(r: float, mean: float) -> float:
    """Separable minimum energy at mean particle number ``mean``."""
    if r < 0:
        raise ValueError(f"coupling ratio must be nonnegative, got {r}")
    m, p_lo, p_hi = _floor_weights(mean)
    return 0.5 * (
        p_lo * m * math.sqrt(1.0 + max(m - 1, 0) * r) + p_hi * (m + 1) * math.sqrt(1.0 + m * r)
    )


def ground_energy_mean_n(r: float, mean: float) -> float:
    """Smallest energy of any state with mean particle number ``mean``."""
    if r < 0:
        raise ValueError(f"coupling ratio must be nonnegative, got {r}")
    m, p_lo, p_hi = _floor_weights(mean)
    return 0.5 * (
        p_lo * (1.0 + (m - 1) * math.sqrt(1.0 + m * r))
        + p_hi * (1.0 + m * math.sqrt(1.0 + (m + 1) * r))
    )


def mean_n_visibility(r: float, mean: float) -> VisibilityReport:
    """Maximal ground-state visibility at fixed mean particle number.

    The vacuum (``mean == 0``) has zero energy and zero bound; it is reported
    as ``V = 0``.
    """
    ground = ground_energy_mean_n(r, mean)
    bound = sep_min_energy_mean_n(r, mean)
    if mean == 0:
        return VisibilityReport(0.0, 0.0, 0.0)
    check = visibility(ground, bound)
    # numerator mixed from cancellation-free per-N gaps; at integer mean this
    # reproduces the fixed-N value bit for bit
    m, p_lo, p_hi = _floor_weights(mean)
    gap = p_lo * separable_gap(m, r) + p_hi * separable_gap(m + 1, r)
    return VisibilityReport(check.expectation, check.sep_bound, gap / (bound + ground))
