"""Entanglement visibility of energy-based witnesses.

The visibility compares a measured energy ``E`` with the smallest energy a
separable state can reach, ``E_sep``::

    V = (E_sep - E) / (E_sep + E)

Positive values certify entanglement; the size of ``V`` is the relative
energy resolution a detector needs to see it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closedform import ground_energy, partition_min_energy
from .exceptions import DivergentOptimumError
from .model import EnsembleSpec, Partition

__all__ = [
    "VisibilityReport",
    "AsymptoticLimits",
    "visibility",
    "separable_gap",
    "max_visibility",
    "max_visibility_curve",
    "partition_visibility",
    "optimal_particle_number",
    "asymptotic_limits",
]


@dataclass(frozen=True)
class VisibilityReport:
    expectation: float
    sep_bound: float
    value: float

    @property
    def detected(self) -> bool:
        return self.value > 0


def visibility(expectation: float, sep_bound: float) -> VisibilityReport:
    if expectation < 0:
        raise ValueError(f"expectation of a positive observable must be >= 0, got {expectation}")
    if not sep_bound > 0:
        raise ValueError(f"separable bound must be positive, got {sep_bound}")
    return VisibilityReport(
        expectation, sep_bound, (sep_bound - expectation) / (sep_bound + expectation)
    )


def _sep_minus_ground(n, r):
    """``N sqrt(1+(N-1)R) - (1 + (N-1) sqrt(1+NR))`` without cancellation.

    Rationalizing every difference of square roots leaves a form that is
    manifestly positive and of second order in ``R``.
    """
    a = np.sqrt(1.0 + (n - 1.0) * r)
    b = np.sqrt(1.0 + n * r)
    num = n * (n - 1.0) * r * r * ((2.0 * n - 1.0) + n * (n - 1.0) * r)
    return num / ((a * b + 1.0) * (1.0 + a) * (1.0 + b) * (n * a + (n - 1.0) * b))


def separable_gap(n: int, r: float) -> float:
    """Separable minimum minus ground energy at fixed ``N`` (``u_E``)."""
    if n <= 1:
        return 0.0
    return 0.5 * float(_sep_minus_ground(n, r))


def max_visibility_curve(n, r):
    """Ground-state visibility with real-valued ``N`` inserted directly.

    This is the naive interpolation between integer particle numbers; the
    physically meaningful mean-number version lives in
    :mod:`macroent.fockspace`.  Accepts numpy arrays.
    """
    n = np.asarray(n, dtype=float)
    sep = n * np.sqrt(1.0 + (n - 1.0) * r)
    ground = 1.0 + (n - 1.0) * np.sqrt(1.0 + n * r)
    out = _sep_minus_ground(n, r) / (sep + ground)
    return float(out) if out.ndim == 0 else out


def max_visibility(spec: EnsembleSpec) -> VisibilityReport:
    """Visibility of the ground state against the fully separable bound."""
    n, r = spec.n_particles, spec.r
    sep = 0.5 * n * math.sqrt(1.0 + (n - 1) * r)
    ground = ground_energy(spec)
    return VisibilityReport(ground, sep, separable_gap(n, r) / (sep + ground))


def partition_visibility(spec: EnsembleSpec, partition: Partition) -> VisibilityReport:
    """Ground-state visibility for entanglement across ``partition``."""
    bound = partition_min_energy(spec, partition).value
    ground = ground_energy(spec)
    n, r = spec.n_particles, spec.r
    s = math.sqrt(1.0 + n * r)
    # bound - ground = (1/2) R^2 sum_j N_j (N - N_j) / ((s+1)(w_j+s)(w_j+1))
    diff = 0.0
    for size in partition.sizes:
        w = math.sqrt(1.0 + (n - size) * r)
        diff += size * (n - size) / ((w + s) * (w + 1.0))
    diff *= r * r / (s + 1.0)
    return VisibilityReport(ground, bound, 0.5 * diff / (bound + ground))


def optimal_particle_number(r: float) -> float:
    """Real particle number maximizing the ground-state visibility."""
    if r < 0:
        raise ValueError(f"coupling ratio must be nonnegative, got {r}")
    if r == 0:
        raise DivergentOptimumError("without coupling the optimal particle number diverges")
    return (1.0 + 2.0 * r + math.sqrt(5.0 + 4.0 * r)) / (2.0 * r)


@dataclass(frozen=True)
class AsymptoticLimits:
    weak_coupling: float
    strong_coupling: float
    bipartite_strong_coupling: float
    macroscopic: float


def asymptotic_limits(n_particles: int | None = None) -> AsymptoticLimits:
    """Reference limits of the maximal visibility.

    ``strong_coupling`` is the ``R -> oo`` value for ``n_particles``
    (``nan`` when no particle number is given).
    """
    if n_particles is None:
        strong = math.nan
    else:
        if n_particles < 1:
            raise ValueError("particle number must be >= 1")
        # (sqrt(N) - sqrt(N-1))^2 = 1 / (sqrt(N) + sqrt(N-1))^2
        strong = 1.0 / (math.sqrt(n_particles) + math.sqrt(n_particles - 1)) ** 2
    return AsymptoticLimits(
        weak_coupling=0.0,
        strong_coupling=strong,
        bipartite_strong_coupling=3.0 - 2.0 * math.sqrt(2.0),
        macroscopic=0.0,
    )
