"""Grand-canonical thermal state of the coupled ensemble.

The state is ``exp(-alpha N - beta H) / Z`` on Fock space.  Each particle
number sector contributes

    Gamma_N = exp(-alpha N) / (2 sinh(beta/2)) * (2 sinh(beta w_N / 2))^-(N-1),

with ``w_N = sqrt(1 + N R)`` and ``beta`` in units of ``1/u_E``.  All sums
are carried out on ``log Gamma_N``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .exceptions import ConvergenceError, NonConvergentSeriesError
from .fockspace import _floor_weights, ground_energy_per_n, sep_min_energy_mean_n
from .visibility import separable_gap, visibility

__all__ = [
    "ThermalParams",
    "ThermalPoint",
    "log_gamma_n",
    "gamma_n",
    "log_partition_function",
    "partition_function",
    "mean_particle_number",
    "mean_energy",
    "solve_alpha_for_mean_n",
    "thermal_visibility",
    "thermal_grid",
]

DEFAULT_TOL = 1e-14
_MAX_TERMS = 1 << 24
_CHUNK = 128


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature ``beta`` (per ``u_E``), fugacity exponent ``alpha``
    and coupling ratio ``r``."""

    beta: float
    alpha: float
    r: float

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.r >= 0:
            raise ValueError(f"coupling ratio must be nonnegative, got {self.r}")
        if math.isnan(self.alpha):
            raise ValueError("alpha is nan")

    @classmethod
    def from_temperature(cls, t: float, alpha: float, r: float) -> "ThermalParams":
        if not t > 0:
            raise ValueError(f"temperature must be positive, got {t}")
        return cls(1.0 / t, alpha, r)

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta


@dataclass(frozen=True)
class ThermalPoint:
    temperature: float
    alpha: float
    mean_n: float
    energy: float
    log_z: float
    visibility: float

    @property
    def z(self) -> float:
        return math.exp(self.log_z) if self.log_z < 709.0 else math.inf


def _log_2sinh(x):
    # log(2 sinh x) for x > 0
    return x + np.log1p(-np.exp(-2.0 * x))


def _check_convergent(params: ThermalParams) -> None:
    if params.r == 0 and -params.alpha - _log_2sinh(0.5 * params.beta) >= 0:
        raise NonConvergentSeriesError(
            "uncoupled ensemble needs exp(-alpha) < 2 sinh(beta/2) for the series to converge"
        )


def _log_gamma(params: ThermalParams, n: np.ndarray) -> np.ndarray:
    w = np.sqrt(1.0 + n * params.r)
    return (
        -params.alpha * n
        - _log_2sinh(0.5 * params.beta)
        - (n - 1.0) * _log_2sinh(0.5 * params.beta * w)
    )


def log_gamma_n(params: ThermalParams, n):
    """``log Gamma_N`` (elementwise for arrays); ``Gamma_0 = 1``."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 0):
        raise ValueError("particle numbers must be nonnegative")
    out = np.where(n_arr == 0, 0.0, _log_gamma(params, n_arr))
    return float(out) if out.ndim == 0 else out


def gamma_n(params: ThermalParams, n):
    return np.exp(log_gamma_n(params, n))


def _series(params: ThermalParams, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """``log Gamma_N`` for ``N = 0..M`` with the neglected tail below ``tol * Z``.

    Term ratios are nonincreasing in ``N`` (log-concave weights), so once a
    ratio ``q < 1`` appears the tail after ``N`` is at most
    ``Gamma_N q / (1 - q)``.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    _check_convergent(params)
    log_tol = math.log(tol)
    lg = np.zeros(0)
    size = _CHUNK
    while size <= _MAX_TERMS:
        n = np.arange(lg.size, size, dtype=float)
        new = _log_gamma(params, n)
        if lg.size == 0:
            new[0] = 0.0
        lg = np.concatenate([lg, new])
        log_q = np.diff(lg)  # log_q[k] = log(Gamma_{k+1} / Gamma_k)
        partial = np.logaddexp.accumulate(lg)
        with np.errstate(divide="ignore"):
            tail = lg[1:] + log_q - np.log(-np.expm1(np.minimum(log_q, -1e-300)))
        ok = (log_q < 0) & (tail < log_tol + partial[1:])
        if np.any(ok):
            stop = int(np.argmax(ok)) + 1
            return np.arange(stop + 1, dtype=float), lg[: stop + 1]
        size *= 2
    raise NonConvergentSeriesError(f"series not converged after {_MAX_TERMS} terms")


def _weights(params: ThermalParams, tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    n, lg = _series(params, tol)
    log_z = float(logsumexp(lg))
    return n, np.exp(lg - log_z), log_z


def log_partition_function(params: ThermalParams, tol: float = DEFAULT_TOL) -> tuple[float, int]:
    n, lg = _series(params, tol)
    return float(logsumexp(lg)), n.size


def partition_function(params: ThermalParams, tol: float = DEFAULT_TOL) -> tuple[float, int]:
    """``(Z, number of summed terms)``; ``Z`` may overflow to ``inf`` at low T."""
    log_z, n_terms = log_partition_function(params, tol)
    return (math.exp(log_z) if log_z < 709.0 else math.inf), n_terms


def mean_particle_number(params: ThermalParams, tol: float = DEFAULT_TOL) -> float:
    n, p, _ = _weights(params, tol)
    return float(n @ p)


def _coth(x):
    return 1.0 / np.tanh(x)


def _mean_energy_from(params: ThermalParams, n: np.ndarray, p: np.ndarray) -> float:
    w = np.sqrt(1.0 + n * params.r)
    per_sector = (n - 1.0) * w * _coth(0.5 * params.beta * w)
    return 0.5 * (float(_coth(0.5 * params.beta)) + float(per_sector @ p))


def mean_energy(params: ThermalParams, tol: float = DEFAULT_TOL) -> float:
    """Mean energy in ``u_E``."""
    n, p, _ = _weights(params, tol)
    return _mean_energy_from(params, n, p)


def _alpha_guess(beta: float, r: float, target: float) -> float:
    # alpha at which sectors floor(target) and floor(target)+1 weigh the same
    m = float(math.floor(target))
    base = ThermalParams(beta, 0.0, r)
    g = _log_gamma(base, np.array([m, m + 1.0]))
    if m == 0:
        g[0] = 0.0
    return float(g[1] - g[0])


def solve_alpha_for_mean_n(
    r: float,
    t: float,
    target: float,
    tol: float = 1e-10,
    series_tol: float = DEFAULT_TOL,
) -> float:
    """Fugacity exponent giving mean particle number ``target`` at temperature ``t``.

    ``target == 0`` corresponds to ``alpha = +inf`` and returns ``math.inf``.
    The mean number decreases strictly with ``alpha``; a bracket is grown
    around an estimate and refined with Brent's method.  ``tol`` bounds the
    residual in ``<N>`` relative to ``max(1, target)``.
    """
    if target < 0:
        raise ValueError(f"target mean particle number must be >= 0, got {target}")
    if not t > 0:
        raise ValueError(f"temperature must be positive, got {t}")
    if r < 0:
        raise ValueError(f"coupling ratio must be nonnegative, got {r}")
    if target == 0:
        return math.inf
    beta = 1.0 / t

    def excess(alpha: float) -> float:
        try:
            return mean_particle_number(ThermalParams(beta, alpha, r), series_tol) - target
        except NonConvergentSeriesError:
            # weights still growing after the term cap: the mean is at least that large
            return float(_MAX_TERMS) - target

    floor_alpha = -math.inf
    if r == 0:
        # convergence needs alpha > -log(2 sinh(beta/2))
        floor_alpha = -float(_log_2sinh(0.5 * beta))

    if r == 0:
        # the sector-balance estimate sits exactly on the divergence floor here
        guess = floor_alpha + 1.0
    else:
        guess = _alpha_guess(beta, r, target)
    step = 1.0
    hi = guess
    for _ in range(200):
        if excess(hi) < 0:
            break
        hi += step
        step *= 2.0
    else:
        raise ConvergenceError("could not bracket alpha from above")
    step = 1.0
    lo = guess
    for _ in range(2000):
        if excess(lo) > 0:
            break
        if r == 0:
            lo = floor_alpha + 0.25 * (lo - floor_alpha)
            if lo - floor_alpha <= 1e-300 or lo == floor_alpha:
                raise ConvergenceError(f"mean particle number {target} not reachable")
        else:
            lo -= step
            step *= 2.0
    else:
        raise ConvergenceError("could not bracket alpha from below")

    alpha = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = abs(excess(alpha))
    if residual > tol * max(1.0, target):
        raise ConvergenceError(
            f"alpha solve left residual {residual:.3g} > {tol:.3g} for target {target}"
        )
    return float(alpha)


def _bound_minus_energy(params: ThermalParams, n: np.ndarray, p: np.ndarray, mean: float) -> float:
    """``E_sep(mean) - <H>`` assembled from nonnegative pieces.

    With ``E0`` the per-sector ground energy and ``L`` its chord through
    ``floor(mean)`` and ``floor(mean) + 1``,

        E_sep - <H> = [E_sep - L(mean)] - sum_N p_N [E0(N) - L(N)] - thermal excess,

    where the excess collects ``w / (exp(beta w) - 1)`` per excited mode.  No
    piece suffers cancellation, so the sign survives at very low temperature.
    """
    r, beta = params.r, params.beta
    m, p_lo, p_hi = _floor_weights(mean)
    gap = p_lo * separable_gap(m, r) + p_hi * separable_gap(m + 1, r)
    e0 = ground_energy_per_n(n, r)
    e0_m, e0_m1 = ground_energy_per_n(np.array([m, m + 1.0]), r)
    chord = e0_m + (n - m) * (e0_m1 - e0_m)
    above = float(np.clip(e0 - chord, 0.0, None) @ p)
    w = np.sqrt(1.0 + n * r)
    with np.errstate(over="ignore"):
        per_mode = np.where(n >= 2, (n - 1.0) * w / np.expm1(beta * w), 0.0)
        excess = (1.0 - p[0]) / math.expm1(beta) if beta < 700 else 0.0
    excess += float(per_mode @ p)
    return gap - above - excess


def thermal_visibility(
    r: float, t: float, mean: float, tol: float = 1e-10, series_tol: float = DEFAULT_TOL
) -> ThermalPoint:
    """Energy-witness visibility of the thermal state with mean number ``mean``.

    The separable bound is taken at the state's own mean particle number,
    which matches ``mean`` to the solver tolerance.
    """
    alpha = solve_alpha_for_mean_n(r, t, mean, tol, series_tol)
    if math.isinf(alpha):
        return ThermalPoint(t, alpha, 0.0, 0.0, 0.0, 0.0)
    params = ThermalParams(1.0 / t, alpha, r)
    n, p, log_z = _weights(params, series_tol)
    actual = float(n @ p)
    energy = _mean_energy_from(params, n, p)
    bound = sep_min_energy_mean_n(r, actual)
    visibility(energy, bound)  # validates the pair
    value = _bound_minus_energy(params, n, p, actual) / (bound + energy)
    return ThermalPoint(t, alpha, actual, energy, log_z, value)


def _thread_count() -> int:
    raw = os.environ.get("MACROENT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"MACROENT_THREADS must be an integer, got {raw!r}") from None


def thermal_grid(
    r: float,
    means: Iterable[float],
    temperatures: Iterable[float],
    tol: float = 1e-10,
    workers: int | None = None,
) -> list[ThermalPoint]:
    """Thermal visibility on a mean-number x temperature grid.

    Points are returned mean-major in input order, whatever the worker count
    (default from ``MACROENT_THREADS``).
    """
    jobs = [(float(m), float(t)) for m in means for t in temperatures]
    workers = workers or _thread_count()

    def run(job: tuple[float, float]) -> ThermalPoint:
        return thermal_visibility(r, job[1], job[0], tol)

    if workers == 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))
