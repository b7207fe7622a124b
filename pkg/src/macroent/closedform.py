"""Exact spectra and wave functions of the coupled-oscillator ensemble.

For a partition of the particles into blocks ``I_1, ..., I_K`` the
Hamiltonian restricted to block-product states decouples into

* one "parallel" mode per block (centre of mass of the block) with
  frequency ``sqrt(1 + (N - N_j) R)``, and
* ``N_j - 1`` "perpendicular" modes per block (relative motion inside the
  block), all with frequency ``sqrt(1 + N R)``.

The trivial partition (one block) gives the ordinary spectrum, the full
partition (one particle per block) the fully separable one.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import OrderOverflowError
from .model import EnsembleSpec, Partition

__all__ = [
    "MAX_HERMITE_ORDER",
    "EnergyKind",
    "EnergyValue",
    "ExcitationLabel",
    "WavefunctionQuery",
    "hermite_eval",
    "hermite_table",
    "mode_frequencies",
    "partition_energy",
    "partition_min_energy",
    "ground_energy",
    "separable_min_energy",
    "enumerate_levels",
    "orthonormal_completion",
    "wavefunction_eval",
]

MAX_HERMITE_ORDER = 512

_PI_QUARTER = math.pi**-0.25
# rescale the recurrence once values leave this window
_BIG = 1e150


class EnergyKind(enum.Enum):
    STANDARD = "standard"
    PARTITION_SEPARABLE = "partition-separable"
    FULLY_SEPARABLE = "fully-separable"


@dataclass(frozen=True, order=True)
class EnergyValue:
    value: float
    kind: EnergyKind = EnergyKind.STANDARD

    def __float__(self) -> float:
        return self.value


def _kind_for(partition: Partition) -> EnergyKind:
    if partition.is_trivial:
        return EnergyKind.STANDARD
    if partition.is_full:
        return EnergyKind.FULLY_SEPARABLE
    return EnergyKind.PARTITION_SEPARABLE


@dataclass(frozen=True)
class ExcitationLabel:
    """Quantum numbers of a separability eigenstate.

    ``parallel[j]`` excites the centre-of-mass mode of block ``j``;
    ``perpendicular[j]`` holds the ``N_j - 1`` relative-mode excitations of
    the same block.
    """

    parallel: tuple[int, ...]
    perpendicular: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parallel", tuple(int(v) for v in self.parallel))
        object.__setattr__(
            self, "perpendicular", tuple(tuple(int(v) for v in p) for p in self.perpendicular)
        )
        if len(self.parallel) != len(self.perpendicular):
            raise ValueError("parallel and perpendicular parts must have one entry per block")
        if any(v < 0 for v in self.parallel) or any(v < 0 for p in self.perpendicular for v in p):
            raise ValueError("excitation numbers must be nonnegative")

    @classmethod
    def ground(cls, partition: Partition) -> "ExcitationLabel":
        return cls(
            (0,) * partition.k,
            tuple((0,) * (size - 1) for size in partition.sizes),
        )

    @classmethod
    def for_full(cls, numbers: Sequence[int]) -> "ExcitationLabel":
        """Label ``(n_1, ..., n_N)`` of a fully separable state."""
        return cls(tuple(numbers), tuple(() for _ in numbers))

    @classmethod
    def for_trivial(cls, n_parallel: int, n_perpendicular: Sequence[int]) -> "ExcitationLabel":
        return cls((n_parallel,), (tuple(n_perpendicular),))

    def check(self, partition: Partition) -> None:
        if len(self.parallel) != partition.k:
            raise ValueError(
                f"label has {len(self.parallel)} blocks, partition has {partition.k}"
            )
        for j, (perp, size) in enumerate(zip(self.perpendicular, partition.sizes)):
            if len(perp) != size - 1:
                raise ValueError(
                    f"block {j} has {size} particles and needs {size - 1} "
                    f"perpendicular quantum numbers, got {len(perp)}"
                )


def hermite_table(n_max: int, xi, max_order: int = MAX_HERMITE_ORDER) -> np.ndarray:
    """Hermite functions of orders ``0..n_max`` at the points ``xi``.

    Returns an array of shape ``(n_max + 1,) + shape(xi)``.  Uses the
    normalized three-term recurrence on ``h_n exp(xi^2/2)`` with running
    rescaling, so that neither factorials nor the Gaussian factor overflow
    or underflow prematurely.
    """
    if isinstance(n_max, bool) or int(n_max) != n_max or n_max < 0:
        raise ValueError(f"Hermite order must be a nonnegative integer, got {n_max!r}")
    if n_max > max_order:
        raise OrderOverflowError(f"Hermite order {n_max} exceeds the maximum {max_order}")
    x = np.asarray(xi, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    log_scale = np.zeros(x.shape)
    prev = np.zeros(x.shape)
    cur = np.full(x.shape, _PI_QUARTER)
    gauss = -0.5 * x * x
    out[0] = np.exp(gauss) * cur
    sqrt2x = math.sqrt(2.0) * x
    for n in range(n_max):
        nxt = (sqrt2x * cur - math.sqrt(n) * prev) / math.sqrt(n + 1)
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if np.any(big):
            s = np.where(big, np.abs(cur), 1.0)
            cur = cur / s
            prev = prev / s
            log_scale = log_scale + np.log(s)
        with np.errstate(over="ignore", under="ignore"):
            out[n + 1] = cur * np.exp(gauss + log_scale)
    return out


def hermite_eval(n: int, xi, max_order: int = MAX_HERMITE_ORDER):
    """Normalized Hermite function ``h^(n)`` at ``xi`` (scalar or array)."""
    values = hermite_table(n, xi, max_order)[n]
    return float(values) if np.ndim(values) == 0 else values


def mode_frequencies(spec: EnsembleSpec, partition: Partition) -> tuple[list[float], float]:
    """Parallel-mode frequency of each block and the shared perpendicular one."""
    _check_partition(spec, partition)
    n, r = spec.n_particles, spec.r
    parallel = [math.sqrt(1.0 + (n - size) * r) for size in partition.sizes]
    return parallel, math.sqrt(1.0 + n * r)


def _check_partition(spec: EnsembleSpec, partition: Partition) -> None:
    if partition.n != spec.n_particles:
        raise ValueError(
            f"partition covers {partition.n} particles, ensemble has {spec.n_particles}"
        )


def partition_energy(
    spec: EnsembleSpec, partition: Partition, label: ExcitationLabel
) -> EnergyValue:
    """Separability eigenvalue of ``label`` for the given partition, in ``u_E``."""
    label.check(partition)
    parallel, perp = mode_frequencies(spec, partition)
    value = 0.0
    for w, n_par, n_perp, size in zip(
        parallel, label.parallel, label.perpendicular, partition.sizes
    ):
        value += perp * (sum(n_perp) + 0.5 * (size - 1)) + w * (n_par + 0.5)
    return EnergyValue(value, _kind_for(partition))


def partition_min_energy(spec: EnsembleSpec, partition: Partition) -> EnergyValue:
    """Minimal energy over states that factorize along ``partition``."""
    parallel, perp = mode_frequencies(spec, partition)
    value = 0.5 * sum(parallel) + 0.5 * (spec.n_particles - partition.k) * perp
    return EnergyValue(value, _kind_for(partition))


def ground_energy(spec: EnsembleSpec) -> float:
    n, r = spec.n_particles, spec.r
    return 0.5 * (1.0 + (n - 1) * math.sqrt(1.0 + n * r))


def separable_min_energy(spec: EnsembleSpec) -> float:
    n, r = spec.n_particles, spec.r
    return 0.5 * n * math.sqrt(1.0 + (n - 1) * r)


def enumerate_levels(
    spec: EnsembleSpec, partition: Partition, count: int
) -> list[EnergyValue]:
    """The ``count`` lowest partition-restricted levels, with multiplicity.

    Modes sharing a frequency are grouped; a group of ``g`` modes carrying
    ``t`` quanta contributes ``C(t + g - 1, g - 1)`` degenerate labels.
    Levels are produced in ascending order by a best-first walk over the
    group occupation lattice.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    parallel, perp = mode_frequencies(spec, partition)
    groups: dict[float, int] = {}
    for w in parallel:
        groups[w] = groups.get(w, 0) + 1
    n_perp_modes = spec.n_particles - partition.k
    if n_perp_modes:
        groups[perp] = groups.get(perp, 0) + n_perp_modes
    freqs = sorted(groups)
    sizes = [groups[w] for w in freqs]
    e0 = partition_min_energy(spec, partition).value
    kind = _kind_for(partition)

    start = (0,) * len(freqs)
    heap = [(e0, start)]
    seen = {start}
    levels: list[EnergyValue] = []
    while heap and len(levels) < count:
        energy, occ = heapq.heappop(heap)
        mult = 1
        for t, g in zip(occ, sizes):
            mult *= math.comb(t + g - 1, g - 1)
        levels.extend([EnergyValue(energy, kind)] * min(mult, count - len(levels)))
        for i in range(len(occ)):
            nxt = occ[:i] + (occ[i] + 1,) + occ[i + 1 :]
            if nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (e0 + sum(t * w for t, w in zip(nxt, freqs)), nxt))
    return levels


def orthonormal_completion(size: int) -> np.ndarray:
    """Orthonormal basis whose first row is ``(1, ..., 1)/sqrt(size)``.

    The remaining rows come from Gram-Schmidt on the standard basis vectors,
    lowest index first, skipping vectors that are already spanned.
    """
    basis = [np.full(size, 1.0 / math.sqrt(size))]
    for i in range(size):
        if len(basis) == size:
            break
        v = np.zeros(size)
        v[i] = 1.0
        for b in basis:
            v -= (b @ v) * b
        for b in basis:  # second pass for numerical orthogonality
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            basis.append(v / norm)
    return np.array(basis)


@dataclass(frozen=True)
class WavefunctionQuery:
    partition: Partition
    label: ExcitationLabel
    points: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != self.partition.n:
            raise ValueError(
                f"points need {self.partition.n} coordinates each, got {pts.shape[1]}"
            )
        object.__setattr__(self, "points", pts)
        self.label.check(self.partition)


def wavefunction_eval(query: WavefunctionQuery, spec: EnsembleSpec) -> np.ndarray:
    """Amplitude of a separability eigenfunction at each query point.

    Coordinates are ``xi_i = x_i / u_x``.  Without normalization this is the
    bare product of Hermite functions of the scaled block coordinates; with
    it, each factor ``h(s y)`` is multiplied by ``sqrt(s)``.
    """
    partition, label = query.partition, query.label
    parallel, perp = mode_frequencies(spec, partition)
    pts = query.points
    amp = np.ones(pts.shape[0])
    norm = 1.0
    s_perp = math.sqrt(perp)
    for j, block in enumerate(partition.zero_based()):
        rot = orthonormal_completion(len(block))
        local = pts[:, block] @ rot.T
        s_par = math.sqrt(parallel[j])
        amp *= hermite_eval(label.parallel[j], s_par * local[:, 0])
        norm *= math.sqrt(s_par)
        for m, n_perp in enumerate(label.perpendicular[j]):
            amp *= hermite_eval(n_perp, s_perp * local[:, m + 1])
            norm *= math.sqrt(s_perp)
    return amp * norm if query.normalized else amp

