"""Physical parameters, natural units and particle partitions.

Everything downstream works in natural units: lengths in ``u_x``, energies
in ``u_E`` and temperatures in ``u_T``.  Conversion from SI values happens
only here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import constants

__all__ = [
    "PhysicalParams",
    "UnitSystem",
    "EnsembleSpec",
    "Partition",
    "coupling_ratio",
    "natural_units",
    "ensemble_from_params",
    "make_partition",
    "trivial_partition",
    "full_partition",
    "equal_partition",
]


@dataclass(frozen=True)
class PhysicalParams:
    """SI parameters of the trapped, pairwise coupled ensemble.

    ``mass`` in kg, ``omega`` (trap frequency) in rad/s and ``kappa`` (pair
    spring constant) in N/m.
    """

    mass: float
    omega: float
    kappa: float = 0.0
    hbar: float = constants.hbar
    k_boltzmann: float = constants.k

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not self.omega > 0:
            raise ValueError(f"trap frequency must be positive, got {self.omega}")
        if not self.kappa >= 0:
            raise ValueError(f"coupling constant must be nonnegative, got {self.kappa}")


@dataclass(frozen=True)
class UnitSystem:
    length: float
    energy: float
    temperature: float


@dataclass(frozen=True)
class EnsembleSpec:
    """``n_particles`` oscillators with dimensionless coupling ratio ``r``."""

    n_particles: int
    r: float

    def __post_init__(self) -> None:
        if isinstance(self.n_particles, bool) or int(self.n_particles) != self.n_particles:
            raise ValueError(f"particle number must be an integer, got {self.n_particles!r}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        if self.n_particles < 1:
            raise ValueError(f"particle number must be >= 1, got {self.n_particles}")
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError(f"coupling ratio must be finite and >= 0, got {self.r}")


@dataclass(frozen=True)
class Partition:
    """Ordered split of particle indices ``1..n`` into nonempty blocks.

    Build instances through :func:`make_partition` or the named
    constructors; the raw constructor validates as well.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        _validate_blocks(self.n, self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def is_trivial(self) -> bool:
        return self.k == 1

    @property
    def is_full(self) -> bool:
        return self.k == self.n

    def zero_based(self) -> list[list[int]]:
        return [[i - 1 for i in b] for b in self.blocks]


def _check_site(params: PhysicalParams) -> None:
    # frozen dataclass validates on construction, but duck-typed inputs may not
    if not (params.mass > 0 and params.omega > 0):
        raise ValueError("mass and trap frequency must be positive")


def coupling_ratio(params: PhysicalParams) -> float:
    """Interaction strength relative to the trap stiffness, kappa/(m Omega^2)."""
    _check_site(params)
    return params.kappa / (params.mass * params.omega**2)


def natural_units(params: PhysicalParams) -> UnitSystem:
    _check_site(params)
    u_x = math.sqrt(params.hbar / (params.mass * params.omega))
    u_e = params.hbar * params.omega
    return UnitSystem(length=u_x, energy=u_e, temperature=u_e / params.k_boltzmann)


def ensemble_from_params(params: PhysicalParams, n_particles: int) -> EnsembleSpec:
    return EnsembleSpec(n_particles, coupling_ratio(params))


def _validate_blocks(n: int, blocks: Sequence[Sequence[int]]) -> None:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    seen: set[int] = set()
    for block in blocks:
        if len(block) == 0:
            raise ValueError("partition blocks must be nonempty")
        for i in block:
            if isinstance(i, bool) or int(i) != i or not 1 <= i <= n:
                raise ValueError(f"index {i!r} outside 1..{n}")
            if i in seen:
                raise ValueError(f"index {i} appears in more than one block")
            seen.add(int(i))
    if len(seen) != n:
        missing = sorted(set(range(1, n + 1)) - seen)
        raise ValueError(f"indices {missing} are not covered by any block")


def make_partition(n: int, blocks: Iterable[Iterable[int]]) -> Partition:
    """Validate ``blocks`` as a set partition of ``{1, ..., n}``.

    Block order is kept; indices inside a block are sorted.
    """
    normalized = tuple(tuple(sorted(int(i) for i in b)) for b in blocks)
    return Partition(int(n), normalized)


def trivial_partition(n: int) -> Partition:
    return make_partition(n, [range(1, n + 1)])


def full_partition(n: int) -> Partition:
    return make_partition(n, [[i] for i in range(1, n + 1)])


def equal_partition(n: int, k: int) -> Partition:
    """Split ``1..n`` into ``k`` consecutive blocks of ``n // k`` particles."""
    if k < 1 or n % k:
        raise ValueError(f"{n} particles cannot be split into {k} equal blocks")
    size = n // k
    return make_partition(n, [range(j * size + 1, (j + 1) * size + 1) for j in range(k)])
