"""Entanglement witnesses for ensembles of pairwise coupled harmonic oscillators."""

from .closedform import (
    EnergyKind,
    EnergyValue,
    ExcitationLabel,
    WavefunctionQuery,
    enumerate_levels,
    ground_energy,
    hermite_eval,
    partition_energy,
    partition_min_energy,
    separable_min_energy,
    wavefunction_eval,
)
from .fockspace import (
    ConvexSolution,
    NumberDistribution,
    convex_min_over_distribution,
    ground_energy_mean_n,
    mean_n_visibility,
    sep_min_energy_mean_n,
)
from .model import (
    EnsembleSpec,
    Partition,
    PhysicalParams,
    UnitSystem,
    coupling_ratio,
    equal_partition,
    full_partition,
    make_partition,
    natural_units,
    trivial_partition,
)
from .thermal import (
    ThermalParams,
    ThermalPoint,
    mean_energy,
    mean_particle_number,
    partition_function,
    solve_alpha_for_mean_n,
    thermal_visibility,
)
from .visibility import (
    VisibilityReport,
    asymptotic_limits,
    max_visibility,
    optimal_particle_number,
    partition_visibility,
    visibility,
)

__version__ = "0.1.0"
