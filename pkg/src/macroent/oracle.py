"""Numerical cross-checks that do not use the closed-form solutions.

* The Hamiltonian is expanded in a product basis of (optionally rescaled)
  Hermite functions; single-site position and derivative matrices follow
  from the Hermite recursion relations, so matrix elements are exact and
  the truncated ground energy is a variational upper bound.
* Separable minima come from alternating minimization over block-product
  states: every block in turn is replaced by the lowest eigenvector of the
  operator obtained by contracting the Hamiltonian with all other blocks.
* Constrained minima over particle-number distributions come from
  exhaustive scans of small supports.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .closedform import orthonormal_completion
from .exceptions import BudgetExceededError, ConvergenceError
from .model import EnsembleSpec, Partition

__all__ = [
    "MAX_BASIS_ROWS",
    "TruncatedBasisConfig",
    "QuadraticForm",
    "SeparabilityResult",
    "site_operators",
    "build_hamiltonian_matrix",
    "smallest_eigenvalue",
    "tune_frequency",
    "alternating_separability_solver",
    "brute_force_distribution_min",
    "three_point_min",
]

MAX_BASIS_ROWS = 20_000
# blocks up to this size are diagonalized densely
_DENSE_LIMIT = 2_000


@dataclass(frozen=True)
class TruncatedBasisConfig:
    """Per-site truncation and solver settings.

    ``frequency`` rescales the single-site basis to ``h_n(sqrt(w) xi)``;
    any positive value gives a valid variational basis.
    """

    dim: int = 20
    tol: float = 1e-12
    max_iter: int = 20_000
    restarts: int = 8
    frequency: float = 1.0
    seed: int = 0
    max_rows: int = MAX_BASIS_ROWS

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError(f"per-site dimension must be >= 2, got {self.dim}")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not self.frequency > 0:
            raise ValueError("basis frequency must be positive")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")


@dataclass(frozen=True)
class QuadraticForm:
    """Potential ``(1/2) xi^T A xi`` of the ensemble; kinetic term is ``-(1/2) Laplacian``."""

    matrix: np.ndarray

    @classmethod
    def for_ensemble(cls, spec: EnsembleSpec) -> "QuadraticForm":
        # (1/2) sum_i xi_i^2 + (R/2) sum_{i<j} (xi_i - xi_j)^2
        n, r = spec.n_particles, spec.r
        a = np.full((n, n), -r)
        np.fill_diagonal(a, 1.0 + (n - 1) * r)
        return cls(a)

    def restrict(self, sites) -> "QuadraticForm":
        idx = np.asarray(sites)
        return QuadraticForm(self.matrix[np.ix_(idx, idx)])

    def block_frequencies(self, sites) -> tuple[float, np.ndarray]:
        """Normal-mode frequencies of the block restricted to ``sites``.

        Returns the frequency along the block's uniform direction and those of
        the orthogonal complement, using the same basis completion as the
        closed-form wave functions.
        """
        sub = self.restrict(sites).matrix
        rot = orthonormal_completion(len(sites))
        local = rot @ sub @ rot.T
        return math.sqrt(local[0, 0]), np.sqrt(np.linalg.eigvalsh(local[1:, 1:]))


@lru_cache(maxsize=64)
def _site_operators(dim: int, frequency: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    big = dim + 1
    k = np.arange(1, big)
    x = np.diag(np.sqrt(k / 2.0), 1)
    x = x + x.T
    d = np.diag(np.sqrt(k / 2.0), 1) - np.diag(np.sqrt(k / 2.0), -1)
    # products formed one level above the cut give exact matrix elements
    x2 = (x @ x)[:dim, :dim]
    kinetic = -(d @ d)[:dim, :dim]
    s = math.sqrt(frequency)
    return x[:dim, :dim] / s, x2 / frequency, kinetic * frequency


def site_operators(dim: int, frequency: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-site ``xi``, ``xi^2`` and ``-d^2/dxi^2`` in the truncated basis."""
    return tuple(m.copy() for m in _site_operators(int(dim), float(frequency)))


def _embed(ops: dict[int, sp.spmatrix], n_sites: int, dim: int) -> sp.csr_matrix:
    eye = sp.identity(dim, format="csr")
    out = sp.identity(1, format="csr")
    for i in range(n_sites):
        out = sp.kron(out, ops.get(i, eye), format="csr")
    return out


def _check_budget(n_sites: int, config: TruncatedBasisConfig) -> int:
    rows = config.dim**n_sites
    if rows > config.max_rows:
        raise BudgetExceededError(
            f"{config.dim}^{n_sites} = {rows} basis states exceed the budget of {config.max_rows}"
        )
    return rows


def _operator_for_form(
    form: QuadraticForm, config: TruncatedBasisConfig
) -> tuple[sp.csr_matrix, list[sp.csr_matrix]]:
    a = form.matrix
    n_sites = a.shape[0]
    _check_budget(n_sites, config)
    xi, xi2, kin = _site_operators(config.dim, config.frequency)
    positions = [_embed({i: sp.csr_matrix(xi)}, n_sites, config.dim) for i in range(n_sites)]
    h = _embed({}, n_sites, config.dim) * 0.0
    for i in range(n_sites):
        local = sp.csr_matrix(0.5 * kin + 0.5 * a[i, i] * xi2)
        h = h + _embed({i: local}, n_sites, config.dim)
        for j in range(i + 1, n_sites):
            if a[i, j] != 0.0:
                h = h + a[i, j] * (positions[i] @ positions[j])
    h = ((h + h.T) * 0.5).tocsr()
    return h, positions


def build_hamiltonian_matrix(
    spec: EnsembleSpec, config: TruncatedBasisConfig, dense: bool = False
):
    """Hamiltonian (in ``u_E``) on the ``dim**N`` product Hermite basis.

    Returned as a sparse CSR matrix, or a dense array when ``dense``.
    """
    h, _ = _operator_for_form(QuadraticForm.for_ensemble(spec), config)
    return h.toarray() if dense else h


def _lowest_pair(matrix, tol: float, v0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    size = matrix.shape[0]
    if size <= _DENSE_LIMIT:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        w, v = np.linalg.eigh(dense)
        return float(w[0]), v[:, 0]
    w, v = spla.eigsh(matrix, k=1, which="SA", tol=tol, v0=v0, maxiter=max(1000, 10 * size))
    return float(w[0]), v[:, 0]


def smallest_eigenvalue(matrix, tol: float = 1e-10) -> float:
    """Lowest eigenvalue of a real symmetric matrix.

    Uses implicitly restarted Lanczos; inputs of at most 16 rows are
    diagonalized directly.  The eigenpair residual is checked against ``tol``
    (relative to ``max(1, |lambda|)``).
    """
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    asym = matrix - matrix.T
    asym_norm = abs(asym).max() if sp.issparse(asym) else np.max(np.abs(asym))
    if asym_norm > 1e-12 * max(1.0, abs(matrix).max()):
        raise ValueError("matrix is not symmetric")
    try:
        if matrix.shape[0] <= 16:
            lam, vec = _lowest_pair(matrix, tol)
        else:
            w, v = spla.eigsh(
                matrix, k=1, which="SA", tol=min(tol, 1e-12), maxiter=100 * matrix.shape[0]
            )
            lam, vec = float(w[0]), v[:, 0]
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos iteration did not converge") from exc
    residual = np.linalg.norm(matrix @ vec - lam * vec) / np.linalg.norm(vec)
    if residual > tol * max(1.0, abs(lam)):
        raise ConvergenceError(f"eigenpair residual {residual:.3g} above tolerance {tol:.3g}")
    return lam


def tune_frequency(
    spec: EnsembleSpec, probe_dim: int = 6, bounds: tuple[float, float] = (0.05, 50.0)
) -> float:
    """Basis frequency minimizing the truncated ground energy at ``probe_dim``.

    A cheap, closed-form-free way to pick a good basis scale: every
    frequency yields an upper bound, and the best small-basis scale carries
    over to larger bases.
    """
    n = spec.n_particles
    probe_dim = max(2, min(probe_dim, int(MAX_BASIS_ROWS ** (1.0 / n))))

    def energy(log_w: float) -> float:
        cfg = TruncatedBasisConfig(dim=probe_dim, frequency=math.exp(log_w))
        return _lowest_pair(build_hamiltonian_matrix(spec, cfg), 1e-10)[0]

    res = minimize_scalar(
        energy,
        bounds=(math.log(bounds[0]), math.log(bounds[1])),
        method="bounded",
        options={"xatol": 1e-4},
    )
    return float(math.exp(res.x))


@dataclass
class SeparabilityResult:
    """Best block-product energy found, with per-restart diagnostics."""

    value: float
    restart_values: list[float]
    iterations: list[int]
    states: list[np.ndarray]
    residuals: list[float]
    parallel_means: list[float]
    converged: list[bool] = field(default_factory=list)


class _BlockSystem:
    """Hamiltonian pieces for alternating minimization over ``partition``."""

    def __init__(self, spec: EnsembleSpec, partition: Partition, config: TruncatedBasisConfig):
        if partition.n != spec.n_particles:
            raise ValueError("partition does not match the ensemble")
        self.form = QuadraticForm.for_ensemble(spec)
        self.config = config
        self.blocks = partition.zero_based()
        self.local: list = []
        self.positions: list[list] = []
        for block in self.blocks:
            h, pos = _operator_for_form(self.form.restrict(block), config)
            if h.shape[0] <= _DENSE_LIMIT:
                h, pos = h.toarray(), [x.toarray() for x in pos]
            self.local.append(h)
            self.positions.append(pos)

    def means(self, j: int, state: np.ndarray) -> np.ndarray:
        return np.array([state @ (x @ state) for x in self.positions[j]])

    def reduced_operator(self, j: int, states, means):
        """Contraction of the Hamiltonian with every block but ``j``.

        Couplings between blocks are bilinear in positions, so the contraction
        leaves block ``j``'s own Hamiltonian plus a linear field and a constant.
        """
        a = self.form.matrix
        block = self.blocks[j]
        op = self.local[j].copy()
        for pos_idx, site in enumerate(block):
            fieldstrength = 0.0
            for b, other in enumerate(self.blocks):
                if b == j:
                    continue
                fieldstrength += float(a[site, other] @ means[b])
            if fieldstrength:
                op = op + fieldstrength * self.positions[j][pos_idx]
        const = 0.0
        others = [b for b in range(len(self.blocks)) if b != j]
        for b in others:
            const += float(states[b] @ (self.local[b] @ states[b]))
        for b, c in itertools.combinations(others, 2):
            const += float(means[b] @ a[np.ix_(self.blocks[b], self.blocks[c])] @ means[c])
        return op, const

    def energy(self, states, means) -> float:
        a = self.form.matrix
        total = sum(float(s @ (h @ s)) for s, h in zip(states, self.local))
        for b, c in itertools.combinations(range(len(self.blocks)), 2):
            total += float(means[b] @ a[np.ix_(self.blocks[b], self.blocks[c])] @ means[c])
        return total


def _relative_residual(op, state: np.ndarray, const: float) -> tuple[float, float]:
    applied = op @ state
    lam = float(state @ applied)
    res = np.linalg.norm(applied - lam * state)
    return res / max(1.0, abs(lam + const)), lam + const


def alternating_separability_solver(
    spec: EnsembleSpec, partition: Partition, config: TruncatedBasisConfig
) -> SeparabilityResult:
    """Minimal energy over states factorizing along ``partition``.

    Each restart begins from normalized Gaussian-random block vectors and
    sweeps over the blocks until the energy changes by less than
    ``config.tol`` and every block is an eigenvector of its reduced operator
    to relative residual ``config.tol``.  The lowest converged energy is
    returned; all restarts are kept for diagnostics.
    """
    system = _BlockSystem(spec, partition, config)
    rng = np.random.default_rng(config.seed)
    n_blocks = len(system.blocks)
    best: tuple[float, list[np.ndarray]] | None = None
    values, iterations, flags = [], [], []

    for _ in range(config.restarts):
        states = []
        for h in system.local:
            v = rng.standard_normal(h.shape[0])
            states.append(v / np.linalg.norm(v))
        means = [system.means(j, s) for j, s in enumerate(states)]
        energy = system.energy(states, means)
        converged = False
        sweep = 0
        for sweep in range(1, config.max_iter + 1):
            for j in range(n_blocks):
                op, _ = system.reduced_operator(j, states, means)
                _, vec = _lowest_pair(op, 1e-14, v0=states[j])
                states[j] = vec / np.linalg.norm(vec)
                means[j] = system.means(j, states[j])
            new_energy = system.energy(states, means)
            change = abs(new_energy - energy)
            energy = new_energy
            if change < config.tol:
                worst = max(
                    _fixed_point_residual(system, j, states, means) for j in range(n_blocks)
                )
                if worst < config.tol:
                    converged = True
                    break
        values.append(energy)
        iterations.append(sweep)
        flags.append(converged)
        if converged and (best is None or energy < best[0]):
            best = (energy, [s.copy() for s in states])

    if best is None:
        raise ConvergenceError(
            f"no restart converged within {config.max_iter} sweeps; energies {values}"
        )
    value, states = best
    means = [system.means(j, s) for j, s in enumerate(states)]
    residuals = [_fixed_point_residual(system, j, states, means) for j in range(n_blocks)]
    parallel = [float(np.sum(m) / math.sqrt(len(m))) for m in means]
    return SeparabilityResult(value, values, iterations, states, residuals, parallel, flags)


def _fixed_point_residual(system: _BlockSystem, j: int, states, means) -> float:
    op, const = system.reduced_operator(j, states, means)
    return _relative_residual(op, states[j], const)[0]


def _feasible_pairs(values: np.ndarray, mean: float):
    n = np.arange(values.size)
    lo = n[n <= mean]
    hi = n[n >= mean]
    return lo, hi


@lru_cache(maxsize=16)
def _triples(n_max: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n_max + 1), 3)), dtype=int).reshape(-1, 3)


def three_point_min(
    values: np.ndarray, mean: float, grid_resolution: int = 10
) -> tuple[float, dict[int, float]]:
    """Smallest objective over three-point supports, middle weight on a grid.

    For support ``a < b < c`` and middle weight ``q`` the outer weights follow
    from the two linear constraints.  Returns the value and its distribution.
    """
    values = np.asarray(values, dtype=float)
    tri = _triples(values.size - 1)
    if tri.size == 0:
        return math.inf, {}
    a, b, c = tri[:, 0:1], tri[:, 1:2], tri[:, 2:3]
    q = np.linspace(0.0, 1.0, grid_resolution + 1)[None, :]
    # p_a + p_c = 1 - q,  a p_a + c p_c = mean - b q
    p_c = (mean - b * q - a * (1.0 - q)) / (c - a)
    p_a = 1.0 - q - p_c
    ok = (p_a >= -1e-15) & (p_c >= -1e-15)
    cost = p_a * values[a] + q * values[b] + p_c * values[c]
    cost = np.where(ok, cost, np.inf)
    i, k = np.unravel_index(np.argmin(cost), cost.shape)
    if not np.isfinite(cost[i, k]):
        return math.inf, {}
    dist = {
        int(a[i, 0]): float(p_a[i, k]),
        int(b[i, 0]): float(q[0, k]),
        int(c[i, 0]): float(p_c[i, k]),
    }
    return float(cost[i, k]), dist


def brute_force_distribution_min(
    values, mean: float, n_max: int | None = None, grid_resolution: int = 10
) -> tuple[dict[int, float], float]:
    """Minimize ``sum values[N] p_N`` with ``sum p_N = 1`` and ``sum N p_N = mean``.

    Scans every support of one or two points exactly and every three-point
    support on a probability grid; returns the best distribution found.
    """
    values = np.asarray(values, dtype=float)
    if n_max is not None:
        values = values[: n_max + 1]
    top = values.size - 1
    if not 0 <= mean <= top:
        raise ValueError(f"mean particle number {mean} infeasible on 0..{top}")
    best_value = math.inf
    best: dict[int, float] = {}
    lo, hi = _feasible_pairs(values, mean)
    for a in lo:
        for b in hi:
            if a == b:
                dist = {int(a): 1.0}
            else:
                p_b = (mean - a) / (b - a)
                dist = {int(a): 1.0 - p_b, int(b): p_b}
            value = sum(values[n] * p for n, p in dist.items())
            if value < best_value - 1e-15:
                best_value, best = value, dist
    three, dist = three_point_min(values, mean, grid_resolution)
    if three < best_value - 1e-12 * max(1.0, abs(best_value)):
        best_value, best = three, dist
    return best, float(best_value)
