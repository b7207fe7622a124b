import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize

from macroent.closedform import (
    MAX_HERMITE_ORDER,
    EnergyKind,
    ExcitationLabel,
    WavefunctionQuery,
    enumerate_levels,
    ground_energy,
    hermite_eval,
    hermite_table,
    mode_frequencies,
    orthonormal_completion,
    partition_energy,
    partition_min_energy,
    separable_min_energy,
    wavefunction_eval,
)
from macroent.exceptions import OrderOverflowError
from macroent.model import (
    EnsembleSpec,
    equal_partition,
    full_partition,
    make_partition,
    trivial_partition,
)


def rodrigues(n, x):
    """h_n from (-1)^n e^{x^2/2} d^n/dx^n e^{-x^2}, differentiating P(x) e^{-x^2} exactly."""
    poly = np.array([1.0])
    for _ in range(n):
        poly = P.polysub(P.polyder(poly), P.polymul([0.0, 2.0], poly))
    norm = math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
    return (-1) ** n * P.polyval(x, poly) * np.exp(-0.5 * x * x) / norm


def test_hermite_examples():
    assert hermite_eval(0, 0.0) == pytest.approx(math.pi**-0.25, rel=1e-15)
    assert hermite_eval(0, 0.0) == pytest.approx(0.7511255, abs=1e-7)
    assert hermite_eval(1, 0.0) == 0.0


@pytest.mark.parametrize("n", range(9))
def test_hermite_matches_rodrigues(n):
    x = np.linspace(-5.0, 5.0, 20)
    np.testing.assert_allclose(hermite_eval(n, x), rodrigues(n, x), atol=1e-9, rtol=0)


def _trapz(f, x):
    return float(np.sum(f) * (x[1] - x[0]))


def test_hermite_orthonormal_by_quadrature():
    x = np.linspace(-12.0, 12.0, 4001)
    h2, h3 = hermite_eval(2, x), hermite_eval(3, x)
    assert abs(_trapz(h2 * h3, x)) < 1e-10
    assert _trapz(h2 * h2, x) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("n", [100, 300, 500])
def test_hermite_high_order_stays_normalized(n):
    x = np.linspace(-40.0, 40.0, 40001)
    table = hermite_table(n, x)
    assert np.all(np.isfinite(table))
    assert _trapz(table[n] ** 2, x) == pytest.approx(1.0, abs=1e-9)
    assert abs(_trapz(table[n] * table[n - 1], x)) < 1e-9


def test_hermite_order_guard():
    hermite_eval(MAX_HERMITE_ORDER, 1.0)
    with pytest.raises(OrderOverflowError):
        hermite_eval(MAX_HERMITE_ORDER + 1, 1.0)
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)


def test_bipartite_energies():
    spec = EnsembleSpec(2, 1.5)
    e = partition_energy(spec, trivial_partition(2), ExcitationLabel.ground(trivial_partition(2)))
    assert e.value == pytest.approx(1.5, rel=1e-15)
    assert e.kind is EnergyKind.STANDARD
    e = partition_energy(spec, full_partition(2), ExcitationLabel.for_full([0, 0]))
    assert e.value == pytest.approx(math.sqrt(2.5), rel=1e-15)
    assert e.kind is EnergyKind.FULLY_SEPARABLE


@given(n=st.integers(1, 8), data=st.data())
def test_uncoupled_ground_is_n_over_two(n, data):
    k = data.draw(st.sampled_from([k for k in range(1, n + 1) if n % k == 0]))
    part = equal_partition(n, k)
    e = partition_energy(EnsembleSpec(n, 0.0), part, ExcitationLabel.ground(part))
    assert e.value == pytest.approx(n / 2, rel=1e-14)


def test_label_shape_is_checked():
    with pytest.raises(ValueError):
        partition_energy(EnsembleSpec(3, 1.0), trivial_partition(3), ExcitationLabel.for_trivial(0, [0]))
    with pytest.raises(ValueError):
        ExcitationLabel((0, -1), ((), ()))


def test_partition_min_energy_examples():
    for n, r in [(2, 1.5), (5, 0.3), (7, 10.0)]:
        spec = EnsembleSpec(n, r)
        assert partition_min_energy(spec, trivial_partition(n)).value == pytest.approx(
            ground_energy(spec), rel=1e-14
        )
        assert partition_min_energy(spec, full_partition(n)).value == pytest.approx(
            separable_min_energy(spec), rel=1e-14
        )
    e = partition_min_energy(EnsembleSpec(4, 1.0), equal_partition(4, 2))
    assert e.value == pytest.approx(0.5 * (2 * math.sqrt(3) + 2 * math.sqrt(5)), rel=1e-14)
    assert e.value == pytest.approx(3.9681187, abs=1e-7)
    assert e.kind is EnergyKind.PARTITION_SEPARABLE


def gaussian_block_min(spec, partition):
    """Numerical minimum of the energy over zero-mean block-product Gaussian states.

    For psi ~ exp(-xi^T G xi / 2) the energy is tr(G)/4 + tr(A G^-1)/4 with A the
    potential matrix; G is block diagonal, parametrized by Cholesky factors.
    """
    n, r = spec.n_particles, spec.r
    a = np.full((n, n), -r)
    np.fill_diagonal(a, 1.0 + (n - 1) * r)
    blocks = partition.zero_based()
    tril = [np.tril_indices(len(b)) for b in blocks]

    def unpack(x):
        g = np.zeros((n, n))
        pos = 0
        for b, (i, j) in zip(blocks, tril):
            m = len(i)
            l = np.zeros((len(b), len(b)))
            l[i, j] = x[pos : pos + m]
            pos += m
            g[np.ix_(b, b)] = l @ l.T
        return g

    def energy(x):
        g = unpack(x)
        return 0.25 * np.trace(g) + 0.25 * np.trace(a @ np.linalg.inv(g))

    x0 = np.concatenate([np.eye(len(b))[i, j] for b, (i, j) in zip(blocks, tril)])
    res = minimize(energy, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 10000})
    return res.fun


@pytest.mark.parametrize(
    "n,r,blocks",
    [
        (4, 1.0, [[1, 2], [3, 4]]),
        (3, 2.0, [[1], [2, 3]]),
        (5, 0.5, [[1, 4], [2], [3, 5]]),
        (4, 10.0, [[1, 2, 3], [4]]),
    ],
)
def test_partition_min_energy_matches_gaussian_minimization(n, r, blocks):
    spec = EnsembleSpec(n, r)
    part = make_partition(n, blocks)
    assert partition_min_energy(spec, part).value == pytest.approx(
        gaussian_block_min(spec, part), rel=1e-8
    )


@st.composite
def partition_and_split(draw):
    n = draw(st.integers(2, 9))
    labels = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    groups = {}
    for i, lab in enumerate(labels, start=1):
        groups.setdefault(lab, []).append(i)
    blocks = list(groups.values())
    splittable = [b for b in blocks if len(b) > 1]
    if not splittable:
        blocks = [list(range(1, n + 1))]
        splittable = blocks
    target = draw(st.sampled_from(splittable))
    cut = draw(st.integers(1, len(target) - 1))
    finer = [b for b in blocks if b is not target] + [target[:cut], target[cut:]]
    return n, blocks, finer


@settings(max_examples=200)
@given(case=partition_and_split(), r=st.floats(0.0, 100.0))
def test_refinement_never_lowers_bound(case, r):
    n, coarse, fine = case
    spec = EnsembleSpec(n, r)
    e_coarse = partition_min_energy(spec, make_partition(n, coarse)).value
    e_fine = partition_min_energy(spec, make_partition(n, fine)).value
    assert e_fine >= e_coarse - 1e-12 * e_coarse


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("r", [0.0, 0.1, 1.0, 10.0])
def test_spectrum_ordering(n, r):
    spec = EnsembleSpec(n, r)
    lo_std = min(enumerate_levels(spec, trivial_partition(n), 5)).value
    lo_sep = min(enumerate_levels(spec, full_partition(n), 5)).value
    if r > 0:
        assert lo_std < lo_sep
    else:
        assert lo_std == pytest.approx(lo_sep, rel=1e-15)


def test_macroscopic_ratio_tends_to_one():
    spec = EnsembleSpec(10**6, 1.0)
    ratio = partition_min_energy(spec, trivial_partition(10**6)).value / partition_min_energy(
        spec, full_partition(10**6)
    ).value
    assert abs(ratio - 1.0) < 1e-3


def test_enumerate_levels_examples():
    values = lambda levels: [e.value for e in levels]
    assert values(enumerate_levels(EnsembleSpec(2, 0.0), trivial_partition(2), 3)) == pytest.approx(
        [1.0, 2.0, 2.0], rel=1e-15
    )
    assert values(enumerate_levels(EnsembleSpec(2, 1.5), trivial_partition(2), 2)) == pytest.approx(
        [1.5, 2.5], rel=1e-15
    )
    levels = enumerate_levels(EnsembleSpec(2, 1.5), full_partition(2), 2)
    assert values(levels) == pytest.approx([1.5811388, 3.1622777], abs=1e-7)
    assert all(e.kind is EnergyKind.FULLY_SEPARABLE for e in levels)


def _exhaustive_levels(spec, partition, count, cutoff=10):
    energies = []
    n_modes = spec.n_particles
    for occ in itertools.product(range(cutoff), repeat=n_modes):
        if sum(occ) >= cutoff:
            continue
        par = occ[: partition.k]
        rest = list(occ[partition.k :])
        perp = []
        for size in partition.sizes:
            perp.append(tuple(rest[: size - 1]))
            rest = rest[size - 1 :]
        energies.append(partition_energy(spec, partition, ExcitationLabel(par, tuple(perp))).value)
    return sorted(energies)[:count]


@pytest.mark.parametrize(
    "n,blocks",
    [(2, [[1, 2]]), (2, [[1], [2]]), (3, [[1, 2, 3]]), (3, [[1], [2, 3]]), (4, [[1, 2], [3, 4]]),
     (4, [[1], [2], [3], [4]]), (4, [[1, 2, 3, 4]])],
)
@pytest.mark.parametrize("r", [0.0, 1.0, 1.5])
def test_level_degeneracies_match_exhaustive_scan(n, blocks, r):
    spec = EnsembleSpec(n, r)
    part = make_partition(n, blocks)
    got = [e.value for e in enumerate_levels(spec, part, 10)]
    np.testing.assert_allclose(got, _exhaustive_levels(spec, part, 10), rtol=1e-13)


@pytest.mark.parametrize("size", range(1, 9))
def test_orthonormal_completion(size):
    q = orthonormal_completion(size)
    np.testing.assert_allclose(q @ q.T, np.eye(size), atol=1e-14)
    np.testing.assert_allclose(q[0], np.full(size, size**-0.5), rtol=1e-15)
    np.testing.assert_array_equal(q, orthonormal_completion(size))


def test_mode_frequencies_diagonalize_block_potential():
    spec = EnsembleSpec(5, 0.7)
    part = make_partition(5, [[1, 3, 4], [2, 5]])
    parallel, perp = mode_frequencies(spec, part)
    a = np.full((5, 5), -0.7)
    np.fill_diagonal(a, 1 + 4 * 0.7)
    for w, block in zip(parallel, part.zero_based()):
        sub = a[np.ix_(block, block)]
        freqs = np.sqrt(np.linalg.eigvalsh(sub))
        np.testing.assert_allclose(sorted(freqs), sorted([w] + [perp] * (len(block) - 1)), rtol=1e-13)


def test_wavefunction_examples():
    q = WavefunctionQuery(full_partition(2), ExcitationLabel.for_full([0, 0]), [[0.0, 0.0]], True)
    assert wavefunction_eval(q, EnsembleSpec(2, 0.0))[0] == pytest.approx(math.pi**-0.5, rel=1e-14)
    assert wavefunction_eval(q, EnsembleSpec(2, 0.0))[0] == pytest.approx(0.5641896, abs=1e-7)

    x = np.linspace(-3, 3, 13)
    q = WavefunctionQuery(
        trivial_partition(2), ExcitationLabel.for_trivial(0, [1]), np.column_stack([x, x])
    )
    np.testing.assert_allclose(wavefunction_eval(q, EnsembleSpec(2, 1.5)), 0.0, atol=1e-15)


@pytest.mark.parametrize(
    "partition,label",
    [
        (full_partition(2), ExcitationLabel.for_full([0, 0])),
        (full_partition(2), ExcitationLabel.for_full([2, 1])),
        (trivial_partition(2), ExcitationLabel.for_trivial(1, [2])),
    ],
)
def test_normalized_wavefunction_has_unit_norm(partition, label):
    x = np.linspace(-9, 9, 721)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([x1.ravel(), x2.ravel()])
    amp = wavefunction_eval(WavefunctionQuery(partition, label, pts, True), EnsembleSpec(2, 1.5))
    norm = np.sum(amp**2) * (x[1] - x[0]) ** 2
    assert norm == pytest.approx(1.0, abs=1e-8)


def test_trivial_wavefunction_is_eigenfunction():
    # apply H by central differences at random points of a 3-particle state
    spec = EnsembleSpec(3, 0.8)
    part = trivial_partition(3)
    label = ExcitationLabel.for_trivial(1, [0, 2])
    energy = partition_energy(spec, part, label).value
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.2, 1.2, size=(6, 3))
    h = 1e-3

    def psi(p):
        return wavefunction_eval(WavefunctionQuery(part, label, p), spec)

    lap = -6 * psi(pts)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        lap += psi(pts + e) + psi(pts - e)
    lap /= h * h
    a = np.full((3, 3), -0.8)
    np.fill_diagonal(a, 1 + 2 * 0.8)
    pot = 0.5 * np.einsum("pi,ij,pj->p", pts, a, pts)
    h_psi = -0.5 * lap + pot * psi(pts)
    np.testing.assert_allclose(h_psi, energy * psi(pts), atol=1e-5)


def test_wavefunction_point_shape_checked():
    with pytest.raises(ValueError):
        WavefunctionQuery(full_partition(3), ExcitationLabel.for_full([0, 0, 0]), [[0.0, 0.0]])
