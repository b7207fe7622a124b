import math

import mpmath

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macroent.closedform import ground_energy, separable_min_energy
from macroent.exceptions import DivergentOptimumError
from macroent.model import EnsembleSpec, equal_partition, full_partition, trivial_partition
from macroent.visibility import (
    asymptotic_limits,
    max_visibility,
    max_visibility_curve,
    optimal_particle_number,
    partition_visibility,
    separable_gap,
    visibility,
)


def test_visibility_arithmetic():
    assert visibility(2.0, 2.0).value == 0.0
    assert visibility(1.0, 2.0).value == pytest.approx(1 / 3, rel=1e-15)
    rep = visibility(2.0, 1.0)
    assert rep.value == pytest.approx(-1 / 3, rel=1e-15)
    assert not rep.detected
    assert visibility(1.0, 2.0).detected
    with pytest.raises(ValueError):
        visibility(-1.0, 1.0)
    with pytest.raises(ValueError):
        visibility(1.0, 0.0)


@given(
    a=st.floats(0.0, 1e6),
    b=st.floats(1e-6, 1e6),
    c=st.floats(1e-6, 1e6),
)
def test_visibility_scale_invariant(a, b, c):
    assert visibility(c * a, c * b).value == pytest.approx(visibility(a, b).value, rel=1e-12, abs=1e-15)


def test_max_visibility_examples():
    assert max_visibility(EnsembleSpec(2, 0.0)).value == 0.0
    expected = (2 * math.sqrt(2.5) - 3) / (2 * math.sqrt(2.5) + 3)
    rep = max_visibility(EnsembleSpec(2, 1.5))
    assert rep.value == pytest.approx(expected, rel=1e-13)
    assert rep.value == pytest.approx(0.0263340, abs=1e-7)
    assert rep.expectation == 1.5 and rep.sep_bound == pytest.approx(math.sqrt(2.5))
    for r in (0.0, 1.0, 100.0):
        assert max_visibility(EnsembleSpec(1, r)).value == 0.0


@given(n=st.integers(2, 10**6), r=st.floats(1e-6, 1e6))
def test_gap_matches_naive_difference(n, r):
    spec = EnsembleSpec(n, r)
    naive = separable_min_energy(spec) - ground_energy(spec)
    scale = separable_min_energy(spec)
    assert separable_gap(n, r) == pytest.approx(naive, abs=1e-13 * scale)
    assert separable_gap(n, r) > 0


def _gap_mp(n, r):
    n, r = mpmath.mpf(n), mpmath.mpf(r)
    return 0.5 * (n * mpmath.sqrt(1 + (n - 1) * r) - 1 - (n - 1) * mpmath.sqrt(1 + n * r))


@given(n=st.integers(2, 10**9), log_r=st.floats(-12, 12))
def test_gap_matches_extended_precision(n, log_r):
    r = 10.0**log_r
    with mpmath.workdps(60):
        exact = float(_gap_mp(n, r))
    assert separable_gap(n, r) == pytest.approx(exact, rel=1e-13)


@given(n=st.integers(2, 2000), log_r=st.floats(-12, 8), data=st.data())
def test_partition_gap_matches_extended_precision(n, log_r, data):
    r = 10.0**log_r
    k = data.draw(st.sampled_from([k for k in (2, 3, 4, 5, 8, n) if n % k == 0]))
    rep = partition_visibility(EnsembleSpec(n, r), equal_partition(n, k))
    with mpmath.workdps(60):
        nn, rr = mpmath.mpf(n), mpmath.mpf(r)
        size = nn / k
        bound = (k * mpmath.sqrt(1 + (nn - size) * rr) + (nn - k) * mpmath.sqrt(1 + nn * rr)) / 2
        ground = (1 + (nn - 1) * mpmath.sqrt(1 + nn * rr)) / 2
        exact = float((bound - ground) / (bound + ground))
    assert rep.value == pytest.approx(exact, rel=1e-12)


def test_monotone_in_r_bipartite():
    rs = np.logspace(-3, 3, 400)
    v = [max_visibility(EnsembleSpec(2, float(r))).value for r in rs]
    assert np.all(np.diff(v) > 0)


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_bounded_by_strong_coupling_limit(r):
    for n in range(2, 101):
        assert max_visibility(EnsembleSpec(n, r)).value < asymptotic_limits(n).strong_coupling


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_peak_location(r):
    ns = np.arange(1, 500)
    v = [max_visibility(EnsembleSpec(int(n), r)).value for n in ns]
    best = int(ns[int(np.argmax(v))])
    n_opt = optimal_particle_number(r)
    assert best in {math.floor(n_opt), math.ceil(n_opt)}


@given(n=st.integers(2, 10**7), r=st.floats(1e-8, 1e8))
def test_positive_for_finite_systems(n, r):
    assert max_visibility(EnsembleSpec(n, r)).value > 0


def test_optimal_particle_number_examples():
    assert optimal_particle_number(1.0) == 3.0
    assert optimal_particle_number(2.0) == pytest.approx((5 + math.sqrt(13)) / 4, rel=1e-15)
    assert optimal_particle_number(2.0) == pytest.approx(2.1513878, abs=1e-7)
    # N_opt = 1 + R^-1/2 + O(1/R)
    for r in (1e4, 1e8, 1e12):
        assert optimal_particle_number(r) - 1.0 == pytest.approx(r**-0.5, rel=2 / math.sqrt(r))
    with pytest.raises(DivergentOptimumError):
        optimal_particle_number(0.0)


@pytest.mark.parametrize("r", [0.1, 0.5, 2.0, 10.0])
def test_optimum_is_stationary(r):
    n = optimal_particle_number(r)
    h = 1e-5
    slope = (max_visibility_curve(n + h, r) - max_visibility_curve(n - h, r)) / (2 * h)
    assert abs(slope) < 1e-8
    assert max_visibility_curve(n, r) > max_visibility_curve(n + 0.1, r)
    assert max_visibility_curve(n, r) > max_visibility_curve(n - 0.1, r)


def test_curve_agrees_with_integer_values():
    for n in range(1, 20):
        assert max_visibility_curve(n, 1.3) == pytest.approx(
            max_visibility(EnsembleSpec(n, 1.3)).value, rel=1e-14, abs=1e-300
        )
    arr = max_visibility_curve(np.array([2.0, 3.0]), 1.0)
    assert arr.shape == (2,)


def test_asymptotic_limits():
    lim = asymptotic_limits(2)
    assert lim.strong_coupling == pytest.approx(3 - 2 * math.sqrt(2), rel=1e-14)
    assert lim.bipartite_strong_coupling == pytest.approx(0.1715729, abs=1e-7)
    assert asymptotic_limits(5).strong_coupling == pytest.approx(0.0557281, abs=1e-7)
    assert asymptotic_limits(5).strong_coupling == pytest.approx(
        max_visibility(EnsembleSpec(5, 1e10)).value, abs=1e-4
    )
    assert lim.macroscopic == 0.0 and lim.weak_coupling == 0.0
    assert math.isnan(asymptotic_limits().strong_coupling)


def test_partition_visibility_examples():
    spec = EnsembleSpec(6, 1.7)
    assert partition_visibility(spec, trivial_partition(6)).value == 0.0
    assert partition_visibility(spec, full_partition(6)).value == pytest.approx(
        max_visibility(spec).value, rel=1e-13
    )
    spec = EnsembleSpec(1024, 1.0)
    ks = [2**i for i in range(1, 11)]
    v = [partition_visibility(spec, equal_partition(1024, k)).value for k in ks]
    assert np.all(np.diff(v) > 0)
    assert v[0] == min(v) and v[-1] == max(v)


@pytest.mark.parametrize("k", [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024])
def test_partition_visibility_closed_form(k):
    # direct evaluation: bound (1/2)[sum_j sqrt(1+(N-N_j)R) + (N-K) sqrt(1+NR)]
    n, r = 1024, 1.0
    size = n // k
    bound = 0.5 * (k * math.sqrt(1 + (n - size) * r) + (n - k) * math.sqrt(1 + n * r))
    ground = 0.5 * (1 + (n - 1) * math.sqrt(1 + n * r))
    rep = partition_visibility(EnsembleSpec(n, r), equal_partition(n, k))
    assert rep.sep_bound == pytest.approx(bound, rel=1e-14)
    assert rep.value == pytest.approx((bound - ground) / (bound + ground), rel=1e-9)
