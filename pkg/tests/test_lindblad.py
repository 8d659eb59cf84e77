import math

import numpy as np
import pytest

from superburst.geometry import ordered_array
from superburst.lindblad import (
    DimensionError,
    MasterEquation,
    burst_boundary,
    burst_probability,
    detect_burst,
    dicke_ladder_rate,
    emission_rate,
    integrate_full,
    integrate_truncated,
    inverted_density,
    lowering_operators,
    truncated_basis,
)
from superburst.system import point_system


def test_lowering_operator_algebra():
    s = lowering_operators(3)
    eye = np.eye(8)
    for i in range(3):
        assert np.allclose(s[i] @ s[i], 0)
        assert np.allclose(s[i] @ s[i].conj().T + s[i].conj().T @ s[i], eye)
        for j in range(3):
            if i != j:
                assert np.allclose(s[i] @ s[j], s[j] @ s[i])


def test_single_emitter_exponential():
    arr = ordered_array(1, 0.0, 0.3, 0.7, 0.4)
    model = MasterEquation.from_array(arr)
    times = np.linspace(0, 3, 7)
    rhos = integrate_full(model, inverted_density(1), times)
    assert np.allclose(emission_rate(model, rhos), np.exp(-1.4 * times), atol=1e-9)


def test_trace_and_hermiticity_preserved():
    arr = ordered_array(3, 1.3, 0.2, 0.8, 0.5)
    rhos = integrate_full(arr, inverted_density(3), np.linspace(0, 2, 5))
    for rho in rhos:
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(rho, rho.conj().T, atol=1e-10)
        assert np.linalg.eigvalsh(rho).min() > -1e-9


def test_array_and_system_builds_agree():
    arr = ordered_array(3, 0.9, 0.25, 0.75, 0.2)
    times = np.linspace(0, 2, 9)
    a = MasterEquation.from_array(arr)
    b = MasterEquation.from_system(point_system(arr, "plus_minus"))
    ra = emission_rate(a, integrate_full(a, inverted_density(3), times))
    rb = emission_rate(b, integrate_full(b, inverted_density(3), times))
    assert np.allclose(ra, rb, atol=1e-9)


@pytest.mark.parametrize("n", [2, 4])
def test_mirror_matches_dicke_ladder(n):
    times = np.linspace(0, 2, 11)
    arr = ordered_array(n, math.pi, 0.5, 0.5)
    model = MasterEquation.from_array(arr)
    rate = emission_rate(model, integrate_full(model, inverted_density(n), times))
    assert np.allclose(rate, dicke_ladder_rate(n, times), atol=1e-8)


def test_dicke_ladder_single():
    t = np.linspace(0, 2, 5)
    assert np.allclose(dicke_ladder_rate(1, t), np.exp(-t))


def test_dicke_ladder_peak():
    t = np.linspace(0, 1, 201)
    assert dicke_ladder_rate(10, t).max() > 2.0


def test_full_dimension_cap():
    with pytest.raises(DimensionError):
        MasterEquation.from_array(ordered_array(7, 1.0, 0.5, 0.5))


def test_truncated_basis_order():
    b = truncated_basis(3)
    assert b == [0b111, 0b110, 0b101, 0b011, 0b100, 0b010, 0b001]


def test_truncated_matches_full_early():
    arr = ordered_array(4, 1.7, 0.3, 0.7, 0.6)
    system = point_system(arr, "plus_minus")
    # truncation error is third order in t
    t = 1e-4
    r0, r1 = integrate_truncated(system, t, steps=64)
    model = MasterEquation.from_array(arr)
    full = emission_rate(model, integrate_full(model, inverted_density(4), [0.0, t], rtol=1e-12, atol=1e-14))
    assert r0 == pytest.approx(full[0], abs=1e-12)
    assert abs(r1 - r0) > 1e-6
    assert r1 == pytest.approx(full[1], rel=1e-10)


def test_truncated_initial_rate_is_one():
    r0, _ = integrate_truncated(point_system(ordered_array(5, 0.4, 0.5, 0.5, 1.0), "plus_minus"))
    assert r0 == pytest.approx(1.0)


def test_detect_burst_examples():
    assert detect_burst(point_system(ordered_array(3, math.pi, 0.5, 0.5), "plus_minus"))
    assert not detect_burst(point_system(ordered_array(2, 1.0, 0.5, 0.5), "plus_minus"))
    assert not detect_burst(point_system(ordered_array(6, math.pi, 0.5, 0.5, 10.0), "plus_minus"))


def test_burst_probability_limits():
    # five or more bidirectional emitters always burst without loss
    assert burst_probability(6, math.inf, 20 * math.pi, 10) == 1.0
    assert burst_probability(2, math.inf, 20 * math.pi, 10) == 0.0
    with pytest.raises(ValueError):
        burst_probability(3, 1.0, 10.0, 0)


def test_burst_probability_deterministic():
    a = burst_probability(4, 5.0, 20 * math.pi, 20, master_seed=11)
    b = burst_probability(4, 5.0, 20 * math.pi, 20, master_seed=11)
    assert a == b


def test_burst_boundary():
    # universal bound: N/2 > 2 + 1/ratio, so N = 6 bursts for every ratio > 1
    assert burst_boundary(6, [0.5, 2.0, 10.0], 20 * math.pi, 10) == 2.0
    assert burst_boundary(2, [1.0, 10.0], 20 * math.pi, 5) is None
