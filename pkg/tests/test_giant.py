import math

import numpy as np
import pytest

from superburst.channels import collective_channels
from superburst.criteria import giant_gamma_1d
from superburst.geometry import giant_disordered, giant_ordered
from superburst.giant import (
    crossover_map,
    giant_couplings,
    giant_rates,
    giant_system,
    separated_equivalence_check,
)
from superburst.lindblad import MasterEquation, emission_rate, integrate_full, inverted_density


def brute_couplings(array):
    """Direct double sums over connection-point pairs."""
    conns = array.connection_phases
    g = array.gamma_point
    n = array.n
    decay = np.zeros((n, n))
    exch = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            for a in conns[i]:
                for b in conns[j]:
                    decay[i, j] += g * math.cos(a - b)
                    exch[i, j] += 0.5 * g * math.sin(abs(a - b))
    return decay, exch


@pytest.mark.parametrize(
    "d, a, topo",
    [(1.0, 0.6, "separated"), (1.0, 1.5, "braided"), (2.3, 0.4, "separated"), (0.9, 1.7, "braided")],
)
def test_couplings_match_double_sum(d, a, topo):
    arr = giant_ordered(5, d, a, 0.7, topology=topo)
    cpl = giant_couplings(arr)
    decay, exch = brute_couplings(arr)
    assert np.allclose(cpl.decay, decay, atol=1e-14)
    assert np.allclose(cpl.exchange, exch, atol=1e-14)


def test_single_atom_rate_and_shift():
    ka, g = 0.8, 0.6
    cpl = giant_couplings(giant_ordered(1, 1.0, ka, g))
    assert cpl.decay[0, 0] == pytest.approx(giant_gamma_1d(ka, g))
    assert cpl.exchange[0, 0] == pytest.approx(g * math.sin(ka))


def test_decoherence_free_exact_zero():
    arr = giant_ordered(4, 2.0, math.pi, 1.0, topology="braided")
    cpl = giant_couplings(arr)
    assert np.all(cpl.decay == 0.0)
    assert np.abs(cpl.exchange).max() > 0


@pytest.mark.parametrize("n, kd, ka", [(4, 1.3, 0.5), (6, 2.5, 1.9), (5, math.pi, 0.7), (3, 0.6, 0.2)])
def test_rates_match_eigensolver(n, kd, ka):
    arr = giant_ordered(n, kd, ka, 0.8)
    chans = collective_channels(giant_couplings(arr).decay)
    plus, minus = giant_rates(n, kd, ka, 0.8)
    assert chans.rates[0] == pytest.approx(plus, rel=1e-10)
    assert chans.rates[1] == pytest.approx(minus, abs=1e-10 * n)
    assert np.count_nonzero(chans.rates > chans.eps_dark) <= 2


def test_rates_braided():
    arr = giant_ordered(5, 1.0, 1.4, 1.0, topology="braided")
    chans = collective_channels(giant_couplings(arr).decay)
    plus, minus = giant_rates(5, 1.0, 1.4, 1.0)
    assert chans.rates[:2] == pytest.approx([plus, minus], rel=1e-10, abs=1e-10)


def test_separated_equivalence_rate_curve():
    arr = giant_ordered(3, 1.2, 0.5, 0.8, 0.1)
    point, shift = separated_equivalence_check(arr)
    assert shift == pytest.approx(0.8 * math.sin(0.5))
    times = np.linspace(0, 2, 6)
    a = MasterEquation.from_system(giant_system(arr))
    b = MasterEquation.from_array(point)
    ra = emission_rate(a, integrate_full(a, inverted_density(3), times))
    rb = emission_rate(b, integrate_full(b, inverted_density(3), times))
    assert np.allclose(ra, rb, atol=1e-9)


def test_equivalence_rejects_braided_and_dfs():
    with pytest.raises(ValueError):
        separated_equivalence_check(giant_ordered(3, 1.0, 1.5, 1.0, topology="braided"))
    with pytest.raises(ValueError):
        separated_equivalence_check(giant_ordered(3, 4.0, math.pi, 1.0))


def test_disordered_giant_system_builds():
    arr = giant_disordered(4, 0.8, 3.0, 1.0, 0.1, "separated", np.random.default_rng(0))
    system = giant_system(arr)
    assert system.n == 4 and system.gamma_ref > 0


def test_dfs_system_reference_rate():
    system = giant_system(giant_ordered(3, 2.0, math.pi, 0.5, topology="braided"))
    assert system.channels == ()
    assert system.gamma_ref == 0.5


def test_crossover_labels():
    rows = crossover_map(5, [1.0], [0.5, 1.5, 2.5], 1.0, 0.1)
    assert [r[2] for r in rows] == ["separated", "braided", "braided+"]
    # the modified single-atom rate shrinks near ka = pi, so local loss wins there
    rows = crossover_map(6, [1.0], [0.0, 3.0], 1.0, 1.0)
    assert rows[0][-1] and not rows[1][-1]
