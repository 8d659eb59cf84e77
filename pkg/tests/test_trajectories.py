import math

import numpy as np
import pytest

from superburst import trajectories as tr
from superburst.geometry import ordered_array
from superburst.lindblad import MasterEquation, emission_rate, integrate_full, inverted_density
from superburst.system import point_system
from superburst.trajectories import (
    Controls,
    Propagator,
    StateVector,
    TrajectoryRecord,
    ensemble_rate,
    imbalance_ensemble,
    imbalance_from_records,
    ratio_from_sequences,
    run_ensemble,
    run_jump_chain,
    run_trajectory,
    trajectory_rng,
)


def test_controls_validation():
    with pytest.raises(ValueError):
        Controls(t_max=0.0)
    with pytest.raises(ValueError):
        Controls(t_max=1.0, method="euler")


def test_state_vector():
    psi = StateVector.fully_inverted(3)
    assert psi.norm_sq == 1.0
    assert psi.ground_probability() == 0.0
    with pytest.raises(ValueError):
        StateVector(np.ones(3), 2)
    vec = StateVector.from_sector(3, 1, [1.0, 1.0, 0.0])
    assert vec.normalized().norm_sq == pytest.approx(1.0)


def test_rng_streams_independent_of_order():
    a = trajectory_rng(5, 17).random(3)
    trajectory_rng(5, 3).random(10)
    assert np.array_equal(a, trajectory_rng(5, 17).random(3))
    assert not np.array_equal(a, trajectory_rng(5, 18).random(3))


def test_single_emitter_waiting_time():
    arr = ordered_array(1, 0.0, 0.5, 0.5, 0.25)
    records, _ = run_ensemble(point_system(arr), 4000, Controls(t_max=1e3), master_seed=1)
    times = np.array([r.final_time for r in records])
    assert all(r.finished and len(r.events) == 1 for r in records)
    # exponential with rate 1.25
    assert times.mean() == pytest.approx(0.8, abs=4 * 0.8 / math.sqrt(4000))
    local = sum(r.events[0][1] == "local(0)" for r in records) / 4000
    assert local == pytest.approx(0.2, abs=4 * math.sqrt(0.16 / 4000))


def test_spectral_and_rk4_agree():
    system = point_system(ordered_array(4, 1.1, 0.3, 0.7, 0.2))
    spectral = Propagator(system, "spectral")
    rk = Propagator(system, "rk4")
    for idx in range(5):
        a, _ = run_trajectory(spectral, Controls(t_max=50.0), trajectory_rng(0, idx), idx)
        b, _ = run_trajectory(rk, Controls(t_max=50.0, method="rk4"), trajectory_rng(0, idx), idx)
        assert [lab for _, lab in a.events] == [lab for _, lab in b.events]
        assert np.allclose([t for t, _ in a.events], [t for t, _ in b.events], atol=1e-8)


def test_large_sector_fallback(monkeypatch):
    system = point_system(ordered_array(4, 0.9, 0.5, 0.5))
    exact = Propagator(system, "spectral")
    monkeypatch.setattr(tr, "SPECTRAL_DIM_LIMIT", 1)
    fallback = Propagator(system, "spectral")
    assert fallback.sectors[2].eig is None and fallback.sectors[4].eig is not None
    a, _ = run_trajectory(exact, Controls(t_max=20.0), trajectory_rng(2, 0))
    b, _ = run_trajectory(fallback, Controls(t_max=20.0), trajectory_rng(2, 0))
    assert np.allclose([t for t, _ in a.events], [t for t, _ in b.events], atol=1e-8)


def test_event_counts():
    system = point_system(ordered_array(4, 0.7, 0.5, 0.5))
    records, _ = run_ensemble(system, 200, Controls(t_max=30.0))
    for rec in records:
        assert len(rec.events) <= 4
        assert rec.finished == (len(rec.events) == 4)
        times = [t for t, _ in rec.events]
        assert times == sorted(times)
        assert rec.n_left + rec.n_right == len(rec.events)


def test_unravelings_give_same_rate():
    arr = ordered_array(3, 1.4, 0.3, 0.7, 0.1)
    times = np.linspace(0, 1.5, 7)
    a = ensemble_rate(point_system(arr, "left_right"), 3000, times, master_seed=1)
    b = ensemble_rate(point_system(arr, "plus_minus"), 3000, times, master_seed=2)
    se = np.hypot(a.stderr, b.stderr)
    assert np.all(np.abs(a.rates - b.rates) <= 4 * se + 1e-12)


def test_rate_vs_master_equation_small():
    arr = ordered_array(3, 2.0, 0.25, 0.75, 0.1)
    times = np.linspace(0, 2, 9)
    curve = ensemble_rate(point_system(arr), 2000, times, master_seed=3)
    model = MasterEquation.from_array(arr)
    exact = emission_rate(model, integrate_full(model, inverted_density(3), times))
    assert np.all(np.abs(curve.rates - exact) <= 4 * curve.stderr + 1e-12)


def test_workers_do_not_change_results():
    system = point_system(ordered_array(4, 0.9, 0.5, 0.5, 0.1))
    grid = np.linspace(0, 1, 5)
    a, ca = run_ensemble(system, 40, Controls(t_max=5.0), 9, workers=1, time_grid=grid)
    b, cb = run_ensemble(system, 40, Controls(t_max=5.0), 9, workers=2, time_grid=grid)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    assert np.array_equal(ca, cb)


def test_jump_chain_mirror_length():
    prop = Propagator(point_system(ordered_array(5, math.pi, 0.5, 0.5)))
    labels = run_jump_chain(prop, trajectory_rng(0, 0))
    assert len(labels) == 5
    assert set(labels) <= {"left", "right"}


def test_imbalance_from_records():
    recs = [
        TrajectoryRecord([(0.1, "left"), (0.2, "left")], True, 0.2, 0),
        TrajectoryRecord([(0.1, "right"), (0.5, "left")], True, 0.5, 1),
        TrajectoryRecord([(0.1, "right"), (3.0, "right")], True, 3.0, 2),
        TrajectoryRecord([(0.1, "right")], False, 10.0, 3),
    ]
    d = imbalance_from_records(recs, 1.0)
    assert d.n_finished == 2 and d.n_trajectories == 4
    assert d.histogram == {-2: 0.5, 0: 0.5}
    assert d.variance == pytest.approx(2.0)
    assert imbalance_from_records(recs, 0.01).empty


def test_imbalance_needs_directional_unraveling():
    with pytest.raises(ValueError):
        imbalance_ensemble(point_system(ordered_array(2, 1.0, 0.5, 0.5), "plus_minus"), 10, 1.0)


def test_ratio_from_sequences():
    seqs = [["left", "left", "right"], ["left", "right"], ["right", "right", "right"], ["right", "left"]]
    rows = ratio_from_sequences(seqs, 3)
    assert rows[0][1] == pytest.approx(1.0)
    # second jump: 2 repeats, 2 switches
    assert rows[1][1] == pytest.approx(1.0) and rows[1][3] == 4
    # third jump: one repeat and one switch among the two same-direction prefixes
    assert rows[2][1] == pytest.approx(1.0) and rows[2][3] == 2


def test_ratio_missing_data_is_nan():
    rows = ratio_from_sequences([["left", "left"]], 2)
    assert math.isnan(rows[1][1])


def test_ratio_chain_reproduces_closed_form():
    from superburst.criteria import directional_gn

    kd = math.pi / math.sqrt(3)
    system = point_system(ordered_array(6, kd, 0.5, 0.5), include_coherent=False)
    rows = tr.directional_ratio_empirical(system, 3, 6000, master_seed=4, include_coherent=False)
    for order, r, se, _ in rows:
        assert abs(r - directional_gn(order, 6, kd)[2]) <= 4 * se
