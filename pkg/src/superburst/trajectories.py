"""Monte Carlo wave-function engine.

Between jumps the unnormalized state evolves under the effective Hamiltonian;
a jump happens when its squared norm falls to a uniform random threshold.
The effective Hamiltonian conserves the excitation number, so a trajectory
started from the fully inverted state lives in the ``k``-excitation sector
between its ``(N-k)``-th and ``(N-k+1)``-th jump. Two propagators are
available: ``spectral`` (exact, via the eigendecomposition of each sector
block) and ``rk4`` (fixed-step Runge-Kutta with bisection of the crossing
step).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from . import basis
from .system import OpenSystem

COND_LIMIT = 1e8
# larger sectors fall back to sparse RK4
SPECTRAL_DIM_LIMIT = 1000
NORM_SLACK = 1e-9
GROUND_TOL = 1e-12


class TrajectoryError(RuntimeError):
    pass


@dataclass
class StateVector:
    """Amplitudes over the ``2**N`` bit-mask basis."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        if self.n > basis.MAX_EMITTERS:
            raise ValueError(f"N={self.n} exceeds the emitter cap {basis.MAX_EMITTERS}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n,):
            raise ValueError("amplitude vector must have length 2**N")

    @classmethod
    def fully_inverted(cls, n: int) -> StateVector:
        amps = np.zeros(1 << n, dtype=complex)
        amps[-1] = 1.0
        return cls(amps, n)

    @classmethod
    def from_sector(cls, n: int, k: int, vec) -> StateVector:
        amps = np.zeros(1 << n, dtype=complex)
        amps[basis.sector_states(n, k)] = vec
        return cls(amps, n)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> StateVector:
        return StateVector(self.amplitudes / math.sqrt(self.norm_sq), self.n)

    def ground_probability(self) -> float:
        return float(abs(self.amplitudes[0]) ** 2) / self.norm_sq


@dataclass
class Controls:
    t_max: float
    dt_max: float | None = None
    norm_bisect_tol: float = 1e-10
    method: str = "spectral"

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.method not in ("spectral", "rk4"):
            raise ValueError(f"unknown propagation method {self.method!r}")


@dataclass
class TrajectoryRecord:
    events: list[tuple[float, str]]
    finished: bool
    final_time: float
    seed_index: int

    def count(self, label: str) -> int:
        return sum(1 for _, lab in self.events if lab == label)

    @property
    def n_left(self) -> int:
        return self.count("left")

    @property
    def n_right(self) -> int:
        return self.count("right")

    @property
    def imbalance(self) -> int:
        return self.n_right - self.n_left

    def to_dict(self) -> dict:
        return {
            "seed_index": self.seed_index,
            "finished": self.finished,
            "final_time": self.final_time,
            "events": [[t, lab] for t, lab in self.events],
        }


@dataclass
class RateCurve:
    times: np.ndarray
    rates: np.ndarray
    stderr: np.ndarray
    n_trajectories: int


@dataclass
class ImbalanceDistribution:
    histogram: dict[int, float]
    n_trajectories: int
    n_finished: int
    variance: float
    mean: float

    @property
    def fraction_finished(self) -> float:
        return self.n_finished / self.n_trajectories if self.n_trajectories else 0.0

    @property
    def empty(self) -> bool:
        return self.n_finished == 0


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream private to trajectory ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(index,))))


@dataclass
class _Sector:
    k: int
    heff: object
    emit: object
    jumps: list
    eig: tuple | None = None


@dataclass
class Propagator:
    """Per-sector operators of one system, built once and shared read-only."""

    system: OpenSystem
    method: str = "spectral"
    sectors: dict = field(default_factory=dict)

    def __post_init__(self):
        sysm = self.system
        n = sysm.n
        hamiltonian = sysm.hamiltonian
        self.labels = [ch.label for ch in sysm.channels] + [f"local({i})" for i in range(n)]
        for k in range(1, n + 1):
            st = basis.sector_states(n, k)
            heff = hamiltonian.sector(k)
            emit = basis.hopping_matrix(sysm.decay, st)
            jumps = [(ch.rate, basis.lowering_matrix(ch.coefficients, n, k)) for ch in sysm.channels]
            sec = _Sector(k, heff, emit, jumps)
            if self.method == "spectral" and len(st) <= SPECTRAL_DIM_LIMIT:
                dense = heff.toarray()
                lam, vecs = la.eig(dense)
                cond = np.linalg.cond(vecs)
                if cond < COND_LIMIT:
                    sec.eig = (lam, vecs, la.inv(vecs))
            self.sectors[k] = sec
        self.local_ops = {}
        if sysm.gamma_prime:
            eye = np.eye(n)
            self.local_ops = {k: [basis.lowering_matrix(eye[i], n, k) for i in range(n)] for k in range(1, n + 1)}
        self.bits = {k: ((basis.sector_states(n, k)[:, None] >> np.arange(n)) & 1).astype(float) for k in range(1, n + 1)}
        dt = 0.01 / (n * sysm.gamma_ref + n * sysm.gamma_prime)
        self.dt_default = dt

    def jump_weights(self, k: int, psi: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        sec = self.sectors[k]
        weights, images = [], []
        for rate, op in sec.jumps:
            img = op @ psi
            images.append(img)
            weights.append(rate * np.vdot(img, img).real)
        if self.system.gamma_prime:
            pops = (np.abs(psi) ** 2) @ self.bits[k]
            weights.extend(self.system.gamma_prime * pops)
        return np.array(weights), images

    def apply_jump(self, k: int, psi: np.ndarray, channel: int, images) -> np.ndarray:
        n_guided = len(self.sectors[k].jumps)
        if channel < n_guided:
            out = images[channel]
        else:
            out = self.local_ops[k][channel - n_guided] @ psi
        return out / np.sqrt(np.vdot(out, out).real)

    def rate_of(self, k: int, states: np.ndarray) -> np.ndarray:
        """Normalized emission rate for columns of ``states`` (sector ``k``)."""
        states = np.atleast_2d(states.T).T
        num = np.einsum("ij,ij->j", states.conj(), self.sectors[k].emit @ states).real
        den = np.einsum("ij,ij->j", states.conj(), states).real
        return num / den / (self.system.n * self.system.gamma_ref)


def _free_spectral(prop: Propagator, sec: _Sector, psi, r, tau_max, grid_offsets, tol):
    """Exact no-jump evolution; returns ``(tau, psi_at_tau, jumped, grid_states)``."""
    lam, vecs, inv = sec.eig
    coef = inv @ psi

    def state(tau):
        return vecs @ (np.exp(-1j * lam * tau) * coef)

    def log_norm(tau):
        x = state(tau)
        val = np.vdot(x, x).real
        if val > 1 + NORM_SLACK:
            raise TrajectoryError("norm increased during no-jump evolution")
        return math.log(val) if val > 0 else -np.inf

    target = math.log(r)
    end = log_norm(tau_max)
    if end > target:
        tau, jumped = tau_max, False
    else:
        total = float(np.real(np.vdot(psi, 1j * ((sec.heff - sec.heff.conj().T) @ psi))))
        guess = min(tau_max, -target / max(total, 1e-300))
        lo, hi = 0.0, guess
        while log_norm(hi) > target:
            lo, hi = hi, min(2 * hi, tau_max)
        tau = brentq(lambda x: log_norm(x) - target, lo, hi, xtol=1e-14, rtol=tol) if hi > lo else hi
        jumped = True
    grid_states = None
    if grid_offsets is not None and len(grid_offsets):
        sel = grid_offsets[grid_offsets < tau] if jumped else grid_offsets[grid_offsets <= tau]
        if len(sel):
            grid_states = vecs @ (np.exp(-1j * np.outer(lam, sel)) * coef[:, None])
    return tau, state(tau), jumped, grid_states


def _rk4_step(h_apply, psi, h):
    k1 = h_apply(psi)
    k2 = h_apply(psi + 0.5 * h * k1)
    k3 = h_apply(psi + 0.5 * h * k2)
    k4 = h_apply(psi + h * k3)
    return psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _free_rk4(prop: Propagator, sec: _Sector, psi, r, tau_max, grid_offsets, tol, dt):
    heff = sec.heff
    if not dt > 0 or tau_max / dt > 1e9:
        raise TrajectoryError("step size underflow")

    def deriv(x):
        return -1j * (heff @ x)

    t = 0.0
    cur = psi.copy()
    grid_cols = []
    pending = list(grid_offsets) if grid_offsets is not None else []
    while True:
        h = min(dt, tau_max - t)
        if h <= 1e-15 * max(1.0, tau_max):
            while pending and pending[0] <= t:
                grid_cols.append(cur)
                pending.pop(0)
            return t, cur, False, _stack(grid_cols)
        nxt = _rk4_step(deriv, cur, h)
        nrm = np.vdot(nxt, nxt).real
        if nrm > np.vdot(cur, cur).real * (1 + NORM_SLACK) + NORM_SLACK:
            raise TrajectoryError("norm increased during no-jump evolution")
        if nrm <= r:
            lo, hi = 0.0, h
            while hi - lo > tol * max(t + hi, 1e-300):
                mid = 0.5 * (lo + hi)
                trial = _rk4_step(deriv, cur, mid)
                if np.vdot(trial, trial).real > r:
                    lo = mid
                else:
                    hi = mid
            tau = t + hi
            while pending and pending[0] < tau:
                grid_cols.append(_rk4_step(deriv, cur, pending.pop(0) - t))
            return tau, _rk4_step(deriv, cur, hi), True, _stack(grid_cols)
        while pending and pending[0] <= t + h:
            grid_cols.append(_rk4_step(deriv, cur, pending.pop(0) - t))
        cur = nxt
        t += h


def _stack(cols):
    return np.stack(cols, axis=1) if cols else None


def run_trajectory(prop: Propagator, controls: Controls, rng: np.random.Generator, seed_index: int = 0, time_grid=None):
    """One trajectory from the fully inverted state.

    Returns the record and, if ``time_grid`` is given, the normalized emission
    rate of this trajectory at the grid times.
    """
    sysm = prop.system
    n = sysm.n
    t = 0.0
    k = n
    psi = np.ones(1, dtype=complex)
    events = []
    grid = None if time_grid is None else np.asarray(time_grid, dtype=float)
    curve = None if grid is None else np.zeros(len(grid))
    gpos = 0
    dt = min(prop.dt_default, controls.dt_max) if controls.dt_max else prop.dt_default
    finished = False
    while True:
        if k == 0:
            finished = True
            break
        sec = prop.sectors[k]
        r = rng.random()
        offsets = None if grid is None else grid[gpos:] - t
        if prop.method == "spectral" and sec.eig is not None:
            tau, psi_new, jumped, gstates = _free_spectral(prop, sec, psi, r, controls.t_max - t, offsets, controls.norm_bisect_tol)
        else:
            tau, psi_new, jumped, gstates = _free_rk4(prop, sec, psi, r, controls.t_max - t, offsets, controls.norm_bisect_tol, dt)
        if gstates is not None:
            m = gstates.shape[1]
            curve[gpos : gpos + m] = prop.rate_of(k, gstates)
            gpos += m
        if not jumped:
            t = controls.t_max
            break
        t += tau
        psi = psi_new / math.sqrt(np.vdot(psi_new, psi_new).real)
        weights, images = prop.jump_weights(k, psi)
        total = weights.sum()
        if not total > 0:
            raise TrajectoryError("jump requested from a state with zero decay rate")
        # ties resolve to the lowest channel index
        channel = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
        channel = min(channel, len(weights) - 1)
        events.append((t, prop.labels[channel]))
        psi = prop.apply_jump(k, psi, channel, images)
        k -= 1
    final_time = events[-1][0] if finished and events else t
    return TrajectoryRecord(events, finished, final_time, seed_index), curve


def run_jump_chain(prop: Propagator, rng: np.random.Generator) -> list[str]:
    """Jump labels from repeated jumps with no evolution in between."""
    k = prop.system.n
    psi = np.ones(1, dtype=complex)
    labels = []
    while k > 0:
        weights, images = prop.jump_weights(k, psi)
        total = weights.sum()
        if not total > 0:
            break
        channel = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
        channel = min(channel, len(weights) - 1)
        labels.append(prop.labels[channel])
        psi = prop.apply_jump(k, psi, channel, images)
        k -= 1
    return labels


# worker-side state; set by _init_worker or lazily in-process
_WORKER: dict = {}


def _init_worker(system: OpenSystem, method: str):
    _WORKER["prop"] = Propagator(system, method)


def _run_chunk(args):
    indices, controls, master_seed, time_grid, chain = args
    prop = _WORKER["prop"]
    out = []
    for idx in indices:
        rng = trajectory_rng(master_seed, idx)
        if chain:
            out.append((idx, run_jump_chain(prop, rng), None))
        else:
            rec, curve = run_trajectory(prop, controls, rng, idx, time_grid)
            out.append((idx, rec, curve))
    return out


def run_ensemble(system, n_traj, controls, master_seed=0, workers=1, time_grid=None, chain=False, propagator=None):
    """Run ``n_traj`` independent trajectories; results ordered by seed index.

    Returns ``(records, curves)``; ``curves`` is an ``(n_traj, len(time_grid))``
    array or ``None``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    workers = max(1, int(workers or 1))
    indices = list(range(n_traj))
    chunk = max(1, math.ceil(n_traj / (workers * 4)))
    jobs = [(indices[i : i + chunk], controls, master_seed, time_grid, chain) for i in range(0, n_traj, chunk)]
    if workers == 1:
        _WORKER["prop"] = propagator or Propagator(system, controls.method)
        results = [r for job in jobs for r in _run_chunk(job)]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(system, controls.method)) as pool:
            results = [r for part in pool.map(_run_chunk, jobs) for r in part]
    results.sort(key=lambda item: item[0])
    records = [rec for _, rec, _ in results]
    curves = None if time_grid is None or chain else np.array([c for _, _, c in results])
    return records, curves


def ensemble_rate(system, n_traj, time_grid, controls=None, master_seed=0, workers=1) -> RateCurve:
    time_grid = np.asarray(time_grid, dtype=float)
    if controls is None:
        controls = Controls(t_max=float(time_grid[-1]) * (1 + 1e-12) + 1e-12)
    _, curves = run_ensemble(system, n_traj, controls, master_seed, workers, time_grid)
    mean = curves.mean(axis=0)
    se = curves.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.full(len(time_grid), np.nan)
    return RateCurve(time_grid, mean, se, n_traj)


def imbalance_from_records(records, t_cut=math.inf) -> ImbalanceDistribution:
    finished = [rec for rec in records if rec.finished and rec.final_time <= t_cut]
    counts: dict[int, int] = {}
    for rec in finished:
        counts[rec.imbalance] = counts.get(rec.imbalance, 0) + 1
    total = len(finished)
    if not total:
        return ImbalanceDistribution({}, len(records), 0, math.nan, math.nan)
    values = np.array([rec.imbalance for rec in finished], dtype=float)
    hist = {i: counts[i] / total for i in sorted(counts)}
    var = float(values.var(ddof=1)) if total > 1 else 0.0
    return ImbalanceDistribution(hist, len(records), total, var, float(values.mean()))


def imbalance_ensemble(system, n_traj, t_cut, controls=None, master_seed=0, workers=1) -> ImbalanceDistribution:
    """Photon imbalance ``N_R - N_L`` over trajectories finished by ``t_cut``."""
    if system.unraveling != "left_right":
        raise ValueError("imbalance statistics need the left_right unraveling")
    if controls is None:
        controls = Controls(t_max=t_cut)
    records, _ = run_ensemble(system, n_traj, controls, master_seed, workers)
    return imbalance_from_records(records, t_cut)


def ratio_from_sequences(sequences, n_max):
    """Empirical ``r(n)`` with standard errors from per-trajectory jump labels.

    ``r(n) = P(repeat) / P(switch)`` for the ``n``-th jump among trajectories
    whose first ``n - 1`` guided jumps share a direction. ``n = 1`` is the ratio
    of first jumps to the left versus right. Missing data gives ``nan``.
    """
    out = []
    for order in range(1, n_max + 1):
        if order == 1:
            firsts = [seq[0] for seq in sequences if seq]
            same = sum(1 for lab in firsts if lab == "left")
            diff = sum(1 for lab in firsts if lab == "right")
        else:
            same = diff = 0
            for seq in sequences:
                if len(seq) < order or any(lab not in ("left", "right") for lab in seq[:order]):
                    continue
                head = seq[: order - 1]
                if all(lab == head[0] for lab in head):
                    if seq[order - 1] == head[0]:
                        same += 1
                    else:
                        diff += 1
        total = same + diff
        if same == 0 or diff == 0:
            out.append((order, math.nan, math.nan, total))
            continue
        p = same / total
        ratio = p / (1 - p)
        # delta method on p/(1-p)
        se = math.sqrt(p * (1 - p) / total) / (1 - p) ** 2
        out.append((order, ratio, se, total))
    return out


def directional_ratio_empirical(system, n_max, n_traj, master_seed=0, include_coherent=True, controls=None, workers=1):
    """Empirical directional ratio ``r(n)`` for ``n = 1..n_max``.

    With ``include_coherent=False`` only the jump sequence is sampled (no
    evolution between jumps), which is the setting of the closed-form ratio.
    Otherwise full trajectories with the coherent Hamiltonian are used.
    """
    if system.unraveling != "left_right":
        raise ValueError("directional ratios need the left_right unraveling")
    if include_coherent:
        if not system.include_coherent:
            raise ValueError("system was built without the coherent Hamiltonian")
        controls = controls or Controls(t_max=1e3)
        records, _ = run_ensemble(system, n_traj, controls, master_seed, workers)
        sequences = [[lab for _, lab in rec.events if lab in ("left", "right")] for rec in records]
    else:
        controls = controls or Controls(t_max=1.0)
        sequences, _ = run_ensemble(system, n_traj, controls, master_seed, workers, chain=True)
    return ratio_from_sequences(sequences, n_max)


def default_workers() -> int:
    return os.cpu_count() or 1
