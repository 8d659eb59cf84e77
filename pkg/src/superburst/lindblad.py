"""Density-matrix integrators used as oracles.

``integrate_full`` evolves the complete ``2**N x 2**N`` density matrix
(``N <= 6``) with operators built independently from Kronecker products.
``integrate_truncated`` keeps only the sectors with at most two emitters in the
ground state, which is exact until the third emission and is used to decide
whether the emission rate initially grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as la
from scipy.integrate import solve_ivp

from . import basis
from .channels import collective_channels
from .geometry import EmitterArray, disordered_array
from .system import OpenSystem

FULL_LIMIT = 6
T_FIN_SCALED = 1e-5


class DimensionError(ValueError):
    pass


@lru_cache(maxsize=None)
def lowering_operators(n: int) -> tuple[np.ndarray, ...]:
    """Dense ``sigma_ge^i``; emitter ``i`` is bit ``i`` of the basis index."""
    lower = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e| with |g>=0, |e>=1
    eye = np.eye(2, dtype=complex)
    ops = []
    for i in range(n):
        op = np.ones((1, 1), dtype=complex)
        for site in reversed(range(n)):
            op = np.kron(op, lower if site == i else eye)
        op.setflags(write=False)
        ops.append(op)
    return tuple(ops)


@dataclass(frozen=True)
class MasterEquation:
    """Generator ``-i[H, rho] + L_guided[rho] + L_local[rho]`` in dense form."""

    hamiltonian: np.ndarray
    decay: np.ndarray
    gamma_prime: float
    gamma_ref: float

    @property
    def n(self) -> int:
        return self.decay.shape[0]

    @classmethod
    def from_array(cls, array: EmitterArray, include_coherent: bool = True) -> MasterEquation:
        """Hamiltonians and dissipator written out term by term."""
        n = array.n
        if n > FULL_LIMIT:
            raise DimensionError(f"full integration limited to N <= {FULL_LIMIT}")
        s = lowering_operators(n)
        z = array.theta
        h = np.zeros((1 << n, 1 << n), dtype=complex)
        if include_coherent:
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    phase = np.exp(1j * abs(z[i] - z[j]))
                    rate = array.gamma_left if i < j else array.gamma_right
                    term = -0.5j * rate * phase * s[i].conj().T @ s[j]
                    h += term + term.conj().T
        decay = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                decay[i, j] = array.gamma_left * np.exp(1j * (z[j] - z[i])) + array.gamma_right * np.exp(
                    -1j * (z[j] - z[i])
                )
        return cls(h, decay, array.gamma_prime, array.gamma_1d)

    @classmethod
    def from_system(cls, system: OpenSystem) -> MasterEquation:
        n = system.n
        if n > FULL_LIMIT:
            raise DimensionError(f"full integration limited to N <= {FULL_LIMIT}")
        s = lowering_operators(n)
        h = np.zeros((1 << n, 1 << n), dtype=complex)
        if system.include_coherent:
            for i in range(n):
                for j in range(n):
                    h += system.exchange[i, j] * s[i].conj().T @ s[j]
        return cls(h, np.asarray(system.decay), system.gamma_prime, system.gamma_ref)

    def _parts(self):
        s = lowering_operators(self.n)
        # sum_ij G_ij s_j rho s_i^dag == sum_j s_j rho B_j^dag, B_j = sum_i conj(G_ij) s_i
        b = [sum(np.conj(self.decay[i, j]) * s[i] for i in range(self.n)) for j in range(self.n)]
        k = sum(self.decay[i, j] * s[i].conj().T @ s[j] for i in range(self.n) for j in range(self.n))
        num = sum(si.conj().T @ si for si in s)
        heff = self.hamiltonian - 0.5j * (k + self.gamma_prime * num)
        return s, b, heff

    def emission_operator(self) -> np.ndarray:
        s = lowering_operators(self.n)
        return sum(self.decay[i, j] * s[i].conj().T @ s[j] for i in range(self.n) for j in range(self.n))

    def rhs(self):
        s, b, heff = self._parts()
        heff_dag = heff.conj().T
        gp = self.gamma_prime
        dim = 1 << self.n

        def f(_t, y):
            rho = y.reshape(dim, dim)
            out = -1j * (heff @ rho - rho @ heff_dag)
            for j in range(self.n):
                out += s[j] @ rho @ b[j].conj().T
                if gp:
                    out += gp * s[j] @ rho @ s[j].conj().T
            return out.ravel()

        return f


def inverted_density(n: int) -> np.ndarray:
    rho = np.zeros((1 << n, 1 << n), dtype=complex)
    rho[-1, -1] = 1.0
    return rho


def integrate_full(model, rho0, times, rtol=1e-10, atol=1e-12) -> list[np.ndarray]:
    """Density matrices at ``times`` (``times[0]`` is the start time)."""
    if isinstance(model, EmitterArray):
        model = MasterEquation.from_array(model)
    elif isinstance(model, OpenSystem):
        model = MasterEquation.from_system(model)
    if model.n > FULL_LIMIT:
        raise DimensionError(f"full integration limited to N <= {FULL_LIMIT}")
    times = np.asarray(times, dtype=float)
    rho0 = np.asarray(rho0, dtype=complex)
    if len(times) == 1:
        return [rho0.copy()]
    sol = solve_ivp(
        model.rhs(), (times[0], times[-1]), rho0.ravel(), method="DOP853", t_eval=times, rtol=rtol, atol=atol
    )
    if not sol.success:
        raise RuntimeError(f"master-equation integration failed: {sol.message}")
    dim = rho0.shape[0]
    return [sol.y[:, m].reshape(dim, dim) for m in range(len(times))]


def emission_rate(model: MasterEquation, rhos) -> np.ndarray:
    k = model.emission_operator()
    return np.array([np.real(np.trace(k @ r)) for r in rhos]) / (model.n * model.gamma_ref)


def truncated_basis(n: int) -> list[int]:
    """Masks in serialization order: all excited, one ground, two ground."""
    full = (1 << n) - 1
    out = [full]
    out += [full ^ (1 << i) for i in range(n)]
    out += [full ^ (1 << i) ^ (1 << j) for i in range(n) for j in range(i + 1, n)]
    return out


def _sector_perm(n: int, k: int) -> np.ndarray:
    """Permutation from ascending-mask order to ``truncated_basis`` order."""
    basis_order = truncated_basis(n)
    lo = {n: 0, n - 1: 1, n - 2: 1 + n}[k]
    size = math.comb(n, n - k)
    masks = np.array(basis_order[lo : lo + size])
    return np.searchsorted(basis.sector_states(n, k), masks)


def integrate_truncated(system: OpenSystem, t_fin: float | None = None, steps: int = 16) -> tuple[float, float]:
    """``(R(0), R(t_fin))`` from the two-ground-state truncated evolution.

    Default ``t_fin`` is ``1e-5 / (N * gamma_ref)``.
    """
    n = system.n
    if t_fin is None:
        t_fin = T_FIN_SCALED / (n * system.gamma_ref)
    sectors = [k for k in (n, n - 1, n - 2) if k >= 0]
    coeffs = -0.5j * (system.decay + system.gamma_prime * np.eye(n))
    if system.include_coherent:
        coeffs = coeffs + system.exchange
    heff, emit, perm = {}, {}, {}
    for k in sectors:
        p = _sector_perm(n, k)
        st = basis.sector_states(n, k)
        heff[k] = basis.hopping_matrix(coeffs, st).toarray()[np.ix_(p, p)]
        emit[k] = basis.hopping_matrix(system.decay, st).toarray()[np.ix_(p, p)]
        perm[k] = p
    chans = [(c.rate, c.coefficients) for c in collective_channels(system.decay).bright]
    chans += [(system.gamma_prime, np.eye(n)[i]) for i in range(n)] if system.gamma_prime else []
    jumps = {}
    for k in sectors[1:]:
        ops = []
        for rate, c in chans:
            m = basis.lowering_matrix(c, n, k + 1).toarray()[np.ix_(perm[k], perm[k + 1])]
            ops.append(np.sqrt(rate) * m)
        jumps[k] = ops

    def deriv(rhos):
        out = {}
        for k in sectors:
            r = rhos[k]
            d = -1j * (heff[k] @ r - r @ heff[k].conj().T)
            if k in jumps:
                up = rhos[k + 1]
                for m in jumps[k]:
                    d = d + m @ up @ m.conj().T
            out[k] = d
        return out

    def rate(rhos):
        return sum(np.real(np.trace(emit[k] @ rhos[k])) for k in sectors) / (n * system.gamma_ref)

    rhos = {k: np.zeros((math.comb(n, k),) * 2, dtype=complex) for k in sectors}
    rhos[n][0, 0] = 1.0
    r0 = rate(rhos)
    h = t_fin / steps
    for _ in range(steps):
        k1 = deriv(rhos)
        k2 = deriv({k: rhos[k] + 0.5 * h * k1[k] for k in sectors})
        k3 = deriv({k: rhos[k] + 0.5 * h * k2[k] for k in sectors})
        k4 = deriv({k: rhos[k] + h * k3[k] for k in sectors})
        rhos = {k: rhos[k] + h / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]) for k in sectors}
    return float(r0), float(rate(rhos))


def detect_burst(system: OpenSystem, t_fin: float | None = None) -> bool:
    r0, r1 = integrate_truncated(system, t_fin)
    return r1 > r0


def burst_probability(
    n, ratio, z_max_phase, n_configs=100, master_seed=0, gamma_left=0.5, gamma_right=0.5
) -> float:
    """Fraction of random placements on ``[0, z_max_phase]`` that burst.

    ``ratio`` is ``gamma_1d / gamma_prime``; ``inf`` means no local loss.
    """
    if n_configs < 1:
        raise ValueError("need at least one configuration")
    from .system import point_system

    g1d = gamma_left + gamma_right
    gp = 0.0 if math.isinf(ratio) else g1d / ratio
    hits = 0
    for idx in range(n_configs):
        rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(idx,)))
        arr = disordered_array(n, z_max_phase, gamma_left, gamma_right, gp, rng)
        hits += detect_burst(point_system(arr, "plus_minus"))
    return hits / n_configs


def burst_boundary(n, ratios, z_max_phase, n_configs=100, master_seed=0, gamma_left=0.5, gamma_right=0.5):
    """Smallest ``gamma_1d / gamma_prime`` in ``ratios`` where every configuration bursts."""
    for ratio in sorted(ratios):
        if burst_probability(n, ratio, z_max_phase, n_configs, master_seed, gamma_left, gamma_right) == 1.0:
            return ratio
    return None


def dicke_ladder_rate(n, times, gamma_1d=1.0) -> np.ndarray:
    """Normalized emission rate of the permutation-symmetric Dicke cascade.

    From ``m`` excitations the collective rate is ``gamma_1d * m (N - m + 1)``.
    """
    rates = np.array([gamma_1d * m * (n - m + 1) for m in range(n + 1)], dtype=float)
    gen = np.zeros((n + 1, n + 1))
    for m in range(1, n + 1):
        gen[m, m] -= rates[m]
        gen[m - 1, m] += rates[m]
    p0 = np.zeros(n + 1)
    p0[n] = 1.0
    out = []
    for t in np.asarray(times, dtype=float):
        p = la.expm(gen * t) @ p0
        out.append(p @ rates / (n * gamma_1d))
    return np.array(out)
