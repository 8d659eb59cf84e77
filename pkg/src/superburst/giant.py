"""Giant atoms with two connection points to a bidirectional waveguide."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import analytic_rates, collective_channels
from .criteria import giant_gamma_1d
from .geometry import EmitterArray, GiantAtomArray, Topology, ordered_array
from .system import OpenSystem

# |1 + exp(i a)| below this counts as an exactly decoherence-free atom
DFS_TOL = 1e-12


@dataclass(frozen=True)
class GiantCouplings:
    decay: np.ndarray
    exchange: np.ndarray
    gamma_eff: float


def giant_couplings(array: GiantAtomArray) -> GiantCouplings:
    """Decay ``sum_nm g cos(phi)`` and exchange ``sum_nm (g/2) sin(phi)``.

    ``phi`` is the phase ``|theta_(i,n) - theta_(j,m)|`` between connection
    points. The decay matrix is evaluated in the factorized form
    ``g Re(u_i conj(u_j))`` with ``u_i = exp(i theta_i1) (1 + exp(i a_i))`` so
    decoherence-free atoms contribute exact zeros.
    """
    conns = np.array(array.connection_phases)
    g = array.gamma_point
    first = conns[:, 0]
    size = conns[:, 1] - conns[:, 0]
    self_amp = 1 + np.exp(1j * size)
    self_amp[np.abs(self_amp) < DFS_TOL] = 0.0
    u = np.exp(1j * first) * self_amp
    decay = g * np.real(np.outer(u, u.conj()))
    decay = 0.5 * (decay + decay.T)
    phi = np.abs(conns[:, None, :, None] - conns[None, :, None, :])
    exchange = 0.5 * g * np.sin(phi).sum(axis=(2, 3))
    exchange = 0.5 * (exchange + exchange.T)
    gamma_eff = float(np.mean(np.diag(decay)))
    return GiantCouplings(decay, exchange, gamma_eff)


def giant_rates(n, kd, ka, gamma_point) -> tuple[float, float]:
    """Bright rates of an ordered giant array: point-emitter rates with the modified single-atom rate."""
    g_eff = giant_gamma_1d(ka, gamma_point)
    if g_eff == 0:
        return 0.0, 0.0
    return analytic_rates(n, kd, g_eff / 2, g_eff / 2)


def giant_system(array: GiantAtomArray, include_coherent: bool = True) -> OpenSystem:
    cpl = giant_couplings(array)
    chans = collective_channels(cpl.decay, gamma_prime=array.gamma_prime).channels
    # R(t) normalization; a fully decoherence-free array falls back to the bare coupling
    ref = cpl.gamma_eff if cpl.gamma_eff > 0 else array.gamma_point
    return OpenSystem(
        decay=cpl.decay.astype(complex),
        exchange=cpl.exchange.astype(complex),
        gamma_prime=array.gamma_prime,
        gamma_ref=ref,
        channels=chans,
        unraveling="plus_minus",
        include_coherent=include_coherent,
        description=array.to_dict(),
    )


def separated_equivalence_check(array: GiantAtomArray) -> tuple[EmitterArray, float]:
    """Point-emitter array with the same dynamics, plus the uniform self-shift.

    Only valid for regularly spaced separated arrays.
    """
    if array.topology is not Topology.SEPARATED:
        raise ValueError("the point-emitter mapping only holds for separated giant atoms")
    conns = np.array(array.connection_phases)
    size = conns[:, 1] - conns[:, 0]
    steps = np.diff(conns[:, 0])
    if not np.allclose(size, size[0]) or (len(steps) and not np.allclose(steps, steps[0])):
        raise ValueError("mapping needs a regular array with equal atom sizes")
    ka = float(size[0])
    kd = float(steps[0]) if len(steps) else 0.0
    g_eff = giant_gamma_1d(ka, array.gamma_point)
    if g_eff <= DFS_TOL * array.gamma_point:
        raise ValueError("decoherence-free atoms have no point-emitter counterpart")
    point = ordered_array(array.n, kd, g_eff / 2, g_eff / 2, array.gamma_prime)
    shift = array.gamma_point * math.sin(ka)
    return point, shift


def crossover_map(n, kds, kas, gamma_point=1.0, gamma_prime=0.1):
    """Burst verdicts over ``(a, d)``; rows ``(kd, ka, topology, lhs, rhs, margin, burst)``.

    Points with ``a >= 2d`` (beyond-nearest-neighbour braiding) are labelled
    ``"braided+"``.
    """
    from .criteria import giant_burst_condition

    rows = []
    for kd in kds:
        for ka in kas:
            if ka < kd:
                topo = "separated"
            elif ka < 2 * kd:
                topo = "braided"
            else:
                topo = "braided+"
            v = giant_burst_condition(n, kd, ka, gamma_point, gamma_prime)
            rows.append((kd, ka, topo, v.lhs, v.rhs, v.margin, v.burst))
    return rows
