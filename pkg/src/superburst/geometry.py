"""Emitter configurations: ordered, disordered and giant-atom arrays.

Positions are stored as optical phases ``theta_i = k_1D * z_i``; rates are in
units of a caller-chosen reference (conventionally ``gamma_1d = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class GeometryError(ValueError):
    """Invalid emitter configuration."""


@dataclass(frozen=True)
class EmitterArray:
    phases: tuple[float, ...]
    gamma_left: float
    gamma_right: float
    gamma_prime: float = 0.0

    def __post_init__(self):
        phases = tuple(float(p) for p in self.phases)
        object.__setattr__(self, "phases", phases)
        if len(phases) < 1:
            raise GeometryError("an array needs at least one emitter")
        if not all(math.isfinite(p) for p in phases):
            raise GeometryError("phases must be finite")
        if any(b < a for a, b in zip(phases, phases[1:])):
            raise GeometryError("phases must be sorted ascending")
        if min(self.gamma_left, self.gamma_right, self.gamma_prime) < 0:
            raise GeometryError("rates must be nonnegative")
        if self.gamma_left + self.gamma_right <= 0:
            raise GeometryError("total guided rate gamma_left + gamma_right must be positive")

    @property
    def n(self) -> int:
        return len(self.phases)

    @property
    def gamma_1d(self) -> float:
        return self.gamma_left + self.gamma_right

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.phases)

    def shifted(self, offset: float) -> EmitterArray:
        return EmitterArray(
            tuple(p + offset for p in self.phases),
            self.gamma_left,
            self.gamma_right,
            self.gamma_prime,
        )

    def to_dict(self) -> dict:
        return {
            "kind": "point",
            "phases": list(self.phases),
            "gamma_left": self.gamma_left,
            "gamma_right": self.gamma_right,
            "gamma_prime": self.gamma_prime,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EmitterArray:
        return cls(
            tuple(data["phases"]),
            float(data["gamma_left"]),
            float(data["gamma_right"]),
            float(data.get("gamma_prime", 0.0)),
        )


def ordered_array(n, phase_spacing, gamma_left, gamma_right, gamma_prime=0.0) -> EmitterArray:
    """Regular lattice with phases ``0, kd, 2kd, ..., (N-1)kd``."""
    if n < 1:
        raise GeometryError("N must be at least 1")
    if phase_spacing < 0:
        raise GeometryError("phase spacing must be nonnegative")
    return EmitterArray(
        tuple(phase_spacing * i for i in range(n)), gamma_left, gamma_right, gamma_prime
    )


def disordered_array(n, z_max_phase, gamma_left, gamma_right, gamma_prime, rng) -> EmitterArray:
    """``N`` phases drawn uniformly on ``[0, z_max_phase]``, then sorted."""
    if n < 1:
        raise GeometryError("N must be at least 1")
    if z_max_phase < 0:
        raise GeometryError("z_max_phase must be nonnegative")
    phases = np.sort(rng.uniform(0.0, z_max_phase, size=n))
    return EmitterArray(tuple(phases.tolist()), gamma_left, gamma_right, gamma_prime)


class Topology(str, Enum):
    SEPARATED = "separated"
    BRAIDED = "braided"


@dataclass(frozen=True)
class GiantAtomArray:
    """Giant atoms with two connection points each.

    ``connection_phases[i] = (theta_i1, theta_i2)`` with ``theta_i1 <= theta_i2``.
    """

    connection_phases: tuple[tuple[float, float], ...]
    gamma_point: float
    gamma_prime: float = 0.0
    topology: Topology = Topology.SEPARATED

    def __post_init__(self):
        conns = tuple((float(a), float(b)) for a, b in self.connection_phases)
        object.__setattr__(self, "connection_phases", conns)
        object.__setattr__(self, "topology", Topology(self.topology))
        if not conns:
            raise GeometryError("an array needs at least one giant atom")
        if not all(math.isfinite(x) for pair in conns for x in pair):
            raise GeometryError("connection phases must be finite")
        if self.gamma_point <= 0:
            raise GeometryError("per-connection coupling must be positive")
        if self.gamma_prime < 0:
            raise GeometryError("gamma_prime must be nonnegative")
        for a, b in conns:
            if b < a:
                raise GeometryError("connection points of an atom must be ordered")
        firsts = [a for a, _ in conns]
        if any(b <= a for a, b in zip(firsts, firsts[1:])):
            raise GeometryError("atoms must be ordered by their first connection point")
        for i in range(len(conns) - 1):
            size = conns[i][1] - conns[i][0]
            gap = conns[i + 1][0] - conns[i][0]
            if self.topology is Topology.SEPARATED and not size < gap:
                raise GeometryError(f"atom {i} overlaps its neighbour (a >= d) in a separated array")
            if self.topology is Topology.BRAIDED and not gap < size < 2 * gap:
                raise GeometryError(f"atom {i} violates the braiding constraint d < a < 2d")

    @property
    def n(self) -> int:
        return len(self.connection_phases)

    def to_dict(self) -> dict:
        return {
            "kind": "giant",
            "connection_phases": [list(p) for p in self.connection_phases],
            "gamma_point": self.gamma_point,
            "gamma_prime": self.gamma_prime,
            "topology": self.topology.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> GiantAtomArray:
        return cls(
            tuple(tuple(p) for p in data["connection_phases"]),
            float(data["gamma_point"]),
            float(data.get("gamma_prime", 0.0)),
            Topology(data["topology"]),
        )


def giant_ordered(n, d_phase, a_phase, gamma_point, gamma_prime=0.0, topology="separated") -> GiantAtomArray:
    """Atom ``i`` connects at phases ``i*d`` and ``i*d + a``."""
    if n < 1:
        raise GeometryError("N must be at least 1")
    topology = Topology(topology)
    if a_phase < 0 or d_phase <= 0:
        raise GeometryError("need a >= 0 and d > 0")
    if topology is Topology.SEPARATED and not a_phase < d_phase:
        raise GeometryError("separated giant atoms need a < d")
    if topology is Topology.BRAIDED and not d_phase < a_phase < 2 * d_phase:
        raise GeometryError("braided giant atoms need d < a < 2d")
    conns = tuple((i * d_phase, i * d_phase + a_phase) for i in range(n))
    return GiantAtomArray(conns, gamma_point, gamma_prime, topology)


def giant_disordered(n, a_phase, max_spacing, gamma_point, gamma_prime, topology, rng) -> GiantAtomArray:
    """Random spacings obeying the topology constraint.

    Separated: spacing uniform on ``(a, max(max_spacing, a))``; braided: uniform
    on ``(a/2, a)`` so that ``d < a < 2d``. ``max_spacing`` is ignored for
    braided arrays.
    """
    topology = Topology(topology)
    if n < 1:
        raise GeometryError("N must be at least 1")
    if a_phase <= 0:
        raise GeometryError("need a > 0 for a disordered giant array")
    if topology is Topology.SEPARATED:
        hi = max(max_spacing, a_phase)
        spacings = rng.uniform(a_phase, hi, size=n - 1)
        # keep strict inequality when the interval collapses
        spacings = np.where(spacings <= a_phase, np.nextafter(a_phase, np.inf), spacings)
    else:
        spacings = rng.uniform(a_phase / 2, a_phase, size=n - 1)
        spacings = np.clip(spacings, np.nextafter(a_phase / 2, np.inf), np.nextafter(a_phase, 0))
    starts = np.concatenate([[0.0], np.cumsum(spacings)])
    conns = tuple((float(s), float(s + a_phase)) for s in starts)
    return GiantAtomArray(conns, gamma_point, gamma_prime, topology)
