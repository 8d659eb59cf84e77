"""Open-system bundle shared by the trajectory and master-equation engines."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    ChannelSet,
    EffectiveHamiltonian,
    JumpOperator,
    coherent_hamiltonian,
    collective_channels,
    gamma_matrix,
    lr_operators,
)
from .geometry import EmitterArray

UNRAVELINGS = ("plus_minus", "left_right")


@dataclass(eq=False)
class OpenSystem:
    """Emitters with guided decay matrix, exchange couplings and local loss.

    ``channels`` is the guided unraveling actually sampled by trajectories;
    only channels with a positive rate are kept. ``gamma_ref`` normalizes the
    emission rate ``R(t)``.
    """

    decay: np.ndarray
    exchange: np.ndarray
    gamma_prime: float
    gamma_ref: float
    channels: tuple[JumpOperator, ...]
    unraveling: str = "plus_minus"
    include_coherent: bool = True
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.unraveling not in UNRAVELINGS:
            raise ValueError(f"unknown unraveling {self.unraveling!r}")
        self.channels = tuple(ch for ch in self.channels if ch.rate > 0)
        n = self.decay.shape[0]
        if self.exchange.shape != (n, n) or any(ch.n != n for ch in self.channels):
            raise ValueError("inconsistent system dimensions")

    @property
    def n(self) -> int:
        return self.decay.shape[0]

    @property
    def hamiltonian(self) -> EffectiveHamiltonian:
        return EffectiveHamiltonian.from_parts(
            self.exchange, self.channels, self.gamma_prime, self.include_coherent
        )

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "description": self.description,
                "unraveling": self.unraveling,
                "include_coherent": self.include_coherent,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def point_system(array: EmitterArray, unraveling: str = "left_right", include_coherent: bool = True) -> OpenSystem:
    decay = gamma_matrix(array)
    if unraveling == "left_right":
        chans = lr_operators(array)
    elif unraveling == "plus_minus":
        chans = collective_channels(decay, gamma_prime=array.gamma_prime).channels
    else:
        raise ValueError(f"unknown unraveling {unraveling!r}")
    return OpenSystem(
        decay=decay,
        exchange=coherent_hamiltonian(array),
        gamma_prime=array.gamma_prime,
        gamma_ref=array.gamma_1d,
        channels=tuple(chans),
        unraveling=unraveling,
        include_coherent=include_coherent,
        description=array.to_dict(),
    )


def channel_set(system: OpenSystem) -> ChannelSet:
    return collective_channels(system.decay, gamma_prime=system.gamma_prime)
