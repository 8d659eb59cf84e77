"""Collective decay of inverted emitter arrays coupled to a waveguide."""

__version__ = "0.1.0"

from .channels import ChannelSet, JumpOperator, collective_channels, gamma_matrix
from .criteria import BurstVerdict
from .geometry import EmitterArray, GiantAtomArray, disordered_array, giant_ordered, ordered_array
from .system import OpenSystem, point_system

__all__ = [
    "BurstVerdict",
    "ChannelSet",
    "EmitterArray",
    "GiantAtomArray",
    "JumpOperator",
    "OpenSystem",
    "collective_channels",
    "disordered_array",
    "gamma_matrix",
    "giant_ordered",
    "ordered_array",
    "point_system",
]
