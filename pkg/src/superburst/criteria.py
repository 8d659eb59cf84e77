"""Closed-form burst criteria and conditional photon correlations.

Everything here assumes the fully inverted initial state and involves no time
evolution. Rates enter as raw ``(gamma_left, gamma_right)``; the guided total
``gamma_1d`` is formed internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet, sin_ratio_sq


@dataclass(frozen=True)
class BurstVerdict:
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def burst(self) -> bool:
        # strict inequality: lhs == rhs is no burst
        return bool(self.margin > 0)


def _power_sums(channels: ChannelSet) -> tuple[int, float, float, float, float]:
    rates = channels.rates
    n = len(rates)
    if n == 0:
        raise ValueError("empty channel set")
    return n, channels.gamma_1d, channels.gamma_prime, float(np.sum(rates**2)), float(np.sum(rates**3))


def g2_conditional(channels: ChannelSet) -> float:
    """Waveguide-conditioned ``g2(0)`` of the inverted state."""
    n, g, gp, s2, _ = _power_sums(channels)
    return 1 + (s2 - n * g * (2 * g + gp)) / (n * n * g * (g + gp))


def g3_conditional(channels: ChannelSet) -> float:
    """Waveguide-conditioned ``g3(0)`` of the inverted state."""
    n, g, gp, s2, s3 = _power_sums(channels)
    tot2 = (g + gp) ** 2
    return (
        1
        - (6 * g * g + 8 * gp * g + 3 * gp * gp) / (n * tot2)
        + (12 * g * g + 8 * gp * g + 2 * gp * gp) / (n * n * tot2)
        + ((3 * n * g - 12 * g + 2 * (n - 2) * gp) * s2 + 2 * s3) / (n**3 * g * tot2)
    )


def burst_variance_criterion(channels: ChannelSet) -> BurstVerdict:
    n, g, gp, s2, _ = _power_sums(channels)
    lhs = (s2 - n * g * g) / (n * g * g)
    return BurstVerdict(lhs, 1 + gp / g)


def burst_ordered(n, kd, gamma_left, gamma_right, gamma_prime=0.0) -> BurstVerdict:
    g = gamma_left + gamma_right
    lhs = n * (gamma_left**2 + gamma_right**2) / g**2 + 2 * gamma_left * gamma_right / (n * g**2) * sin_ratio_sq(n, kd)
    return BurstVerdict(lhs, 2 + gamma_prime / g)


def burst_universal(n, gamma_left, gamma_right, gamma_prime=0.0) -> BurstVerdict:
    """Sufficient condition valid for any emitter placement."""
    g = gamma_left + gamma_right
    return BurstVerdict(n * (gamma_left**2 + gamma_right**2) / g**2, 2 + gamma_prime / g)


def all_channel_condition(n, kd, gamma_left, gamma_right, gamma_prime=0.0) -> BurstVerdict:
    """Enhancement into every channel, local decay included; both sides over ``gamma_1d**2``."""
    g = gamma_left + gamma_right
    lhs = (
        n * n * (gamma_left - gamma_right) ** 2 / 2
        + 2 * gamma_left * gamma_right * sin_ratio_sq(n, kd)
        + g * g * (n * n - 2 * n) / 2
    )
    rhs = n * (g + gamma_prime) ** 2
    return BurstVerdict(lhs / g**2, rhs / g**2)


def directional_g2(n, kd) -> tuple[float, float]:
    """Same-direction and opposite-direction ``g2(0)`` (bidirectional, no local loss)."""
    return 2 - 2 / n, 1 - 2 / n + sin_ratio_sq(n, kd) / n**2


def directional_gn(order, n, kd) -> tuple[float, float, float]:
    """``(g_LL, g_LR, r)`` after ``order - 1`` same-direction jumps, jumps only.

    ``r = g_LL / g_LR`` is how much more likely the next photon repeats the
    direction of the previous ones.
    """
    if not 1 <= order <= n:
        raise ValueError(f"need 1 <= n <= N, got n={order}, N={n}")
    if n == 1:
        return 1.0, 1.0, 1.0
    falling = math.prod((n - m) / n for m in range(order))
    g_ll = math.factorial(order) * falling
    s2 = sin_ratio_sq(n, kd)
    g_lr = math.factorial(order - 1) * falling / (n - 1) * (n - order + (order - 1) / n * s2)
    ratio = order * n * (n - 1) / ((n - order) * n + (order - 1) * s2)
    return g_ll, g_lr, ratio


def imbalance_reference(n, gamma_1d=1.0, gamma_prime=0.0) -> tuple[float, float]:
    """Variances of the flat and of the uncorrelated (multinomial) imbalance."""
    return n * (n + 2) / 3, n * gamma_1d / (gamma_1d + gamma_prime)


def giant_gamma_1d(ka, gamma_point) -> float:
    return 2 * gamma_point * (1 + math.cos(ka))


def giant_burst_condition(n, kd, ka, gamma_point, gamma_prime=0.0) -> BurstVerdict:
    lhs = n / 2 + sin_ratio_sq(n, kd) / (2 * n)
    g_eff = giant_gamma_1d(ka, gamma_point)
    if g_eff <= 1e-12 * gamma_point:
        return BurstVerdict(lhs, math.inf)
    return BurstVerdict(lhs, 2 + gamma_prime / g_eff)


def criteria_sweep(ns, kds, gamma_primes, gamma_left=0.5, gamma_right=0.5):
    """Rows ``(N, kd, gamma_prime, lhs, rhs, margin, burst)`` of the ordered-array test."""
    rows = []
    for n in ns:
        for kd in kds:
            for gp in gamma_primes:
                v = burst_ordered(n, kd, gamma_left, gamma_right, gp)
                rows.append((n, kd, gp, v.lhs, v.rhs, v.margin, v.burst))
    return rows
