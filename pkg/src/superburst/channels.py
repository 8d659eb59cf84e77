"""Guided decay matrix, collective jump channels and effective Hamiltonians.

Jump operators are ``O = sum_i c_i sigma_ge^i``. For an eigenvector ``v`` of
the decay matrix the matching jump operator has ``c = conj(v)``, which makes
``sum_nu Gamma_nu O_nu rho O_nu^dag`` reproduce ``sum_ij Gamma_ij
sigma_ge^j rho sigma_eg^i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import basis
from .geometry import EmitterArray

DENSE_LIMIT = 12
SIN_LIMIT = 1e-8
DARK_RELATIVE = 1e-10


class ChannelError(RuntimeError):
    """Eigensolver failure or inconsistent channel data."""


def sin_ratio(n: int, kd: float) -> float:
    """``sin(N kd) / sin(kd)``, with the ``kd -> m pi`` limit ``+-N``.

    ``kd`` is first reduced modulo ``pi`` so the ratio stays accurate close to
    the mirror configuration.
    """
    y = math.remainder(kd, math.pi)
    sign = -1.0 if (n - 1) % 2 and round((kd - y) / math.pi) % 2 else 1.0
    s = math.sin(y)
    if abs(s) < SIN_LIMIT:
        return sign * n
    return sign * math.sin(n * y) / s


def sin_ratio_sq(n: int, kd: float) -> float:
    """``sin^2(N kd) / sin^2(kd)``, with the ``kd -> m pi`` limit ``N^2``."""
    return sin_ratio(n, kd) ** 2


def gamma_matrix(array: EmitterArray) -> np.ndarray:
    """``Gamma_ij = G_L exp(i(th_j - th_i)) + G_R exp(-i(th_j - th_i))``."""
    th = array.theta
    dz = th[None, :] - th[:, None]
    g = array.gamma_left * np.exp(1j * dz) + array.gamma_right * np.exp(-1j * dz)
    # exact Hermiticity regardless of rounding in exp
    return 0.5 * (g + g.conj().T)


@dataclass(frozen=True)
class JumpOperator:
    coefficients: np.ndarray
    rate: float
    label: str

    @property
    def n(self) -> int:
        return len(self.coefficients)

    def to_dict(self) -> dict:
        c = np.asarray(self.coefficients)
        return {
            "label": self.label,
            "rate": float(self.rate),
            "re": c.real.tolist(),
            "im": c.imag.tolist(),
        }


@dataclass(frozen=True)
class ChannelSet:
    channels: tuple[JumpOperator, ...]
    gamma_1d: float
    gamma_prime: float = 0.0
    eps_dark: float = 0.0

    @property
    def n(self) -> int:
        return self.channels[0].n

    @property
    def rates(self) -> np.ndarray:
        return np.array([ch.rate for ch in self.channels])

    @property
    def bright(self) -> tuple[JumpOperator, ...]:
        return tuple(ch for ch in self.channels if ch.rate > 0)

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma_1d": self.gamma_1d,
                "gamma_prime": self.gamma_prime,
                "eps_dark": self.eps_dark,
                "channels": [ch.to_dict() for ch in self.channels],
            },
            indent=2,
        )


def collective_channels(decay: np.ndarray, eps_dark: float | None = None, gamma_prime: float = 0.0) -> ChannelSet:
    """Diagonalize the decay matrix into channels sorted by descending rate.

    Rates below ``eps_dark`` (default ``1e-10 * trace``) are labelled dark and
    clamped to zero.
    """
    decay = np.asarray(decay, dtype=complex)
    n = decay.shape[0]
    if decay.shape != (n, n):
        raise ChannelError("decay matrix must be square")
    if not np.allclose(decay, decay.conj().T, atol=1e-12, rtol=0):
        raise ChannelError("decay matrix is not Hermitian")
    gamma_1d = float(np.real(np.trace(decay))) / n
    if eps_dark is None:
        scale = max(gamma_1d, float(np.abs(decay).max()))
        eps_dark = DARK_RELATIVE * n * scale
    try:
        w, v = np.linalg.eigh(decay)
    except np.linalg.LinAlgError as exc:
        raise ChannelError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise ChannelError("eigensolver returned non-finite rates")
    order = np.argsort(-w, kind="stable")
    chans = []
    n_bright = 0
    for pos, idx in enumerate(order):
        rate = float(w[idx])
        if rate > eps_dark:
            label = ("plus", "minus")[n_bright] if n_bright < 2 else f"bright({pos})"
            n_bright += 1
        else:
            rate = 0.0
            label = f"dark({pos})"
        chans.append(JumpOperator(np.conj(v[:, idx]), rate, label))
    return ChannelSet(tuple(chans), gamma_1d, gamma_prime, eps_dark)


def analytic_rates(n: int, kd: float, gamma_left: float, gamma_right: float) -> tuple[float, float]:
    """Closed-form bright rates ``(Gamma_+, Gamma_-)`` of an ordered array.

    ``Gamma_-`` uses ``Gamma_+ Gamma_- = G_L G_R (N^2 - s^2)`` to avoid the
    cancellation in ``N gamma_1d / 2 - root``.
    """
    g1d = gamma_left + gamma_right
    s = abs(sin_ratio(n, kd))
    root = math.sqrt(n * n * (gamma_left - gamma_right) ** 2 / 4 + gamma_left * gamma_right * s * s)
    plus = n * g1d / 2 + root
    minus = gamma_left * gamma_right * (n - s) * (n + s) / plus if plus > 0 else 0.0
    return float(plus), float(max(minus, 0.0))


def lr_operators(array: EmitterArray) -> tuple[JumpOperator, JumpOperator]:
    """Directional jump operators with per-site weight ``1/sqrt(N)``.

    Rates are ``N * gamma_left`` and ``N * gamma_right``; with these the two
    operators rebuild the guided dissipator exactly.
    """
    n = array.n
    th = array.theta
    left = JumpOperator(np.exp(1j * th) / np.sqrt(n), n * array.gamma_left, "left")
    right = JumpOperator(np.exp(-1j * th) / np.sqrt(n), n * array.gamma_right, "right")
    return left, right


def coherent_hamiltonian(array: EmitterArray) -> np.ndarray:
    """Exchange couplings ``H_ij`` of ``sum_ij H_ij sigma_eg^i sigma_ge^j``.

    Combines the left- and right-mover Hamiltonians with their Hermitian
    conjugates; relies on phases being sorted so ``i < j`` means
    ``theta_i <= theta_j``.
    """
    th = array.theta
    gl, gr = array.gamma_left, array.gamma_right
    phi = np.abs(th[:, None] - th[None, :])
    fwd = np.exp(1j * phi)
    bwd = np.exp(-1j * phi)
    upper = -0.5j * gl * fwd + 0.5j * gr * bwd
    lower = -0.5j * gr * fwd + 0.5j * gl * bwd
    h = np.triu(upper, 1) + np.tril(lower, -1)
    return 0.5 * (h + h.conj().T)


def dissipator_coefficients(channels, gamma_prime: float = 0.0) -> np.ndarray:
    """``D_ij`` such that ``sum_nu G_nu O_nu^dag O_nu + G' sum_i n_i = sum_ij D_ij s_eg^i s_ge^j``."""
    chans = channels.channels if isinstance(channels, ChannelSet) else tuple(channels)
    n = chans[0].n
    d = np.zeros((n, n), dtype=complex)
    for ch in chans:
        if ch.rate:
            c = np.asarray(ch.coefficients)
            d += ch.rate * np.outer(c.conj(), c)
    return d + gamma_prime * np.eye(n)


@dataclass
class EffectiveHamiltonian:
    """``H_coh - (i/2) (sum_nu G_nu O_nu^dag O_nu + G' sum_i n_i)``.

    Stored as the one-body coefficient matrix ``coeffs``; the many-body operator
    is ``sum_ij coeffs[i, j] sigma_eg^i sigma_ge^j``.
    """

    coeffs: np.ndarray
    _sectors: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def decay_coeffs(self) -> np.ndarray:
        """Coefficients of the (Hermitian) total decay operator."""
        return 1j * (self.coeffs - self.coeffs.conj().T)

    def sector(self, k: int) -> sp.csr_matrix:
        if k not in self._sectors:
            self._sectors[k] = basis.hopping_matrix(self.coeffs, basis.sector_states(self.n, k))
        return self._sectors[k]

    def matrix(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise ValueError(f"dense matrix only for N <= {DENSE_LIMIT}; use apply()")
        return basis.hopping_matrix(self.coeffs, np.arange(1 << self.n)).toarray()

    def apply(self, psi) -> np.ndarray:
        """Matrix-free action on a full ``2**N`` amplitude vector."""
        amps = np.asarray(getattr(psi, "amplitudes", psi))
        n = self.n
        if amps.shape != (1 << n,):
            raise ValueError("state dimension does not match the Hamiltonian")
        states = np.arange(1 << n, dtype=np.int64)
        out = np.zeros_like(amps, dtype=complex)
        for j in range(n):
            has_j = (states >> j) & 1 == 1
            for i in range(n):
                c = self.coeffs[i, j]
                if c == 0:
                    continue
                if i == j:
                    out[has_j] += c * amps[has_j]
                    continue
                mask = has_j & ((states >> i) & 1 == 0)
                src = states[mask]
                out[(src ^ (1 << j)) | (1 << i)] += c * amps[src]
        return out

    @classmethod
    def from_parts(cls, exchange, channels, gamma_prime=0.0, include_coherent=True) -> EffectiveHamiltonian:
        decay = dissipator_coefficients(channels, gamma_prime)
        if exchange is not None and np.shape(exchange) != decay.shape:
            raise ChannelError("exchange and channel dimensions differ")
        coeffs = -0.5j * decay
        if include_coherent and exchange is not None:
            coeffs = coeffs + np.asarray(exchange, dtype=complex)
        return cls(coeffs)


def effective_hamiltonian(array: EmitterArray, channels, include_coherent: bool = True) -> EffectiveHamiltonian:
    chans = channels.channels if isinstance(channels, ChannelSet) else tuple(channels)
    if any(ch.n != array.n for ch in chans):
        raise ChannelError("channels and array have different emitter numbers")
    return EffectiveHamiltonian.from_parts(
        coherent_hamiltonian(array), chans, array.gamma_prime, include_coherent
    )


def spin_wave_operator(array: EmitterArray, k_phase: float) -> JumpOperator:
    """Spin wave ``c_j = exp(-i k j) / sqrt(N)``; rate is its Rayleigh quotient."""
    n = array.n
    c = np.exp(-1j * k_phase * np.arange(n)) / np.sqrt(n)
    rate = float(np.real(c @ gamma_matrix(array) @ c.conj()))
    return JumpOperator(c, rate, f"spin_wave({k_phase:.6g})")
