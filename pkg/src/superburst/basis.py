"""Bit-mask basis for N two-level emitters.

Basis index ``s`` encodes the configuration: bit ``i`` set means emitter ``i``
is excited. Every operator used here either conserves the excitation number
(hopping terms ``sigma_eg^i sigma_ge^j``) or lowers it by one, so most work
is done inside fixed-excitation sectors of dimension ``C(N, k)``.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

MAX_EMITTERS = 20


def popcount(states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.int64)
    counts = np.zeros_like(states)
    s = states.copy()
    while np.any(s):
        counts += s & 1
        s >>= 1
    return counts


@lru_cache(maxsize=None)
def sector_states(n: int, k: int) -> np.ndarray:
    """Ascending bit masks of all states with ``k`` excitations."""
    if not 0 <= k <= n:
        raise ValueError(f"excitation number {k} outside [0, {n}]")
    if n > MAX_EMITTERS:
        raise ValueError(f"N={n} exceeds the emitter cap {MAX_EMITTERS}")
    full = np.arange(1 << n, dtype=np.int64)
    out = full[popcount(full) == k]
    out.setflags(write=False)
    assert len(out) == comb(n, k)
    return out


def _index_of(states: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return np.searchsorted(states, targets)


def hopping_matrix(coeffs: np.ndarray, states: np.ndarray) -> sp.csr_matrix:
    """Matrix of ``sum_ij coeffs[i, j] sigma_eg^i sigma_ge^j`` on ``states``.

    ``states`` must be closed under the hopping (a full sector, or the whole
    space ``arange(2**N)``).
    """
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[0]
    states = np.asarray(states, dtype=np.int64)
    rows, cols, vals = [], [], []
    src = np.arange(len(states))
    for j in range(n):
        has_j = (states >> j) & 1 == 1
        for i in range(n):
            c = coeffs[i, j]
            if c == 0:
                continue
            if i == j:
                mask = has_j
                tgt = states[mask]
            else:
                mask = has_j & ((states >> i) & 1 == 0)
                tgt = (states[mask] ^ (1 << j)) | (1 << i)
            rows.append(_index_of(states, tgt))
            cols.append(src[mask])
            vals.append(np.full(mask.sum(), c, dtype=complex))
    d = len(states)
    if not rows:
        return sp.csr_matrix((d, d), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(d, d),
    )


def lowering_matrix(coeffs: np.ndarray, n: int, k: int) -> sp.csr_matrix:
    """Matrix of ``sum_i coeffs[i] sigma_ge^i`` from sector ``k`` to ``k - 1``."""
    src_states = sector_states(n, k)
    dst_states = sector_states(n, k - 1)
    rows, cols, vals = [], [], []
    src = np.arange(len(src_states))
    for i in range(n):
        if coeffs[i] == 0:
            continue
        mask = (src_states >> i) & 1 == 1
        rows.append(_index_of(dst_states, src_states[mask] ^ (1 << i)))
        cols.append(src[mask])
        vals.append(np.full(mask.sum(), coeffs[i], dtype=complex))
    shape = (len(dst_states), len(src_states))
    if not rows:
        return sp.csr_matrix(shape, dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=shape,
    )


def excited_populations(psi: np.ndarray, n: int, k: int) -> np.ndarray:
    """``<sigma_eg^i sigma_ge^i>`` for each emitter, for a sector-``k`` vector."""
    states = sector_states(n, k)
    probs = np.abs(psi) ** 2
    bits = (states[:, None] >> np.arange(n)[None, :]) & 1
    return probs @ bits
