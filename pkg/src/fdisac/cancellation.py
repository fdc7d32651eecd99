"""Tap-limited analog and full digital SI cancellers on the effective M_RF x N_RF channel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class CancellerPair:
    analog: np.ndarray
    digital: np.ndarray
    n_taps: int

    def __post_init__(self):
        if np.count_nonzero(self.analog) > self.n_taps:
            raise InvalidInputError("analog canceller uses more taps than its budget")


def design_analog_canceller(h_si_eff: np.ndarray, n_taps: int) -> np.ndarray:
    """Cancel the ``n_taps`` strongest entries of the effective SI channel.

    Ties in magnitude go to the lower row-major index.
    """
    h_si_eff = np.asarray(h_si_eff, dtype=complex)
    if not 0 <= n_taps <= h_si_eff.size:
        raise InvalidInputError(f"n_taps must lie in [0, {h_si_eff.size}], got {n_taps}")
    c = np.zeros_like(h_si_eff)
    if n_taps == 0:
        return c
    flat = np.abs(h_si_eff).ravel()
    support = np.argsort(-flat, kind="stable")[:n_taps]
    c.flat[support] = -h_si_eff.flat[support]
    return c


def design_digital_canceller(
    h_si_eff: np.ndarray,
    c: np.ndarray,
    relative_error_db: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Digital canceller ``D = -(H_eff + C)`` from a (possibly imperfect) estimate.

    With ``relative_error_db`` set, each entry of the analog residual is
    estimated with an independent CN(0, 1) error scaled to that level relative
    to the entry itself.
    """
    if h_si_eff.shape != c.shape:
        raise InvalidInputError(f"shape mismatch {h_si_eff.shape} vs {c.shape}")
    residual = h_si_eff + c
    if relative_error_db is not None:
        rng = np.random.default_rng(rng)
        err = (rng.standard_normal(residual.shape) + 1j * rng.standard_normal(residual.shape)) / np.sqrt(2)
        residual = residual * (1.0 + 10.0 ** (relative_error_db / 20.0) * err)
    return -residual


def residual_si_power(h_si_eff: np.ndarray, c: np.ndarray, d: np.ndarray, v_bb: np.ndarray):
    """Total baseband residual SI power and per-RX-chain post-analog SI power (mW)."""
    total = float(np.sum(np.abs((h_si_eff + c + d) @ v_bb) ** 2))
    rows = np.sum(np.abs((h_si_eff + c) @ v_bb) ** 2, axis=1)
    return total, rows
