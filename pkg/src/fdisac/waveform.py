"""Frequency-domain OFDM subframe synthesis and the BS / user receive paths.

Everything operates per resource element on ``(P, Q, width)`` grids; there is
no IFFT / cyclic prefix stage.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .arrays import AnalogBeamformer, ArrayGeometry, steering_vector
from .channels import DlChannel, SiChannel, TargetState
from .errors import InvalidInputError


class Stage(enum.Enum):
    SYMBOLS = "symbols"
    TX_ANTENNA = "tx_antenna"
    RX_ANTENNA = "rx_antenna"
    RX_CHAIN = "rx_chain"
    USER_RX = "user_rx"


@dataclass(frozen=True)
class SubframeGrid:
    data: np.ndarray
    stage: Stage

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise InvalidInputError(f"grid must be (P, Q, width) with P, Q > 0, got {self.data.shape}")

    @property
    def n_subcarriers(self) -> int:
        return self.data.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        """Resource elements as rows, subcarrier-major."""
        return self.data.reshape(-1, self.width)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-resource-element noise variances in mW."""

    variance_bs: float
    variance_user: float

    def __post_init__(self):
        if self.variance_bs < 0 or self.variance_user < 0:
            raise InvalidInputError("noise variances must be >= 0")


def _complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    if variance == 0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_symbols(n_subcarriers: int, n_symbols: int, n_users: int, n_streams: int,
                     seed=None, n_rf: Optional[int] = None) -> SubframeGrid:
    """Unit-modulus QPSK symbols, user-major along the last axis."""
    width = n_users * n_streams
    if n_rf is not None and width > n_rf:
        raise InvalidInputError(f"U*L = {width} exceeds N_RF = {n_rf}")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n_subcarriers, n_symbols, width, 2))
    data = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2.0)
    return SubframeGrid(data, Stage.SYMBOLS)


def tx_precode(grid: SubframeGrid, v_rf: AnalogBeamformer, v_bb: np.ndarray) -> SubframeGrid:
    """Hybrid precoding ``x = V_RF V_BB s`` on every resource element."""
    v_rf_m = v_rf.assembled
    if v_bb.shape[0] != v_rf_m.shape[1] or v_bb.shape[1] != grid.width:
        raise InvalidInputError(
            f"dimension chain mismatch: V_RF {v_rf_m.shape}, V_BB {v_bb.shape}, streams {grid.width}")
    precoder = v_rf_m @ v_bb
    return SubframeGrid(grid.data @ precoder.T, Stage.TX_ANTENNA)


def target_projections(x: np.ndarray, targets: Sequence[TargetState], tx_geom: ArrayGeometry) -> np.ndarray:
    """``a_N(theta_k)^H x`` for every target, shape ``(..., K)``."""
    if not targets:
        return np.zeros(x.shape[:-1] + (0,), dtype=complex)
    a_tx = steering_vector(tx_geom, [t.doa for t in targets])
    return x @ a_tx.conj()


def radar_receive(
    tx_grid: SubframeGrid,
    targets: Sequence[TargetState],
    si: Optional[SiChannel],
    noise: NoiseSpec,
    rng=None,
    *,
    delta_f: float,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
) -> SubframeGrid:
    """Reflections plus LoS SI plus white noise at the M RX antennas."""
    x = tx_grid.data
    n_sc = x.shape[0]
    y = np.zeros(x.shape[:2] + (rx_geom.n_elements,), dtype=complex)
    if targets:
        p = np.arange(n_sc)
        proj = target_projections(x, targets, tx_geom)
        a_rx = steering_vector(rx_geom, [t.doa for t in targets])
        for k, t in enumerate(targets):
            phase = t.reflection * np.exp(-2j * np.pi * t.delay * p * delta_f)
            y += (phase[:, None] * proj[..., k])[..., None] * a_rx[:, k]
    if si is not None:
        y += x @ si.matrix.T
    rng = np.random.default_rng(rng)
    y += _complex_noise(rng, y.shape, noise.variance_bs)
    return SubframeGrid(y, Stage.RX_ANTENNA)


def bb_combine(
    rx_grid: SubframeGrid,
    w_rf: AnalogBeamformer,
    c: np.ndarray,
    d: np.ndarray,
    v_bb: np.ndarray,
    symbols: SubframeGrid,
) -> SubframeGrid:
    """Analog combining followed by the analog + digital canceller injections.

    ``y_bb = W_RF^H y + (C + D) V_BB s``; the cancellers add replicas of the
    known transmit streams.
    """
    w = w_rf.assembled
    if rx_grid.width != w.shape[0]:
        raise InvalidInputError(f"RX grid width {rx_grid.width} != combiner rows {w.shape[0]}")
    if c.shape != (w.shape[1], v_bb.shape[0]) or d.shape != c.shape:
        raise InvalidInputError(f"canceller shapes {c.shape}, {d.shape} != {(w.shape[1], v_bb.shape[0])}")
    if symbols.width != v_bb.shape[1]:
        raise InvalidInputError(f"symbol width {symbols.width} != V_BB columns {v_bb.shape[1]}")
    out = rx_grid.data @ w.conj() + symbols.data @ ((c + d) @ v_bb).T
    return SubframeGrid(out, Stage.RX_CHAIN)


def user_receive(tx_grid: SubframeGrid, dl: DlChannel, noise: NoiseSpec, rng=None) -> SubframeGrid:
    if dl.matrix.shape[1] != tx_grid.width:
        raise InvalidInputError(f"DL channel {dl.matrix.shape} does not match TX width {tx_grid.width}")
    r = tx_grid.data @ dl.matrix.T
    rng = np.random.default_rng(rng)
    r = r + _complex_noise(rng, r.shape, noise.variance_user)
    return SubframeGrid(r, Stage.USER_RX)


def check_saturation(h_si_eff_plus_c: np.ndarray, v_bb: np.ndarray, rho_b: float) -> np.ndarray:
    """Per RX chain: is the post-analog-cancellation SI power within ``rho_b``?"""
    rows = np.sum(np.abs(h_si_eff_plus_c @ v_bb) ** 2, axis=1)
    return rows <= rho_b
