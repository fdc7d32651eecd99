"""MUSIC DoA estimation and quotient-likelihood range estimation from the baseband grid."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .arrays import SPEED_OF_LIGHT, AnalogBeamformer, ArrayGeometry, steering_vector
from .errors import EstimationFailure, InvalidInputError
from .waveform import SubframeGrid


@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    n_snapshots: int


@dataclass(frozen=True)
class MusicSpectrum:
    thetas: np.ndarray = field(repr=False)
    pseudo_power: np.ndarray = field(repr=False)
    noise_subspace_dim: int
    eigenvalues: np.ndarray = field(repr=False)
    degenerate: bool = False


@dataclass(frozen=True)
class EstimationReport:
    doas_est: np.ndarray
    delays_est: np.ndarray
    ranges_est: np.ndarray
    bin_indices: np.ndarray
    spectrum: MusicSpectrum


@dataclass(frozen=True)
class Score:
    assignment: tuple
    doa_errors: np.ndarray
    range_errors: np.ndarray
    rmse_deg: float


def sample_covariance(bb_grid: SubframeGrid) -> CovarianceEstimate:
    y = bb_grid.flat()
    if y.shape[0] == 0:
        raise InvalidInputError("empty grid")
    r = (y.T @ y.conj()) / y.shape[0]
    r = 0.5 * (r + r.conj().T)
    return CovarianceEstimate(r, y.shape[0])


def music_spectrum(cov: CovarianceEstimate, n_targets: int, w_rf: AnalogBeamformer,
                   rx_geom: ArrayGeometry, thetas: np.ndarray, normalized: bool = False) -> MusicSpectrum:
    m_rf = cov.matrix.shape[0]
    if not 0 <= n_targets < m_rf:
        raise InvalidInputError(f"need 0 <= K < M_RF = {m_rf}, got K = {n_targets}")
    eigvals, eigvecs = np.linalg.eigh(cov.matrix)
    eigvals, eigvecs = eigvals[::-1], eigvecs[:, ::-1]
    u_n = eigvecs[:, n_targets:]
    z = w_rf.assembled @ u_n
    phase_step = 2.0 * np.pi * rx_geom.element_spacing / rx_geom.wavelength
    denom = _kernels.music_denominator(phase_step, np.sin(thetas), z)
    tiny = np.finfo(float).tiny
    power = 1.0 / np.maximum(denom, tiny)
    if normalized:
        power *= _kernels.music_denominator(phase_step, np.sin(thetas), w_rf.assembled)
    spread = eigvals[0] - eigvals[-1]
    degenerate = bool(eigvals[0] <= 0 or spread <= 1e-12 * abs(eigvals[0]))
    return MusicSpectrum(thetas, power, m_rf - n_targets, eigvals, degenerate)


def find_peaks(power: np.ndarray, n_peaks: int, min_separation: int = 2):
    """Indices of the ``n_peaks`` largest strict local maxima.

    Returns ``(indices, complete)``; if too few local maxima exist the list is
    padded with the largest remaining points and ``complete`` is False.
    """
    interior = np.flatnonzero((power[1:-1] > power[:-2]) & (power[1:-1] > power[2:])) + 1
    order = interior[np.argsort(-power[interior], kind="stable")]
    chosen: list[int] = []
    for i in order:
        if all(abs(int(i) - j) >= min_separation for j in chosen):
            chosen.append(int(i))
        if len(chosen) == n_peaks:
            return np.sort(np.array(chosen, dtype=int)), True
    for i in np.argsort(-power, kind="stable"):
        if len(chosen) == n_peaks:
            break
        if all(abs(int(i) - j) >= min_separation for j in chosen):
            chosen.append(int(i))
    return np.sort(np.array(chosen, dtype=int)), False


def music_doa(
    cov: CovarianceEstimate,
    n_targets: int,
    w_rf: AnalogBeamformer,
    rx_geom: ArrayGeometry,
    grid_step: float = np.deg2rad(0.01),
    sector=(np.deg2rad(-60.0), np.deg2rad(60.0)),
    normalized: bool = False,
):
    """Estimate ``n_targets`` DoAs from the beamspace covariance.

    Returns ``(doas, spectrum)`` with DoAs in ascending order. The spectrum is
    flagged ``degenerate`` when the covariance has no eigenvalue spread or too
    few local maxima were found.
    """
    n_pts = int(np.floor((sector[1] - sector[0]) / grid_step + 1e-9)) + 1
    thetas = sector[0] + grid_step * np.arange(n_pts)
    spec = music_spectrum(cov, n_targets, w_rf, rx_geom, thetas, normalized)
    idx, complete = find_peaks(spec.pseudo_power, n_targets, 2)
    if not complete:
        spec = MusicSpectrum(spec.thetas, spec.pseudo_power, spec.noise_subspace_dim, spec.eigenvalues, True)
    return thetas[idx], spec


def delay_likelihood(
    bb_grid: SubframeGrid,
    w_rf: AnalogBeamformer,
    tx_grid: SubframeGrid,
    theta_hat: float,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
) -> np.ndarray:
    """|A(n)|^2 for n = 0..P-1 along direction ``theta_hat``."""
    n_sc, n_sym = bb_grid.n_subcarriers, bb_grid.n_symbols
    a_rx = steering_vector(rx_geom, theta_hat)
    h = tx_grid.flat() @ steering_vector(tx_geom, theta_hat).conj()
    z, used = _kernels.delay_quotient(bb_grid.flat(), w_rf.assembled, a_rx, h)
    if not used.any():
        raise EstimationFailure("every resource element had a zero reference signal")
    per_sc = z.reshape(n_sc, n_sym).sum(axis=1)
    a_n = n_sc * np.fft.ifft(per_sc)
    return np.abs(a_n) ** 2


def range_estimate(
    bb_grid: SubframeGrid,
    w_rf: AnalogBeamformer,
    tx_grid: SubframeGrid,
    theta_hat: float,
    delta_f: float,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
):
    """Quantized delay, delay (s) and range (m) of the target at ``theta_hat``."""
    like = delay_likelihood(bb_grid, w_rf, tx_grid, theta_hat, tx_geom, rx_geom)
    n_star = int(np.argmax(like))
    delay = n_star / (bb_grid.n_subcarriers * delta_f)
    return n_star, delay, delay * SPEED_OF_LIGHT / 2.0


def associate_and_score(est_doas: Sequence[float], est_ranges: Sequence[float], truth) -> Score:
    """Match estimates to truth by minimum total absolute DoA error.

    ``truth`` is a sequence of objects with ``doa`` and ``range``. Errors are
    estimate minus truth, in truth order.
    """
    est_doas = np.asarray(est_doas, dtype=float)
    est_ranges = np.asarray(est_ranges, dtype=float)
    true_doas = np.array([t.doa for t in truth], dtype=float)
    true_ranges = np.array([t.range for t in truth], dtype=float)
    k = true_doas.size
    if est_doas.size != k or est_ranges.size != k:
        raise InvalidInputError(f"count mismatch: {est_doas.size} DoAs, {est_ranges.size} ranges, {k} targets")
    cost = np.abs(est_doas[None, :] - true_doas[:, None])
    if k <= 6:
        best = min(itertools.permutations(range(k)),
                   key=lambda perm: sum(cost[i, perm[i]] for i in range(k)))
    else:
        _, cols = linear_sum_assignment(cost)
        best = tuple(int(c) for c in cols)
    best = tuple(int(j) for j in best)
    doa_err = np.array([est_doas[best[i]] - true_doas[i] for i in range(k)])
    range_err = np.array([est_ranges[best[i]] - true_ranges[i] for i in range(k)])
    rmse = float(np.rad2deg(np.sqrt(np.mean(doa_err ** 2)))) if k else 0.0
    return Score(best, doa_err, range_err, rmse)
