"""Joint analog/digital beamformer and SI canceller design for one subframe.

The flow follows the multi-user FD ISAC optimization: analog TX beams toward
the radar prior, RX beams trading radar gain against SI pickup, a tap-limited
analog canceller, then block-diagonalized digital precoding restricted to the
weakest residual-SI directions, shrinking that subspace until every RX chain
is below the saturation level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .arrays import AnalogBeamformer, ArrayGeometry, BeamCodebook, assemble_analog, steering_vector
from .cancellation import CancellerPair, design_analog_canceller, design_digital_canceller
from .errors import InvalidInputError, RankDeficiencyError

log = logging.getLogger(__name__)

NULL_SPACE_RTOL = 1e-10


@dataclass(frozen=True)
class RadarPrior:
    doas: tuple
    composite: np.ndarray = field(repr=False)

    @classmethod
    def from_doas(cls, doas: Sequence[float], tx_geom: ArrayGeometry, rx_geom: ArrayGeometry) -> "RadarPrior":
        doas = tuple(float(t) for t in doas)
        a_rx = steering_vector(rx_geom, doas)
        a_tx = steering_vector(tx_geom, doas)
        return cls(doas, a_rx @ a_tx.conj().T)


@dataclass(frozen=True)
class BeamformerSet:
    v_rf: AnalogBeamformer
    w_rf: AnalogBeamformer
    v_bb: np.ndarray
    cancellers: CancellerPair
    effective_streams: int
    h_si_eff: np.ndarray = field(repr=False)

    @property
    def precoder(self) -> np.ndarray:
        """Full N x UL hybrid precoder ``V_RF V_BB``."""
        return self.v_rf.assembled @ self.v_bb


@dataclass
class Candidate:
    alpha: int
    v_bb: np.ndarray
    row_powers: np.ndarray


@dataclass
class OptimizationOutcome:
    """Result of one optimizer run.

    On failure ``beamformers`` still holds a usable set built from the
    candidate with the lowest worst-chain SI power, so callers can decide
    whether to transmit with it or fall back.
    """

    success: bool
    beamformers: BeamformerSet
    diagnostic: str = ""
    candidates: list = field(default_factory=list)


def _chain_slices(n_chains: int, n_sub: int):
    return [slice(i * n_sub, (i + 1) * n_sub) for i in range(n_chains)]


def _pick(scores: np.ndarray, distinct: bool) -> list[int]:
    """Row-wise argmax (lowest index on ties); greedily unique across rows if ``distinct``."""
    if not distinct:
        return [int(np.argmax(row)) for row in scores]
    if scores.shape[1] < scores.shape[0]:
        raise InvalidInputError("codebook smaller than the number of RF chains")
    taken: set[int] = set()
    picks = []
    for row in scores:
        order = np.argsort(-row, kind="stable")
        k = next(int(i) for i in order if int(i) not in taken)
        taken.add(k)
        picks.append(k)
    return picks


def tx_beam_scores(prior: RadarPrior, codebook: BeamCodebook, n_rf: int) -> np.ndarray:
    """``||H_R[:, subarray n] v_k||^2`` for every chain ``n`` and beam ``k``."""
    h = prior.composite
    n_sub = codebook.n_subarray
    if h.shape[1] != n_rf * n_sub:
        raise InvalidInputError(f"N = {h.shape[1]} != N_RF * N_A = {n_rf * n_sub}")
    return np.stack([np.sum(np.abs(h[:, s] @ codebook.beams.T) ** 2, axis=0)
                     for s in _chain_slices(n_rf, n_sub)])


def select_tx_analog(prior: RadarPrior, codebook: BeamCodebook, n_rf: int,
                     distinct_beams: bool = False) -> AnalogBeamformer:
    """Per-chain codebook beam maximizing radar-prior power (separable over chains)."""
    picks = _pick(tx_beam_scores(prior, codebook, n_rf), distinct_beams)
    return assemble_analog(codebook.beams[picks], picks)


def rx_beam_scores(prior: RadarPrior, h_si: Optional[np.ndarray], v_rf: AnalogBeamformer,
                   codebook: BeamCodebook, m_rf: int) -> np.ndarray:
    h_r = prior.composite
    n_sub = codebook.n_subarray
    if h_r.shape[0] != m_rf * n_sub:
        raise InvalidInputError(f"M = {h_r.shape[0]} != M_RF * M_A = {m_rf * n_sub}")
    v = v_rf.assembled
    radar = h_r @ v
    si = np.zeros_like(radar) if h_si is None else h_si @ v
    eps = 1e-12 * float(np.sum(np.abs(si) ** 2))
    if eps == 0.0:
        # no SI at all: constant denominator, pure radar-gain maximization
        eps = 1.0
    beams_h = codebook.beams.conj()
    scores = []
    for s in _chain_slices(m_rf, n_sub):
        num = np.sum(np.abs(beams_h @ radar[s]) ** 2, axis=1)
        den = np.sum(np.abs(beams_h @ si[s]) ** 2, axis=1)
        scores.append(num / (den + eps))
    return np.stack(scores)


def select_rx_analog(prior: RadarPrior, h_si: Optional[np.ndarray], v_rf: AnalogBeamformer,
                     codebook: BeamCodebook, m_rf: int, distinct_beams: bool = False) -> AnalogBeamformer:
    """Per-chain codebook beam maximizing radar gain over SI pickup."""
    picks = _pick(rx_beam_scores(prior, h_si, v_rf, codebook, m_rf), distinct_beams)
    return assemble_analog(codebook.beams[picks], picks)


def null_space(h: np.ndarray, rtol: float = NULL_SPACE_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the right null space of ``h``."""
    n = h.shape[1]
    if h.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(h)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return vh[rank:].conj().T


def bd_precoder(h_eff: Sequence[np.ndarray], p_b: float):
    """Block-diagonalization precoder.

    Parameters
    ----------
    h_eff : sequence of (L, alpha) arrays
        Effective per-user channels.
    p_b : float
        Transmit power budget in mW.

    Returns
    -------
    g : (alpha, U*L) array
        Stacked precoder ``[G_1, ..., G_U]``.
    per_user : list of (alpha, L) arrays

    Raises
    ------
    RankDeficiencyError
        If some user's null space has fewer than L dimensions.
    """
    n_users = len(h_eff)
    alpha = h_eff[0].shape[1]
    per_user = []
    for u in range(n_users):
        n_streams = h_eff[u].shape[0]
        others = [h_eff[j] for j in range(n_users) if j != u]
        stacked = np.vstack(others) if others else np.zeros((0, alpha), dtype=complex)
        e_bar = null_space(stacked)
        if e_bar.shape[1] < n_streams:
            raise RankDeficiencyError(
                f"user {u}: null space has {e_bar.shape[1]} dims < L = {n_streams} (alpha = {alpha})")
        _, _, vh = np.linalg.svd(h_eff[u] @ e_bar)
        e_u = vh[:n_streams].conj().T
        per_user.append(np.sqrt(p_b / n_users) * (e_bar @ e_u))
    return np.hstack(per_user), per_user


def _scale_to_power(v_rf: np.ndarray, v_bb: np.ndarray, p_b: float) -> np.ndarray:
    power = float(np.sum(np.abs(v_rf @ v_bb) ** 2))
    if power == 0.0:
        return v_bb
    return v_bb * np.sqrt(p_b / power)


def optimize_subframe(
    h_si_est: Optional[np.ndarray],
    h_dl_est: Sequence[np.ndarray],
    n_taps: int,
    p_b: float,
    rho_b: float,
    prior: RadarPrior,
    tx_codebook: BeamCodebook,
    rx_codebook: BeamCodebook,
    n_rf: int,
    m_rf: int,
    *,
    distinct_beams: bool = False,
    canceller_error_db: Optional[float] = None,
    rng=None,
) -> OptimizationOutcome:
    """Design V_RF, W_RF, C, D and V_BB for the next subframe.

    Returns a failed outcome (not an exception) when no precoder subspace
    meets the saturation level. Rank deficiency at the full subspace size
    propagates as :class:`RankDeficiencyError`.
    """
    if len(prior.doas) < 1:
        raise InvalidInputError("need at least one prior DoA")
    v_rf = select_tx_analog(prior, tx_codebook, n_rf, distinct_beams)
    w_rf = select_rx_analog(prior, h_si_est, v_rf, rx_codebook, m_rf, distinct_beams)
    v, w = v_rf.assembled, w_rf.assembled

    if h_si_est is None:
        h_si_eff = np.zeros((m_rf, n_rf), dtype=complex)
    else:
        h_si_eff = w.conj().T @ h_si_est @ v
    h_dl_eff = [h @ v for h in h_dl_est]

    c = design_analog_canceller(h_si_eff, n_taps)
    residual = h_si_eff + c
    _, _, vh = np.linalg.svd(residual)
    b = vh.conj().T

    candidates = []
    accepted = None
    diagnostic = ""
    for alpha in range(n_rf, 1, -1):
        f = b[:, n_rf - alpha:]
        try:
            g, _ = bd_precoder([h @ f for h in h_dl_eff], p_b)
        except RankDeficiencyError as exc:
            if alpha == n_rf:
                raise
            diagnostic = f"C does not meet the residual SI constraint; smaller subspaces are rank deficient ({exc})"
            break
        v_bb = _scale_to_power(v, f @ g, p_b)
        rows = np.sum(np.abs(residual @ v_bb) ** 2, axis=1)
        candidates.append(Candidate(alpha, v_bb, rows))
        if np.all(rows <= rho_b):
            accepted = candidates[-1]
            break
    else:
        diagnostic = "C does not meet the residual SI constraint for any subspace size"

    d = design_digital_canceller(h_si_eff, c, canceller_error_db, rng)
    cancellers = CancellerPair(c, d, n_taps)
    chosen = accepted or min(candidates, key=lambda cand: float(np.max(cand.row_powers)))
    bf = BeamformerSet(v_rf, w_rf, chosen.v_bb, cancellers, chosen.alpha, h_si_eff)
    if accepted is None:
        log.debug("saturation failure: %s", diagnostic)
    return OptimizationOutcome(accepted is not None, bf, "" if accepted else diagnostic, candidates)


def radar_snr(prior: RadarPrior, bf: BeamformerSet, sigma_b2: float) -> float:
    """Radar SNR toward all prior directions over residual SI plus noise."""
    w = bf.w_rf.assembled
    signal = float(np.sum(np.abs(w.conj().T @ prior.composite @ bf.precoder) ** 2))
    c, d = bf.cancellers.analog, bf.cancellers.digital
    interference = float(np.sum(np.abs((bf.h_si_eff + c + d) @ bf.v_bb) ** 2))
    denom = interference + float(np.sum(np.abs(w) ** 2)) * sigma_b2
    if denom == 0.0:
        return 0.0 if signal == 0.0 else np.inf
    return signal / denom


def dl_snr_sum(h_dl: Sequence[np.ndarray], bf: BeamformerSet, sigma_u2: float) -> float:
    t = bf.precoder
    return float(sum(np.sum(np.abs(h @ t) ** 2) for h in h_dl) / sigma_u2)
