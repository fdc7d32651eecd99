"""Self-interference, radar reflection and downlink channel models, plus target motion."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .arrays import SPEED_OF_LIGHT, ArrayGeometry, steering_vector
from .errors import InvalidInputError


@dataclass(frozen=True)
class TargetState:
    """Ground truth for one radar target / scatterer during a subframe.

    DL scatterers additionally carry the user-side DoA and complex path gain
    of the user channel they create.
    """

    doa: float
    range: float
    reflection: complex
    is_dl_scatterer: bool = False
    dl_user_index: Optional[int] = None
    dl_user_doa: float = 0.0
    dl_gain: complex = 0j

    def __post_init__(self):
        if not self.range > 0:
            raise InvalidInputError(f"target range must be > 0, got {self.range}")

    @property
    def delay(self) -> float:
        return 2.0 * self.range / SPEED_OF_LIGHT


@dataclass(frozen=True)
class SiChannel:
    matrix: np.ndarray
    tx_rx_separation: float


@dataclass(frozen=True)
class DlChannel:
    matrix: np.ndarray
    pathloss_db: float


def reflection_magnitude(range_m, wavelength, reflectivity) -> np.ndarray:
    """|alpha| from the monostatic two-way free-space radar equation."""
    range_m = np.asarray(range_m, dtype=float)
    return np.sqrt(reflectivity * wavelength ** 2 / ((4 * np.pi) ** 3 * range_m ** 4))


def pathloss_magnitude(pathloss_db: float) -> float:
    return 10.0 ** (-pathloss_db / 20.0)


def random_phase(rng: np.random.Generator, size=None):
    return np.exp(2j * np.pi * rng.random(size))


def build_si_channel(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, separation: float) -> SiChannel:
    """Near-field LoS coupling between two parallel ULAs.

    The arrays are offset by ``separation`` perpendicular to their common
    axis; the result is scaled so that ``||H||_F^2 = M * N``.
    """
    if not separation > 0:
        raise InvalidInputError(f"separation must be > 0, got {separation}")
    along = rx_geom.positions[:, None] - tx_geom.positions[None, :]
    dist = np.sqrt(separation ** 2 + along ** 2)
    h = np.exp(-2j * np.pi * dist / tx_geom.wavelength) / dist
    h *= np.sqrt(h.size / np.sum(np.abs(h) ** 2))
    h.setflags(write=False)
    return SiChannel(h, separation)


def radar_response(
    targets: Sequence[TargetState],
    p: int,
    delta_f: float,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
) -> np.ndarray:
    """Sum of rank-1 target reflections seen at subcarrier ``p``."""
    h = np.zeros((rx_geom.n_elements, tx_geom.n_elements), dtype=complex)
    for t in targets:
        gain = t.reflection * np.exp(-2j * np.pi * t.delay * p * delta_f)
        h += gain * np.outer(steering_vector(rx_geom, t.doa), steering_vector(tx_geom, t.doa).conj())
    return h


def build_dl_channel(target: TargetState, user_geom: ArrayGeometry, bs_tx_geom: ArrayGeometry) -> DlChannel:
    """Rank-1 user channel ``beta * a_L(phi) a_N(theta)^H`` through a DL scatterer."""
    if not target.is_dl_scatterer:
        raise InvalidInputError("target is not a DL scatterer")
    matrix = target.dl_gain * np.outer(
        steering_vector(user_geom, target.dl_user_doa),
        steering_vector(bs_tx_geom, target.doa).conj(),
    )
    mag = abs(target.dl_gain)
    pathloss_db = -20.0 * np.log10(mag) if mag > 0 else np.inf
    return DlChannel(matrix, float(pathloss_db))


def evolve_targets(
    state: Sequence[TargetState],
    velocity: float,
    subframe_duration: float,
    rng: Optional[np.random.Generator] = None,
) -> list[TargetState]:
    """Advance every target one subframe along a circle around the BS.

    DoAs move by ``arctan(v * Ts / range)``; ranges stay put. Reflection and
    DL path-gain phases are redrawn when ``rng`` is given.
    """
    if not subframe_duration > 0:
        raise InvalidInputError(f"subframe_duration must be > 0, got {subframe_duration}")
    out = []
    for t in state:
        new = replace(t, doa=t.doa + np.arctan(velocity * subframe_duration / t.range))
        if rng is not None:
            new = replace(
                new,
                reflection=abs(t.reflection) * random_phase(rng),
                dl_gain=abs(t.dl_gain) * random_phase(rng) if t.is_dl_scatterer else t.dl_gain,
            )
        out.append(new)
    return out
