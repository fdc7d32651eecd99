"""Uniform linear arrays, DFT beam codebooks and partially-connected analog beamformers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """A ULA laid out along a shared axis.

    Element ``i`` sits at ``array_offset + i * element_spacing`` metres.
    """

    n_elements: int
    element_spacing: float
    wavelength: float
    array_offset: float = 0.0

    def __post_init__(self):
        if int(self.n_elements) < 1:
            raise InvalidInputError(f"n_elements must be >= 1, got {self.n_elements}")
        if not self.element_spacing > 0:
            raise InvalidInputError(f"element_spacing must be > 0, got {self.element_spacing}")
        if not self.wavelength > 0:
            raise InvalidInputError(f"wavelength must be > 0, got {self.wavelength}")

    @classmethod
    def half_wavelength(cls, n_elements: int, carrier_hz: float, array_offset: float = 0.0):
        wavelength = SPEED_OF_LIGHT / carrier_hz
        return cls(n_elements, wavelength / 2.0, wavelength, array_offset)

    @property
    def positions(self) -> np.ndarray:
        return self.array_offset + np.arange(self.n_elements) * self.element_spacing

    def subarray(self, n_elements: int) -> "ArrayGeometry":
        """Geometry of one contiguous subarray with the same spacing."""
        return ArrayGeometry(n_elements, self.element_spacing, self.wavelength)


def steering_vector(geometry: ArrayGeometry, theta) -> np.ndarray:
    """ULA response toward ``theta`` (radians), unit norm.

    A scalar angle gives shape ``(n_elements,)``; an array of angles gives
    ``(n_elements, len(theta))`` with one response per column.
    """
    theta = np.asarray(theta, dtype=float)
    idx = np.arange(geometry.n_elements)
    phase_step = 2.0 * np.pi * geometry.element_spacing / geometry.wavelength
    phase = -phase_step * np.multiply.outer(idx, np.sin(theta))
    return np.exp(1j * phase) / np.sqrt(geometry.n_elements)


@dataclass(frozen=True)
class BeamCodebook:
    """Ordered set of unit-norm constant-modulus beams (one per row of ``beams``)."""

    beams: np.ndarray
    bits: int

    def __len__(self):
        return self.beams.shape[0]

    @property
    def n_subarray(self) -> int:
        return self.beams.shape[1]


def dft_codebook(bits: int, n_subarray: int, spacing_wavelengths: float = 0.5) -> BeamCodebook:
    """Oversampled DFT codebook with ``2**bits`` beams.

    Beam ``k`` points at spatial frequency ``sin(theta_k) = -1 + 2k / 2**bits``.
    """
    if bits < 1 or n_subarray < 1:
        raise InvalidInputError(f"need bits >= 1 and n_subarray >= 1, got {bits}, {n_subarray}")
    n_beams = 2 ** bits
    sin_grid = -1.0 + 2.0 * np.arange(n_beams) / n_beams
    geom = ArrayGeometry(n_subarray, spacing_wavelengths, 1.0)
    beams = steering_vector(geom, np.arcsin(sin_grid)).T
    beams.setflags(write=False)
    return BeamCodebook(beams=beams, bits=bits)


@dataclass(frozen=True)
class AnalogBeamformer:
    """Block-diagonal phase-shifter matrix of a partially-connected array.

    ``assembled`` has shape ``(R * n_subarray, R)``; column ``r`` is zero
    outside rows ``r*n_subarray ... (r+1)*n_subarray - 1``.
    """

    per_chain_beams: np.ndarray
    assembled: np.ndarray = field(repr=False)
    beam_indices: tuple = ()

    @property
    def n_chains(self) -> int:
        return self.per_chain_beams.shape[0]

    @property
    def n_subarray(self) -> int:
        return self.per_chain_beams.shape[1]


def assemble_analog(beams: Sequence[np.ndarray], beam_indices: Sequence[int] = ()) -> AnalogBeamformer:
    """Stack one beam per RF chain into a block-diagonal analog beamformer."""
    beams = [np.asarray(b, dtype=complex).ravel() for b in beams]
    if not beams:
        raise InvalidInputError("need at least one beam")
    n_sub = beams[0].size
    if any(b.size != n_sub for b in beams):
        raise InvalidInputError(f"beam lengths differ: {[b.size for b in beams]}")
    per_chain = np.vstack(beams)
    n_chains = per_chain.shape[0]
    assembled = np.zeros((n_chains * n_sub, n_chains), dtype=complex)
    for r in range(n_chains):
        assembled[r * n_sub:(r + 1) * n_sub, r] = per_chain[r]
    per_chain.setflags(write=False)
    assembled.setflags(write=False)
    return AnalogBeamformer(per_chain, assembled, tuple(int(i) for i in beam_indices))
