"""Hot inner loops, compiled with numba when available.

Set ``FDISAC_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths are
always importable (``*_numpy`` / ``*_numba``) so they can be benchmarked and
cross-checked against each other.
"""

from __future__ import annotations

import os

import numpy as np

_CHUNK = 2048


def _env_disabled() -> bool:
    return os.environ.get("FDISAC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip probing TBB, which warns on older installs; results do not depend on the layer
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _env_disabled()


# ---------------------------------------------------------------------------
# MUSIC denominator: ||Z^H a(theta)||^2 with Z = W_RF U_n
# ---------------------------------------------------------------------------
def music_denominator_numpy(phase_step, sin_grid, z):
    n_el = z.shape[0]
    idx = np.arange(n_el)
    out = np.empty(sin_grid.size)
    zh = z.conj().T
    for start in range(0, sin_grid.size, _CHUNK):
        s = sin_grid[start:start + _CHUNK]
        a = np.exp(-1j * phase_step * np.multiply.outer(idx, s)) / np.sqrt(n_el)
        out[start:start + _CHUNK] = np.sum(np.abs(zh @ a) ** 2, axis=0)
    return out


# ---------------------------------------------------------------------------
# Delay quotient: z = mean_m [W y]_m / (a_m h), skipping near-zero references
#
# |a_m h| > tol |h| ||a||  reduces to  |a_m| > tol ||a||  whenever h != 0, so the
# kept set is the same on every resource element and the average factors into
# y . u / (count h) with u_c = sum_m W[m, c] / a_m over the kept elements.
# ---------------------------------------------------------------------------
def _quotient_weights(w_rf, a, rel_tol):
    keep = np.abs(a) > rel_tol * np.sqrt(np.sum(np.abs(a) ** 2))
    u = (w_rf[keep] / a[keep, None]).sum(axis=0)
    return u, int(keep.sum())


def delay_quotient_numpy(y_bb, w_rf, a, h, rel_tol=1e-12):
    u, count = _quotient_weights(w_rf, a, rel_tol)
    used = (h != 0) & (count > 0)
    z = np.zeros(y_bb.shape[0], dtype=complex)
    z[used] = (y_bb[used] @ u) / (count * h[used])
    return z, used


if NUMBA_AVAILABLE:

    @njit(parallel=True, cache=True)
    def music_denominator_numba(phase_step, sin_grid, z):
        n_el, n_noise = z.shape
        n_grid = sin_grid.size
        out = np.empty(n_grid)
        norm = 1.0 / np.sqrt(n_el)
        for t in prange(n_grid):
            s = sin_grid[t]
            re = np.zeros(n_noise)
            im = np.zeros(n_noise)
            for i in range(n_el):
                ph = -phase_step * i * s
                ar = np.cos(ph)
                ai = np.sin(ph)
                for j in range(n_noise):
                    zr = z[i, j].real
                    zi = -z[i, j].imag
                    re[j] += zr * ar - zi * ai
                    im[j] += zr * ai + zi * ar
            acc = 0.0
            for j in range(n_noise):
                acc += re[j] * re[j] + im[j] * im[j]
            out[t] = acc * norm * norm
        return out

    @njit(parallel=True, cache=True)
    def _delay_quotient_kernel(y_bb, u, count, h):
        n_re, n_chain = y_bb.shape
        z = np.zeros(n_re, dtype=np.complex128)
        used = np.zeros(n_re, dtype=np.bool_)
        if count == 0:
            return z, used
        for r in prange(n_re):
            if h[r] != 0:
                acc = 0j
                for c in range(n_chain):
                    acc += y_bb[r, c] * u[c]
                z[r] = acc / (count * h[r])
                used[r] = True
        return z, used

    def delay_quotient_numba(y_bb, w_rf, a, h, rel_tol=1e-12):
        u, count = _quotient_weights(w_rf, a, rel_tol)
        return _delay_quotient_kernel(y_bb, np.ascontiguousarray(u), count, h)

    def set_num_threads(n: int) -> None:
        numba.set_num_threads(n)

else:  # pragma: no cover
    music_denominator_numba = music_denominator_numpy
    delay_quotient_numba = delay_quotient_numpy

    def set_num_threads(n: int) -> None:
        pass


def music_denominator(phase_step: float, sin_grid: np.ndarray, z: np.ndarray) -> np.ndarray:
    sin_grid = np.ascontiguousarray(sin_grid, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.complex128)
    if USE_NUMBA:
        return music_denominator_numba(float(phase_step), sin_grid, z)
    return music_denominator_numpy(float(phase_step), sin_grid, z)


def delay_quotient(y_bb, w_rf, a, h, rel_tol=1e-12):
    args = (
        np.ascontiguousarray(y_bb, dtype=np.complex128),
        np.ascontiguousarray(w_rf, dtype=np.complex128),
        np.ascontiguousarray(a, dtype=np.complex128),
        np.ascontiguousarray(h, dtype=np.complex128),
        float(rel_tol),
    )
    if USE_NUMBA:
        return delay_quotient_numba(*args)
    return delay_quotient_numpy(*args)
