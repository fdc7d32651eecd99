import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fdisac.arrays import assemble_analog, dft_codebook, steering_vector
from fdisac.cancellation import design_analog_canceller
from fdisac.channels import build_si_channel
from fdisac.estimation import music_spectrum, sample_covariance
from fdisac.optimizer import bd_precoder
from fdisac.waveform import Stage, SubframeGrid, check_saturation

from conftest import crandn, ula

angles = st.floats(-np.pi / 2, np.pi / 2, allow_nan=False)
seeds = st.integers(0, 2 ** 32 - 1)
FAST = settings(max_examples=60, deadline=None)


@FAST
@given(st.integers(1, 256), angles)
def test_steering_unit_norm(n, theta):
    assert abs(np.linalg.norm(steering_vector(ula(n), theta)) - 1.0) < 1e-12


@FAST
@given(st.integers(1, 128), angles)
def test_steering_conjugate_symmetry(n, theta):
    geom = ula(n)
    np.testing.assert_allclose(steering_vector(geom, -theta), steering_vector(geom, theta).conj(), atol=1e-12)


@FAST
@given(st.integers(1, 64), st.integers(1, 64), st.floats(1e-4, 1.0))
def test_si_frobenius_norm(m, n, sep):
    h = build_si_channel(ula(n), ula(m, 0.01), sep).matrix
    assert abs(np.linalg.norm(h) ** 2 - m * n) <= 1e-9 * m * n


@FAST
@given(seeds, st.integers(1, 8), st.integers(1, 4), st.integers(1, 6))
def test_covariance_hermitian_psd(seed, p, q, width):
    rng = np.random.default_rng(seed)
    cov = sample_covariance(SubframeGrid(crandn(rng, p, q, width), Stage.RX_CHAIN)).matrix
    np.testing.assert_array_equal(cov, cov.conj().T)
    assert np.min(np.linalg.eigvalsh(cov)) >= -1e-12 * max(1.0, np.max(np.abs(cov)))


@FAST
@given(seeds, st.integers(0, 3))
def test_music_eigenvalues_descending(seed, k):
    rng = np.random.default_rng(seed)
    cov = sample_covariance(SubframeGrid(crandn(rng, 6, 2, 4), Stage.RX_CHAIN))
    w = assemble_analog(dft_codebook(3, 4).beams[[0, 2, 4, 6]])
    spec = music_spectrum(cov, k, w, ula(16), np.linspace(-1, 1, 11))
    assert np.all(np.diff(spec.eigenvalues) <= 0)
    assert spec.noise_subspace_dim == 4 - k
    assert np.all(spec.pseudo_power > 0)


@FAST
@given(seeds, st.integers(1, 3), st.integers(1, 2), st.floats(1e-3, 1e4))
def test_bd_total_power_and_block_diagonality(seed, n_users, n_streams, p_b):
    rng = np.random.default_rng(seed)
    alpha = n_users * n_streams + int(rng.integers(0, 3))
    hs = [crandn(rng, n_streams, alpha) for _ in range(n_users)]
    g, per_user = bd_precoder(hs, p_b)
    # sqrt(P_b / U) scaling of orthonormal columns; the optimizer rescales to P_b afterwards
    assert abs(np.linalg.norm(g) ** 2 - p_b * n_streams) <= 1e-9 * p_b * n_streams
    for u in range(n_users):
        for j in range(n_users):
            if j != u:
                assert np.linalg.norm(hs[j] @ per_user[u]) <= 1e-9 * np.linalg.norm(hs[j]) * np.sqrt(p_b)


@FAST
@given(seeds, st.integers(1, 5), st.integers(1, 5), st.floats(1e-6, 1e2))
def test_saturation_flags_match_scalar_oracle(seed, m, s, rho):
    rng = np.random.default_rng(seed)
    h, v = crandn(rng, m, 4), crandn(rng, 4, s)
    flags = check_saturation(h, v, rho)
    for r in range(m):
        power = sum(abs(sum(h[r, c] * v[c, j] for c in range(4))) ** 2 for j in range(s))
        assert flags[r] == (power <= rho)


@FAST
@given(seeds, st.integers(1, 8), st.integers(1, 16))
def test_analog_beamformer_preserves_power(seed, chains, n_sub):
    rng = np.random.default_rng(seed)
    cb = dft_codebook(4, n_sub)
    v = assemble_analog(cb.beams[rng.integers(0, 16, chains)]).assembled
    x = crandn(rng, chains)
    assert abs(np.linalg.norm(v @ x) - np.linalg.norm(x)) <= 1e-12 * max(1.0, np.linalg.norm(x))


@FAST
@given(seeds, st.integers(1, 6), st.integers(1, 6), st.data())
def test_canceller_residual_monotone_in_taps(seed, m, n, data):
    rng = np.random.default_rng(seed)
    h = crandn(rng, m, n)
    taps = data.draw(st.integers(0, m * n - 1))
    r0 = np.linalg.norm(h + design_analog_canceller(h, taps))
    r1 = np.linalg.norm(h + design_analog_canceller(h, taps + 1))
    assert r1 <= r0 + 1e-15
    assert np.count_nonzero(design_analog_canceller(h, taps)) == taps
