import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hmcmimo.channel import (
    apply_kronecker_correlation,
    complex_to_real,
    draw_rayleigh_channel,
    noise_sigma_from_snr,
    real_to_complex,
    real_vector_to_complex,
    simulate_received,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def complex_arrays(shape):
    return st.builds(lambda a, b: a + 1j * b, arrays(np.float64, shape, elements=finite), arrays(np.float64, shape, elements=finite))


def test_rayleigh_unit_power(rng):
    h = draw_rayleigh_channel(1, 100_000, rng)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02
    assert abs(np.mean(h.real**2) - 0.5) < 0.01
    assert abs(np.mean(h.real * h.imag)) < 0.01


def test_rayleigh_shape_and_determinism():
    h = draw_rayleigh_channel(2, 3, 7)
    assert h.shape == (2, 3) and np.all(np.isfinite(h))
    np.testing.assert_array_equal(h, draw_rayleigh_channel(2, 3, 7))


def test_kronecker_rho_zero_is_identity(rng):
    h = draw_rayleigh_channel(4, 5, rng)
    np.testing.assert_array_equal(apply_kronecker_correlation(h, 0.0), h)


def test_kronecker_adjacent_correlation(rng):
    draws = rng.standard_normal((100_000, 2, 2, 2)) * np.sqrt(0.5)
    hw = draws[..., 0] + 1j * draws[..., 1]
    from hmcmimo.channel import _psd_sqrt, exponential_correlation

    root = _psd_sqrt(exponential_correlation(2, 0.5))
    np.testing.assert_allclose(apply_kronecker_correlation(hw[0], 0.5), root @ hw[0] @ root)
    h = root @ hw @ root
    # adjacent receive antennas, same transmit column
    corr = np.mean(h[:, 0, 0] * np.conj(h[:, 1, 0])) / np.sqrt(np.mean(np.abs(h[:, 0, 0]) ** 2) * np.mean(np.abs(h[:, 1, 0]) ** 2))
    assert abs(corr.real - 0.5) < 0.02
    assert abs(corr.imag) < 0.02


def test_kronecker_root_is_symmetric_psd():
    from hmcmimo.channel import _psd_sqrt, exponential_correlation

    r = exponential_correlation(6, 0.7)
    s = _psd_sqrt(r)
    np.testing.assert_allclose(s, s.T, atol=1e-14)
    np.testing.assert_allclose(s @ s, r, atol=1e-12)
    assert np.linalg.eigvalsh(s).min() > -1e-12


@pytest.mark.parametrize("rho", [1.0, -0.1, 1.5])
def test_kronecker_rejects_bad_rho(rho):
    with pytest.raises(ValueError):
        apply_kronecker_correlation(np.eye(2, dtype=complex), rho)


def test_complex_to_real_scalar_example():
    s = complex_to_real(np.array([[1 + 2j]]), np.array([3 + 4j]), 1.0)
    np.testing.assert_array_equal(s.h_real, [[1, -2], [2, 1]])
    np.testing.assert_array_equal(s.y_real, [3, 4])
    assert s.sigma_real == pytest.approx(1 / np.sqrt(2))
    assert s.n_real == 2


def test_complex_to_real_real_channel_has_zero_off_blocks(rng):
    h = rng.standard_normal((3, 2)).astype(complex)
    s = complex_to_real(h, np.zeros(3), 0.3)
    assert np.all(s.h_real[:3, 2:] == 0) and np.all(s.h_real[3:, :2] == 0)


def test_complex_to_real_rejects_mismatch():
    with pytest.raises(ValueError):
        complex_to_real(np.eye(2), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        complex_to_real(np.eye(2), np.zeros(2), 0.0)


@settings(max_examples=50, deadline=None)
@given(complex_arrays((3, 4)), complex_arrays((3,)))
def test_split_merge_roundtrip_and_energy(h, y):
    s = complex_to_real(h, y, 1.0)
    np.testing.assert_array_equal(real_to_complex(s.h_real), h)
    np.testing.assert_array_equal(real_vector_to_complex(s.y_real), y)
    assert np.sum(np.abs(y) ** 2) == pytest.approx(s.y_real @ s.y_real, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(complex_arrays((2, 3)), complex_arrays((3,)))
def test_real_model_matches_complex_product(h, u):
    s = complex_to_real(h, np.zeros(2), 1.0)
    u_real = np.concatenate([u.real, u.imag])
    np.testing.assert_allclose(real_vector_to_complex(s.h_real @ u_real), h @ u, rtol=1e-9, atol=1e-6)


@pytest.mark.parametrize(
    "snr_db,n,expected",
    [(0.0, 1, 1.0), (10.0, 1, 10**-0.5), (20.0, 96, np.sqrt(0.96))],
)
def test_noise_sigma_from_snr(snr_db, n, expected):
    assert noise_sigma_from_snr(snr_db, n) == pytest.approx(expected, rel=1e-12)


def test_noise_sigma_total_power_convention_shift():
    per = noise_sigma_from_snr(10.0, 16)
    tot = noise_sigma_from_snr(10.0 + 10 * np.log10(16), 16, "per-antenna-unit-power")
    assert noise_sigma_from_snr(10.0, 16, "total-unit-power") == pytest.approx(tot)
    assert per > tot
    with pytest.raises(ValueError):
        noise_sigma_from_snr(10.0, 4, "bogus")


def test_received_snr_matches_definition(rng):
    # E||Hu||^2 / (M sigma_w^2) should equal 10^(20/10) at 20 dB
    n = m = 96
    sigma_w = noise_sigma_from_snr(20.0, n)
    vals = []
    for _ in range(200):
        h = draw_rayleigh_channel(m, n, rng)
        u = (rng.choice([-1, 1], n) + 1j * rng.choice([-1, 1], n)) / np.sqrt(2)
        vals.append(np.sum(np.abs(h @ u) ** 2) / (m * sigma_w**2))
    assert np.mean(vals) == pytest.approx(100.0, rel=0.02)


def test_mean_received_power_equals_n(rng):
    n, m = 4, 3
    h = rng.standard_normal((100_000, m, n, 2)) * np.sqrt(0.5)
    h = h[..., 0] + 1j * h[..., 1]
    u = (rng.choice([-1, 1], (100_000, n)) + 1j * rng.choice([-1, 1], (100_000, n))) / np.sqrt(2)
    hu = np.einsum("tmn,tn->tm", h, u)
    assert np.mean(np.sum(np.abs(hu) ** 2, axis=1) / m) == pytest.approx(n, rel=0.02)


def test_simulate_received_noiseless_and_noise_variance(rng):
    h = draw_rayleigh_channel(3, 2, rng)
    u = np.array([1 + 1j, -1 + 0.5j])
    np.testing.assert_array_equal(simulate_received(h, u, 0.0, rng), h @ u)
    sigma_w = 0.7
    eye = np.eye(4, dtype=complex)
    u4 = np.ones(4, dtype=complex)
    y = np.array([simulate_received(eye, u4, sigma_w, rng) for _ in range(25_000)]) - u4
    # 10^5 complex noise samples in total
    np.testing.assert_allclose(np.mean(np.abs(y) ** 2, axis=0), sigma_w**2, rtol=0.04)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(sigma_w**2, rel=0.02)


def test_simulate_received_deterministic():
    h = np.eye(2, dtype=complex)
    u = np.ones(2, dtype=complex)
    np.testing.assert_array_equal(simulate_received(h, u, 1.0, 3), simulate_received(h, u, 1.0, 3))
