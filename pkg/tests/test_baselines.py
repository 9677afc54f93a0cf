import itertools

import numpy as np
import pytest
from scipy.stats import norm

from hmcmimo import build_constellation
from hmcmimo.baselines import (
    InstanceTooLargeError,
    detect_ml_bruteforce,
    detect_mmse,
    mmse_estimate,
    siso_awgn_ber,
)
from hmcmimo.channel import RealizedSystem, complex_to_real, draw_rayleigh_channel, noise_sigma_from_snr, simulate_received
from hmcmimo.constellation import count_bit_errors, modulate_bits, random_bits


def transmit(rng, c, n, m, snr_db):
    h = draw_rayleigh_channel(m, n, rng)
    bits = random_bits(2 * n * c.bits_per_real_dim, rng)
    x = modulate_bits(bits, c, 2 * n)
    sigma_w = noise_sigma_from_snr(snr_db, n)
    y = simulate_received(h, x[:n] + 1j * x[n:], sigma_w, rng)
    return bits, x, complex_to_real(h, y, sigma_w)


def test_mmse_exact_on_scaled_identity(rng):
    c = build_constellation("64QAM")
    x = rng.choice(c.pam, 8)
    sys = RealizedSystem(2.0 * np.eye(8), 2.0 * x, 1e-9)
    res = detect_mmse(sys, c)
    np.testing.assert_array_equal(res.best_candidate, x)


def test_mmse_large_noise_collapses_to_origin(rng):
    c = build_constellation("16QAM")
    sys = RealizedSystem(rng.standard_normal((6, 6)), rng.standard_normal(6), 1e8)
    assert np.max(np.abs(mmse_estimate(sys, c))) < 1e-10
    res = detect_mmse(sys, c)
    # shrunk toward zero: only the innermost levels survive
    np.testing.assert_allclose(np.abs(res.best_candidate), c.pam[2])
    zero = RealizedSystem(np.eye(6), np.zeros(6), 1.0)
    np.testing.assert_array_equal(detect_mmse(zero, c).best_candidate, np.full(6, c.pam[1]))


def test_mmse_tends_to_zero_forcing(rng):
    c = build_constellation("QPSK")
    h = rng.standard_normal((8, 6)) + 3 * np.eye(8, 6)
    y = rng.standard_normal(8)
    zf = np.linalg.lstsq(h, y, rcond=None)[0]
    gaps = [np.linalg.norm(mmse_estimate(RealizedSystem(h, y, s), c) - zf) for s in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-6


def test_ml_scalar_qpsk_is_nearest_point(rng):
    c = build_constellation("QPSK")
    for _ in range(20):
        g = rng.standard_normal() + 1j * rng.standard_normal()
        y = rng.standard_normal(1) + 1j * rng.standard_normal(1)
        res = detect_ml_bruteforce(complex_to_real(np.array([[g]]), y, 0.5), c)
        assert res.diagnostics["n_candidates"] == 4
        points = [a + 1j * b for a, b in itertools.product(c.pam, repeat=2)]
        best = min(points, key=lambda p: abs(y[0] / g - p))
        assert res.best_candidate[0] + 1j * res.best_candidate[1] == pytest.approx(best)


def test_ml_matches_explicit_enumeration(rng):
    c = build_constellation("16QAM")
    bits, x, sys = transmit(rng, c, 2, 2, 5.0)
    cands = np.array(list(itertools.product(c.pam, repeat=4)))
    d = np.sum((sys.y_real - cands @ sys.h_real.T) ** 2, axis=1)
    res = detect_ml_bruteforce(sys, c)
    np.testing.assert_array_equal(res.best_candidate, cands[np.argmin(d)])
    assert res.best_log_likelihood == pytest.approx(-d.min() / (2 * sys.sigma_real**2))


def test_ml_guard_rail():
    c = build_constellation("64QAM")
    sys = RealizedSystem(np.zeros((192, 192)), np.zeros(192), 1.0)
    with pytest.raises(InstanceTooLargeError):
        detect_ml_bruteforce(sys, c)


def test_ml_beats_mmse(rng):
    c = build_constellation("QPSK")
    ml = mmse = 0
    for _ in range(2500):
        bits, _, sys = transmit(rng, c, 4, 4, 10.0)
        ml += count_bit_errors(bits, detect_ml_bruteforce(sys, c).bits)
        mmse += count_bit_errors(bits, detect_mmse(sys, c).bits)
    n_bits = 2500 * 8
    p_ml, p_mmse = ml / n_bits, mmse / n_bits
    se = np.sqrt(p_ml * (1 - p_ml) / n_bits + p_mmse * (1 - p_mmse) / n_bits)
    assert p_mmse - p_ml > 3 * se


def test_siso_qpsk_zero_db():
    ber = siso_awgn_ber(build_constellation("QPSK"), 0.0, 500_000, 1)
    p = norm.sf(1.0)
    assert p == pytest.approx(0.1587, abs=1e-4)
    assert abs(ber - p) < 3 * np.sqrt(p * (1 - p) / 1_000_000)


def test_siso_16qam_matches_gray_approximation():
    snr_db = 13.9
    snr = 10 ** (snr_db / 10)
    approx = (4 / np.log2(16)) * (1 - 1 / 4) * norm.sf(np.sqrt(3 * snr / 15))
    assert 0.008 < approx < 0.012
    ber = siso_awgn_ber(build_constellation("16QAM"), snr_db, 250_000, 2)
    assert ber == pytest.approx(approx, rel=0.05)


def test_siso_curve_monotone_and_vanishing():
    c = build_constellation("16QAM")
    bers = [siso_awgn_ber(c, s, 50_000, 3) for s in range(0, 31, 3)]
    assert all(b <= a * 1.05 for a, b in zip(bers, bers[1:]))
    assert siso_awgn_ber(c, 40.0, 50_000, 3) == 0.0
