"""Reference detectors: linear MMSE, exhaustive ML, and the SISO AWGN bound."""

import time

import numpy as np

from ._validation import check_count
from .channel import noise_sigma_from_snr
from .constellation import count_bit_errors, demap_bits, modulate_bits, quantize, random_bits
from .posterior import candidate_log_likelihood
from .result import DetectionResult
from .rng import as_generator

ML_MAX_CANDIDATES = 2**24
_ML_CHUNK = 2**15


class InstanceTooLargeError(ValueError):
    """Raised when exhaustive search would exceed ``ML_MAX_CANDIDATES``."""


def mmse_estimate(sys, c):
    h = sys.h_real
    reg = sys.sigma_real**2 / c.symbol_power_per_dim
    a = h.T @ h + reg * np.eye(sys.n_real)
    return np.linalg.solve(a, h.T @ sys.y_real)


def detect_mmse(sys, c):
    t0 = time.perf_counter()
    u_hat = quantize(mmse_estimate(sys, c), c)
    r = sys.y_real - sys.h_real @ u_hat
    return DetectionResult(
        bits=demap_bits(u_hat, c),
        best_candidate=u_hat,
        best_log_likelihood=float(-(r @ r) / (2 * sys.sigma_real**2)),
        diagnostics={"wall_time": time.perf_counter() - t0},
    )


def ml_candidate_count(c, n_real):
    return c.q**n_real


def detect_ml_bruteforce(sys, c):
    """Exact ML by enumerating every constellation vector (lexicographic order)."""
    t0 = time.perf_counter()
    n_real = sys.n_real
    total = ml_candidate_count(c, n_real)
    if total > ML_MAX_CANDIDATES:
        raise InstanceTooLargeError(
            f"{c.q}^{n_real} candidates exceed the exhaustive-search limit of {ML_MAX_CANDIDATES}"
        )
    h, y = sys.h_real, sys.y_real
    place = c.q ** np.arange(n_real - 1, -1, -1)
    best_val, best = np.inf, None
    for start in range(0, total, _ML_CHUNK):
        ids = np.arange(start, min(start + _ML_CHUNK, total))
        block = (ids[:, None] // place) % c.q
        r = y - c.pam[block] @ h.T
        d = np.einsum("ij,ij->i", r, r)
        i = int(np.argmin(d))
        if d[i] < best_val:
            best_val, best = d[i], c.pam[block[i]]
    return DetectionResult(
        bits=demap_bits(best, c),
        best_candidate=best,
        best_log_likelihood=float(-best_val / (2 * sys.sigma_real**2)),
        diagnostics={"n_candidates": total, "wall_time": time.perf_counter() - t0},
    )


def siso_awgn_ber(c, snr_db, trials, rng=None, convention="per-antenna-unit-power"):
    """Simulated BER of one Gray-mapped symbol stream over AWGN.

    ``trials`` complex symbols are sent at the given SNR (one transmit
    antenna) and detected by nearest-point slicing.
    """
    trials = check_count(trials, "trials")
    rng = as_generator(rng)
    sigma_real = noise_sigma_from_snr(snr_db, 1, convention) / np.sqrt(2.0)
    k = c.bits_per_real_dim
    bits = random_bits(2 * trials * k, rng)
    x = modulate_bits(bits, c, 2 * trials)
    y = x + sigma_real * rng.standard_normal(x.shape)
    return count_bit_errors(bits, demap_bits(y, c)) / bits.size
