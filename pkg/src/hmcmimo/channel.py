"""Channel generation and the complex-to-real system model.

The complex model is ``y = H u + w`` with ``w ~ CN(0, sigma_w^2 I)``.
Every detector works on the real-valued equivalent obtained by stacking
real and imaginary parts, which doubles both dimensions.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_complex_matrix, check_count, check_positive, check_vector
from .rng import as_generator

SNR_CONVENTIONS = ("per-antenna-unit-power", "total-unit-power")


@dataclass(frozen=True)
class RealizedSystem:
    """Real-valued equivalent of one complex MIMO observation.

    Attributes
    ----------
    h_real : ndarray, shape (2M, 2N)
        ``[[Re H, -Im H], [Im H, Re H]]``.
    y_real : ndarray, shape (2M,)
        ``Re y`` stacked over ``Im y``.
    sigma_real : float
        Noise standard deviation of each real component, ``sigma_w / sqrt(2)``.
    """

    h_real: np.ndarray
    y_real: np.ndarray
    sigma_real: float

    def __post_init__(self):
        if self.h_real.ndim != 2 or self.y_real.shape != (self.h_real.shape[0],):
            raise ValueError("h_real and y_real dimensions do not agree")
        if not self.sigma_real > 0:
            raise ValueError("sigma_real must be positive")

    @property
    def n_real(self):
        return self.h_real.shape[1]

    @property
    def m_real(self):
        return self.h_real.shape[0]


def draw_rayleigh_channel(m, n, rng=None):
    """i.i.d. ``CN(0, 1)`` channel of shape (m, n)."""
    m = check_count(m, "m")
    n = check_count(n, "n")
    rng = as_generator(rng)
    g = rng.standard_normal((m, n, 2)) * np.sqrt(0.5)
    return g[..., 0] + 1j * g[..., 1]


def exponential_correlation(size, rho):
    idx = np.arange(size)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _psd_sqrt(r):
    w, v = np.linalg.eigh(r)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def apply_kronecker_correlation(h_w, rho):
    """Kronecker model ``R_r^{1/2} H_w R_t^{1/2}`` with exponential correlation.

    Both correlation matrices have entries ``rho**|i - j|``. ``rho = 0``
    returns the input unchanged.
    """
    h_w = check_complex_matrix(h_w, "h_w")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    if rho == 0.0:
        return h_w.copy()
    m, n = h_w.shape
    return _psd_sqrt(exponential_correlation(m, rho)) @ h_w @ _psd_sqrt(exponential_correlation(n, rho))


def complex_to_real(h, y, sigma_w):
    h = check_complex_matrix(h)
    y = check_vector(y, h.shape[0], "y", dtype=np.complex128)
    sigma_w = check_positive(sigma_w, "sigma_w")
    h_real = np.block([[h.real, -h.imag], [h.imag, h.real]])
    y_real = np.concatenate([y.real, y.imag])
    return RealizedSystem(h_real, y_real, sigma_w / np.sqrt(2.0))


def real_to_complex(h_real):
    """Recover the complex channel from its real block form (left block column)."""
    m2, n2 = h_real.shape
    m, n = m2 // 2, n2 // 2
    return h_real[:m, :n] + 1j * h_real[m:, :n]


def real_vector_to_complex(v):
    half = v.shape[-1] // 2
    return v[..., :half] + 1j * v[..., half:]


def noise_sigma_from_snr(snr_db, n, convention="per-antenna-unit-power"):
    """Complex noise standard deviation for an average received SNR in dB.

    With unit-power symbols on each of the ``n`` transmit antennas and
    unit-variance channel gains, the received SNR per receive antenna is
    ``n / sigma_w**2``. The ``"total-unit-power"`` convention reads the SNR
    as ``1 / sigma_w**2`` instead, which shifts curves by ``10 log10(n)`` dB.
    """
    n = check_count(n, "n")
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    snr = 10.0 ** (snr_db / 10.0)
    if convention == "per-antenna-unit-power":
        return float(np.sqrt(n / snr))
    if convention == "total-unit-power":
        return float(np.sqrt(1.0 / snr))
    raise ValueError(f"unknown SNR convention {convention!r}; expected one of {SNR_CONVENTIONS}")


def simulate_received(h, u, sigma_w, rng=None):
    h = check_complex_matrix(h)
    u = check_vector(u, h.shape[1], "u", dtype=np.complex128)
    if sigma_w < 0:
        raise ValueError("sigma_w must be non-negative")
    rng = as_generator(rng)
    g = rng.standard_normal((h.shape[0], 2)) * (sigma_w * np.sqrt(0.5))
    return h @ u + (g[:, 0] + 1j * g[:, 1])
