"""Potential energy of the relaxed detection posterior.

``U(u) = ||y - H u||^2 / (2 sigma^2) - sum_n log p(u_n)`` with additive
constants dropped. The Gram matrix ``H^T H`` and ``H^T y`` are formed once
so each gradient costs one ``(2N x 2N)`` matrix-vector product.
"""

from dataclasses import dataclass

import numpy as np

from .channel import RealizedSystem
from .priors import PriorFamily, PriorSpec, grad_log_prior, log_prior


@dataclass(frozen=True)
class PosteriorModel:
    gram: np.ndarray
    hty: np.ndarray
    y_norm_sq: float
    sigma_real: float
    prior: PriorSpec
    h_real: np.ndarray
    y_real: np.ndarray

    @property
    def n_real(self):
        return self.gram.shape[0]


@dataclass(frozen=True)
class PhaseState:
    u: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if np.shape(self.u) != np.shape(self.r):
            raise ValueError("position and momentum must have equal shapes")


def build_posterior(sys: RealizedSystem, prior: PriorSpec) -> PosteriorModel:
    h, y = sys.h_real, sys.y_real
    if h.shape[0] != y.shape[0]:
        raise ValueError(f"channel has {h.shape[0]} rows but y has length {y.shape[0]}")
    gram = h.T @ h
    gram = 0.5 * (gram + gram.T)
    for arr in (gram, h, y):
        arr.setflags(write=False)
    hty = h.T @ y
    hty.setflags(write=False)
    return PosteriorModel(gram, hty, float(y @ y), float(sys.sigma_real), prior, h, y)


def residual_norm_sq(m, u):
    """``||y - H u||^2`` from the precomputed quadratic form; ``u`` may be batched."""
    u = np.asarray(u, dtype=np.float64)
    quad = np.einsum("...i,ij,...j->...", u, m.gram, u)
    return m.y_norm_sq - 2.0 * (u @ m.hty) + quad


def likelihood_potential(m, u):
    return residual_norm_sq(m, u) / (2.0 * m.sigma_real**2)


def potential(m, u):
    u = np.asarray(u, dtype=np.float64)
    val = likelihood_potential(m, u)
    if m.prior.family is not PriorFamily.MULTINOMIAL:
        val = val - np.sum(log_prior(u, m.prior), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def grad_potential(m, u):
    u = np.asarray(u, dtype=np.float64)
    g = (u @ m.gram - m.hty) / m.sigma_real**2
    if m.prior.family is not PriorFamily.MULTINOMIAL:
        g = g - grad_log_prior(u, m.prior)
    return g


def hamiltonian(m, s: PhaseState):
    r = np.asarray(s.r, dtype=np.float64)
    return potential(m, s.u) + 0.5 * np.sum(r * r, axis=-1)


def candidate_log_likelihood(m, u_quantized):
    """Log-likelihood of candidate symbol vectors up to a shared constant.

    Computed from the explicit residual, not the expanded quadratic form,
    so noiseless true candidates score exactly zero.
    """
    u = np.asarray(u_quantized, dtype=np.float64)
    r = m.y_real - u @ m.h_real.T
    val = -np.sum(r * r, axis=-1) / (2.0 * m.sigma_real**2)
    return float(val) if np.ndim(val) == 0 else val
