"""Per-dimension prior densities over a symbol coordinate.

Three families are supported: the discrete uniform (multinomial) prior
used by Gibbs detectors, and the two continuous relaxations, an
equal-weight mixture of normals and an equal-weight mixture of
location-scale Student-t densities centred on the PAM levels. All
continuous log-densities are evaluated with a max-shifted log-sum-exp, and
gradients with max-shifted responsibilities, so they stay finite far from (and
between) the anchors.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit
from scipy.special import gammaln

from .constellation import build_constellation, normalize_modulation


class PriorFamily(str, Enum):
    MULTINOMIAL = "multinomial"
    MIXTURE_NORMAL = "mixture-normal"
    MIXTURE_T = "mixture-t"


@dataclass(frozen=True)
class PriorSpec:
    family: PriorFamily
    anchors: np.ndarray
    sigma: float = 1.0
    nu: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "family", PriorFamily(self.family))
        anchors = np.asarray(self.anchors, dtype=np.float64).reshape(-1)
        if anchors.size == 0:
            raise ValueError("a prior needs at least one anchor")
        object.__setattr__(self, "anchors", anchors)
        if self.family is not PriorFamily.MULTINOMIAL and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if self.family is PriorFamily.MIXTURE_T and not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu!r}")

    @property
    def q(self):
        return self.anchors.shape[0]


@dataclass(frozen=True)
class TunedParams:
    sigma_normal: float
    sigma_t: float
    nu_t: float


def default_tuned_params():
    """Prior parameters per modulation found by a coarse BER search.

    The t scale is given as a multiple of the normal scale.
    """
    return {
        "QPSK": TunedParams(0.2483, 0.5 * 0.2483, 1.8),
        "16QAM": TunedParams(0.1242, 0.5 * 0.1242, 1.8),
        "64QAM": TunedParams(0.0664, 0.8 * 0.0664, 2.5),
    }


def tuned_prior(modulation, family, sigma=None, nu=None):
    """PriorSpec for ``modulation`` with tuned defaults, optionally overridden."""
    modulation = normalize_modulation(modulation)
    family = PriorFamily(family)
    anchors = build_constellation(modulation).pam
    p = default_tuned_params()[modulation]
    if family is PriorFamily.MIXTURE_T:
        return PriorSpec(family, anchors, p.sigma_t if sigma is None else sigma, p.nu_t if nu is None else nu)
    if family is PriorFamily.MIXTURE_NORMAL:
        return PriorSpec(family, anchors, p.sigma_normal if sigma is None else sigma)
    return PriorSpec(family, anchors)


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


@njit(cache=True)
def _mixture_logpdf(x, anchors, log_norm, sigma, nu, heavy):
    out = np.empty(x.shape[0])
    q = anchors.shape[0]
    s2 = sigma * sigma
    lc = np.empty(q)
    for i in range(x.shape[0]):
        top = -np.inf
        for k in range(q):
            d = x[i] - anchors[k]
            if heavy:
                lc[k] = -0.5 * (nu + 1.0) * np.log1p(d * d / (nu * s2))
            else:
                lc[k] = -0.5 * d * d / s2
            if lc[k] > top:
                top = lc[k]
        acc = 0.0
        for k in range(q):
            acc += np.exp(lc[k] - top)
        out[i] = top + np.log(acc) + log_norm - np.log(q)
    return out


def _t_log_norm(sigma, nu):
    return gammaln(0.5 * (nu + 1)) - gammaln(0.5 * nu) - 0.5 * np.log(nu * np.pi) - np.log(sigma)


def _logpdf(x, spec, heavy):
    x = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(x).reshape(-1)
    if heavy:
        log_norm, nu = _t_log_norm(spec.sigma, spec.nu), float(spec.nu)
    else:
        log_norm, nu = -0.5 * np.log(2 * np.pi * spec.sigma**2), 1.0
    return _out(_mixture_logpdf(flat, spec.anchors, float(log_norm), float(spec.sigma), nu, heavy).reshape(x.shape))


def log_prior_mixture_t(x, spec):
    """``log((1/q) sum_k T(x; a_k, sigma, nu))``, elementwise over ``x``.

    ``T`` is the location-scale Student-t density with scale ``sigma``.
    """
    return _logpdf(x, spec, True)


@njit(cache=True)
def _mixture_grad(x, anchors, sigma, nu, heavy):
    # responsibilities are formed relative to the largest component, so
    # the shared normalising constant never has to be evaluated
    out = np.empty(x.shape[0])
    q = anchors.shape[0]
    s2 = sigma * sigma
    lc = np.empty(q)
    g = np.empty(q)
    for i in range(x.shape[0]):
        top = -np.inf
        for k in range(q):
            d = x[i] - anchors[k]
            if heavy:
                lc[k] = -0.5 * (nu + 1.0) * np.log1p(d * d / (nu * s2))
                g[k] = -(nu + 1.0) * d / (nu * s2 + d * d)
            else:
                lc[k] = -0.5 * d * d / s2
                g[k] = -d / s2
            if lc[k] > top:
                top = lc[k]
        wsum = 0.0
        gsum = 0.0
        for k in range(q):
            w = np.exp(lc[k] - top)
            wsum += w
            gsum += w * g[k]
        out[i] = gsum / wsum
    return out


def _grad(x, spec, heavy):
    x = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(x).reshape(-1)
    g = _mixture_grad(flat, spec.anchors, float(spec.sigma), float(spec.nu) if heavy else 1.0, heavy)
    return _out(g.reshape(x.shape))


def grad_log_prior_mixture_t(x, spec):
    """Derivative of :func:`log_prior_mixture_t`.

    ``sum_k w_k(x) * -(nu + 1)(x - a_k) / (nu sigma^2 + (x - a_k)^2)`` with
    ``w_k`` the component responsibilities.
    """
    return _grad(x, spec, True)


def log_prior_mixture_normal(x, spec):
    return _logpdf(x, spec, False)


def grad_log_prior_mixture_normal(x, spec):
    return _grad(x, spec, False)


def multinomial_log_weights(spec):
    return np.full(spec.q, -np.log(spec.q))


def log_prior(x, spec):
    if spec.family is PriorFamily.MIXTURE_T:
        return log_prior_mixture_t(x, spec)
    if spec.family is PriorFamily.MIXTURE_NORMAL:
        return log_prior_mixture_normal(x, spec)
    raise ValueError("the multinomial prior has no density; use multinomial_log_weights")


def grad_log_prior(x, spec):
    if spec.family is PriorFamily.MIXTURE_T:
        return grad_log_prior_mixture_t(x, spec)
    if spec.family is PriorFamily.MIXTURE_NORMAL:
        return grad_log_prior_mixture_normal(x, spec)
    raise ValueError("the multinomial prior is not differentiable")
