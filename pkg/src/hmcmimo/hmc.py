"""Hamiltonian Monte Carlo detection over the relaxed symbol space.

Chains are independent but advance together as one ``(n_chains, 2N)``
batch inside a compiled transition loop, so a detection costs
``steps_per_chain * leapfrog_steps`` batched gradient evaluations, each
dominated by one product with the precomputed Gram matrix.
"""

import time
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from ._validation import check_count, check_positive
from .constellation import demap_bits, quantize_index
from .posterior import PhaseState, candidate_log_likelihood, grad_potential, potential
from .priors import PriorFamily
from .result import DetectionResult
from .rng import as_seed_sequence

TOTAL_STEP_BUDGET = 1000


@dataclass(frozen=True)
class HmcConfig:
    """Sampler settings; ``None`` fields are resolved per problem size.

    Parameters
    ----------
    steps_per_chain : int, optional
        Markov-chain steps per chain. Defaults to ``2N``.
    n_chains : int, optional
        Defaults to ``max(1, 1000 // (2N))``.
    leapfrog_steps : int
        Gradient evaluations per trajectory.
    step_size : float, optional
        Leapfrog step. Defaults to :func:`default_step_size`.
    init_box : float, optional
        Chains start uniformly in ``[-init_box, init_box]`` per dimension.
        Defaults to the largest PAM magnitude.
    step_scale : float
        Multiplier in the default step-size rule ``step_scale / sqrt(lambda_max)``.
        Values near 1 trade acceptance (typically 0.7-0.9) against distance
        travelled per trajectory; 0.05 barely moves the chains.
    """

    steps_per_chain: int | None = None
    n_chains: int | None = None
    leapfrog_steps: int = 10
    step_size: float | None = None
    init_box: float | None = None
    step_scale: float = 1.0

    def __post_init__(self):
        if self.steps_per_chain is not None:
            check_count(self.steps_per_chain, "steps_per_chain")
        if self.n_chains is not None:
            check_count(self.n_chains, "n_chains")
        check_count(self.leapfrog_steps, "leapfrog_steps")
        if self.step_size is not None:
            check_positive(self.step_size, "step_size")
        if self.init_box is not None:
            check_positive(self.init_box, "init_box")
        check_positive(self.step_scale, "step_scale")

    def resolve(self, m, anchors=None):
        n_real = m.n_real
        anchors = m.prior.anchors if anchors is None else anchors
        return replace(
            self,
            steps_per_chain=self.steps_per_chain or n_real,
            n_chains=self.n_chains or max(1, TOTAL_STEP_BUDGET // n_real),
            step_size=self.step_size or default_step_size(m, self.step_scale),
            init_box=self.init_box or float(np.max(np.abs(anchors))),
        )


@dataclass
class HmcTrace:
    positions: np.ndarray  # (..., steps, 2N), the state after each step
    accepted: np.ndarray  # (..., steps) bool
    energy_error: np.ndarray  # (..., steps) H(u', r') - H(u, r)

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted))


def largest_curvature(m, iterations=5):
    """Power-iteration estimate of the top eigenvalue of ``gram / sigma^2``."""
    v = np.ones(m.n_real)
    lam = 0.0
    for _ in range(iterations):
        w = m.gram @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam / m.sigma_real**2


def default_step_size(m, scale=1.0):
    lam = largest_curvature(m)
    if lam <= 0.0:
        return 0.5
    return float(np.clip(scale / np.sqrt(lam), 1e-4, 0.5))


def _leapfrog(m, u, r, grad, eps, n_steps):
    r = r - 0.5 * eps * grad
    for i in range(n_steps):
        u = u + eps * r
        grad = grad_potential(m, u)
        r = r - (eps if i < n_steps - 1 else 0.5 * eps) * grad
    return u, r, grad


def leapfrog(m, s: PhaseState, epsilon, l):
    """Integrate Hamilton's equations for ``l`` leapfrog steps of size ``epsilon``."""
    u = np.asarray(s.u, dtype=np.float64)
    with np.errstate(all="ignore"):
        u, r, _ = _leapfrog(m, u, np.asarray(s.r, dtype=np.float64), grad_potential(m, u), epsilon, l)
    return PhaseState(u, r)


def _draws(seed_seq, n_chains, steps, dim, box):
    # one block draw per detection; chain i owns row i of every array
    rng = np.random.default_rng(seed_seq)
    init = rng.uniform(-box, box, size=(n_chains, dim))
    momenta = rng.standard_normal((n_chains, steps, dim))
    log_u = np.log(rng.random((n_chains, steps)))
    return init, momenta, log_u


def _run_reference(m, cfg, init, momenta, log_u):
    """Plain numpy transition loop; the compiled kernel must reproduce it."""
    eps, n_lf = cfg.step_size, cfg.leapfrog_steps
    n_chains, steps, dim = momenta.shape
    positions = np.empty((n_chains, steps, dim))
    accepted = np.zeros((n_chains, steps), dtype=bool)
    energy_error = np.empty((n_chains, steps))

    u = init
    pot = potential(m, u)
    grad = grad_potential(m, u)
    with np.errstate(all="ignore"):
        for t in range(steps):
            r = momenta[:, t]
            h0 = pot + 0.5 * np.sum(r * r, axis=-1)
            u_new, r_new, grad_new = _leapfrog(m, u, r, grad, eps, n_lf)
            pot_new = potential(m, u_new)
            dh = pot_new + 0.5 * np.sum(r_new * r_new, axis=-1) - h0
            ok = np.isfinite(dh) & np.all(np.isfinite(grad_new), axis=-1)
            acc = ok & (log_u[:, t] < -dh)
            u = np.where(acc[:, None], u_new, u)
            pot = np.where(acc, pot_new, pot)
            grad = np.where(acc[:, None], grad_new, grad)
            positions[:, t] = u
            accepted[:, t] = acc
            energy_error[:, t] = dh
    return HmcTrace(positions, accepted, energy_error)


@njit(cache=True)
def _prior_terms(x, anchors, s2, nu, heavy, lc, g):
    # returns (log-density up to a constant, derivative) of one coordinate
    q = anchors.shape[0]
    top = -np.inf
    for k in range(q):
        d = x - anchors[k]
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
    return top + np.log(wsum), gsum / wsum


@njit(cache=True)
def _evaluate(u, gu, grad, pot, gram, hty, y_norm_sq, inv_var, anchors, s2, nu, heavy, lc, g, with_potential):
    """Fill ``gu = u @ gram``, ``grad`` and optionally ``pot`` for every chain."""
    np.dot(u, gram, gu)
    n_chains, dim = u.shape
    for c in range(n_chains):
        lp = 0.0
        quad = 0.0
        lin = 0.0
        for j in range(dim):
            lpj, dlpj = _prior_terms(u[c, j], anchors, s2, nu, heavy, lc, g)
            grad[c, j] = (gu[c, j] - hty[j]) * inv_var - dlpj
            if with_potential:
                lp += lpj
                quad += u[c, j] * gu[c, j]
                lin += u[c, j] * hty[j]
        if with_potential:
            pot[c] = 0.5 * inv_var * (y_norm_sq - 2.0 * lin + quad) - lp


@njit(cache=True)
def _hmc_kernel(gram, hty, y_norm_sq, inv_var, anchors, sigma, nu, heavy, init, momenta, log_u, eps, n_lf):
    n_chains, steps, dim = momenta.shape
    s2 = sigma * sigma
    q = anchors.shape[0]
    lc = np.empty(q)
    g = np.empty(q)
    positions = np.empty((n_chains, steps, dim))
    accepted = np.zeros((n_chains, steps), dtype=np.bool_)
    energy_error = np.empty((n_chains, steps))

    u = init.copy()
    gu = np.empty((n_chains, dim))
    grad = np.empty((n_chains, dim))
    pot = np.empty(n_chains)
    _evaluate(u, gu, grad, pot, gram, hty, y_norm_sq, inv_var, anchors, s2, nu, heavy, lc, g, True)
    un = np.empty((n_chains, dim))
    rn = np.empty((n_chains, dim))
    gn = np.empty((n_chains, dim))
    pn = np.empty(n_chains)
    for t in range(steps):
        for c in range(n_chains):
            for j in range(dim):
                un[c, j] = u[c, j]
                rn[c, j] = momenta[c, t, j] - 0.5 * eps * grad[c, j]
        for i in range(n_lf):
            un += eps * rn
            last = i == n_lf - 1
            # the potential is only needed at the end of the trajectory
            _evaluate(un, gu, gn, pn, gram, hty, y_norm_sq, inv_var, anchors, s2, nu, heavy, lc, g, last)
            kick = 0.5 * eps if last else eps
            rn -= kick * gn
        for c in range(n_chains):
            k0 = 0.0
            k1 = 0.0
            finite = True
            for j in range(dim):
                k0 += momenta[c, t, j] * momenta[c, t, j]
                k1 += rn[c, j] * rn[c, j]
                if not np.isfinite(gn[c, j]):
                    finite = False
            dh = pn[c] + 0.5 * k1 - (pot[c] + 0.5 * k0)
            energy_error[c, t] = dh
            if finite and np.isfinite(dh) and log_u[c, t] < -dh:
                accepted[c, t] = True
                pot[c] = pn[c]
                for j in range(dim):
                    u[c, j] = un[c, j]
                    grad[c, j] = gn[c, j]
            for j in range(dim):
                positions[c, t, j] = u[c, j]
    return positions, accepted, energy_error


def _run(m, cfg, init, momenta, log_u):
    prior = m.prior
    if prior.family is PriorFamily.MULTINOMIAL:
        raise ValueError("HMC needs a continuous prior (mixture-t or mixture-normal)")
    heavy = prior.family is PriorFamily.MIXTURE_T
    nu = float(prior.nu) if heavy else 1.0
    positions, accepted, energy_error = _hmc_kernel(
        np.ascontiguousarray(m.gram),
        np.ascontiguousarray(m.hty),
        m.y_norm_sq,
        1.0 / m.sigma_real**2,
        prior.anchors,
        float(prior.sigma),
        nu,
        heavy,
        np.ascontiguousarray(init, dtype=np.float64),
        np.ascontiguousarray(momenta, dtype=np.float64),
        np.ascontiguousarray(log_u, dtype=np.float64),
        float(cfg.step_size),
        int(cfg.leapfrog_steps),
    )
    return HmcTrace(positions, accepted, energy_error)


def run_chains(m, cfg, random_state=None):
    """Run ``cfg.n_chains`` independent chains as one batch."""
    cfg = cfg.resolve(m)
    draws = _draws(as_seed_sequence(random_state), cfg.n_chains, cfg.steps_per_chain, m.n_real, cfg.init_box)
    return _run(m, cfg, *draws)


def hmc_chain(m, cfg, rng=None):
    """One chain: uniform random start, then ``steps_per_chain`` HMC transitions."""
    cfg = replace(cfg, n_chains=1)
    trace = run_chains(m, cfg, rng)
    return HmcTrace(trace.positions[0], trace.accepted[0], trace.energy_error[0])


def select_candidate(m, c, positions):
    """Quantize every sample, score each distinct vector, return the best.

    Ties go to the lexicographically smallest index vector. Returns
    ``(best_indices, best_score, scores_per_sample)``.
    """
    dim = positions.shape[-1]
    idx = quantize_index(positions.reshape(-1, dim), c).astype(np.uint8)
    # byte-string rows sort lexicographically, which fixes the tie-break order
    keys = np.ascontiguousarray(idx).view(np.dtype((np.void, dim))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    uniq = idx[first].astype(np.intp)
    scores = candidate_log_likelihood(m, c.pam[uniq])
    best = int(np.argmax(scores))
    return uniq[best], float(scores[best]), scores[inverse.reshape(-1)].reshape(positions.shape[:-1]), len(uniq)


def detect_hmc(m, c, cfg=None, rng=None):
    t0 = time.perf_counter()
    cfg = (cfg or HmcConfig()).resolve(m, c.pam)
    trace = run_chains(m, cfg, rng)
    best_idx, best_score, sample_scores, n_unique = select_candidate(m, c, trace.positions)
    best = c.pam[best_idx]
    return DetectionResult(
        bits=demap_bits(best, c),
        best_candidate=best,
        best_log_likelihood=best_score,
        diagnostics={
            "acceptance_rate": trace.acceptance_rate,
            "chain_best_scores": sample_scores.max(axis=-1),
            "n_candidates": n_unique,
            "step_size": cfg.step_size,
            "wall_time": time.perf_counter() - t0,
        },
    )
