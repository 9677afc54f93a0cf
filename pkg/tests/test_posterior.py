import itertools

import numpy as np
import pytest

from hmcmimo import build_constellation
from hmcmimo.channel import RealizedSystem, complex_to_real, draw_rayleigh_channel
from hmcmimo.posterior import (
    PhaseState,
    build_posterior,
    candidate_log_likelihood,
    grad_potential,
    hamiltonian,
    likelihood_potential,
    potential,
    residual_norm_sq,
)
from hmcmimo.priors import PriorSpec, log_prior, tuned_prior


def random_model(rng, mod="16QAM", family="mixture-t", n=3, m=4, sigma_w=0.4):
    h = draw_rayleigh_channel(m, n, rng)
    y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return build_posterior(complex_to_real(h, y, sigma_w), tuned_prior(mod, family))


def real_system(h, y, sigma):
    return RealizedSystem(np.asarray(h, float), np.asarray(y, float), sigma)


def test_identity_channel():
    y = np.array([0.3, -1.2])
    m = build_posterior(real_system(np.eye(2), y, 1.0), tuned_prior("QPSK", "mixture-normal"))
    np.testing.assert_array_equal(m.gram, np.eye(2))
    np.testing.assert_array_equal(m.hty, y)
    assert m.y_norm_sq == pytest.approx(y @ y)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        RealizedSystem(np.eye(2), np.zeros(3), 1.0)


def test_gram_symmetric_psd(rng):
    for _ in range(20):
        m = random_model(rng, n=5, m=3)
        assert np.max(np.abs(m.gram - m.gram.T)) <= 1e-12
        v = rng.standard_normal((50, m.n_real))
        rq = np.einsum("ij,jk,ik->i", v, m.gram, v) / np.sum(v * v, axis=1)
        assert rq.min() >= -1e-9


def test_model_is_read_only(rng):
    m = random_model(rng)
    with pytest.raises(ValueError):
        m.gram[0, 0] = 1.0


def test_quadratic_form_identity(rng):
    for _ in range(50):
        m = random_model(rng)
        u = rng.standard_normal(m.n_real)
        direct = np.sum((m.y_real - m.h_real @ u) ** 2)
        assert residual_norm_sq(m, u) == pytest.approx(direct, rel=1e-10)


def test_likelihood_scales_with_inverse_variance(rng):
    h = rng.standard_normal((4, 4))
    y = rng.standard_normal(4)
    u = rng.standard_normal(4)
    prior = tuned_prior("QPSK", "mixture-t")
    a = likelihood_potential(build_posterior(real_system(h, y, 0.3), prior), u)
    b = likelihood_potential(build_posterior(real_system(h, y, 0.6), prior), u)
    assert b == pytest.approx(a / 4, rel=1e-12)


def test_potential_decomposition(rng):
    m = random_model(rng)
    u = rng.standard_normal(m.n_real)
    expected = np.sum((m.y_real - m.h_real @ u) ** 2) / (2 * m.sigma_real**2) - np.sum(log_prior(u, m.prior))
    assert potential(m, u) == pytest.approx(expected, rel=1e-10)


def test_potential_differences_independent_of_constant(rng):
    # a second evaluation path that keeps every constant must agree on differences
    m = random_model(rng)
    from scipy import stats

    def full_neg_log_post(u):
        like = stats.norm.logpdf(m.y_real, m.h_real @ u, m.sigma_real).sum()
        prior = np.log(np.mean([stats.t.pdf(u, m.prior.nu, a, m.prior.sigma) for a in m.prior.anchors], axis=0)).sum()
        return -(like + prior)

    u1, u2 = rng.standard_normal((2, m.n_real))
    assert potential(m, u1) - potential(m, u2) == pytest.approx(full_neg_log_post(u1) - full_neg_log_post(u2), rel=1e-9)


def test_prior_pulls_toward_nearest_anchor():
    # huge noise: the prior dominates and U falls as u moves onto the anchor
    c = build_constellation("QPSK")
    m = build_posterior(real_system(np.eye(2), np.zeros(2), 1e4), tuned_prior("QPSK", "mixture-t"))
    u = np.array([c.pam[1] + 0.05, c.pam[0] - 0.05])
    toward = np.array([-1.0, 1.0]) * 1e-3
    assert potential(m, u + toward) < potential(m, u)
    assert np.all(np.sign(grad_potential(m, u)) == np.array([1.0, -1.0]))


def fd_gradient(f, u, h=1e-6):
    g = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (f(u + e) - f(u - e)) / (2 * h)
    return g


@pytest.mark.parametrize("family", ["mixture-t", "mixture-normal"])
@pytest.mark.parametrize("mod", ["QPSK", "16QAM", "64QAM"])
def test_gradient_matches_finite_differences(family, mod, rng):
    worst = 0.0
    for _ in range(100):
        m = random_model(rng, mod, family, sigma_w=rng.uniform(0.2, 1.0))
        u = rng.uniform(-1.2, 1.2, m.n_real)
        g = grad_potential(m, u)
        fd = fd_gradient(lambda v: potential(m, v), u)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
    assert worst < 1e-6


def test_pure_gaussian_gradient():
    prior = PriorSpec("mixture-normal", [0.0], sigma=0.5)
    m = build_posterior(real_system(np.zeros((2, 2)), np.zeros(2), 1.0), prior)
    u = np.array([0.3, -2.0])
    np.testing.assert_allclose(grad_potential(m, u), u / 0.25, rtol=1e-15)


def test_least_squares_point_zeroes_likelihood_gradient(rng):
    h = rng.standard_normal((6, 4))
    y = rng.standard_normal(6)
    flat = PriorSpec("mixture-normal", [0.0], sigma=1e12)
    m = build_posterior(real_system(h, y, 0.5), flat)
    u_ls = np.linalg.lstsq(h, y, rcond=None)[0]
    np.testing.assert_allclose(grad_potential(m, u_ls), 0.0, atol=1e-9)


def test_t_prior_gradient_finite_on_sweep(rng):
    m = random_model(rng, "64QAM", "mixture-t", n=4, m=4, sigma_w=0.1)
    u = rng.uniform(-50, 50, (10_000, m.n_real))
    assert np.all(np.isfinite(grad_potential(m, u)))
    assert np.all(np.isfinite(potential(m, u)))


def test_hamiltonian_properties(rng):
    m = random_model(rng)
    u = rng.standard_normal(m.n_real)
    r = rng.standard_normal(m.n_real)
    assert hamiltonian(m, PhaseState(u, np.zeros_like(r))) == potential(m, u)
    assert hamiltonian(m, PhaseState(u, r)) == hamiltonian(m, PhaseState(u, -r))
    assert hamiltonian(m, PhaseState(u, r)) - hamiltonian(m, PhaseState(u, 0 * r)) == pytest.approx(0.5 * r @ r)
    with pytest.raises(ValueError):
        PhaseState(u, r[:-1])


def test_candidate_score_zero_for_noiseless_truth(rng):
    c = build_constellation("16QAM")
    h = draw_rayleigh_channel(3, 3, rng)
    x = rng.choice(c.pam, 6)
    u = x[:3] + 1j * x[3:]
    m = build_posterior(complex_to_real(h, h @ u, 0.1), tuned_prior("16QAM", "mixture-t"))
    assert candidate_log_likelihood(m, x) == 0.0
    others = rng.choice(c.pam, (50, 6))
    assert np.all(candidate_log_likelihood(m, others) <= 0.0)


def test_candidate_argmax_equals_bruteforce(rng):
    c = build_constellation("QPSK")
    for _ in range(20):
        h = draw_rayleigh_channel(1, 1, rng)
        y = rng.standard_normal(1) + 1j * rng.standard_normal(1)
        m = build_posterior(complex_to_real(h, y, 0.7), tuned_prior("QPSK", "mixture-t"))
        cands = np.array(list(itertools.product(c.pam, repeat=2)))
        best = cands[np.argmax(candidate_log_likelihood(m, cands))]
        brute = min(cands, key=lambda v: abs(y[0] - h[0, 0] * (v[0] + 1j * v[1])))
        np.testing.assert_array_equal(best, brute)
        shifted = candidate_log_likelihood(m, cands) + 123.0
        assert np.argmax(shifted) == np.argmax(candidate_log_likelihood(m, cands))
