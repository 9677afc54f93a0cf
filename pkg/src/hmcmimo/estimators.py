"""scikit-learn style wrappers around the detectors.

``fit(H, noise_std)`` fixes the quasi-static channel; ``predict(Y)`` detects
every row of ``Y`` (one received vector per row) and returns the bits.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_matrix, check_positive
from .baselines import detect_ml_bruteforce, detect_mmse
from .channel import complex_to_real
from .constellation import build_constellation
from .hmc import HmcConfig, detect_hmc
from .mgs import MgsConfig, detect_mgs
from .posterior import build_posterior
from .priors import PriorFamily, PriorSpec, tuned_prior
from .rng import as_seed_sequence, child


class _DetectorBase(BaseEstimator):
    def fit(self, H, noise_std):
        """Store the channel ``H`` (M x N complex) and per-antenna noise std."""
        self.H_ = check_complex_matrix(H)
        self.noise_std_ = check_positive(noise_std, "noise_std")
        self.constellation_ = build_constellation(self.modulation)
        self.n_features_in_ = self.H_.shape[0]
        return self

    def _rows(self, Y):
        check_is_fitted(self, "H_")
        Y = np.asarray(Y, dtype=np.complex128)
        if Y.ndim == 1:
            Y = Y[None, :]
        if Y.ndim != 2 or Y.shape[1] != self.n_features_in_:
            raise ValueError(f"Y must have shape (n_samples, {self.n_features_in_}), got {np.shape(Y)}")
        if not np.all(np.isfinite(Y)):
            raise ValueError("Y contains non-finite values")
        return Y

    def _detect_all(self, Y):
        Y = self._rows(Y)
        root = as_seed_sequence(getattr(self, "random_state", None))
        return [
            self._detect_one(complex_to_real(self.H_, y, self.noise_std_), child(root, i)) for i, y in enumerate(Y)
        ]

    def predict(self, Y):
        """Detected bits, shape ``(n_samples, 2 N log2 q / 2)``."""
        return np.stack([r.bits for r in self._detect_all(Y)])

    def predict_symbols(self, Y):
        """Detected complex symbols, shape ``(n_samples, N)``."""
        n = self.H_.shape[1]
        return np.stack([r.best_candidate[:n] + 1j * r.best_candidate[n:] for r in self._detect_all(Y)])

    def score(self, Y, bits):
        """Fraction of bits detected correctly."""
        return float(np.mean(self.predict(Y) == np.asarray(bits)))


class HMCDetector(_DetectorBase):
    """Hamiltonian Monte Carlo detector with a continuous mixture prior.

    Parameters
    ----------
    modulation : str
    prior : {"mixture-t", "mixture-normal"}
    sigma, nu : float, optional
        Prior overrides; ``None`` uses the tuned value for the modulation.
    step_scale : float
        Multiplier in the automatic step-size rule.
    n_chains, steps_per_chain, leapfrog_steps, step_size :
        See :class:`HmcConfig`.
    random_state : int, SeedSequence or None
    """

    def __init__(
        self,
        modulation="QPSK",
        prior="mixture-t",
        sigma=None,
        nu=None,
        step_scale=1.0,
        n_chains=None,
        steps_per_chain=None,
        leapfrog_steps=10,
        step_size=None,
        random_state=None,
    ):
        self.modulation = modulation
        self.prior = prior
        self.sigma = sigma
        self.nu = nu
        self.step_scale = step_scale
        self.n_chains = n_chains
        self.steps_per_chain = steps_per_chain
        self.leapfrog_steps = leapfrog_steps
        self.step_size = step_size
        self.random_state = random_state

    def fit(self, H, noise_std):
        super().fit(H, noise_std)
        family = PriorFamily(self.prior)
        if family is PriorFamily.MULTINOMIAL:
            raise ValueError("HMC needs a continuous prior; use MGSDetector for the discrete one")
        self.prior_ = tuned_prior(self.modulation, family, self.sigma, self.nu)
        self.config_ = HmcConfig(
            steps_per_chain=self.steps_per_chain,
            n_chains=self.n_chains,
            leapfrog_steps=self.leapfrog_steps,
            step_size=self.step_size,
            step_scale=self.step_scale,
        )
        return self

    def _detect_one(self, sys, ss):
        return detect_hmc(build_posterior(sys, self.prior_), self.constellation_, self.config_, ss)


class MGSDetector(_DetectorBase):
    """Mixed Gibbs sampling detector with restarts."""

    def __init__(self, modulation="QPSK", total_steps=1000, restarts=10, mixing_alpha=None, random_state=None):
        self.modulation = modulation
        self.total_steps = total_steps
        self.restarts = restarts
        self.mixing_alpha = mixing_alpha
        self.random_state = random_state

    def fit(self, H, noise_std):
        super().fit(H, noise_std)
        self.config_ = MgsConfig(self.total_steps, self.restarts, self.mixing_alpha)
        self.prior_ = PriorSpec(PriorFamily.MULTINOMIAL, self.constellation_.pam)
        return self

    def _detect_one(self, sys, ss):
        return detect_mgs(build_posterior(sys, self.prior_), self.constellation_, self.config_, ss)


class MMSEDetector(_DetectorBase):
    def __init__(self, modulation="QPSK"):
        self.modulation = modulation

    def _detect_one(self, sys, ss):
        return detect_mmse(sys, self.constellation_)


class MLDetector(_DetectorBase):
    """Exhaustive search; refuses instances above the candidate guard."""

    def __init__(self, modulation="QPSK"):
        self.modulation = modulation

    def _detect_one(self, sys, ss):
        return detect_ml_bruteforce(sys, self.constellation_)
