"""Stochastic MIMO detection with Hamiltonian Monte Carlo and heavy-tailed mixture priors."""

from .baselines import detect_ml_bruteforce, detect_mmse, siso_awgn_ber
from .channel import (
    RealizedSystem,
    apply_kronecker_correlation,
    complex_to_real,
    draw_rayleigh_channel,
    noise_sigma_from_snr,
    simulate_received,
)
from .constellation import Constellation, build_constellation, count_bit_errors, demap_bits, modulate_bits, quantize
from .estimators import HMCDetector, MGSDetector, MLDetector, MMSEDetector
from .harness import BerRecord, ExperimentConfig, estimate_complexity_report, run_experiment, write_csv
from .hmc import HmcConfig, detect_hmc, hmc_chain, leapfrog
from .mgs import MgsConfig, detect_mgs, gibbs_conditional, mgs_chain
from .posterior import (
    PhaseState,
    PosteriorModel,
    build_posterior,
    candidate_log_likelihood,
    grad_potential,
    hamiltonian,
    potential,
)
from .priors import PriorFamily, PriorSpec, default_tuned_params, tuned_prior
from .result import DetectionResult

__version__ = "0.1.0"
