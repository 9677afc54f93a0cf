from dataclasses import dataclass, field

import numpy as np


@dataclass
class DetectionResult:
    """Output of one detector call.

    ``best_candidate`` holds real PAM coordinates (length 2N) and ``bits``
    their Gray labels. ``diagnostics`` is detector specific; HMC reports
    ``acceptance_rate`` and ``chain_best_scores``, every detector reports
    ``wall_time``.
    """

    bits: np.ndarray
    best_candidate: np.ndarray
    best_log_likelihood: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self):
        return self.diagnostics.get("acceptance_rate")
