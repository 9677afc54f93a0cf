"""Input validation helpers shared by the detectors and estimators.

scikit-learn's ``check_array`` rejects complex input, so the channel and
received-signal checks live here.
"""

import numbers

import numpy as np


def check_complex_matrix(h, name="H"):
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {h.shape}")
    if h.shape[0] < 1 or h.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    h = h.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(h)):
        raise ValueError(f"{name} contains non-finite entries")
    return h


def check_vector(v, length=None, name="y", dtype=np.float64):
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {length}")
    v = v.astype(dtype, copy=False)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_probability(value, name):
    if not isinstance(value, numbers.Real) or not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)
