"""Gray-coded square QAM, handled one real dimension (PAM) at a time."""

from dataclasses import dataclass, field

import numpy as np

# modulation name -> points per real dimension
_LEVELS = {"QPSK": 2, "16QAM": 4, "64QAM": 8}
_ALIASES = {"QAM4": "QPSK", "4QAM": "QPSK", "QAM16": "16QAM", "QAM64": "64QAM"}


def normalize_modulation(name):
    key = str(name).strip().upper().replace("-", "")
    key = _ALIASES.get(key, key)
    if key not in _LEVELS:
        raise ValueError(f"unsupported modulation {name!r}; expected one of {sorted(_LEVELS)}")
    return key


@dataclass(frozen=True)
class Constellation:
    """PAM levels of one real dimension of a square QAM constellation.

    Attributes
    ----------
    modulation : str
        ``"QPSK"``, ``"16QAM"`` or ``"64QAM"``.
    pam : ndarray, shape (q,)
        Ascending, symmetric, uniformly spaced levels with unit average
        complex-symbol power, ``(2 / q) * sum(pam**2) == 1``.
    index_bits : ndarray, shape (q, bits_per_real_dim)
        Binary-reflected Gray label of each level, MSB first.
    """

    modulation: str
    pam: np.ndarray
    index_bits: np.ndarray = field(repr=False)
    _label_to_index: np.ndarray = field(repr=False)

    @property
    def q(self):
        return self.pam.shape[0]

    @property
    def bits_per_real_dim(self):
        return self.index_bits.shape[1]

    @property
    def midpoints(self):
        return 0.5 * (self.pam[:-1] + self.pam[1:])

    @property
    def symbol_power_per_dim(self):
        return float(np.mean(self.pam**2))


def build_constellation(modulation):
    modulation = normalize_modulation(modulation)
    q = _LEVELS[modulation]
    k = int(np.log2(q))
    levels = np.arange(-(q - 1), q, 2, dtype=np.float64)
    pam = levels / np.sqrt(2.0 * (q * q - 1) / 3.0)
    idx = np.arange(q)
    gray = idx ^ (idx >> 1)
    index_bits = ((gray[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    label_to_index = np.empty(q, dtype=np.intp)
    label_to_index[gray] = idx
    for arr in (pam, index_bits, label_to_index):
        arr.setflags(write=False)
    return Constellation(modulation, pam, index_bits, label_to_index)


def bits_to_indices(bits, c, n_real):
    bits = np.asarray(bits)
    k = c.bits_per_real_dim
    if bits.shape[-1] != n_real * k:
        raise ValueError(f"expected {n_real * k} bits for {n_real} real dimensions, got {bits.shape[-1]}")
    groups = bits.reshape(bits.shape[:-1] + (n_real, k)).astype(np.intp)
    labels = groups @ (1 << np.arange(k - 1, -1, -1))
    return c._label_to_index[labels]


def indices_to_bits(indices, c):
    indices = np.asarray(indices, dtype=np.intp)
    out = c.index_bits[indices]
    return out.reshape(indices.shape[:-1] + (-1,))


def modulate_bits(bits, c, n_real):
    """Map ``n_real * bits_per_real_dim`` bits to ``n_real`` PAM coordinates."""
    return c.pam[bits_to_indices(bits, c, n_real)]


def quantize_index(x, c):
    """Index of the nearest level; exact midpoints go to the lower level."""
    return np.searchsorted(c.midpoints, np.asarray(x, dtype=np.float64), side="left")


def quantize(x, c):
    out = c.pam[quantize_index(x, c)]
    return out if np.ndim(out) else float(out)


def demap_bits(symbols, c):
    """Inverse of :func:`modulate_bits`; off-grid inputs are quantized first."""
    symbols = np.atleast_1d(np.asarray(symbols, dtype=np.float64))
    return indices_to_bits(quantize_index(symbols, c), c)


def count_bit_errors(tx_bits, rx_bits):
    tx_bits = np.asarray(tx_bits)
    rx_bits = np.asarray(rx_bits)
    if tx_bits.shape != rx_bits.shape:
        raise ValueError(f"bit vectors differ in shape: {tx_bits.shape} vs {rx_bits.shape}")
    return int(np.count_nonzero(tx_bits != rx_bits))


def random_bits(n_bits, rng):
    return rng.integers(0, 2, size=n_bits, dtype=np.uint8)
