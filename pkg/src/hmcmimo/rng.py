"""Counter-based random substreams.

Every random stream in a simulation is addressed by a tuple of integers
(e.g. ``(snr_index, trial_index, role)``) under one master seed, so the
numbers a trial sees never depend on the order trials are scheduled in.
"""

import numpy as np

#: Role tags used to separate the streams of one trial.
ROLE_CHANNEL = 0
ROLE_BITS = 1
ROLE_NOISE = 2
ROLE_DETECTOR = 100  # detector i uses ROLE_DETECTOR + i


def substream(master_seed, *key):
    """Return the ``SeedSequence`` addressed by ``key`` under ``master_seed``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


def child(seed_seq, index):
    """Deterministic child ``index`` of ``seed_seq`` (independent of spawn order)."""
    return np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key + (int(index),))


def as_seed_sequence(random_state):
    """Coerce ``None``, int(s), a ``SeedSequence`` or a ``Generator`` to a ``SeedSequence``.

    A ``Generator`` is consumed once (one 128-bit draw) to seed the sequence.
    """
    if isinstance(random_state, np.random.SeedSequence):
        return random_state
    if isinstance(random_state, np.random.Generator):
        words = random_state.integers(0, 2**32, size=4, dtype=np.uint64)
        return np.random.SeedSequence([int(w) for w in words])
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return np.random.SeedSequence(random_state)
    if isinstance(random_state, (list, tuple)):
        return np.random.SeedSequence([int(v) for v in random_state])
    raise TypeError(f"cannot derive a random stream from {type(random_state).__name__}")


def as_generator(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(as_seed_sequence(random_state))
