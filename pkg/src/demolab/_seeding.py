"""Deterministic seed derivation.

Every random stream in an experiment is keyed by a tuple of small
non-negative integers appended to the master seed, so results do not
depend on execution order or on how work is split between processes.
"""

import numpy as np

# stable integer tags for spawn keys
STREAM_TAGS = {
    "phi": 1,
    "signal": 2,
    "gamma": 3,
    "trial": 4,
    "conc": 5,
    "mgf": 6,
    "pairs": 7,
    "subsets": 8,
    "stability": 9,
}


def _key(parts):
    out = []
    for p in parts:
        if isinstance(p, str):
            p = STREAM_TAGS[p]
        p = int(p)
        if p < 0:
            raise ValueError("seed key components must be non-negative")
        out.append(p)
    return tuple(out)


def derive_seed(master_seed, *parts):
    """Return a 64-bit integer seed derived from ``master_seed`` and ``parts``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=_key(parts))
    return int(ss.generate_state(1, np.uint64)[0])


def derive_rng(master_seed, *parts):
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=_key(parts)))
