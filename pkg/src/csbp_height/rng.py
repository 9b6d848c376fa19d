"""Named random streams derived from one master seed.

Every consumer of randomness asks for a stream by *role*, so that two
simulations sharing a seed also share, e.g., their Brownian increments
while their Poisson sampling clocks stay independent.
"""

import numpy as np

ROLES = {
    "brownian": 1,
    "jump_times": 2,
    "jump_sizes": 3,
    "poisson_sampler": 4,
    "bridge": 5,
    "gw": 6,
    "exp_window": 7,
    "fixtures": 8,
}


def stream(seed, role, *keys):
    """Return a PCG64 generator for ``role`` under master ``seed``.

    ``keys`` are extra non-negative integers (replication index, N, ...)
    appended to the spawn key, so every (seed, role, keys) cell gets an
    independent, reproducible stream regardless of how work is scheduled.
    """
    if role not in ROLES:
        raise KeyError(f"unknown random stream role {role!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(ROLES[role], *map(int, keys)))
    return np.random.Generator(np.random.PCG64(ss))


def seed_record(seed, role, *keys):
    return {"seed": int(seed), "role": role, "keys": [int(k) for k in keys]}
