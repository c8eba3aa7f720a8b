import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (root seed, key path).

    Streams depend only on their keys, never on how many other streams were
    created before, so work items can run in any order or process.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
