import zlib

import numpy as np


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named stream of a root seed.

    Streams ("sampling", "noise", "init", ...) never share state, so
    re-running one stage does not perturb the others.
    """
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])
