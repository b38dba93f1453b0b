"""Named random streams derived from one master seed."""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def derive_seed(master, *names):
    """Return a 32-bit seed for the stream ``names`` under ``master``.

    The same (master, names) pair always gives the same seed, and distinct
    names give statistically independent streams.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key(n) for n in names))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def derive_rng(master, *names):
    return np.random.default_rng(derive_seed(master, *names))
