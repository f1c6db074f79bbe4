"""Named random streams.

Every random draw in the package comes from a Philox generator whose 128-bit
key is derived from a root seed and a tuple of labels, e.g.
``stream(seed, "circuit", layer, qubit)``.  Philox is counter based, so a
stream is fully determined by its key and the sequence of draws made from it;
no state is shared between streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_key(seed: int, *labels) -> int:
    """128-bit key for ``(seed, labels)``; labels are ints or strings."""
    h = hashlib.blake2b(digest_size=16, person=b"phaselab-rng")
    h.update(int(seed & MASK64).to_bytes(8, "little"))
    for lab in labels:
        if isinstance(lab, str):
            h.update(b"s" + len(lab).to_bytes(4, "little") + lab.encode())
        else:
            h.update(b"i" + int(lab).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for a named sub-stream of ``seed``."""
    key = derive_key(seed, *labels)
    bitgen = np.random.Philox(key=[key & MASK64, key >> 64])
    return np.random.Generator(bitgen)


def subseed(seed: int, *labels) -> int:
    """64-bit integer seed for a named child, for handing to other APIs."""
    return derive_key(seed, *labels) & MASK64
