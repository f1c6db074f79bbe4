"""SampleSet container and its file formats (hex bitstrings, probability CSV)."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass
class SampleSet:
    """Bitstrings (as integers, qubit 0 = most significant bit) with ideal probabilities."""

    n: int
    bitstrings: np.ndarray
    probs: Optional[np.ndarray] = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bitstrings = np.asarray(self.bitstrings, dtype=np.int64)
        if self.probs is not None:
            self.probs = np.asarray(self.probs, dtype=float)
            if self.probs.shape != self.bitstrings.shape:
                raise ValueError("probs and bitstrings differ in length")
            if np.any(self.probs < 0) or np.any(self.probs > 1):
                raise ValueError("probabilities must lie in [0, 1]")
        if self.bitstrings.size and (self.bitstrings.min() < 0 or self.bitstrings.max() >= 2**self.n):
            raise ValueError("bitstring out of range for n")

    def __len__(self):
        return int(self.bitstrings.size)

    @property
    def dim(self) -> int:
        return 2**self.n

    def subset(self, idx) -> "SampleSet":
        p = None if self.probs is None else self.probs[idx]
        return SampleSet(self.n, self.bitstrings[idx], p, dict(self.source))

    def with_probs(self, dist: np.ndarray) -> "SampleSet":
        """Attach ideal probabilities looked up in a full distribution."""
        return SampleSet(self.n, self.bitstrings, np.asarray(dist)[self.bitstrings], dict(self.source))

    def bits(self) -> np.ndarray:
        """Boolean matrix (samples x n), column q is qubit q."""
        shifts = np.arange(self.n - 1, -1, -1)
        return ((self.bitstrings[:, None] >> shifts) & 1).astype(bool)


_HEX = re.compile(r"^[0-9a-fA-F]+$")


def write_hex(path, samples: SampleSet) -> None:
    width = max(1, (samples.n + 3) // 4)
    with open(path, "w") as fh:
        fh.write(f"# n={samples.n}\n")
        for b in samples.bitstrings:
            fh.write(f"{int(b):0{width}x}\n")


def read_hex(path, n: Optional[int] = None) -> SampleSet:
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*n\s*=\s*(\d+)", line)
                if m and n is None:
                    n = int(m.group(1))
                continue
            if not _HEX.match(line):
                raise ValueError(f"{path}:{lineno}: not a hex bitstring")
            vals.append(int(line, 16))
    if n is None:
        raise ValueError(f"{path}: qubit count unknown (no '# n=' header and none given)")
    return SampleSet(n, np.array(vals, dtype=np.int64))


def write_probs_csv(path, probs: Sequence[float]) -> None:
    with open(path, "w") as fh:
        fh.write("prob\n")
        for p in probs:
            fh.write(f"{float(p)!r}\n")


def read_probs_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "prob":
            raise ValueError(f"{path}: expected header 'prob'")
        return np.array([float(x) for x in fh if x.strip()])
