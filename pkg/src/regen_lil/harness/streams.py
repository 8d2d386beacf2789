"""Counter-based random streams keyed by (master_seed, experiment kind, replicate).

Each stream is a Philox generator seeded from a SeedSequence over the key, so
the draws of replicate ``i`` never depend on which worker runs it or in what
order replicates are scheduled.
"""
from __future__ import annotations

import numpy as np

KIND_CODES = {
    "clt": 1,
    "lil": 2,
    "bm_lil": 3,
    "validate": 4,
    "theta_check": 5,
    "cp_approx": 6,
    "sinv": 7,
}

MAX_SEED = 2 ** 64 - 1


def stream_id(kind: str, replicate: int) -> str:
    return f"{kind}:{replicate}"


def make_stream(master_seed: int, kind: str, replicate: int) -> np.random.Generator:
    if not 0 <= master_seed <= MAX_SEED:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    if kind not in KIND_CODES:
        raise ValueError(f"unknown stream kind {kind!r}")
    if replicate < 0:
        raise ValueError("replicate index must be nonnegative")
    seq = np.random.SeedSequence([master_seed, KIND_CODES[kind], replicate])
    return np.random.Generator(np.random.Philox(seq))


class StreamRegistry:
    """Hands out streams and refuses to issue the same key twice."""

    def __init__(self, master_seed: int):
        self.master_seed = master_seed
        self._issued = set()

    def get(self, kind: str, replicate: int) -> tuple[str, np.random.Generator]:
        sid = stream_id(kind, replicate)
        if sid in self._issued:
            raise RuntimeError(f"stream {sid} already issued for seed {self.master_seed}")
        self._issued.add(sid)
        return sid, make_stream(self.master_seed, kind, replicate)

    @property
    def issued(self) -> frozenset:
        return frozenset(self._issued)
