"""Per-individual draw streams for simulated likelihood and prediction."""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import ConfigError

SEQUENCE_KINDS = ("quasi-random", "pseudo-random")


@dataclass(frozen=True)
class LatentDrawPlan:
    """Seeded draw configuration.

    Each individual id hashes to its own stream, so the draws an individual
    receives do not depend on which other individuals are present, on their
    order, or on how work is split across threads. Quasi-random streams are
    independently scrambled Halton sequences.
    """

    n_draws: int = 1000
    seed: int = 0
    sequence_kind: str = "quasi-random"

    def __post_init__(self):
        if int(self.n_draws) < 1:
            raise ConfigError("n_draws must be at least 1")
        if self.sequence_kind not in SEQUENCE_KINDS:
            raise ConfigError(f"sequence_kind must be one of {SEQUENCE_KINDS}")

    def normal(self, ids: Sequence, dim: int) -> np.ndarray:
        """Standard normal draws shaped ``(len(ids), n_draws, dim)``."""
        ids = tuple(str(i) for i in ids)
        if dim == 0:
            return np.zeros((len(ids), self.n_draws, 0))
        return _normal_draws(self.seed, int(self.n_draws), self.sequence_kind, ids, int(dim)).copy()


def stream_key(individual_id: str) -> int:
    return zlib.crc32(str(individual_id).encode("utf-8"))


def individual_stream(seed: int, individual_id: str, n: int, dim: int, kind: str) -> np.ndarray:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, stream_key(individual_id), dim])
    rng = np.random.default_rng(ss)
    if kind == "pseudo-random":
        return rng.standard_normal((n, dim))
    u = qmc.Halton(d=dim, scramble=True, seed=rng).random(n)
    return ndtri(np.clip(u, 1e-15, 1.0 - 1e-15))


@lru_cache(maxsize=16)
def _normal_draws(seed, n, kind, ids, dim):
    out = np.empty((len(ids), n, dim))
    for i, ident in enumerate(ids):
        out[i] = individual_stream(seed, ident, n, dim, kind)
    out.setflags(write=False)
    return out
