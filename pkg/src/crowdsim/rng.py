"""Named, independently seeded random substreams and the samplers the engine draws from."""

from __future__ import annotations

import random
from typing import Sequence

from numpy.random import SeedSequence

from .config import Pert, ScaledBeta, SimilarityDist, Triangular

STREAMS = (
    "task_arrivals",
    "worker_arrivals",
    "durations",
    "decisions",
    "scores",
    "similarity",
    "experience",
    "reliability",
    "skills",
    "registration_timing",
    "submission_timing",
    "repost",
    "attributes",
)


class RngStreams:
    """One ``random.Random`` per named stream, keyed off (seed, replication, stream index).

    Draws on one stream never shift another, so adding an unrelated event
    kind leaves the rest of a run's randomness untouched.
    """

    def __init__(self, seed: int, replication: int = 0) -> None:
        self.seed = seed
        self.replication = replication
        self._streams: dict[str, random.Random] = {}
        for idx, name in enumerate(STREAMS):
            state = SeedSequence(seed, spawn_key=(replication, idx)).generate_state(2, dtype="uint64")
            self._streams[name] = random.Random(int(state[0]) << 64 | int(state[1]))

    def __getitem__(self, name: str) -> random.Random:
        return self._streams[name]

    def __getattr__(self, name: str) -> random.Random:
        try:
            return self.__dict__["_streams"][name]
        except KeyError:
            raise AttributeError(name) from None


def triangular(rng: random.Random, d: Triangular) -> float:
    return rng.triangular(d.low, d.high, d.mode)


def scaled_beta(rng: random.Random, d: ScaledBeta) -> float:
    return d.low + (d.high - d.low) * rng.betavariate(d.alpha, d.beta)


def pert(rng: random.Random, d: Pert, lam: float = 4.0) -> float:
    """Beta-PERT draw on ``[low, high]`` with the usual shape weight of 4."""
    span = d.high - d.low
    a = 1.0 + lam * (d.mode - d.low) / span
    b = 1.0 + lam * (d.high - d.mode) / span
    return d.low + span * rng.betavariate(a, b)


def similarity_factor(rng: random.Random, d: SimilarityDist) -> float:
    if d.mode == "fixed":
        return d.level
    if d.mode == "band":
        return min(1.0, max(0.0, rng.uniform(d.level - d.band, d.level + d.band)))
    return rng.uniform(d.low, d.high)


def sample_set(rng: random.Random, universe: Sequence[str], k: int) -> frozenset[str]:
    return frozenset(rng.sample(list(universe), k))
