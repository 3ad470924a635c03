"""Laws of the real data and reproducible, scheduling-independent sampling.

Trials are grouped into fixed-size blocks.  Block ``b`` of a stream draws from
its own generator, seeded by ``SeedSequence(master_seed, spawn_key=stream + (b,))``,
and trial ``i`` is row ``i - b * block_size`` of that block.  The block size is
a function of the distribution alone, so any partition of the trial range
across workers reproduces the same vectors bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError

__all__ = [
    "SeedSpec",
    "DataDistribution",
    "StandardGaussian",
    "IIDSymmetricBounded",
    "sample",
    "sample_trials",
    "block_ranges",
    "distribution_from_dict",
]

# target number of floats per block; keeps a block around 2 MB
_BLOCK_FLOATS = 1 << 18
_MAX_BLOCK = 4096


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus a stream path.

    ``spawn`` derives independent child streams, e.g. one for the real arm
    and one for the fake arm of an experiment.
    """

    master_seed: int
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise PreconditionError(f"master seed must be an integer in [0, 2**64), got {self.master_seed}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream", tuple(int(k) for k in self.stream))

    def spawn(self, key: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream + (int(key),))

    def block_generator(self, block: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.stream + (int(block),))
        return np.random.Generator(np.random.PCG64(ss))


class DataDistribution:
    n: int
    kind: str = ""
    bounded: bool = False

    @property
    def block_size(self) -> int:
        return int(max(1, min(_MAX_BLOCK, _BLOCK_FLOATS // self.n)))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n}


def _check_dim(n) -> int:
    if int(n) != n or n < 1:
        raise PreconditionError(f"dimension must be a positive integer, got {n}")
    return int(n)


@dataclass(frozen=True)
class StandardGaussian(DataDistribution):
    n: int
    kind = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "n", _check_dim(self.n))

    def draw(self, rng, size):
        # numpy's ziggurat sampler: exact, no central-limit shortcut
        return rng.standard_normal((size, self.n))


@dataclass(frozen=True)
class IIDSymmetricBounded(DataDistribution):
    """Independent symmetric coordinates with values in [-1, 1].

    ``kind`` is ``"rademacher"`` (uniform signs) or ``"uniform_symmetric"``
    (uniform on the interval).
    """

    n: int
    kind: str = "rademacher"
    bounded = True

    def __post_init__(self):
        object.__setattr__(self, "n", _check_dim(self.n))
        if self.kind not in ("rademacher", "uniform_symmetric"):
            raise PreconditionError(f"unknown bounded distribution kind {self.kind!r}")

    def draw(self, rng, size):
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=(size, self.n)).astype(float) - 1.0
        return rng.uniform(-1.0, 1.0, size=(size, self.n))


def block_ranges(start: int, stop: int, block_size: int):
    """Split ``[start, stop)`` into ``(block, lo, hi)`` pieces aligned to blocks."""
    out = []
    i = start
    while i < stop:
        b = i // block_size
        hi = min(stop, (b + 1) * block_size)
        out.append((b, i, hi))
        i = hi
    return out


def sample_trials(dist: DataDistribution, seed: SeedSpec, start: int, stop: int) -> np.ndarray:
    """Rows ``start .. stop - 1`` of the trial sequence defined by ``seed``."""
    if start < 0 or stop < start:
        raise PreconditionError(f"invalid trial range [{start}, {stop})")
    B = dist.block_size
    parts = []
    for b, lo, hi in block_ranges(start, stop, B):
        block = dist.draw(seed.block_generator(b), B)
        parts.append(block[lo - b * B : hi - b * B])
    if not parts:
        return np.empty((0, dist.n))
    return np.concatenate(parts, axis=0)


def sample(dist: DataDistribution, seed: SeedSpec, trial_index: int) -> np.ndarray:
    """One draw of the real data for the given trial."""
    if trial_index < 0:
        raise PreconditionError("trial index must be non-negative")
    return sample_trials(dist, seed, trial_index, trial_index + 1)[0]


def distribution_from_dict(d: dict) -> DataDistribution:
    try:
        kind, n = d["kind"], d["n"]
    except (KeyError, TypeError):
        raise ConfigError(f"distribution needs 'kind' and 'n', got {d!r}") from None
    if kind == "gaussian":
        return StandardGaussian(n)
    if kind in ("rademacher", "uniform_symmetric"):
        return IIDSymmetricBounded(n, kind)
    raise ConfigError(f"unknown distribution kind {kind!r}")
