"""Adversary strategies that turn an observed real vector into a fake.

``SignFlip`` is the optimal insider move for highly symmetric trick sets: it
reverses the signs of ``x`` on the support maximising ``||x_I|| / nu(I)``,
which leaves the law of ``x`` unchanged.  ``FixedTrick`` ignores ``x`` and
always adds the same ``r * t0``; it serves as an outsider-style baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from ._parallel import map_blocks
from .distributions import DataDistribution, SeedSpec, sample_trials
from .errors import ConfigError, NotHighlySymmetricError, PreconditionError
from .tricksets import Fake, GiveUp, TrickSet, as_vector, trickset_from_dict

__all__ = [
    "Fake",
    "GiveUp",
    "SignFlip",
    "FixedTrick",
    "attack",
    "success_probability",
    "strategy_from_dict",
]


def _check_radius(r) -> float:
    r = float(r)
    if not r > 0:
        raise PreconditionError(f"radius must be positive, got {r}")
    return r


@dataclass(frozen=True)
class SignFlip:
    T: TrickSet

    def __post_init__(self):
        if not self.T.highly_symmetric:
            raise NotHighlySymmetricError(
                f"sign flipping needs a highly symmetric trick set, got {type(self.T).__name__}"
            )

    def attack(self, x, r: float) -> Fake | GiveUp:
        return self.T.sign_flip_candidate(x, _check_radius(r))

    def attack_batch(self, X, r: float):
        """``(fakes, success)`` for every row of ``X``; give-ups keep ``x``."""
        fakes, _, success = self.T.sign_flip_batch(X, _check_radius(r))
        return fakes, success

    def to_dict(self) -> dict:
        return {"kind": "sign_flip", "set": self.T.to_dict()}


@dataclass(frozen=True, eq=False)
class FixedTrick:
    T: TrickSet
    trick: np.ndarray

    def __post_init__(self):
        t = as_vector(self.trick, self.T.n).copy()
        if not self.T.membership(t, 1e-9):
            raise PreconditionError("the fixed trick must belong to the trick set")
        t.setflags(write=False)
        object.__setattr__(self, "trick", t)

    @classmethod
    def canonical(cls, T: TrickSet) -> "FixedTrick":
        return cls(T, T.canonical_trick())

    def attack(self, x, r: float) -> Fake:
        r = _check_radius(r)
        v = as_vector(x, self.T.n)
        return Fake(v + r * self.trick, self.trick.copy())

    def attack_batch(self, X, r: float):
        r = _check_radius(r)
        X = np.asarray(X, dtype=float)
        return X + r * self.trick, np.ones(X.shape[0], dtype=bool)

    def to_dict(self) -> dict:
        return {"kind": "fixed_trick", "set": self.T.to_dict(), "trick": self.trick.tolist()}


def attack(strategy, x, r: float) -> Fake | GiveUp:
    return strategy.attack(x, r)


def _success_block(strategy, dist, seed, r, lo, hi):
    _, success = strategy.attack_batch(sample_trials(dist, seed, lo, hi), r)
    return int(success.sum())


def success_probability(
    strategy, dist: DataDistribution, r: float, N: int, seed: SeedSpec, executor=None
) -> float:
    """Fraction of ``N`` independent draws on which the strategy produces a fake."""
    if int(N) != N or N < 1:
        raise PreconditionError(f"need at least one trial, got {N}")
    r = _check_radius(r)
    counts = map_blocks(partial(_success_block, strategy, dist, seed, r), int(N), dist.block_size, executor)
    return sum(counts) / int(N)


def strategy_from_dict(d: dict, T: TrickSet | None = None):
    """Build a strategy from JSON; ``"set"`` overrides the default trick set ``T``."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"adversary spec needs a 'kind', got {d!r}")
    if "set" in d:
        T = trickset_from_dict(d["set"])
    if T is None:
        raise ConfigError("adversary spec needs a trick set")
    if d["kind"] == "sign_flip":
        return SignFlip(T)
    if d["kind"] == "fixed_trick":
        return FixedTrick(T, d["trick"]) if "trick" in d else FixedTrick.canonical(T)
    raise ConfigError(f"unknown adversary kind {d['kind']!r}")
