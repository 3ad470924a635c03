"""Detectors: the proximity test and its focused generalisation.

Both accept ``x`` as real exactly when a scalar statistic is below ``r / 2``:

* proximity: ``sup_{t in T} <x, t/||t||^2>``, i.e. ``x`` is closer to the
  origin than to every point of ``rT``;
* focused: ``max_{h in H} <x, h/||h||^2>`` for a finite direction set ``H``.

A statistic equal to ``r / 2`` is called fake: the acceptance region is the
open set ``{stat < r/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, PreconditionError
from .tricksets import TrickSet, as_vector, trickset_from_dict
from .widths import FocusSet

__all__ = [
    "Verdict",
    "ProximityDetector",
    "FocusedDetector",
    "proximity_verdict",
    "focused_statistic",
    "focused_verdict",
    "detector_from_dict",
]


@dataclass(frozen=True)
class Verdict:
    fake: bool
    statistic: float

    @property
    def label(self) -> str:
        return "fake" if self.fake else "real"


def _check_radius(r) -> float:
    r = float(r)
    if not r > 0 or not np.isfinite(r):
        raise PreconditionError(f"radius must be positive and finite, got {r}")
    return r


def _check_directions(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] == 0:
        raise PreconditionError("focused detector needs a non-empty list of directions")
    sq = np.sum(H**2, axis=1)
    if np.any(sq == 0):
        raise PreconditionError("focused detector directions must be nonzero")
    return H


def focused_statistic(H, x):
    """``max_h <x, h> / ||h||^2`` for one vector or each row of a batch."""
    H = _check_directions(H)
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.shape[-1] != H.shape[1]:
        raise DimensionError(f"vector dimension {X2.shape[-1]} != direction dimension {H.shape[1]}")
    scaled = H / np.sum(H**2, axis=1)[:, None]
    values = (X2 @ scaled.T).max(axis=1)
    return float(values[0]) if single else values


def proximity_verdict(T: TrickSet, r: float, x) -> Verdict:
    r = _check_radius(r)
    stat = T.scaled_support(as_vector(x, T.n))
    return Verdict(stat >= r / 2.0, stat)


def focused_verdict(H, r: float, x) -> Verdict:
    r = _check_radius(r)
    stat = focused_statistic(H, as_vector(x))
    return Verdict(stat >= r / 2.0, stat)


class _Detector:
    r: float

    def statistic(self, X):
        raise NotImplementedError

    def flags(self, X) -> np.ndarray:
        """Boolean array, ``True`` where a row is called fake."""
        return np.asarray(self.statistic(X)) >= self.r / 2.0

    def verdict(self, x) -> Verdict:
        stat = float(self.statistic(as_vector(x)))
        return Verdict(stat >= self.r / 2.0, stat)


@dataclass(frozen=True)
class ProximityDetector(_Detector):
    T: TrickSet
    r: float

    def __post_init__(self):
        object.__setattr__(self, "r", _check_radius(self.r))

    def statistic(self, X):
        return self.T.scaled_support(X)

    def with_radius(self, r: float) -> "ProximityDetector":
        return ProximityDetector(self.T, r)

    def to_dict(self) -> dict:
        return {"kind": "proximity", "r": self.r, "set": self.T.to_dict()}


@dataclass(frozen=True, eq=False)
class FocusedDetector(_Detector):
    """Focused test over directions ``H`` (rows), usually ``h = s/||s||^2``."""

    H: np.ndarray
    r: float

    def __post_init__(self):
        H = _check_directions(self.H).copy()
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "r", _check_radius(self.r))

    @classmethod
    def from_focus_set(cls, S: FocusSet, r: float) -> "FocusedDetector":
        return cls(S.h, r)

    def statistic(self, X):
        return focused_statistic(self.H, X)

    def with_radius(self, r: float) -> "FocusedDetector":
        return FocusedDetector(self.H, r)

    def to_dict(self) -> dict:
        return {"kind": "focused", "r": self.r, "focus": FocusSet.from_h(self.H).to_list()}


def detector_from_dict(d: dict, T: TrickSet | None = None, r: float | None = None):
    """Build a detector from JSON.

    The radius may come from ``d["r"]`` or from the ``r`` argument (a sweep
    supplies it per grid point).  A proximity detector without a ``"set"``
    field uses ``T``.  A focused detector takes focus points ``"focus"``
    (converted to ``h = s/||s||^2``) or raw directions ``"h"``.
    """
    kind = d.get("kind") if isinstance(d, dict) else None
    radius = d.get("r", r) if kind else None
    if radius is None:
        radius = 1.0
    if kind == "proximity":
        if "set" in d:
            T = trickset_from_dict(d["set"])
        if T is None:
            raise ConfigError("proximity detector needs a trick set")
        return ProximityDetector(T, radius)
    if kind == "focused":
        if "focus" in d:
            return FocusedDetector.from_focus_set(FocusSet(d["focus"]), radius)
        if "h" in d:
            return FocusedDetector(d["h"], radius)
        raise ConfigError("focused detector needs 'focus' or 'h'")
    raise ConfigError(f"unknown detector spec {d!r}")
