"""Trick sets: the geometric sets of perturbations available to the adversary.

Every variant evaluates the scaled support functional

    x  ->  sup_{t in T} <x, t / ||t||^2>

in closed form, so neither the detectors nor the width estimators ever run an
inner optimisation loop.  The highly symmetric variants additionally expose
the sign-flip search: the support ``I`` maximising ``||x_I|| / nu(I)``.

Internally supports are 0-based tuples of coordinate indices.  The JSON form
uses 1-based indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NotHighlySymmetricError, PreconditionError

__all__ = [
    "TrickSet",
    "NormThreshold",
    "SparseNorm",
    "SupportFamily",
    "HalfCoordinate",
    "Fake",
    "GiveUp",
    "as_vector",
    "inradius",
    "scaled_support",
    "sign_flip_candidate",
    "membership",
    "trickset_from_dict",
]

_SQRT3_2 = math.sqrt(3.0) / 2.0


def as_vector(x, n: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float array, checking its dimension."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise PreconditionError("vector entries must be finite")
    if n is not None and v.size != n:
        raise DimensionError(f"vector has dimension {v.size}, set lives in dimension {n}")
    return v


def _as_batch(x, n: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n:
        raise DimensionError(f"expected vectors of dimension {n}, got shape {np.shape(x)}")
    return X, single


# -- adversary outcomes ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fake:
    """A realised corruption: ``fake`` is ``x + r * trick``.

    ``support`` is the index set whose signs were reversed (empty for
    strategies that do not flip signs).
    """

    fake: np.ndarray
    trick: np.ndarray
    support: tuple[int, ...] = ()

    @property
    def gave_up(self) -> bool:
        return False


@dataclass(frozen=True)
class GiveUp:
    """The adversary declined to corrupt the observation."""

    support: tuple[int, ...] = ()

    @property
    def gave_up(self) -> bool:
        return True


# -- the variants --------------------------------------------------------------


class TrickSet:
    """Common behaviour of all trick-set variants.

    Subclasses provide ``n``, ``inradius``, ``scaled_support`` and, when
    ``highly_symmetric`` is true, ``_flip_mask``.
    """

    n: int
    highly_symmetric: bool = False
    kind: str = ""

    @property
    def inradius(self) -> float:
        raise NotImplementedError

    def scaled_support(self, x):
        """Closed-form ``sup_t <x, t/||t||^2>`` for one vector or a batch of rows."""
        X, single = _as_batch(x, self.n)
        values = self._scaled_support_rows(X)
        return float(values[0]) if single else values

    def _scaled_support_rows(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _flip_mask(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (mask of I*, ||x_{I*}||, nu(I*)) for each row of ``X``."""
        raise NotHighlySymmetricError(f"{type(self).__name__} is not highly symmetric")

    def _flip_realisable(self, X: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return np.ones(X.shape[0], dtype=bool)

    def flip_support(self, x) -> tuple[int, ...]:
        """The maximising support ``I*`` for a single vector (0-based)."""
        v = as_vector(x, self.n)
        mask, _, _ = self._flip_mask(v[None, :])
        return tuple(int(i) for i in np.flatnonzero(mask[0]))

    def sign_flip_batch(self, X, r: float):
        """Vectorised sign flip over the rows of ``X``.

        Returns ``(fakes, tricks, success)``.  Rows where the flip is not
        realisable inside ``rT`` keep ``fake == x`` and a zero trick, and are
        marked ``False`` in ``success``.
        """
        if not r > 0:
            raise PreconditionError(f"radius must be positive, got {r}")
        X, _ = _as_batch(X, self.n)
        mask, norm_I, nu, realisable = self.sign_flip_parts(X)
        success = (2.0 * norm_I >= r * nu) & realisable
        flip = mask & success[:, None]
        fakes = np.where(flip, -X, X)
        tricks = np.where(flip, -2.0 * X / r, 0.0)
        return fakes, tricks, success

    def sign_flip_parts(self, X):
        """Radius-free part of the sign flip for the rows of ``X``.

        Returns ``(mask, norm_I, nu, realisable)``: the chosen support as a
        boolean mask, ``||x_{I*}||``, ``nu(I*)`` and whether ``-2 x_{I*}`` has a
        support the set admits.  The flip succeeds at radius ``r`` exactly when
        ``realisable & (2 * norm_I >= r * nu)``.
        """
        if not self.highly_symmetric:
            raise NotHighlySymmetricError(f"{type(self).__name__} is not highly symmetric")
        X, _ = _as_batch(X, self.n)
        mask, norm_I, nu = self._flip_mask(X)
        return mask, norm_I, nu, self._flip_realisable(X, mask)

    def sign_flip_candidate(self, x, r: float) -> Fake | GiveUp:
        v = as_vector(x, self.n)
        fakes, tricks, success = self.sign_flip_batch(v[None, :], r)
        support = self.flip_support(v)
        if not success[0]:
            return GiveUp(support)
        return Fake(fakes[0], tricks[0], support)

    def membership(self, t, tol: float = 0.0) -> bool:
        raise NotImplementedError

    def canonical_trick(self) -> np.ndarray:
        """A fixed member of the set, used by the fixed-trick baseline."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_dim(n) -> int:
    if int(n) != n or n < 1:
        raise PreconditionError(f"dimension must be a positive integer, got {n}")
    return int(n)


def _check_rho(rho) -> float:
    rho = float(rho)
    if not (rho > 0 and math.isfinite(rho)):
        raise PreconditionError(f"norm threshold must be positive and finite, got {rho}")
    return rho


@dataclass(frozen=True)
class NormThreshold(TrickSet):
    """All vectors of Euclidean norm at least ``rho``."""

    n: int
    rho: float = 1.0
    highly_symmetric = True
    kind = "norm_threshold"

    def __post_init__(self):
        object.__setattr__(self, "n", _check_dim(self.n))
        object.__setattr__(self, "rho", _check_rho(self.rho))

    @property
    def inradius(self) -> float:
        return self.rho

    def _scaled_support_rows(self, X):
        return np.linalg.norm(X, axis=1) / self.rho

    def _flip_mask(self, X):
        mask = np.ones(X.shape, dtype=bool)
        return mask, np.linalg.norm(X, axis=1), np.full(X.shape[0], self.rho)

    def membership(self, t, tol=0.0):
        v = as_vector(t, self.n)
        return bool(np.linalg.norm(v) >= self.rho - tol)

    def canonical_trick(self):
        t = np.zeros(self.n)
        t[0] = self.rho
        return t

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "rho": self.rho}


@dataclass(frozen=True)
class SparseNorm(TrickSet):
    """Vectors with at most ``s`` nonzero coordinates and norm at least ``rho``."""

    n: int
    s: int
    rho: float = 1.0
    highly_symmetric = True
    kind = "sparse_norm"

    def __post_init__(self):
        n = _check_dim(self.n)
        if int(self.s) != self.s or not 1 <= self.s <= n:
            raise PreconditionError(f"sparsity must satisfy 1 <= s <= n, got s={self.s}, n={n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "rho", _check_rho(self.rho))

    @property
    def inradius(self) -> float:
        return self.rho

    def _top(self, X):
        # stable sort on -|x| puts equal magnitudes in index order, so the
        # selected support is the lexicographically smallest maximiser
        order = np.argsort(-np.abs(X), axis=1, kind="stable")[:, : self.s]
        return np.sort(order, axis=1)

    def _scaled_support_rows(self, X):
        idx = self._top(X)
        top = np.take_along_axis(X, idx, axis=1)
        return np.sqrt((top * top).sum(axis=1)) / self.rho

    def _flip_mask(self, X):
        idx = self._top(X)
        mask = np.zeros(X.shape, dtype=bool)
        np.put_along_axis(mask, idx, True, axis=1)
        top = np.take_along_axis(X, idx, axis=1)
        return mask, np.sqrt((top * top).sum(axis=1)), np.full(X.shape[0], self.rho)

    def membership(self, t, tol=0.0):
        v = as_vector(t, self.n)
        return bool(np.count_nonzero(v) <= self.s and np.linalg.norm(v) >= self.rho - tol)

    def canonical_trick(self):
        t = np.zeros(self.n)
        t[0] = self.rho
        return t

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "s": self.s, "rho": self.rho}


@dataclass(frozen=True, eq=False)
class SupportFamily(TrickSet):
    """An explicit highly symmetric set given by supports and norm thresholds.

    A vector belongs to the set when its support is exactly one of the listed
    supports ``I`` and its norm is at least ``nu(I)``.  ``entries`` is a
    sequence of ``(support, threshold)`` pairs with 0-based supports; it is
    stored sorted lexicographically by support so that ``argmax`` ties resolve
    to the smallest support.
    """

    n: int
    entries: tuple = ()
    _matrix: np.ndarray = field(init=False, repr=False)
    _thresholds: np.ndarray = field(init=False, repr=False)
    _lookup: dict = field(init=False, repr=False)
    highly_symmetric = True
    kind = "support_family"

    def __post_init__(self):
        n = _check_dim(self.n)
        cleaned = []
        for support, nu in self.entries:
            idx = tuple(int(i) for i in support)
            if not idx:
                raise PreconditionError("supports must be non-empty")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                idx_sorted = tuple(sorted(idx))
                if len(set(idx_sorted)) != len(idx_sorted):
                    raise PreconditionError(f"support {idx} repeats an index")
                idx = idx_sorted
            if idx[0] < 0 or idx[-1] >= n:
                raise PreconditionError(f"support {idx} out of range for n={n}")
            nu = float(nu)
            if not (nu > 0 and math.isfinite(nu)):
                raise PreconditionError(f"threshold for support {idx} must be positive, got {nu}")
            cleaned.append((idx, nu))
        if not cleaned:
            raise PreconditionError("a support family needs at least one entry")
        cleaned.sort(key=lambda e: e[0])
        lookup = dict(cleaned)
        if len(lookup) != len(cleaned):
            raise PreconditionError("support family entries must have distinct supports")
        matrix = np.zeros((len(cleaned), n))
        for k, (idx, _) in enumerate(cleaned):
            matrix[k, list(idx)] = 1.0
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "entries", tuple(cleaned))
        object.__setattr__(self, "_matrix", matrix)
        object.__setattr__(self, "_thresholds", np.array([nu for _, nu in cleaned]))
        object.__setattr__(self, "_lookup", lookup)

    def __eq__(self, other):
        return isinstance(other, SupportFamily) and (self.n, self.entries) == (other.n, other.entries)

    def __hash__(self):
        return hash((self.n, self.entries))

    @property
    def inradius(self) -> float:
        return float(self._thresholds.min())

    def _ratios(self, X):
        norms = np.sqrt((X * X) @ self._matrix.T)
        return norms, norms / self._thresholds

    def _scaled_support_rows(self, X):
        return self._ratios(X)[1].max(axis=1)

    def _flip_mask(self, X):
        norms, ratios = self._ratios(X)
        best = ratios.argmax(axis=1)
        rows = np.arange(X.shape[0])
        mask = self._matrix[best] > 0
        return mask, norms[rows, best], self._thresholds[best]

    def _flip_realisable(self, X, mask):
        # -2 x_I / r has support exactly I only if x has no zero on I
        return ~np.any(mask & (X == 0.0), axis=1)

    def membership(self, t, tol=0.0):
        v = as_vector(t, self.n)
        nu = self._lookup.get(tuple(int(i) for i in np.flatnonzero(v)))
        return nu is not None and bool(np.linalg.norm(v) >= nu - tol)

    def canonical_trick(self):
        idx, nu = self.entries[0]
        t = np.zeros(self.n)
        t[list(idx)] = nu / math.sqrt(len(idx))
        return t

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "entries": [{"support": [i + 1 for i in idx], "threshold": nu} for idx, nu in self.entries],
        }


@dataclass(frozen=True)
class HalfCoordinate(TrickSet):
    """Unit vectors whose first coordinate is +1/2 or -1/2.

    Not highly symmetric: membership depends on the value of the first
    coordinate, not only on the support and the norm.
    """

    n: int
    highly_symmetric = False
    kind = "half_coordinate"

    def __post_init__(self):
        n = _check_dim(self.n)
        if n < 2:
            raise PreconditionError("the half-coordinate set is empty in dimension 1")
        object.__setattr__(self, "n", n)

    @property
    def inradius(self) -> float:
        return 1.0

    def _scaled_support_rows(self, X):
        return 0.5 * np.abs(X[:, 0]) + _SQRT3_2 * np.linalg.norm(X[:, 1:], axis=1)

    def membership(self, t, tol=0.0):
        v = as_vector(t, self.n)
        return bool(abs(np.linalg.norm(v) - 1.0) <= tol and abs(abs(v[0]) - 0.5) <= tol)

    def canonical_trick(self):
        t = np.zeros(self.n)
        t[0] = 0.5
        t[1] = _SQRT3_2
        return t

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}


# -- functional interface --------------------------------------------------------


def inradius(T: TrickSet) -> float:
    return T.inradius


def scaled_support(T: TrickSet, x):
    return T.scaled_support(x)


def sign_flip_candidate(T: TrickSet, x, r: float) -> Fake | GiveUp:
    """Sign-flip move against ``x`` at radius ``r``.

    Picks ``I* = argmax_I ||x_I|| / nu(I)`` and, when ``||2 x_{I*}|| >= r nu(I*)``,
    returns the fake obtained by reversing the signs of ``x`` on ``I*`` together
    with the trick ``t = -2 x_{I*} / r``.  Otherwise the adversary gives up.
    """
    if not r > 0:
        raise PreconditionError(f"radius must be positive, got {r}")
    return T.sign_flip_candidate(x, r)


def membership(T: TrickSet, t, tol: float = 0.0) -> bool:
    if tol < 0:
        raise PreconditionError("tolerance must be non-negative")
    return T.membership(t, tol)


_KINDS = {
    "norm_threshold": lambda d: NormThreshold(d["n"], d.get("rho", 1.0)),
    "sparse_norm": lambda d: SparseNorm(d["n"], d["s"], d.get("rho", 1.0)),
    "support_family": lambda d: SupportFamily(
        d["n"], tuple(([i - 1 for i in e["support"]], e["threshold"]) for e in d["entries"])
    ),
    "half_coordinate": lambda d: HalfCoordinate(d["n"]),
}


def trickset_from_dict(d: dict) -> TrickSet:
    """Build a trick set from its tagged JSON form."""
    try:
        kind = d["kind"]
        build = _KINDS[kind]
    except (KeyError, TypeError):
        raise ConfigError(f"unknown or missing trick set kind in {d!r}") from None
    try:
        return build(d)
    except KeyError as exc:
        raise ConfigError(f"trick set {kind!r} is missing field {exc.args[0]!r}") from None
