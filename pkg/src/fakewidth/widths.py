"""Width functionals: Monte Carlo estimators, closed forms and focused bounds.

For a data law X the scaled width of a trick set is ``E sup_t <X, t/||t||^2>``
and the width of a finite focus set S is ``E max_s <X, s>``.  With Gaussian X
these are the scaled Gaussian width and Gaussian width; with any other law
they are the X-widths.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.spatial import ConvexHull

from ._parallel import map_blocks
from .distributions import DataDistribution, SeedSpec, sample_trials
from .errors import (
    ConfigError,
    DimensionError,
    NoValidFocusSetError,
    PreconditionError,
    UndecidableError,
)
from .tricksets import HalfCoordinate, NormThreshold, SparseNorm, SupportFamily, TrickSet

__all__ = [
    "WidthEstimate",
    "FocusSet",
    "PolarCheck",
    "expected_gaussian_norm",
    "estimate_scaled_width",
    "estimate_width",
    "analytic_scaled_width",
    "verify_polar_condition",
    "assess_candidates",
    "focused_width_upper_bound",
    "width_report",
]

log = logging.getLogger(__name__)

_SQRT3_2 = math.sqrt(3.0) / 2.0
# exact hulls become expensive beyond this many coordinates
_MAX_HULL_DIM = 8
_MAX_SUPPORTS = 5000


@dataclass(frozen=True)
class WidthEstimate:
    """Sample mean of a width functional with its standard error."""

    mean: float
    std_error: float
    samples: int
    kind: str

    @classmethod
    def from_values(cls, values, kind: str) -> "WidthEstimate":
        values = np.asarray(values, dtype=float)
        N = values.size
        if N < 2:
            raise PreconditionError("a width estimate needs at least two samples")
        return cls(float(values.mean()), float(values.std(ddof=1) / math.sqrt(N)), N, kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mean, "std_error": self.std_error, "n_samples": self.samples}


@dataclass(frozen=True, eq=False)
class FocusSet:
    """A finite origin-symmetric set of focus directions (one per row)."""

    points: np.ndarray

    def __post_init__(self):
        P = np.array(self.points, dtype=float)
        if P.ndim != 2 or P.shape[0] == 0 or P.shape[1] == 0:
            raise PreconditionError("a focus set needs at least one point")
        if not np.all(np.isfinite(P)):
            raise PreconditionError("focus points must be finite")
        norms = np.linalg.norm(P, axis=1)
        if np.any(norms == 0):
            raise PreconditionError("focus sets may not contain the zero vector")
        for p, size in zip(P, norms):
            gap = np.abs(P + p).max(axis=1).min()
            if gap > 1e-12 * max(1.0, size):
                raise PreconditionError(f"focus set is not origin-symmetric: -{p.tolist()} is missing")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def h(self) -> np.ndarray:
        """Detector directions ``s / ||s||^2``."""
        return self.points / np.sum(self.points**2, axis=1)[:, None]

    @classmethod
    def axis(cls, n: int, index: int = 0, scale: float = 1.0) -> "FocusSet":
        """The pair ``{scale * e_index, -scale * e_index}``."""
        P = np.zeros((2, n))
        P[0, index] = scale
        P[1, index] = -scale
        return cls(P)

    @classmethod
    def from_h(cls, H) -> "FocusSet":
        H = np.asarray(H, dtype=float)
        return cls(H / np.sum(H**2, axis=1)[:, None])

    def to_list(self) -> list:
        return self.points.tolist()


@dataclass(frozen=True)
class PolarCheck:
    """Outcome of the polar-condition check; truthy when it holds.

    When the condition fails, ``witness`` is a member ``t`` of the trick set
    with ``<t, s> < 1`` for every focus point ``s``.
    """

    holds: bool
    witness: np.ndarray | None = None

    def __bool__(self):
        return self.holds


def expected_gaussian_norm(k: int) -> float:
    """``E ||g||`` for a standard Gaussian vector in ``R^k`` (mean of chi_k)."""
    if k < 1:
        raise PreconditionError("dimension must be positive")
    return math.sqrt(2.0) * math.exp(math.lgamma((k + 1) / 2.0) - math.lgamma(k / 2.0))


def _scaled_support_block(T, dist, seed, lo, hi):
    return T.scaled_support(sample_trials(dist, seed, lo, hi))


def _focus_block(points, dist, seed, lo, hi):
    X = sample_trials(dist, seed, lo, hi)
    return (X @ points.T).max(axis=1)


def _check_trials(N):
    if int(N) != N or N < 2:
        raise PreconditionError(f"need at least two trials, got {N}")
    return int(N)


def estimate_scaled_width(
    T: TrickSet, dist: DataDistribution, N: int, seed: SeedSpec, executor=None
) -> WidthEstimate:
    """Monte Carlo estimate of ``E sup_t <X, t/||t||^2>``."""
    N = _check_trials(N)
    if dist.n != T.n:
        raise DimensionError(f"distribution dimension {dist.n} != trick set dimension {T.n}")
    parts = map_blocks(partial(_scaled_support_block, T, dist, seed), N, dist.block_size, executor)
    return WidthEstimate.from_values(np.concatenate(parts), "scaled_width")


def estimate_width(
    S: FocusSet, dist: DataDistribution, N: int, seed: SeedSpec, executor=None
) -> WidthEstimate:
    """Monte Carlo estimate of ``E max_s <X, s>`` over a finite focus set."""
    N = _check_trials(N)
    if dist.n != S.n:
        raise DimensionError(f"distribution dimension {dist.n} != focus set dimension {S.n}")
    parts = map_blocks(partial(_focus_block, S.points, dist, seed), N, dist.block_size, executor)
    return WidthEstimate.from_values(np.concatenate(parts), "width")


def analytic_scaled_width(T: TrickSet) -> float | None:
    """Exact Gaussian scaled width where a closed form exists, else ``None``."""
    if isinstance(T, NormThreshold):
        return expected_gaussian_norm(T.n) / T.rho
    if isinstance(T, HalfCoordinate):
        return math.sqrt(2.0 / math.pi) / 2.0 + _SQRT3_2 * expected_gaussian_norm(T.n - 1)
    return None


# -- polar condition -----------------------------------------------------------


def _min_support_on_sphere(P: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimise ``u -> max_i <u, P_i>`` over the unit sphere.

    ``P`` must be origin-symmetric, so the minimum is the inradius of its
    convex hull about the origin and is attained at a facet normal.
    """
    k = P.shape[1]
    if k == 1:
        up, down = float(P.max()), float(-P.min())
        return (up, np.array([1.0])) if up <= down else (down, np.array([-1.0]))
    _, sv, vt = np.linalg.svd(P, full_matrices=True)
    rank = int(np.sum(sv > 1e-12 * sv.max())) if sv.size else 0
    if rank < k:
        u = vt[-1]
        return float((P @ u).max()), u
    if k > _MAX_HULL_DIM:
        raise UndecidableError(f"hull test in {k} dimensions is not supported")
    hull = ConvexHull(np.unique(P, axis=0))
    offsets = -hull.equations[:, -1]
    j = int(np.argmin(offsets))
    return float(offsets[j]), hull.equations[j, :-1].copy()


def _full_support_witness(P, u, nu, tol):
    # nudge zero coordinates off zero; continuity keeps the gap below 1
    for k in range(40):
        v = u.copy()
        v[v == 0] = 1e-3 * 0.5**k
        v /= np.linalg.norm(v)
        if np.all(v != 0) and nu * float((P @ v).max()) < 1 - tol:
            return nu * v
    return None


def verify_polar_condition(T: TrickSet, S: FocusSet, tol: float = 1e-9) -> PolarCheck:
    """Decide whether every ``t`` in ``T`` has some ``s`` in ``S`` with ``<t, s> >= 1``.

    Decided exactly for the norm-threshold, sparse and support-family sets
    through convex-hull inradii of coordinate projections of ``S``, and for
    the half-coordinate set when the relevant focus points lie on the first
    axis.  Other combinations raise :class:`UndecidableError`.
    """
    if not isinstance(S, FocusSet):
        raise PreconditionError("the polar condition needs a non-empty FocusSet")
    if S.n != T.n:
        raise DimensionError(f"focus set dimension {S.n} != trick set dimension {T.n}")
    P = S.points
    if isinstance(T, NormThreshold) or (isinstance(T, SparseNorm) and T.s == T.n):
        value, u = _min_support_on_sphere(P)
        if value * T.rho >= 1 - tol:
            return PolarCheck(True)
        return PolarCheck(False, T.rho * u)
    if isinstance(T, SparseNorm):
        if math.comb(T.n, T.s) > _MAX_SUPPORTS:
            raise UndecidableError(f"too many supports to enumerate: C({T.n}, {T.s})")
        for J in itertools.combinations(range(T.n), T.s):
            value, u = _min_support_on_sphere(P[:, J])
            if value * T.rho < 1 - tol:
                t = np.zeros(T.n)
                t[list(J)] = T.rho * u
                return PolarCheck(False, t)
        return PolarCheck(True)
    if isinstance(T, SupportFamily):
        for idx, nu in T.entries:
            sub = P[:, idx]
            value, u = _min_support_on_sphere(sub)
            if value * nu < 1 - tol:
                w = _full_support_witness(sub, u, nu, tol)
                if w is None:
                    raise UndecidableError(f"violation on the closure of support {idx} only")
                t = np.zeros(T.n)
                t[list(idx)] = w
                return PolarCheck(False, t)
        return PolarCheck(True)
    if isinstance(T, HalfCoordinate):
        on_axis = np.all(P[:, 1:] == 0, axis=1)
        first = P[on_axis, 0]
        if first.size and first.max() >= 2 - tol and first.min() <= -2 + tol:
            return PolarCheck(True)
        if on_axis.all():
            t = T.canonical_trick()
            if first.max() >= 2 - tol:
                t[0] = -0.5
            return PolarCheck(False, t)
        raise UndecidableError("half-coordinate set with off-axis focus points")
    raise UndecidableError(f"no analytic polar test for {type(T).__name__}")


# -- focused width ---------------------------------------------------------------


def assess_candidates(T: TrickSet, candidates) -> list[tuple[object, str]]:
    """Classify candidates as ``"valid"``, ``"violated"`` or ``"undecidable"``.

    A candidate is either a :class:`FocusSet` or the trick set itself, which
    stands for the rewriting ``H = T`` and is always valid.
    """
    out = []
    for c in candidates:
        if isinstance(c, TrickSet):
            out.append((c, "valid" if c == T else "undecidable"))
            continue
        try:
            out.append((c, "valid" if verify_polar_condition(T, c) else "violated"))
        except UndecidableError as exc:
            log.warning("excluding candidate focus set: %s", exc)
            out.append((c, "undecidable"))
    return out


def focused_width_upper_bound(
    T: TrickSet, candidates, dist: DataDistribution, N: int, seed: SeedSpec, executor=None
) -> tuple[WidthEstimate, object]:
    """Smallest estimated width over the candidates that satisfy the polar condition.

    Every candidate is evaluated on the same draws, so the comparison between
    them is free of between-candidate sampling noise.  Returns the winning
    estimate and the candidate that produced it.
    """
    valid = [c for c, status in assess_candidates(T, candidates) if status == "valid"]
    if not valid:
        raise NoValidFocusSetError("no candidate focus set satisfies the polar condition")
    best = None
    for c in valid:
        if isinstance(c, TrickSet):
            est = estimate_scaled_width(T, dist, N, seed, executor)
        else:
            est = estimate_width(c, dist, N, seed, executor)
        if best is None or est.mean < best[0].mean:
            best = (est, c)
    return best


def width_report(estimate: WidthEstimate, set_spec, dist: DataDistribution, analytic: float | None = None) -> dict:
    """JSON record for a width estimate."""
    if set_spec is None:
        raise ConfigError("a width report needs the set it describes")
    return {
        "kind": estimate.kind,
        "set": set_spec,
        "distribution": dist.to_dict(),
        "n_samples": estimate.samples,
        "mean": estimate.mean,
        "std_error": estimate.std_error,
        "analytic": analytic,
    }
