"""Experiment harness: error-rate curves, radius bracketing and invariance checks.

Each experiment draws two independent arms from one master seed.  The real
arm feeds the detector directly; the fake arm is observed by the adversary,
corrupted, and then fed to the detector.  Both arms reuse the same draws at
every radius, so curves over a radius grid are free of between-radius noise.
A give-up by the adversary counts as a detected fake.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from pathlib import Path

import numpy as np
from scipy import stats

from ._parallel import map_blocks
from .adversary import FixedTrick, SignFlip, strategy_from_dict
from .detection import FocusedDetector, ProximityDetector, detector_from_dict
from .distributions import (
    DataDistribution,
    IIDSymmetricBounded,
    SeedSpec,
    distribution_from_dict,
    sample_trials,
)
from .errors import BracketingError, ConfigError, PreconditionError
from .tricksets import TrickSet, trickset_from_dict
from .widths import FocusSet, estimate_scaled_width

__all__ = [
    "ErrorRates",
    "BatteryTest",
    "BatteryRates",
    "Bracket",
    "InvarianceReport",
    "SweepConfig",
    "SweepResult",
    "concentration_bound",
    "default_battery",
    "error_rates",
    "battery_error_rates",
    "sweep",
    "bracket_detectability_radius",
    "invariance_check",
    "make_radii",
]

# child streams of the master seed
REAL, FAKE, CALIBRATION, PILOT, PROJECTIONS = range(5)

CSV_HEADER = "r,fpr,fnr,success_rate,fpr_se,fnr_se,success_se"


def _se(p: float, N: int) -> float:
    return math.sqrt(p * (1.0 - p) / N)


def concentration_bound(dist: DataDistribution, u: float) -> float:
    """Concentration error term at deviation ``u``.

    ``exp(-u^2/8)`` for Gaussian data; ``2 exp(-u^2/16)`` for independent
    symmetric coordinates bounded by one.
    """
    if isinstance(dist, IIDSymmetricBounded):
        return 2.0 * math.exp(-(u**2) / 16.0)
    return math.exp(-(u**2) / 8.0)


@dataclass(frozen=True)
class ErrorRates:
    r: float
    fpr: float
    fnr: float
    success_rate: float
    fpr_se: float
    fnr_se: float
    success_se: float
    trials: int

    @classmethod
    def from_counts(cls, r, flagged, passed, succeeded, N) -> "ErrorRates":
        fpr, fnr, sr = flagged / N, passed / N, succeeded / N
        return cls(float(r), fpr, fnr, sr, _se(fpr, N), _se(fnr, N), _se(sr, N), N)

    def csv_row(self) -> str:
        values = (self.r, self.fpr, self.fnr, self.success_rate, self.fpr_se, self.fnr_se, self.success_se)
        return ",".join(repr(float(v)) for v in values)


@dataclass(frozen=True)
class BatteryTest:
    """Acceptance region ``{feature(x) < cutoff}``.

    The cutoff is either a fixed ``threshold`` or ``radius_factor * r``.
    Features: ``statistic`` (scaled support of the trick set), ``norm``
    (Euclidean norm), ``coord`` (first coordinate) and ``focused`` (focused
    statistic of the supplied focus set).
    """

    name: str
    feature: str
    threshold: float | None = None
    radius_factor: float | None = None

    def cutoff(self, r: float) -> float:
        return self.threshold if self.threshold is not None else self.radius_factor * r


@dataclass(frozen=True)
class BatteryRates:
    name: str
    real_pass: float
    fake_pass: float
    success_rate: float
    trials: int

    @property
    def fpr(self) -> float:
        return 1.0 - self.real_pass

    @property
    def fnr(self) -> float:
        return self.fake_pass

    @property
    def give_up_rate(self) -> float:
        return 1.0 - self.success_rate


@dataclass(frozen=True, eq=False)
class _Plan:
    detector: object
    adversary: object
    dist: DataDistribution
    seed: SeedSpec
    radii: tuple
    T: TrickSet | None = None
    focus_h: np.ndarray | None = None
    battery: tuple = ()


def _features(plan: _Plan, X: np.ndarray, needed: set) -> dict:
    out = {}
    if "statistic" in needed:
        out["statistic"] = plan.T.scaled_support(X)
    if "norm" in needed:
        out["norm"] = np.linalg.norm(X, axis=1)
    if "coord" in needed:
        out["coord"] = X[:, 0]
    if "focused" in needed:
        scaled = plan.focus_h / np.sum(plan.focus_h**2, axis=1)[:, None]
        out["focused"] = (X @ scaled.T).max(axis=1)
    return out


def _block_counts(plan: _Plan, lo: int, hi: int):
    Xr = sample_trials(plan.dist, plan.seed.spawn(REAL), lo, hi)
    Xf = sample_trials(plan.dist, plan.seed.spawn(FAKE), lo, hi)
    R, K = len(plan.radii), len(plan.battery)
    flagged = np.zeros(R, dtype=np.int64)
    succeeded = np.zeros(R, dtype=np.int64)
    passed = np.zeros(R, dtype=np.int64)
    real_pass = np.zeros((R, K), dtype=np.int64)
    fake_pass = np.zeros((R, K), dtype=np.int64)

    stat_real = np.asarray(plan.detector.statistic(Xr))
    needed = {t.feature for t in plan.battery}
    feat_real = _features(plan, Xr, needed)
    if isinstance(plan.adversary, SignFlip):
        # the flipped vector does not depend on r, only whether it is allowed
        mask, norm_I, nu, realisable = plan.adversary.T.sign_flip_parts(Xf)
        fakes = np.where(mask, -Xf, Xf)
        stat_fake = np.asarray(plan.detector.statistic(fakes))
        feat_fake = _features(plan, fakes, needed)
    for j, r in enumerate(plan.radii):
        flagged[j] = np.count_nonzero(stat_real >= r / 2.0)
        if isinstance(plan.adversary, SignFlip):
            ok = realisable & (2.0 * norm_I >= r * nu)
        else:
            fakes, ok = plan.adversary.attack_batch(Xf, r)
            stat_fake = np.asarray(plan.detector.statistic(fakes))
            feat_fake = _features(plan, fakes, needed) if K else {}
        succeeded[j] = np.count_nonzero(ok)
        passed[j] = np.count_nonzero(ok & (stat_fake < r / 2.0))
        if K:
            for k, test in enumerate(plan.battery):
                c = test.cutoff(r)
                real_pass[j, k] = np.count_nonzero(feat_real[test.feature] < c)
                fake_pass[j, k] = np.count_nonzero(ok & (feat_fake[test.feature] < c))
    return flagged, succeeded, passed, real_pass, fake_pass


def _run(plan: _Plan, N: int, executor=None):
    parts = map_blocks(partial(_block_counts, plan), N, plan.dist.block_size, executor)
    # fixed block order; integer sums are exact in any case
    return tuple(sum(p[i] for p in parts) for i in range(5))


def _check_trials(N) -> int:
    if int(N) != N or N < 1:
        raise PreconditionError(f"need at least one trial, got {N}")
    return int(N)


def _check_radii(radii) -> tuple:
    radii = tuple(float(r) for r in radii)
    if not radii or any(not r > 0 or not math.isfinite(r) for r in radii):
        raise PreconditionError(f"radii must be positive and finite, got {radii}")
    return radii


def error_rates(detector, adversary, dist: DataDistribution, r: float, N: int, seed: SeedSpec, executor=None) -> ErrorRates:
    """False-positive, false-negative and adversary-success rates at radius ``r``.

    ``fnr`` is the fraction of all trials in which the adversary produced a
    fake and the detector called it real.
    """
    N = _check_trials(N)
    (r,) = _check_radii([r])
    plan = _Plan(detector, adversary, dist, seed, (r,))
    flagged, succeeded, passed, _, _ = _run(plan, N, executor)
    return ErrorRates.from_counts(r, int(flagged[0]), int(passed[0]), int(succeeded[0]), N)


# -- detector battery ----------------------------------------------------------

_QUANTILES = tuple(round(0.05 * k, 2) for k in range(1, 20))


def default_battery(
    T: TrickSet, dist: DataDistribution, N: int, seed: SeedSpec, focus: FocusSet | None = None
) -> tuple[BatteryTest, ...]:
    """The finite family of tests used for empirical lower bounds.

    Proximity at the tested radius, focused at the tested radius when a focus
    set is given, and threshold tests on the scaled support, the norm and the
    first coordinate.  Thresholds are quantiles of a calibration sample drawn
    from its own stream, so they do not depend on the arms they are scored on.
    """
    tests = [BatteryTest("proximity@r", "statistic", radius_factor=0.5)]
    if focus is not None:
        tests.append(BatteryTest("focused@r", "focused", radius_factor=0.5))
    X = sample_trials(dist, seed.spawn(CALIBRATION), 0, min(int(N), 20000))
    plan = _Plan(None, None, dist, seed, (), T, focus.h if focus is not None else None)
    feats = _features(plan, X, {"statistic", "norm", "coord"})
    for feature in ("statistic", "norm", "coord"):
        for q in _QUANTILES:
            c = float(np.quantile(feats[feature], q))
            tests.append(BatteryTest(f"{feature}<q{q:.2f}", feature, threshold=c))
    return tuple(tests)


def battery_error_rates(
    T: TrickSet,
    adversary,
    dist: DataDistribution,
    r: float,
    N: int,
    seed: SeedSpec,
    battery=None,
    focus: FocusSet | None = None,
    executor=None,
) -> list[BatteryRates]:
    """Pass rates of real data and of fakes for every test in the battery."""
    N = _check_trials(N)
    (r,) = _check_radii([r])
    battery = tuple(battery) if battery is not None else default_battery(T, dist, N, seed, focus)
    plan = _Plan(
        ProximityDetector(T, r), adversary, dist, seed, (r,), T,
        focus.h if focus is not None else None, battery,
    )
    _, succeeded, _, real_pass, fake_pass = _run(plan, N, executor)
    sr = int(succeeded[0]) / N
    return [
        BatteryRates(t.name, int(real_pass[0, k]) / N, int(fake_pass[0, k]) / N, sr, N)
        for k, t in enumerate(battery)
    ]


# -- sweeps -------------------------------------------------------------------------


def make_radii(spec) -> tuple:
    """Radius grid from an explicit list or ``{min, max, count, spacing}``."""
    if isinstance(spec, dict):
        try:
            lo, hi, count = float(spec["min"]), float(spec["max"]), int(spec["count"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"radius grid needs min, max and count: {spec!r}") from None
        spacing = spec.get("spacing", "geometric")
        if count < 1 or not 0 < lo <= hi:
            raise ConfigError(f"invalid radius grid {spec!r}")
        if count == 1:
            radii = (lo,)
        elif spacing == "geometric":
            radii = tuple(float(v) for v in np.geomspace(lo, hi, count))
        elif spacing == "linear":
            radii = tuple(float(v) for v in np.linspace(lo, hi, count))
        else:
            raise ConfigError(f"unknown grid spacing {spacing!r}")
    else:
        try:
            radii = tuple(float(v) for v in spec)
        except (TypeError, ValueError):
            raise ConfigError(f"radii must be a list or a grid spec, got {spec!r}") from None
    if not radii or any(not r > 0 for r in radii):
        raise ConfigError("radii must be positive")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("radii must be strictly increasing")
    return radii


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True, eq=False)
class SweepConfig:
    trick_set: TrickSet
    distribution: DataDistribution
    detector: object
    adversary: object
    radii: tuple
    trials: int
    seed: SeedSpec
    u: float = 4.0
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, seed: int | None = None) -> "SweepConfig":
        if not isinstance(d, dict):
            raise ConfigError("sweep config must be a JSON object")
        try:
            T = trickset_from_dict(d["trick_set"])
            dist = distribution_from_dict(d["distribution"])
            trials = int(d["trials"])
            master = int(d["seed"] if seed is None else seed)
        except KeyError as exc:
            raise ConfigError(f"sweep config is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if dist.n != T.n:
            raise ConfigError(f"distribution dimension {dist.n} != trick set dimension {T.n}")
        if trials < 100:
            raise ConfigError(f"a sweep needs at least 100 trials per radius, got {trials}")
        u = float(d.get("u", 4.0))
        if not u > 0:
            raise ConfigError("u must be positive")
        detector = detector_from_dict(d.get("detector", {"kind": "proximity"}), T)
        default_adv = {"kind": "sign_flip" if T.highly_symmetric else "fixed_trick"}
        adversary = strategy_from_dict(d.get("adversary", default_adv), T)
        radii = make_radii(d["radii"]) if "radii" in d else None
        if radii is None:
            raise ConfigError("sweep config is missing 'radii'")
        raw = {
            "trick_set": T.to_dict(),
            "distribution": dist.to_dict(),
            "detector": {k: v for k, v in detector.to_dict().items() if k != "r"},
            "adversary": adversary.to_dict(),
            "radii": list(radii),
            "trials": trials,
            "seed": master,
            "u": u,
        }
        return cls(T, dist, detector, adversary, radii, trials, SeedSpec(master), u, raw)

    def hash(self) -> str:
        return hashlib.sha256(_canonical_json(self.raw).encode()).hexdigest()


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    metadata: dict

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER, *(row.csv_row() for row in self.rows)]) + "\n"

    def write(self, path, plot_data: bool = False) -> list[Path]:
        """Write the CSV, its JSON metadata sidecar and optional curve files."""
        path = Path(path)
        path.write_text(self.to_csv())
        sidecar = path.with_name(path.stem + ".meta.json")
        sidecar.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        written = [path, sidecar]
        if plot_data:
            for name in ("fpr", "fnr", "success_rate"):
                curve = path.with_name(f"{path.stem}.{name}.dat")
                curve.write_text("".join(f"{row.r!r} {getattr(row, name)!r}\n" for row in self.rows))
                written.append(curve)
        return written


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def sweep(config: SweepConfig, executor=None) -> SweepResult:
    """Error rates at every radius of the grid, in one pass over the trials."""
    started = _now()
    plan = _Plan(config.detector, config.adversary, config.distribution, config.seed, config.radii)
    try:
        flagged, succeeded, passed, _, _ = _run(plan, config.trials, executor)
    except Exception as exc:
        raise type(exc)(f"sweep over radii {list(config.radii)} failed: {exc}") from exc
    rows = tuple(
        ErrorRates.from_counts(r, int(flagged[j]), int(passed[j]), int(succeeded[j]), config.trials)
        for j, r in enumerate(config.radii)
    )
    metadata = {
        "config": config.raw,
        "config_hash": config.hash(),
        "seed": config.seed.master_seed,
        "started": started,
        "finished": _now(),
    }
    return SweepResult(rows, metadata)


# -- bracketing the detectability radius ---------------------------------------------


@dataclass(frozen=True)
class Bracket:
    r_lower: float
    r_upper: float
    level: float
    battery: tuple
    diagnostics: dict

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.r_lower + self.r_upper)

    def contains(self, r: float) -> bool:
        return self.r_lower <= r <= self.r_upper

    def to_dict(self) -> dict:
        return {
            "r_lower": self.r_lower,
            "r_upper": self.r_upper,
            "level": self.level,
            "battery": list(self.battery),
            "diagnostics": self.diagnostics,
        }


def _predicates(plan: _Plan, N: int, level: float, executor):
    flagged, succeeded, passed, real_pass, fake_pass = _run(plan, N, executor)
    fpr, fnr = flagged / N, passed / N
    upper = (fpr <= level) & (fnr <= level)
    worst = np.maximum(1.0 - real_pass / N, fake_pass / N)
    best_test = worst.argmin(axis=1)
    lower = worst.min(axis=1) >= 0.5 - level
    return upper, lower, fpr, fnr, succeeded / N, worst.min(axis=1), best_test


def bracket_detectability_radius(
    T: TrickSet,
    dist: DataDistribution,
    N: int,
    seed: SeedSpec,
    level: float = 0.1,
    *,
    focus: FocusSet | None = None,
    adversary=None,
    grid=None,
    battery=None,
    refine_steps: int = 12,
    executor=None,
) -> Bracket:
    """Empirical interval ``[r_lower, r_upper]`` around the detectability radius.

    ``r_upper`` is the smallest radius at which the detector (proximity, or
    focused when ``focus`` is given) has both error rates at most ``level``.
    ``r_lower`` is the largest radius at which every test of the battery has
    ``max(fpr, fnr) >= 0.5 - level`` against the adversary.  Both are located
    on the grid first and then refined by bisection on common draws.

    The lower end only refutes detectability for the tests in the battery;
    it is not a certificate against every conceivable test.
    """
    N = _check_trials(N)
    if not 0 < level < 0.5:
        raise PreconditionError("level must lie in (0, 0.5)")
    detector = FocusedDetector.from_focus_set(focus, 1.0) if focus is not None else ProximityDetector(T, 1.0)
    if adversary is None:
        adversary = SignFlip(T) if T.highly_symmetric else FixedTrick.canonical(T)
    battery = tuple(battery) if battery is not None else default_battery(T, dist, N, seed, focus)
    diagnostics = {"detector": detector.to_dict()["kind"], "adversary": adversary.to_dict()}
    if grid is None:
        pilot = estimate_scaled_width(T, dist, max(2, min(N, 2000)), seed.spawn(PILOT), executor)
        base = 2.0 * pilot.mean
        diagnostics["pilot_scaled_width"] = pilot.mean
        grid = np.geomspace(0.02 * base, 4.0 * base, 64)
    grid = _check_radii(grid)
    diagnostics["grid"] = [grid[0], grid[-1], len(grid)]
    focus_h = focus.h if focus is not None else None

    def evaluate(radii):
        plan = _Plan(detector, adversary, dist, seed, tuple(radii), T, focus_h, battery)
        return _predicates(plan, N, level, executor)

    upper, lower, fpr, fnr, sr, worst, _ = evaluate(grid)
    diagnostics["grid_fpr"] = [float(v) for v in fpr]
    diagnostics["grid_fnr"] = [float(v) for v in fnr]
    diagnostics["grid_battery_min_max_error"] = [float(v) for v in worst]

    ok_up = np.flatnonzero(upper)
    if ok_up.size == 0:
        raise BracketingError("no radius on the grid reaches both error rates below the level", diagnostics)
    if ok_up[0] == 0:
        raise BracketingError("detection already succeeds at the smallest grid radius; extend the grid down", diagnostics)
    ok_low = np.flatnonzero(lower)
    if ok_low.size == 0:
        raise BracketingError("the adversary defeats no test even at the smallest grid radius", diagnostics)
    if ok_low[-1] == len(grid) - 1:
        raise BracketingError("the adversary still wins at the largest grid radius; extend the grid up", diagnostics)

    up_lo, up_hi = grid[ok_up[0] - 1], grid[ok_up[0]]
    low_lo, low_hi = grid[ok_low[-1]], grid[ok_low[-1] + 1]
    for _ in range(refine_steps):
        mid_up, mid_low = math.sqrt(up_lo * up_hi), math.sqrt(low_lo * low_hi)
        u_ok, l_ok, *_ = evaluate((mid_up, mid_low))
        up_lo, up_hi = (up_lo, mid_up) if u_ok[0] else (mid_up, up_hi)
        low_lo, low_hi = (mid_low, low_hi) if l_ok[1] else (low_lo, mid_low)

    r_upper, r_lower = float(up_hi), float(low_lo)
    _, _, fpr, fnr, sr, worst, best = evaluate((r_lower, r_upper))
    diagnostics.update(
        upper_rates={"fpr": float(fpr[1]), "fnr": float(fnr[1]), "success_rate": float(sr[1])},
        lower_rates={
            "success_rate": float(sr[0]),
            "min_max_error": float(worst[0]),
            "strongest_test": battery[int(best[0])].name,
        },
    )
    if r_lower > r_upper:
        raise BracketingError(f"inconsistent bracket: r_lower={r_lower} > r_upper={r_upper}", diagnostics)
    return Bracket(r_lower, r_upper, level, tuple(t.name for t in battery), diagnostics)


# -- invariance of the law under sign flipping ------------------------------------------


@dataclass(frozen=True)
class InvarianceReport:
    method: str
    success_probability: float
    max_pmf_discrepancy: Fraction | None = None
    ks: tuple = ()

    @property
    def min_p_value(self) -> float | None:
        return min(p for _, _, p in self.ks) if self.ks else None

    def to_dict(self) -> dict:
        out = {"method": self.method, "success_probability": self.success_probability}
        if self.max_pmf_discrepancy is not None:
            out["max_pmf_discrepancy"] = str(self.max_pmf_discrepancy)
        if self.ks:
            out["ks"] = [{"projection": name, "statistic": s, "p_value": p} for name, s, p in self.ks]
        return out


def invariance_check(
    T: TrickSet, dist: DataDistribution, r: float, N: int, seed: SeedSpec, min_success: float = 0.999
) -> InvarianceReport:
    """Compare the law of sign-flipped fakes with the law of real data.

    Rademacher data in dimension at most ten is checked exactly by pushing
    every sign pattern through the attack.  Otherwise fakes are compared with
    an independent real sample by two-sample Kolmogorov-Smirnov tests on the
    norm and on five fixed random projections.  Refuses to run unless the
    attack succeeds with probability at least ``min_success``, since fakes are
    only produced on success.
    """
    (r,) = _check_radii([r])
    strategy = SignFlip(T)
    if isinstance(dist, IIDSymmetricBounded) and dist.kind == "rademacher" and dist.n <= 10:
        X = np.array(list(itertools.product((-1.0, 1.0), repeat=dist.n)))
        fakes, ok = strategy.attack_batch(X, r)
        total = X.shape[0]
        success = Fraction(int(ok.sum()), total)
        if success < Fraction(min_success).limit_denominator(10**6):
            raise PreconditionError(f"sign flip succeeds with probability {float(success)}; refusing to compare laws")
        counts: dict = {}
        for row in fakes[ok]:
            key = tuple(row.tolist())
            counts[key] = counts.get(key, 0) + 1
        produced = int(ok.sum())
        uniform = Fraction(1, total)
        discrepancy = max(abs(Fraction(counts.get(tuple(x.tolist()), 0), produced) - uniform) for x in X)
        stray = set(counts) - {tuple(x.tolist()) for x in X}
        if stray:
            discrepancy = max(discrepancy, max(Fraction(counts[k], produced) for k in stray))
        return InvarianceReport("exact", float(success), discrepancy)

    N = _check_trials(N)
    Xr = sample_trials(dist, seed.spawn(REAL), 0, N)
    Xf = sample_trials(dist, seed.spawn(FAKE), 0, N)
    fakes, ok = strategy.attack_batch(Xf, r)
    success = float(ok.mean())
    if success < min_success:
        raise PreconditionError(f"sign flip succeeds with probability {success:.4f}; refusing to compare laws")
    fakes = fakes[ok]
    directions = seed.spawn(PROJECTIONS).block_generator(0).standard_normal((5, dist.n))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    ks = []
    res = stats.ks_2samp(np.linalg.norm(fakes, axis=1), np.linalg.norm(Xr, axis=1))
    ks.append(("norm", float(res.statistic), float(res.pvalue)))
    for k, d in enumerate(directions):
        res = stats.ks_2samp(fakes @ d, Xr @ d)
        ks.append((f"direction{k}", float(res.statistic), float(res.pvalue)))
    return InvarianceReport("ks", success, None, tuple(ks))
