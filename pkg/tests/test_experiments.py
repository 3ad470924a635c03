import json
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor

import numpy as np
import pytest
from scipy import stats

from fakewidth import (
    BracketingError,
    FixedTrick,
    FocusSet,
    HalfCoordinate,
    IIDSymmetricBounded,
    NormThreshold,
    NotHighlySymmetricError,
    PreconditionError,
    ProximityDetector,
    SeedSpec,
    SignFlip,
    SparseNorm,
    StandardGaussian,
    SupportFamily,
    SweepConfig,
    analytic_scaled_width,
    bracket_detectability_radius,
    error_rates,
    estimate_scaled_width,
    invariance_check,
    sample_trials,
    sweep,
)
from fakewidth.errors import ConfigError
from fakewidth.experiments import (
    CSV_HEADER,
    FAKE,
    REAL,
    BatteryTest,
    ErrorRates,
    battery_error_rates,
    concentration_bound,
    default_battery,
    make_radii,
)

from oracles import chi_mean, random_member

W64 = chi_mean(64)


def sweep_config(**overrides):
    cfg = {
        "trick_set": {"kind": "norm_threshold", "n": 64},
        "distribution": {"kind": "gaussian", "n": 64},
        "radii": {"min": 10, "max": 22, "count": 10},
        "trials": 1000,
        "seed": 42,
    }
    cfg.update(overrides)
    return cfg


def slack(p, N):
    return 3 * math.sqrt(max(p, 1e-12) * (1 - p) / N) + 3 / N


# -- error rates -----------------------------------------------------------------


def test_error_rates_detectable():
    T = NormThreshold(64)
    er = error_rates(ProximityDetector(T, 2.5 * W64), SignFlip(T), StandardGaussian(64), 2.5 * W64, 10_000, SeedSpec(0))
    assert er.fpr <= 0.05 and er.fnr <= 0.05
    assert er.trials == 10_000


def test_error_rates_undetectable():
    # the flip succeeds exactly when ||x|| >= r/2, and then the fake is flagged:
    # the failure shows up as a false-positive rate close to the success rate
    T = NormThreshold(64)
    r = 1.5 * W64
    er = error_rates(ProximityDetector(T, r), SignFlip(T), StandardGaussian(64), r, 10_000, SeedSpec(0))
    assert max(er.fpr, er.fnr) >= 0.4
    exact = stats.chi(64).sf(r / 2)
    assert abs(er.fpr - exact) <= slack(exact, 10_000)
    assert abs(er.success_rate - exact) <= slack(exact, 10_000)


def test_error_rates_fixed_trick_far_away():
    T = NormThreshold(64)
    r = 100 * W64
    dist = StandardGaussian(64)
    er = error_rates(ProximityDetector(T, r), FixedTrick.canonical(T), dist, r, 2000, SeedSpec(1))
    assert er.fnr == 0.0 and er.fpr == 0.0 and er.success_rate == 1.0
    er = error_rates(ProximityDetector(T, r), SignFlip(T), dist, r, 2000, SeedSpec(1))
    assert er.success_rate == 0.0 and er.fnr == 0.0


def test_error_rates_against_direct_count():
    # recompute the three counts by hand from the documented streams
    T = SparseNorm(20, 3)
    dist = StandardGaussian(20)
    seed = SeedSpec(5)
    r = 4.0
    N = 3000
    er = error_rates(ProximityDetector(T, r), SignFlip(T), dist, r, N, seed)
    Xr = sample_trials(dist, seed.spawn(REAL), 0, N)
    Xf = sample_trials(dist, seed.spawn(FAKE), 0, N)
    flagged = sum(T.scaled_support(x) >= r / 2 for x in Xr)
    outs = [T.sign_flip_candidate(x, r) for x in Xf]
    succeeded = sum(not o.gave_up for o in outs)
    passed = sum((not o.gave_up) and T.scaled_support(o.fake) < r / 2 for o in outs)
    assert (er.fpr, er.fnr, er.success_rate) == (flagged / N, passed / N, succeeded / N)


def test_error_rates_validation():
    T = NormThreshold(4)
    with pytest.raises(PreconditionError):
        error_rates(ProximityDetector(T, 1.0), SignFlip(T), StandardGaussian(4), -1.0, 100, SeedSpec(0))
    with pytest.raises(PreconditionError):
        error_rates(ProximityDetector(T, 1.0), SignFlip(T), StandardGaussian(4), 1.0, 0, SeedSpec(0))


def test_error_rates_csv_row():
    er = ErrorRates.from_counts(2.0, 10, 5, 90, 100)
    se = [math.sqrt(p * (1 - p) / 100) for p in (0.1, 0.05, 0.9)]
    assert er.csv_row() == ",".join(repr(v) for v in (2.0, 0.1, 0.05, 0.9, *se))


def test_concentration_bound():
    assert concentration_bound(StandardGaussian(3), 4.0) == pytest.approx(math.exp(-2))
    assert concentration_bound(IIDSymmetricBounded(3), 4.0) == pytest.approx(2 * math.exp(-1))


# -- two-sided bounds, Gaussian data -----------------------------------------------

U = 4.0
N_THM = 10_000


def bound_sets():
    blocks = [(tuple(range(8 * k, 8 * k + 8)), 1.0 + 0.1 * k) for k in range(8)]
    return [NormThreshold(64), SparseNorm(100, 5), SupportFamily(64, blocks)]


@pytest.mark.parametrize("T", bound_sets(), ids=lambda T: type(T).__name__)
def test_detectable_regime_gaussian(T):
    dist = StandardGaussian(T.n)
    w = estimate_scaled_width(T, dist, 100_000, SeedSpec(11)).mean
    r = 2 * w + U / T.inradius
    bound = concentration_bound(dist, U)
    det = ProximityDetector(T, r)
    for adv in (SignFlip(T), FixedTrick.canonical(T)):
        er = error_rates(det, adv, dist, r, N_THM, SeedSpec(12))
        assert er.fpr <= bound + slack(bound, N_THM)
        assert er.fnr <= bound + slack(bound, N_THM)
    rng = np.random.default_rng(13)
    for _ in range(3):
        er = error_rates(det, FixedTrick(T, random_member(T, rng)), dist, r, N_THM, SeedSpec(14))
        assert er.fnr <= bound + slack(bound, N_THM)


def test_detectable_regime_half_coordinate():
    T = HalfCoordinate(100)
    dist = StandardGaussian(100)
    r = 2 * analytic_scaled_width(T) + U
    bound = concentration_bound(dist, U)
    er = error_rates(ProximityDetector(T, r), FixedTrick.canonical(T), dist, r, N_THM, SeedSpec(15))
    assert er.fpr <= bound + slack(bound, N_THM)
    assert er.fnr <= bound + slack(bound, N_THM)


@pytest.mark.parametrize("T", bound_sets(), ids=lambda T: type(T).__name__)
def test_undetectable_regime_gaussian(T):
    dist = StandardGaussian(T.n)
    w = estimate_scaled_width(T, dist, 100_000, SeedSpec(11)).mean
    r = 2 * w - U / T.inradius
    assert r > 0
    bound = concentration_bound(dist, U)
    rates = battery_error_rates(T, SignFlip(T), dist, r, N_THM, SeedSpec(16))
    assert len(rates) == 1 + 3 * 19
    for b in rates:
        assert b.fake_pass >= b.real_pass - bound - b.give_up_rate - 0.02, b.name
    # the flip itself succeeds with probability at least 1 - bound
    assert rates[0].success_rate >= 1 - bound - slack(bound, N_THM)


def test_battery_inequality_without_concentration_term():
    # P(fake in A) >= P(X in A) - P(give up) for every battery test, at any r
    T = SparseNorm(30, 3)
    dist = StandardGaussian(30)
    for r in (2.0, 4.0, 6.0):
        for b in battery_error_rates(T, SignFlip(T), dist, r, 5000, SeedSpec(17)):
            assert b.fake_pass >= b.real_pass - b.give_up_rate - 0.02, (r, b.name)


def test_default_battery_contents():
    T = NormThreshold(10)
    battery = default_battery(T, StandardGaussian(10), 1000, SeedSpec(0), focus=FocusSet.axis(10))
    names = [t.name for t in battery]
    assert names[:2] == ["proximity@r", "focused@r"]
    assert len(battery) == 2 + 57
    norms = [t.threshold for t in battery if t.feature == "norm"]
    assert norms == sorted(norms)


def test_custom_battery():
    T = NormThreshold(4)
    battery = [BatteryTest("x1<0", "coord", threshold=0.0)]
    (b,) = battery_error_rates(T, SignFlip(T), StandardGaussian(4), 0.01, 20_000, SeedSpec(1), battery=battery)
    # x1 < 0 passes half of the real data and, after flipping all signs, half of the fakes
    assert abs(b.real_pass - 0.5) < 0.02 and abs(b.fake_pass - 0.5) < 0.02


# -- two-sided bounds, bounded coordinates -----------------------------------------


@pytest.mark.parametrize("kind", ["rademacher", "uniform_symmetric"])
@pytest.mark.parametrize("T", [NormThreshold(64), SparseNorm(64, 32)], ids=lambda T: type(T).__name__)
def test_bounded_data_regimes(kind, T):
    dist = IIDSymmetricBounded(T.n, kind)
    u = 6.0
    bound = concentration_bound(dist, u)
    w = estimate_scaled_width(T, dist, 50_000, SeedSpec(21)).mean
    r_hi = 2 * w + u / T.inradius
    er = error_rates(ProximityDetector(T, r_hi), SignFlip(T), dist, r_hi, N_THM, SeedSpec(22))
    assert er.fpr <= bound + slack(bound, N_THM) and er.fnr <= bound + slack(bound, N_THM)
    er = error_rates(ProximityDetector(T, r_hi), FixedTrick.canonical(T), dist, r_hi, N_THM, SeedSpec(22))
    assert er.fnr <= bound + slack(bound, N_THM)
    r_lo = 2 * w - u / T.inradius
    for b in battery_error_rates(T, SignFlip(T), dist, r_lo, N_THM, SeedSpec(23)):
        assert b.fake_pass >= b.real_pass - bound - b.give_up_rate - 0.02, b.name


def test_markov_regime_uniform():
    # r > 2 u w_X: error rates at most 1/u by Markov's inequality
    T = SparseNorm(40, 4)
    dist = IIDSymmetricBounded(40, "uniform_symmetric")
    u = 10.0
    w = estimate_scaled_width(T, dist, 50_000, SeedSpec(24)).mean
    r = 2 * u * w * 1.0001
    for adv in (SignFlip(T), FixedTrick.canonical(T)):
        er = error_rates(ProximityDetector(T, r), adv, dist, r, N_THM, SeedSpec(25))
        assert er.fpr <= 1 / u + 0.01 and er.fnr <= 1 / u + 0.01


# -- sweeps ------------------------------------------------------------------------


@pytest.mark.parametrize("pool", [ThreadPoolExecutor, ProcessPoolExecutor])
def test_sweep_independent_of_executor(pool):
    config = SweepConfig.from_dict(sweep_config())
    serial = sweep(config).to_csv()
    with pool(max_workers=8) as ex:
        assert sweep(config, ex).to_csv() == serial


def test_sweep_csv_format():
    result = sweep(SweepConfig.from_dict(sweep_config()))
    lines = result.to_csv().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 11
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    radii = make_radii({"min": 10, "max": 22, "count": 10})
    assert [row[0] for row in rows] == list(radii)
    assert all(0 <= v <= 1 for row in rows for v in row[1:4])


def test_sweep_fpr_monotone_and_crossover():
    cfg = sweep_config(radii={"min": 0.8 * 2 * W64, "max": 1.25 * 2 * W64, "count": 15}, trials=5000)
    rows = sweep(SweepConfig.from_dict(cfg)).rows
    fpr = [row.fpr for row in rows]
    assert all(b <= a for a, b in zip(fpr, fpr[1:]))
    worst = [max(row.fpr, row.fnr) for row in rows]
    assert worst[0] > 0.4 and worst[-1] < 0.05
    crossing = next(row.r for row, w in zip(rows, worst) if w < 0.5)
    assert abs(crossing - 2 * W64) < 0.1 * 2 * W64


def test_sweep_metadata_and_files(tmp_path):
    config = SweepConfig.from_dict(sweep_config())
    result = sweep(config)
    assert result.metadata["config"]["seed"] == 42
    assert result.metadata["config_hash"] == config.hash()
    written = result.write(tmp_path / "out.csv", plot_data=True)
    assert [p.name for p in written] == ["out.csv", "out.meta.json", "out.fpr.dat", "out.fnr.dat", "out.success_rate.dat"]
    meta = json.loads((tmp_path / "out.meta.json").read_text())
    assert meta["config"] == config.raw
    curve = (tmp_path / "out.fpr.dat").read_text().splitlines()
    assert len(curve) == 10 and float(curve[0].split()[1]) == result.rows[0].fpr


def test_sweep_seed_override_changes_hash():
    a = SweepConfig.from_dict(sweep_config())
    b = SweepConfig.from_dict(sweep_config(), seed=7)
    assert b.seed.master_seed == 7 and a.hash() != b.hash()
    assert sweep(a).to_csv() != sweep(b).to_csv()


@pytest.mark.parametrize(
    "cfg",
    [
        sweep_config(trials=50),
        sweep_config(radii=[3.0, 2.0]),
        sweep_config(radii={"min": 1, "count": 3}),
        sweep_config(distribution={"kind": "gaussian", "n": 8}),
        sweep_config(trick_set={"kind": "cube", "n": 64}),
        {k: v for k, v in sweep_config().items() if k != "radii"},
        {k: v for k, v in sweep_config().items() if k != "seed"},
    ],
)
def test_sweep_config_errors(cfg):
    with pytest.raises(ConfigError):
        SweepConfig.from_dict(cfg)


def test_sweep_config_defaults():
    config = SweepConfig.from_dict(sweep_config(trick_set={"kind": "half_coordinate", "n": 64}))
    assert isinstance(config.adversary, FixedTrick)
    assert SweepConfig.from_dict(sweep_config()).raw["adversary"]["kind"] == "sign_flip"


def test_make_radii():
    assert make_radii([1, 2, 3]) == (1.0, 2.0, 3.0)
    assert make_radii({"min": 1, "max": 4, "count": 3, "spacing": "linear"}) == (1.0, 2.5, 4.0)
    assert make_radii({"min": 1, "max": 4, "count": 3}) == pytest.approx((1.0, 2.0, 4.0))
    for bad in ([], [0, 1], [2, 2], {"min": 1, "max": 2, "count": 3, "spacing": "log"}):
        with pytest.raises(ConfigError):
            make_radii(bad)


# -- bracketing ------------------------------------------------------------------


def test_bracket_norm_threshold():
    b = bracket_detectability_radius(NormThreshold(64), StandardGaussian(64), 10_000, SeedSpec(1))
    assert b.contains(2 * W64)
    assert b.r_upper / b.r_lower <= 1.5
    d = b.diagnostics
    assert d["upper_rates"]["fpr"] <= 0.1 and d["upper_rates"]["fnr"] <= 0.1
    assert d["lower_rates"]["min_max_error"] >= 0.4


def test_bracket_sparse():
    b = bracket_detectability_radius(SparseNorm(100, 5), StandardGaussian(100), 10_000, SeedSpec(2))
    ref = math.sqrt(5 * math.log(math.e * 100 / 5))
    assert ref / 4 <= b.r_lower <= b.r_upper <= 4 * ref


def test_bracket_half_coordinate_focused():
    T = HalfCoordinate(100)
    b = bracket_detectability_radius(T, StandardGaussian(100), 10_000, SeedSpec(3), focus=FocusSet.axis(100, 0, 2.0))
    assert b.r_upper <= 30
    assert b.r_upper < 2 * analytic_scaled_width(T)
    assert "focused@r" in b.battery


def test_bracket_failure_reports_diagnostics():
    with pytest.raises(BracketingError) as info:
        bracket_detectability_radius(
            HalfCoordinate(100), StandardGaussian(100), 2000, SeedSpec(3), focus=FocusSet.axis(100, 0, 2.0),
            grid=np.linspace(1, 5, 5),
        )
    assert "grid_fpr" in info.value.diagnostics


def test_bracket_level_validation():
    with pytest.raises(PreconditionError):
        bracket_detectability_radius(NormThreshold(4), StandardGaussian(4), 100, SeedSpec(0), level=0.6)


def test_bracket_independent_of_executor():
    args = (SparseNorm(40, 3), StandardGaussian(40), 2000, SeedSpec(4))
    serial = bracket_detectability_radius(*args)
    with ThreadPoolExecutor(max_workers=4) as ex:
        parallel = bracket_detectability_radius(*args, executor=ex)
    assert (serial.r_lower, serial.r_upper) == (parallel.r_lower, parallel.r_upper)


@pytest.mark.parametrize("T", [NormThreshold(64), SparseNorm(100, 5)], ids=lambda T: type(T).__name__)
def test_bracket_gap_shrinks_with_trials(T):
    dist = StandardGaussian(T.n)
    gaps = [
        (b.r_upper - b.r_lower)
        for b in (bracket_detectability_radius(T, dist, N, SeedSpec(1)) for N in (1000, 10_000))
    ]
    assert gaps[1] < gaps[0]


def test_bracket_endpoints_stabilise_with_trials():
    # seed-to-seed spread of the endpoints falls as N grows
    T, dist = NormThreshold(32), StandardGaussian(32)
    spread = {}
    for N in (300, 10_000):
        ends = np.array(
            [
                (b.r_lower, b.r_upper)
                for b in (bracket_detectability_radius(T, dist, N, SeedSpec(s)) for s in range(6))
            ]
        )
        spread[N] = ends.std(axis=0)
    assert np.all(spread[10_000] < spread[300])


# -- invariance ------------------------------------------------------------------


def test_invariance_exact():
    rep = invariance_check(SparseNorm(8, 2), IIDSymmetricBounded(8), 1.0, 1, SeedSpec(0))
    assert rep.method == "exact" and rep.max_pmf_discrepancy == 0 and rep.success_probability == 1.0


def test_invariance_gaussian():
    rep = invariance_check(NormThreshold(64), StandardGaussian(64), W64 / 2, 10_000, SeedSpec(0))
    assert rep.method == "ks" and len(rep.ks) == 6
    assert rep.min_p_value > 0.01


def test_invariance_refuses_when_flip_fails_often():
    r = 2 * stats.chi(64).median()
    with pytest.raises(PreconditionError):
        invariance_check(NormThreshold(64), StandardGaussian(64), r, 5000, SeedSpec(0))
    # Rademacher: ||x_I|| = sqrt(2) for every x, so the flip fails for all x once r > 2 sqrt(2)
    with pytest.raises(PreconditionError):
        invariance_check(SparseNorm(8, 2), IIDSymmetricBounded(8), 3.0, 1, SeedSpec(0))
    with pytest.raises(NotHighlySymmetricError):
        invariance_check(HalfCoordinate(8), StandardGaussian(8), 1.0, 1000, SeedSpec(0))


def test_invariance_report_json():
    rep = invariance_check(SparseNorm(6, 2), IIDSymmetricBounded(6), 1.0, 1, SeedSpec(0))
    assert rep.to_dict() == {"method": "exact", "success_probability": 1.0, "max_pmf_discrepancy": "0"}
