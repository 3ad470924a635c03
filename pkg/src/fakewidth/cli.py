"""Command-line entry point.

    fakewidth <width|sweep|radius|invariance|focused> --config PATH --out PATH
              [--seed N] [--workers K]

Every run is driven by one JSON config; only the seed, the worker count and
the output path can be overridden from the command line.  Failures print a
JSON error record on stderr and exit with 2 (bad config), 3 (precondition
violated), 4 (bracketing failed) or 1 (anything else).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from .adversary import strategy_from_dict
from .distributions import SeedSpec, distribution_from_dict
from .errors import BracketingError, ConfigError, FakeWidthError, PreconditionError, UndecidableError
from .experiments import SweepConfig, bracket_detectability_radius, invariance_check, make_radii, sweep
from .tricksets import TrickSet, trickset_from_dict
from .widths import (
    FocusSet,
    analytic_scaled_width,
    assess_candidates,
    estimate_scaled_width,
    estimate_width,
    focused_width_upper_bound,
    width_report,
)

EXIT_CONFIG, EXIT_PRECONDITION, EXIT_BRACKET = 2, 3, 4
COMMANDS = ("width", "sweep", "radius", "invariance", "focused")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--out", required=True, help="output file")
    common.add_argument("--seed", type=int, help="override the master seed of the config")
    common.add_argument("--workers", type=int, help="worker processes (default: $FAKEWIDTH_WORKERS or 1)")
    parser = argparse.ArgumentParser(prog="fakewidth", description="Fake-detection game experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "width": "Monte Carlo width of a trick set or focus set",
        "sweep": "error rates over a radius grid (CSV + metadata)",
        "radius": "bracket the detectability radius",
        "invariance": "check that sign-flipped fakes have the law of the data",
        "focused": "focused-width upper bound over candidate focus sets",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("FAKEWIDTH_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"FAKEWIDTH_WORKERS must be an integer, got {env!r}") from None
    return 1


@contextmanager
def _pool(workers: int):
    if workers <= 1:
        yield None
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            yield ex


def _load(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _get(cfg: dict, key: str):
    try:
        return cfg[key]
    except KeyError:
        raise ConfigError(f"config is missing {key!r}") from None


def _common(cfg: dict, seed_override):
    dist = distribution_from_dict(_get(cfg, "distribution"))
    trials = int(_get(cfg, "trials"))
    seed = int(_get(cfg, "seed") if seed_override is None else seed_override)
    return dist, trials, SeedSpec(seed)


def _trickset(cfg: dict, dist) -> TrickSet:
    T = trickset_from_dict(_get(cfg, "trick_set"))
    if T.n != dist.n:
        raise ConfigError(f"trick set dimension {T.n} != distribution dimension {dist.n}")
    return T


def _metadata(command: str, cfg: dict, seed: SeedSpec) -> dict:
    resolved = dict(cfg)
    resolved["seed"] = seed.master_seed
    return {"command": command, "config": resolved, "seed": seed.master_seed}


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- subcommands -----------------------------------------------------------------
# each returns a callable that does the work, so parse errors surface first


def _cmd_width(cfg, args):
    dist, trials, seed = _common(cfg, args.seed)
    if "focus" in cfg:
        S = FocusSet(cfg["focus"])

        def run(ex):
            est = estimate_width(S, dist, trials, seed, ex)
            return width_report(est, {"focus": S.to_list()}, dist)

    else:
        T = _trickset(cfg, dist)

        def run(ex):
            est = estimate_scaled_width(T, dist, trials, seed, ex)
            analytic = analytic_scaled_width(T) if dist.kind == "gaussian" else None
            return width_report(est, T.to_dict(), dist, analytic)

    def go(ex):
        report = run(ex)
        report["metadata"] = _metadata("width", cfg, seed)
        _write_json(args.out, report)

    return go


def _cmd_sweep(cfg, args):
    config = SweepConfig.from_dict(cfg, seed=args.seed)
    plot_data = bool(cfg.get("plot_data", False))

    def go(ex):
        sweep(config, ex).write(args.out, plot_data=plot_data)

    return go


def _cmd_radius(cfg, args):
    dist, trials, seed = _common(cfg, args.seed)
    T = _trickset(cfg, dist)
    focus = FocusSet(cfg["focus"]) if "focus" in cfg else None
    adversary = strategy_from_dict(cfg["adversary"], T) if "adversary" in cfg else None
    grid = make_radii(cfg["radii"]) if "radii" in cfg else None
    level = float(cfg.get("level", 0.1))

    def go(ex):
        bracket = bracket_detectability_radius(
            T, dist, trials, seed, level, focus=focus, adversary=adversary, grid=grid, executor=ex
        )
        payload = bracket.to_dict()
        payload["metadata"] = _metadata("radius", cfg, seed)
        _write_json(args.out, payload)

    return go


def _cmd_invariance(cfg, args):
    dist, trials, seed = _common(cfg, args.seed)
    T = _trickset(cfg, dist)
    r = float(_get(cfg, "r"))

    def go(ex):
        payload = invariance_check(T, dist, r, trials, seed).to_dict()
        payload["metadata"] = _metadata("invariance", cfg, seed)
        _write_json(args.out, payload)

    return go


def _cmd_focused(cfg, args):
    dist, trials, seed = _common(cfg, args.seed)
    T = _trickset(cfg, dist)
    candidates = [T if c == "self" else FocusSet(c) for c in _get(cfg, "candidates")]

    def go(ex):
        statuses = [status for _, status in assess_candidates(T, candidates)]
        est, chosen = focused_width_upper_bound(T, candidates, dist, trials, seed, ex)
        scaled = estimate_scaled_width(T, dist, trials, seed, ex)
        payload = {
            "upper_bound": est.to_dict(),
            "chosen": next(i for i, c in enumerate(candidates) if c is chosen),
            "candidates": [{"index": i, "status": s} for i, s in enumerate(statuses)],
            "scaled_width": scaled.to_dict(),
            "analytic_scaled_width": analytic_scaled_width(T) if dist.kind == "gaussian" else None,
            "metadata": _metadata("focused", cfg, seed),
        }
        _write_json(args.out, payload)

    return go


_HANDLERS = {
    "width": _cmd_width,
    "sweep": _cmd_sweep,
    "radius": _cmd_radius,
    "invariance": _cmd_invariance,
    "focused": _cmd_focused,
}


def _fail(code: int, exc: Exception) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, BracketingError):
        record["diagnostics"] = exc.diagnostics
    print(json.dumps(record), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = _workers(args)
        cfg = _load(args.config)
        try:
            job = _HANDLERS[args.command](cfg, args)
        except (PreconditionError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_CONFIG, exc)
    try:
        with _pool(workers) as ex:
            job(ex)
    except BracketingError as exc:
        return _fail(EXIT_BRACKET, exc)
    except (PreconditionError, UndecidableError) as exc:
        return _fail(EXIT_PRECONDITION, exc)
    except FakeWidthError as exc:
        return _fail(1, exc)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
