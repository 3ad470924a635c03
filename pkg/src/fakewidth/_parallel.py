"""Block-parallel map with a fixed-order reduction.

Workers are owned by the caller (normally the CLI), which passes any
``concurrent.futures.Executor``.  Library code never creates a pool.
"""

from __future__ import annotations

from .distributions import block_ranges


def map_blocks(func, n_trials: int, block_size: int, executor=None) -> list:
    """Evaluate ``func(lo, hi)`` on every block of ``[0, n_trials)``.

    Results come back in block order whatever the executor's scheduling, so
    reductions over them are deterministic.  ``func`` must be picklable when
    a process pool is used (a ``functools.partial`` of a module-level
    function is).
    """
    ranges = [(lo, hi) for _, lo, hi in block_ranges(0, n_trials, block_size)]
    if executor is None:
        return [func(lo, hi) for lo, hi in ranges]
    los, his = zip(*ranges)
    return list(executor.map(func, los, his))
