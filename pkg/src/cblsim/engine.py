"""Batched trial runner: the reservoir dynamics compiled over many trials.

Runs the exact dynamics of :mod:`cblsim.reservoir` for a whole ensemble of
trials, one row per trial.  Per-trial uniforms are pre-drawn from
:func:`cblsim.reservoir.trial_rng` (one per cycle), so row ``i`` of the
decision matrix is identical to the event sequence of ``run_trial(config, i)``
up to however many cycles were simulated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .reservoir import ReservoirConfig, trial_rng

_CHUNK_TRIALS = 8192


@njit(cache=True, parallel=True)
def _simulate_chunk(n, lifetime, cycles, t0, u, decisions, disabled_at_t0):
    # decisions codes: 0 = L, 1 = R, 2 = stall.
    # Arrow order within a cycle matches reservoir.enabled_arrows:
    # L1..LN first, then R1..RN.
    n_trials = u.shape[0]
    for t in prange(n_trials):
        lower = np.ones(n, np.bool_)
        upper = np.zeros(n + 1, np.bool_)
        # Ring buffers: the level fired at cycle c recovers at c + lifetime,
        # which maps back to the same slot c % lifetime.
        ring_lower = np.full(lifetime, -1, np.int64)
        ring_upper = np.full(lifetime, -1, np.int64)
        for c in range(1, cycles + 1):
            slot = c % lifetime
            if ring_lower[slot] >= 0:
                lower[ring_lower[slot]] = True
                ring_lower[slot] = -1
            if ring_upper[slot] >= 0:
                upper[ring_upper[slot]] = False
                ring_upper[slot] = -1

            count = 0
            for i in range(n):
                if lower[i]:
                    if not upper[i + 1]:
                        count += 1
                    if not upper[i]:
                        count += 1
            if c == t0:
                disabled_at_t0[t] = 2 * n - count

            if count == 0:
                decisions[t, c - 1] = 2
                continue
            k = int(u[t, c - 1] * count)
            if k >= count:
                k = count - 1
            src = -1
            dst = -1
            kind = 0
            for i in range(n):
                if lower[i] and not upper[i + 1]:
                    if k == 0:
                        src = i
                        dst = i + 1
                        break
                    k -= 1
            if src < 0:
                kind = 1
                for i in range(n):
                    if lower[i] and not upper[i]:
                        if k == 0:
                            src = i
                            dst = i
                            break
                        k -= 1
            lower[src] = False
            upper[dst] = True
            ring_lower[slot] = src
            ring_upper[slot] = dst
            decisions[t, c - 1] = kind


@dataclass
class TrialEnsemble:
    """Decision matrix for a batch of trials.

    ``decisions[i, c-1]`` is the outcome code at cycle c of trial i
    (0 = L, 1 = R, 2 = stall).  ``disabled_fraction_at_t0`` is the
    fraction of the 2N arrows that were disabled at the start of cycle
    t0, after recovery and before that cycle's firing (all zeros when the
    run was shorter than t0).
    """

    config: ReservoirConfig
    decisions: np.ndarray
    disabled_fraction_at_t0: np.ndarray

    @property
    def n_cycles(self) -> int:
        return self.decisions.shape[1]


def run_trials(config: ReservoirConfig, cycles: int | None = None) -> TrialEnsemble:
    """Simulate all ``config.trials`` trials for ``cycles`` cycles.

    ``cycles`` defaults to ``config.total_cycles``; a shorter run produces
    the identical prefix of each trial, since streams are consumed one
    uniform per cycle.
    """
    if cycles is None:
        cycles = config.total_cycles
    if not 1 <= cycles <= config.total_cycles:
        raise ValueError(f"cycles must be in [1, {config.total_cycles}], got {cycles}")
    n_trials = config.trials
    decisions = np.empty((n_trials, cycles), dtype=np.int8)
    disabled = np.zeros(n_trials, dtype=np.int64)
    t0 = config.t0 if config.t0 <= cycles else 0
    for start in range(0, n_trials, _CHUNK_TRIALS):
        stop = min(start + _CHUNK_TRIALS, n_trials)
        u = np.empty((stop - start, cycles), dtype=np.float64)
        for j in range(start, stop):
            u[j - start] = trial_rng(config.seed, j).random(cycles)
        _simulate_chunk(
            config.n_levels,
            config.lifetime,
            cycles,
            t0,
            u,
            decisions[start:stop],
            disabled[start:stop],
        )
    frac = disabled.astype(np.float64) / config.n_arrows
    return TrialEnsemble(config=config, decisions=decisions,
                         disabled_fraction_at_t0=frac)
