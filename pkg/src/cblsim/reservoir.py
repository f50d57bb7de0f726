"""Discrete-cycle Monte Carlo engine for the local reservoir.

The reservoir is a ladder of N lower energy levels (indexed 1..N) and N+1
upper levels (indexed 1..N+1).  Each level holds at most one excitation.
An excitation on lower level i can be promoted along one of two arrows:

* ``L`` arrow: lower i -> upper i+1 (corresponds to Decision L),
* ``R`` arrow: lower i -> upper i   (corresponds to Decision R).

An arrow is enabled iff its source lower level is occupied and its target
upper level is empty.  Each cycle one enabled arrow is drawn uniformly at
random and fired; the two levels it touches are blocked until ``lifetime``
cycles later, when the lower level refills and the upper level empties.
If no arrow is enabled the cycle stalls: time advances, nothing fires.

The scalar functions here are the reference semantics; :mod:`cblsim.engine`
runs the same dynamics vectorized over many trials.  Both consume exactly
one uniform draw per cycle from the per-trial stream returned by
:func:`trial_rng`, so a trial produced by either path is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

# Decision outcomes.  Integer codes are what the batched engine stores.
L = "L"
R = "R"
STALL = "stall"

L_CODE = 0
R_CODE = 1
STALL_CODE = 2

OUTCOME_BY_CODE = {L_CODE: L, R_CODE: R, STALL_CODE: STALL}


@dataclass(frozen=True)
class ReservoirConfig:
    """Parameters of one simulation run.

    ``t0`` is the reference cycle used by the consistency statistics;
    decisions are recorded for cycles 1..total_cycles.
    """

    n_levels: int
    lifetime: int
    total_cycles: int
    t0: int
    trials: int
    seed: int

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        if self.lifetime < 1:
            raise ValueError(f"lifetime must be >= 1, got {self.lifetime}")
        if self.total_cycles < 1:
            raise ValueError(f"total_cycles must be >= 1, got {self.total_cycles}")
        if not 1 <= self.t0 < self.total_cycles:
            raise ValueError(
                f"t0 must satisfy 1 <= t0 < total_cycles, got t0={self.t0} "
                f"with total_cycles={self.total_cycles}"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")

    @property
    def n_arrows(self) -> int:
        return 2 * self.n_levels


class Arrow(NamedTuple):
    """One excitation path out of a lower level (1-based index)."""

    kind: str  # L or R
    index: int

    def target_upper(self) -> int:
        return self.index + 1 if self.kind == L else self.index


@dataclass
class DecisionEvent:
    cycle: int
    outcome: str  # L, R or STALL
    fired_arrow: Optional[Arrow] = None


@dataclass
class ReservoirState:
    """Occupancy plus recovery timers; arrow availability is derived.

    Timer convention: value 0 means "no timer".  A lower level with
    ``lower_refill_at[i] == tau`` is empty and refills at the start of
    cycle tau; an upper level with ``upper_clear_at[j] == tau`` is
    occupied and empties at the start of cycle tau.
    """

    n_levels: int
    lifetime: int
    cycle: int = 0
    lower_occupied: np.ndarray = field(default=None)
    upper_occupied: np.ndarray = field(default=None)
    lower_refill_at: np.ndarray = field(default=None)
    upper_clear_at: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.n_levels
        if self.lower_occupied is None:
            self.lower_occupied = np.ones(n, dtype=bool)
        if self.upper_occupied is None:
            self.upper_occupied = np.zeros(n + 1, dtype=bool)
        if self.lower_refill_at is None:
            self.lower_refill_at = np.zeros(n, dtype=np.int64)
        if self.upper_clear_at is None:
            self.upper_clear_at = np.zeros(n + 1, dtype=np.int64)


def new_state(config: ReservoirConfig) -> ReservoirState:
    """Fresh state: all lower levels occupied, all upper levels empty."""
    return ReservoirState(n_levels=config.n_levels, lifetime=config.lifetime)


def enabled_arrows(state: ReservoirState) -> list[Arrow]:
    """Arrows whose source lower level is occupied and target upper empty.

    Returned in the canonical order L1..LN, R1..RN; uniform sampling picks
    by position in this list, so the order is part of the trial contract.
    """
    lower = state.lower_occupied
    upper = state.upper_occupied
    arrows = [Arrow(L, i + 1) for i in range(state.n_levels)
              if lower[i] and not upper[i + 1]]
    arrows += [Arrow(R, i + 1) for i in range(state.n_levels)
               if lower[i] and not upper[i]]
    return arrows


def recover(state: ReservoirState, now: int) -> ReservoirState:
    """Advance to cycle ``now``, restoring every level whose timer expired.

    Mutates ``state`` in place and returns it.
    """
    if now != state.cycle + 1:
        raise ValueError(f"recover expects now == cycle + 1, got now={now} "
                         f"with cycle={state.cycle}")
    refill = (state.lower_refill_at != 0) & (state.lower_refill_at <= now)
    state.lower_occupied[refill] = True
    state.lower_refill_at[refill] = 0
    clear = (state.upper_clear_at != 0) & (state.upper_clear_at <= now)
    state.upper_occupied[clear] = False
    state.upper_clear_at[clear] = 0
    state.cycle = now
    return state


def fire(state: ReservoirState, arrow: Arrow) -> ReservoirState:
    """Promote one excitation along ``arrow``; both touched levels get
    recovery timers at cycle + lifetime.  Mutates ``state`` in place.
    """
    i = arrow.index - 1
    j = arrow.target_upper() - 1
    if not state.lower_occupied[i] or state.upper_occupied[j]:
        raise ValueError(f"arrow {arrow.kind}{arrow.index} is not enabled")
    tau = state.cycle + state.lifetime
    state.lower_occupied[i] = False
    state.lower_refill_at[i] = tau
    state.upper_occupied[j] = True
    state.upper_clear_at[j] = tau
    return state


def step(state: ReservoirState, rng: np.random.Generator) -> tuple[ReservoirState, DecisionEvent]:
    """One cycle: recover, then fire a uniformly drawn enabled arrow.

    Exactly one uniform is consumed per call, whether or not the cycle
    stalls; the batched engine relies on this to stay on the same stream.
    """
    now = state.cycle + 1
    recover(state, now)
    u = rng.random()
    arrows = enabled_arrows(state)
    if not arrows:
        return state, DecisionEvent(cycle=now, outcome=STALL)
    k = min(int(u * len(arrows)), len(arrows) - 1)
    arrow = arrows[k]
    fire(state, arrow)
    return state, DecisionEvent(cycle=now, outcome=arrow.kind, fired_arrow=arrow)


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Per-trial random stream; (seed, trial_index) fully determines it."""
    return np.random.default_rng((seed, trial_index))


def run_trial(config: ReservoirConfig, trial_index: int) -> list[DecisionEvent]:
    """Run one trial of ``total_cycles`` decisions from the fresh state."""
    if not 0 <= trial_index < config.trials:
        raise ValueError(f"trial_index {trial_index} out of range "
                         f"[0, {config.trials})")
    rng = trial_rng(config.seed, trial_index)
    state = new_state(config)
    events = []
    for _ in range(config.total_cycles):
        state, event = step(state, rng)
        events.append(event)
    return events
