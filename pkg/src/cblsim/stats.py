"""Ensemble observables: consistency curves, active portion, walks, sweeps.

All statistics are plain reductions over the per-trial decision matrix, so
they are order-independent in the trials and recomputable from a stored
trace.  The consistency convention: the decision at cycle t0 is the
reference; offset t compares the decision at cycle t0 + t.  A trial that
stalls at t0 is dropped entirely; a stall at t0 + t contributes no sample
at that offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import TrialEnsemble, run_trials
from .reservoir import L_CODE, R_CODE, STALL_CODE, ReservoirConfig


@dataclass
class ConsistencyCurve:
    """Mean decision consistency per offset after the reference cycle."""

    offsets: np.ndarray  # 1..max_offset
    mean: np.ndarray     # NaN where no trial contributed a sample
    samples: np.ndarray


@dataclass
class ActivePortionStat:
    """Mean fraction of disabled arrows at the reference cycle."""

    mean_fraction: float
    trials: int


@dataclass
class WalkTrace:
    """One trial viewed as a walker: +1 per L, -1 per R, flat on stall."""

    trial_id: int
    first_decision: str
    positions: np.ndarray


@dataclass
class SweepRow:
    n_levels: int
    lifetime: int
    max_consistency: float
    active_portion: float


def _ensemble_for(config_or_ensemble, cycles_needed: int) -> TrialEnsemble:
    if isinstance(config_or_ensemble, TrialEnsemble):
        ens = config_or_ensemble
        if ens.n_cycles < cycles_needed:
            raise ValueError(
                f"ensemble holds {ens.n_cycles} cycles, need {cycles_needed}")
        return ens
    return run_trials(config_or_ensemble, cycles=cycles_needed)


def consistency_curve(config, max_offset: int) -> ConsistencyCurve:
    """Mean consistency at offsets 1..max_offset after cycle t0.

    ``config`` may be a :class:`ReservoirConfig` (trials are simulated) or
    an already-simulated :class:`TrialEnsemble`.
    """
    cfg = config.config if isinstance(config, TrialEnsemble) else config
    if max_offset < 1:
        raise ValueError(f"max_offset must be >= 1, got {max_offset}")
    if cfg.t0 + max_offset > cfg.total_cycles:
        raise ValueError(
            f"t0 + max_offset = {cfg.t0 + max_offset} exceeds "
            f"total_cycles = {cfg.total_cycles}")
    ens = _ensemble_for(config, cfg.t0 + max_offset)
    decisions = ens.decisions
    ref = decisions[:, cfg.t0 - 1]
    valid = ref != STALL_CODE
    if not valid.any():
        raise ValueError("every trial stalled at the reference cycle t0; "
                         "the consistency curve is empty")
    window = decisions[valid, cfg.t0:cfg.t0 + max_offset]
    sampled = window != STALL_CODE
    agree = sampled & (window == ref[valid, None])
    samples = sampled.sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean = np.where(samples > 0, agree.sum(axis=0) / np.maximum(samples, 1),
                        np.nan)
    return ConsistencyCurve(offsets=np.arange(1, max_offset + 1),
                            mean=mean, samples=samples)


def max_consistency(curve: ConsistencyCurve) -> float:
    """Largest mean consistency over offsets that received samples."""
    have = curve.samples > 0
    if curve.mean.size == 0 or not have.any():
        raise ValueError("consistency curve has no sampled offsets")
    return float(np.max(curve.mean[have]))


def active_portion(config) -> ActivePortionStat:
    """Mean disabled-arrow fraction at the start of cycle t0 (post-recovery)."""
    cfg = config.config if isinstance(config, TrialEnsemble) else config
    ens = _ensemble_for(config, cfg.t0)
    frac = ens.disabled_fraction_at_t0
    return ActivePortionStat(mean_fraction=float(frac.mean()), trials=len(frac))


def walk_traces(config, n_traces: int, max_offset: int | None = None) -> list[WalkTrace]:
    """Per-trial walker positions for cycles t0+1 .. t0+max_offset.

    Position starts at 0 at the reference cycle; trials that stalled at t0
    carry no first decision and are skipped.
    """
    cfg = config.config if isinstance(config, TrialEnsemble) else config
    if not 1 <= n_traces <= cfg.trials:
        raise ValueError(f"n_traces must be in [1, {cfg.trials}], got {n_traces}")
    if max_offset is None:
        max_offset = cfg.total_cycles - cfg.t0
    ens = _ensemble_for(config, cfg.t0 + max_offset)
    decisions = ens.decisions
    steps_by_code = np.array([1, -1, 0], dtype=np.int64)  # L up, R down, stall flat
    traces = []
    for i in range(decisions.shape[0]):
        ref = decisions[i, cfg.t0 - 1]
        if ref == STALL_CODE:
            continue
        window = decisions[i, cfg.t0:cfg.t0 + max_offset]
        positions = np.cumsum(steps_by_code[window])
        traces.append(WalkTrace(trial_id=i,
                                first_decision="L" if ref == L_CODE else "R",
                                positions=positions))
        if len(traces) == n_traces:
            break
    return traces


def sweep(configs, max_offset: int = 200) -> list[SweepRow]:
    """Max consistency and active portion for each configuration."""
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one configuration")
    rows = []
    for cfg in configs:
        ens = run_trials(cfg, cycles=min(cfg.total_cycles, cfg.t0 + max_offset))
        curve = consistency_curve(ens, max_offset=min(max_offset,
                                                      cfg.total_cycles - cfg.t0))
        rows.append(SweepRow(n_levels=cfg.n_levels,
                             lifetime=cfg.lifetime,
                             max_consistency=max_consistency(curve),
                             active_portion=active_portion(ens).mean_fraction))
    return rows
