"""Closed-form time and energy model for one surviving node's intervention interval.

All durations are seconds, powers are watts, energies are joules, as 64-bit
floats.  Every function here is pure and total on valid inputs; rounding is
left to presentation layers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace


class WaitMode(enum.Enum):
    """How a blocked process waits: busy-polling or yielding the processor."""

    ACTIVE = "active"
    IDLE = "idle"


class WaitAction(enum.Enum):
    """Action applied to a node during the wait phase of its intervention."""

    SLEEP = "sleep"
    MIN_FREQ = "min-freq"
    NO_ACTION = "no-action"


@dataclass(frozen=True)
class FrequencyLevel:
    """One P-state: clock label, application/checkpoint power and slowdown."""

    freq: float        # GHz, used as a label
    p_comp: float      # W, average application power at this frequency
    beta: float        # application slowdown factor, >= 1
    p_ckpt: float      # W, average checkpoint power at this frequency
    gamma: float       # checkpoint slowdown factor, >= 1

    def __post_init__(self):
        if self.beta < 1.0 or self.gamma < 1.0:
            raise ValueError(f"slowdown factors must be >= 1 (beta={self.beta}, gamma={self.gamma})")
        if self.p_comp <= 0.0 or self.p_ckpt <= 0.0:
            raise ValueError("powers must be positive")

    @property
    def label(self) -> str:
        return f"{self.freq:g} GHz"


@dataclass(frozen=True)
class FrequencyTable:
    """Available P-states, ordered by strictly decreasing clock."""

    levels: tuple[FrequencyLevel, ...]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("frequency table must not be empty")
        freqs = [lv.freq for lv in self.levels]
        if any(nxt >= prev for nxt, prev in zip(freqs[1:], freqs)):
            raise ValueError("frequency levels must be strictly decreasing")
        if self.levels[0].beta != 1.0 or self.levels[0].gamma != 1.0:
            raise ValueError("maximum-frequency level must have beta = gamma = 1")
        if sum(1 for lv in self.levels if lv.beta == 1.0) != 1:
            raise ValueError("exactly one level may have beta = 1")

    @property
    def max_level(self) -> FrequencyLevel:
        return self.levels[0]

    @property
    def min_level(self) -> FrequencyLevel:
        return self.levels[-1]


@dataclass(frozen=True)
class NodePowerProfile:
    """Node base/wait powers and S-state transition timing.

    p_active_wait is contextual: the no-intervention baseline carries the
    maximum-frequency application power here, the intervened case carries the
    minimum-frequency application power.  Use :meth:`with_active_wait`.
    """

    p_base: float
    p_active_wait: float
    p_idle_wait: float
    t_go_sleep: float
    t_wakeup: float
    p_go_sleep: float
    p_wakeup: float
    p_sleep: float

    def __post_init__(self):
        if not (self.p_sleep < self.p_idle_wait <= self.p_active_wait):
            raise ValueError("require p_sleep < p_idle_wait <= p_active_wait")
        if self.t_go_sleep < 0.0 or self.t_wakeup < 0.0:
            raise ValueError("transition times must be >= 0")
        for p in (self.p_base, self.p_active_wait, self.p_idle_wait,
                  self.p_go_sleep, self.p_wakeup, self.p_sleep):
            if p <= 0.0:
                raise ValueError("powers must be positive")

    def with_active_wait(self, power: float) -> "NodePowerProfile":
        return replace(self, p_active_wait=power)

    @property
    def t_transitions(self) -> float:
        return self.t_go_sleep + self.t_wakeup


@dataclass(frozen=True)
class FTConfig:
    """Fault-tolerance timing: checkpoint, interval, downtime, restart."""

    t_ckpt: float
    ckpt_interval: float
    t_down: float
    t_restart: float

    def __post_init__(self):
        for v in (self.t_ckpt, self.ckpt_interval, self.t_down, self.t_restart):
            if v < 0.0:
                raise ValueError("fault-tolerance times must be >= 0")
        if self.ckpt_interval <= self.t_ckpt:
            raise ValueError("ckpt_interval must exceed t_ckpt")


@dataclass(frozen=True)
class CommLink:
    """Communication state between a surviving node i and the failed node j."""

    i: int
    j: int
    i_comm: float       # interval duration at maximum frequency
    alpha_ij: float     # fraction of the interval left for i to reach the rendezvous
    alpha_ji: float     # fraction left for j (post-recovery) to reach it

    def __post_init__(self):
        if self.i_comm <= 0.0:
            raise ValueError("i_comm must be positive")
        for a in (self.alpha_ij, self.alpha_ji):
            if not 0.0 <= a <= 1.0:
                raise ValueError("alpha fractions must lie in [0, 1]")


@dataclass(frozen=True)
class SleepThresholds:
    """Margins gating the sleep decision: mu1 on time, mu2 on energy."""

    mu1: float = 1.0
    mu2: float = 1.0

    def __post_init__(self):
        if self.mu1 <= 0.0 or self.mu2 <= 0.0:
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class InterventionEstimate:
    """Failure-time estimate for one surviving node, at maximum frequency."""

    t_comp_max: float   # computation-phase duration at max frequency
    t_failed: float     # failure -> recovered process blocks on this node
    n_ckpt: int         # checkpoints inside the max-frequency phase

    def __post_init__(self):
        if self.t_failed < 0.0:
            raise ValueError("t_failed must be >= 0")
        if self.n_ckpt < 0:
            raise ValueError("n_ckpt must be >= 0")


def t_comp(alpha_ij: float, i_comm: float, f: FrequencyLevel) -> float:
    """Computation-phase duration at frequency f: alpha * I_comm * beta(f)."""
    return alpha_ij * i_comm * f.beta


def t_ckpt_at(f: FrequencyLevel, ft: FTConfig) -> float:
    """Checkpoint duration at frequency f: t_ckpt * gamma(f)."""
    return ft.t_ckpt * f.gamma


def e_comp(t_comp_max: float, n_ckpt: int, f: FrequencyLevel, ft: FTConfig) -> float:
    """Compute-phase energy: application part plus n_ckpt checkpoints, both at f."""
    app = t_comp_max * f.beta * f.p_comp
    ckpt = n_ckpt * t_ckpt_at(f, ft) * f.p_ckpt
    return app + ckpt


def t_recover(ft: FTConfig, t_reexec: float) -> float:
    """Recovery duration: downtime + restart + re-execution (at max frequency)."""
    if t_reexec < 0.0:
        raise ValueError("t_reexec must be >= 0")
    return ft.t_down + ft.t_restart + t_reexec


def t_failed(t_recover: float, alpha_ji: float, i_comm: float) -> float:
    """Time from failure until the recovered process blocks on this node."""
    return t_recover + alpha_ji * i_comm


def t_wait(t_failed: float, t_comp_f: float) -> float:
    """Wait-phase duration, clamped at zero.

    A negative analytic value means the surviving process arrives late;
    callers must reject the frequency as infeasible before clamping.
    """
    return max(t_failed - t_comp_f, 0.0)


def e_awake_wait(t_wait: float, mode: WaitMode, prof: NodePowerProfile) -> float:
    """Wait-phase energy while staying awake, per the configured wait mode."""
    if t_wait < 0.0:
        raise ValueError("t_wait must be >= 0")
    if mode is WaitMode.ACTIVE:
        return t_wait * prof.p_active_wait
    return t_wait * prof.p_idle_wait


def ei_sleep_wait(t_wait: float, prof: NodePowerProfile) -> float:
    """Wait-phase energy when sleeping: go-sleep + sleep + wakeup segments."""
    t_sleep = t_wait - prof.t_transitions
    if t_sleep < 0.0:
        raise ValueError("t_wait shorter than sleep/wake transitions (caller must gate on mu1)")
    return (prof.t_go_sleep * prof.p_go_sleep
            + t_sleep * prof.p_sleep
            + prof.t_wakeup * prof.p_wakeup)


def ei_wait(t_wait: float, mode: WaitMode, prof: NodePowerProfile,
            th: SleepThresholds) -> tuple[float, WaitAction]:
    """Intervened wait-phase energy and the action that realizes it.

    The node sleeps only when the wait exceeds mu1 times the transition time
    AND sleeping costs less than mu2 times the awake alternative (and the wait
    physically fits the transitions).  Awake under active waits means
    switching to the minimum frequency; under idle waits nothing is done.
    """
    awake = e_awake_wait(t_wait, mode, prof)
    if t_wait > th.mu1 * prof.t_transitions and t_wait >= prof.t_transitions:
        asleep = ei_sleep_wait(t_wait, prof)
        if asleep < th.mu2 * awake:
            return asleep, WaitAction.SLEEP
    if mode is WaitMode.ACTIVE:
        return awake, WaitAction.MIN_FREQ
    return awake, WaitAction.NO_ACTION


def eni(t_comp_max: float, n_ckpt: int, t_failed: float, table: FrequencyTable,
        mode: WaitMode, prof: NodePowerProfile, ft: FTConfig) -> float:
    """Baseline (no intervention) energy over the intervention interval.

    Everything runs at the maximum frequency; active waits are billed at the
    maximum-frequency application power.
    """
    fa = table.max_level
    busy = t_comp_max + n_ckpt * t_ckpt_at(fa, ft)
    wait = t_wait(t_failed, busy)
    base_prof = prof.with_active_wait(fa.p_comp)
    return e_comp(t_comp_max, n_ckpt, fa, ft) + e_awake_wait(wait, mode, base_prof)


def ei(f: FrequencyLevel, t_comp_max: float, n_ckpt: int, t_failed: float,
       table: FrequencyTable, mode: WaitMode, prof: NodePowerProfile,
       ft: FTConfig, th: SleepThresholds) -> tuple[float, WaitAction]:
    """Intervened energy at compute frequency f, with the gated wait action.

    Raises ValueError when f is infeasible (the stretched compute phase would
    outlast t_failed); the strategy selector filters such candidates first.
    """
    busy = t_comp_max * f.beta + n_ckpt * t_ckpt_at(f, ft)
    if busy > t_failed:
        raise ValueError(f"infeasible frequency {f.label}: compute phase {busy:.6g} s "
                         f"exceeds t_failed {t_failed:.6g} s")
    wait = t_failed - busy
    int_prof = prof.with_active_wait(table.min_level.p_comp)
    e_wait, action = ei_wait(wait, mode, int_prof, th)
    return e_comp(t_comp_max, n_ckpt, f, ft) + e_wait, action


def energy_saving(eni: float, ei: float) -> float:
    """Energy saved by the intervention; may be negative for a bad candidate."""
    return eni - ei
