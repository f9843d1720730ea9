"""Failure-time strategy selection for surviving nodes.

At the moment of a fail-stop, every surviving node that directly blocks with
the failed node is evaluated: all frequencies are swept, candidates whose
stretched compute phase (checkpoints included) would outlast the recovered
process are discarded, the wait phase is priced sleeping vs awake, and the
minimum-energy plan is kept.  Ties prefer the higher frequency, then staying
awake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    FrequencyLevel,
    FrequencyTable,
    FTConfig,
    InterventionEstimate,
    NodePowerProfile,
    SleepThresholds,
    WaitAction,
    WaitMode,
    e_comp,
    ei_wait,
    eni,
    t_ckpt_at,
    t_failed as model_t_failed,
    t_recover as model_t_recover,
)
from .scenario import FailureSpec, Scenario


@dataclass(frozen=True)
class CheckpointPhase:
    """A node's checkpoint-timer state at failure time.

    acc: compute-seconds accumulated toward the next timer checkpoint.
    age: wall seconds since the last completed checkpoint.
    """

    acc: float = 0.0
    age: float = 0.0


@dataclass(frozen=True)
class NodeObservation:
    """What the selector sees about one surviving node at failure time."""

    node: int
    compute_to_block: float     # max-frequency seconds until it blocks on the failed node
    failed_to_match: float      # failed node's post-recovery compute to the matching op
    ckpt_phase: CheckpointPhase


@dataclass(frozen=True)
class FailureContext:
    """Failure-time snapshot consumed by the selector."""

    failure: FailureSpec
    t_reexec: float
    survivors: tuple[int, ...]
    observations: dict[int, NodeObservation]   # directly-affected survivors only


@dataclass(frozen=True)
class PlanPrediction:
    """Closed-form quantities of the selected candidate."""

    t_comp_f: float      # stretched application compute, checkpoint time excluded
    t_ckpt_total: float  # total checkpoint time inside the compute phase
    t_wait: float
    e_comp: float
    e_wait: float
    e_total: float
    eni: float
    saving: float


@dataclass(frozen=True)
class InterventionPlan:
    node: int
    compute_freq: FrequencyLevel
    wait_action: WaitAction
    n_ckpt: int
    t_failed: float      # the estimate the plan was built against
    predicted: PlanPrediction


def phase_checkpoints(t_comp_wall: float, ft: FTConfig, ckpt: CheckpointPhase,
                      move_ahead: float | None) -> tuple[int, bool]:
    """Checkpoints inside a compute phase of t_comp_wall wall-seconds.

    Returns (timer fires strictly inside the phase, whether a moving-ahead
    checkpoint triggers at the block point).  The timer counts wall seconds
    spent computing and resets on every completed checkpoint; the move-ahead
    gate compares wall age since the last completed checkpoint against
    move_ahead * ckpt_interval.
    """
    interval = ft.ckpt_interval
    first_in = interval - ckpt.acc
    if t_comp_wall > first_in:
        n_timer = math.ceil((t_comp_wall - first_in) / interval)
    else:
        n_timer = 0
    if move_ahead is None:
        return n_timer, False
    if n_timer > 0:
        age_at_block = t_comp_wall - (first_in + (n_timer - 1) * interval)
    else:
        age_at_block = ckpt.age + t_comp_wall
    return n_timer, age_at_block >= move_ahead * interval


def estimate_times(obs: NodeObservation, ft: FTConfig, t_reexec: float,
                   move_ahead: float | None = 0.5) -> InterventionEstimate:
    """Failure-time estimate for one node; n_ckpt counted at maximum frequency."""
    recover = model_t_recover(ft, t_reexec)
    tf = model_t_failed(recover, 1.0, obs.failed_to_match)
    if obs.compute_to_block == 0.0:
        move_ahead = None  # already blocked: the wait phase has begun
    n_timer, moves = phase_checkpoints(obs.compute_to_block, ft, obs.ckpt_phase, move_ahead)
    return InterventionEstimate(t_comp_max=obs.compute_to_block, t_failed=tf,
                                n_ckpt=n_timer + (1 if moves else 0))


def evaluate(node: int, est: InterventionEstimate, table: FrequencyTable,
             mode: WaitMode, prof: NodePowerProfile, ft: FTConfig,
             th: SleepThresholds, ckpt: CheckpointPhase = CheckpointPhase(),
             move_ahead: float | None = 0.5) -> InterventionPlan | None:
    """Sweep all frequencies and return the minimum-energy feasible plan.

    The candidate checkpoint count is recomputed per frequency, since a
    stretched compute phase can pull additional timer checkpoints into the
    interval.  Returns None when no frequency is feasible (the node is not
    actually blocked by the recovered process).
    """
    intervened_prof = prof.with_active_wait(table.min_level.p_comp)
    if est.t_comp_max == 0.0:
        move_ahead = None  # already blocked: no early checkpoint possible
    best = None
    for f in table.levels:  # descending frequency: strict < keeps the higher on ties
        t_comp_wall = est.t_comp_max * f.beta
        n_timer, moves = phase_checkpoints(t_comp_wall, ft, ckpt, move_ahead)
        n_ckpt = n_timer + (1 if moves else 0)
        busy = t_comp_wall + n_ckpt * t_ckpt_at(f, ft)
        if busy > est.t_failed:
            continue  # the restarted process would have to wait
        wait = est.t_failed - busy
        e_wait, action = ei_wait(wait, mode, intervened_prof, th)
        e_c = e_comp(est.t_comp_max, n_ckpt, f, ft)
        total = e_c + e_wait
        if best is None or total < best[0]:
            best = (total, f, action, n_ckpt, busy, wait, e_c, e_wait)
    if best is None:
        return None
    total, f, action, n_ckpt, busy, wait, e_c, e_wait = best
    baseline = eni(est.t_comp_max, est.n_ckpt, est.t_failed, table, mode, prof, ft)
    prediction = PlanPrediction(
        t_comp_f=est.t_comp_max * f.beta,
        t_ckpt_total=n_ckpt * t_ckpt_at(f, ft),
        t_wait=wait,
        e_comp=e_c,
        e_wait=e_wait,
        e_total=total,
        eni=baseline,
        saving=baseline - total,
    )
    return InterventionPlan(node=node, compute_freq=f, wait_action=action,
                            n_ckpt=n_ckpt, t_failed=est.t_failed,
                            predicted=prediction)


def evaluate_all(failure: FailureSpec, scenario: Scenario,
                 context: FailureContext | None = None) -> dict[int, InterventionPlan]:
    """Plans for every surviving node that directly blocks with the failed node.

    Nodes with no direct communication left toward the failed node are not
    intervened (indirect blocking chains are out of scope) and are absent
    from the result.
    """
    if context is None:
        from .engine import snapshot_at_failure  # deferred: engine imports this module

        context = snapshot_at_failure(scenario, failure)
    plans: dict[int, InterventionPlan] = {}
    for node, obs in sorted(context.observations.items()):
        est = estimate_times(obs, scenario.ft, context.t_reexec, scenario.move_ahead_policy)
        plan = evaluate(node, est, scenario.freq_table, scenario.wait_mode,
                        scenario.node_profile, scenario.ft, scenario.thresholds,
                        obs.ckpt_phase, scenario.move_ahead_policy)
        if plan is not None:
            plans[node] = plan
    return plans
