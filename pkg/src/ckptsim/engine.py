"""Event-driven simulator of one-process-per-node execution with blocking
synchronous sends/receives, timer-driven uncoordinated checkpoints with
moving-ahead, single fail-stop injection, plan enactment, and piecewise
power integration.

The engine runs the same scenario twice: a baseline pass (no plans, maximum
frequency throughout) and an intervened pass (strategy selection at failure
time).  Both passes are fully deterministic; per-node savings come from
subtracting ledger energies over each node's intervention interval.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field, replace

from .model import FrequencyLevel, WaitAction, WaitMode
from .scenario import ComputeFor, FailureSpec, RecvFrom, Scenario, SsendTo
from .selector import (
    CheckpointPhase,
    FailureContext,
    InterventionPlan,
    NodeObservation,
    evaluate_all,
)


class ScriptError(Exception):
    """Unmatched communication or deadlock discovered while simulating."""


class Phase(enum.Enum):
    COMPUTING = "computing"
    BLOCKED_SEND = "blocked_send"
    BLOCKED_RECV = "blocked_recv"
    CHECKPOINTING = "checkpointing"
    DOWN = "down"
    RESTARTING = "restarting"
    REEXECUTING = "reexecuting"
    GOING_TO_SLEEP = "going_to_sleep"
    SLEEPING = "sleeping"
    WAKING = "waking"
    DONE = "done"


BLOCKED_PHASES = (Phase.BLOCKED_SEND, Phase.BLOCKED_RECV)
ASLEEP_PHASES = (Phase.GOING_TO_SLEEP, Phase.SLEEPING, Phase.WAKING)

# event kinds; all but the failure are validated against the process epoch
_COMPUTE_DONE = "compute_done"
_CKPT_TIMER = "ckpt_timer"
_CKPT_DONE = "ckpt_done"
_FAILURE = "failure"
_DOWN_DONE = "down_done"
_RESTART_DONE = "restart_done"
_REEXEC_DONE = "reexec_done"
_GO_SLEEP_DONE = "go_sleep_done"
_WAKE_START = "wake_start"
_WAKE_DONE = "wake_done"

_MAX_EVENTS = 2_000_000


@dataclass(frozen=True)
class LedgerInterval:
    """One homogeneous power interval of a node's timeline."""

    node: int
    phase: Phase
    freq_label: str
    power: float
    start: float
    end: float

    @property
    def energy(self) -> float:
        return self.power * (self.end - self.start)


@dataclass
class RunResult:
    """Outcome of one simulation pass."""

    ledgers: dict[int, list[LedgerInterval]]
    rendezvous: list[tuple[float, int, int, int]]   # (time, sender, receiver, seq)
    intervention_end: dict[int, float]              # survivor -> first post-failure
                                                    # rendezvous with the failed node
    end_times: dict[int, float]
    context: FailureContext | None = None
    plans: dict[int, InterventionPlan] = field(default_factory=dict)
    no_failure_effect: bool = False

    def energy(self, node: int, start: float, end: float) -> float:
        """Ledger energy of a node over [start, end], by interval overlap."""
        total = 0.0
        for iv in self.ledgers[node]:
            lo = max(iv.start, start)
            hi = min(iv.end, end)
            if hi > lo:
                total += iv.power * (hi - lo)
        return total


@dataclass
class NodeSaving:
    node: int
    window: tuple[float, float] | None
    eni_j: float
    ei_j: float
    saving_j: float
    plan: InterventionPlan | None


@dataclass
class SimResult:
    scenario: Scenario
    baseline: RunResult
    intervened: RunResult
    plans: dict[int, InterventionPlan]
    savings: dict[int, NodeSaving]

    @property
    def failed_node(self) -> int | None:
        return self.scenario.failure.failed_node if self.scenario.failure else None


class _Proc:
    """Mutable per-node simulation state."""

    def __init__(self, node, ops, freq, offset):
        self.node = node
        self.ops = ops
        self.pc = 0
        self.work_left = 0.0          # max-frequency seconds of the current compute op
        self.phase = Phase.COMPUTING  # placeholder until the first dispatch
        self.freq: FrequencyLevel = freq
        self.ckpt_acc = offset        # compute-seconds toward the next timer checkpoint
        self.last_ckpt_end = -offset  # wall time, for the move-ahead age
        self.last_completed_ckpt = None
        self.epoch = 0
        self.seg_start = 0.0          # wall start of the current compute segment
        self.pending_block = None     # op to post after a moving-ahead checkpoint
        self.repost = False           # failed node: re-post the withdrawn op on recovery
        self.plan: InterventionPlan | None = None
        self.pending_freq: FrequencyLevel | None = None
        self.intervention_done = False
        self.sleep_started = False
        self.interval_start = 0.0
        self.done = False

    @property
    def current_op(self):
        return self.ops[self.pc] if self.pc < len(self.ops) else None


class _Sim:
    def __init__(self, scenario: Scenario, enact: bool):
        self.sc = scenario
        self.enact = enact
        self.table = scenario.freq_table
        self.prof = scenario.node_profile
        self.ft = scenario.ft
        self.mode = scenario.wait_mode
        self.now = 0.0
        self.seq = 0
        self.events: list = []
        self.procs = {
            n: _Proc(n, scenario.comm_script[n], self.table.max_level, scenario.offset(n))
            for n in range(scenario.nodes)
        }
        self.ledgers: dict[int, list[LedgerInterval]] = {n: [] for n in self.procs}
        self.rendezvous: list[tuple[float, int, int, int]] = []
        self.intervention_end: dict[int, float] = {}
        self.end_times: dict[int, float] = {}
        # directed channel (sender, receiver) -> completed rendezvous count
        self.matched: dict[tuple[int, int], int] = {}
        # directed channel -> {"send"/"recv": post time}
        self.posted: dict[tuple[int, int], dict[str, float]] = {}
        self.failure = scenario.failure
        self.failure_seen = False
        self.context: FailureContext | None = None
        self.plans: dict[int, InterventionPlan] = {}
        self.no_failure_effect = False

    # -- scheduling -----------------------------------------------------

    def _schedule(self, dt, kind, node, epoch):
        self.seq += 1
        heapq.heappush(self.events, (self.now + max(dt, 0.0), self.seq, kind, node, epoch))

    # -- ledger ---------------------------------------------------------

    def _power(self, p: _Proc, phase: Phase) -> float:
        if phase is Phase.COMPUTING:
            return p.freq.p_comp
        if phase is Phase.CHECKPOINTING:
            return p.freq.p_ckpt
        if phase in BLOCKED_PHASES:
            if self.mode is WaitMode.IDLE:
                return self.prof.p_idle_wait
            return p.freq.p_comp  # active wait busy-polls at the current frequency
        if phase is Phase.GOING_TO_SLEEP:
            return self.prof.p_go_sleep
        if phase is Phase.SLEEPING:
            return self.prof.p_sleep
        if phase is Phase.WAKING:
            return self.prof.p_wakeup
        if phase is Phase.DOWN:
            return 0.0
        if phase is Phase.RESTARTING:
            return self.table.max_level.p_ckpt  # reads the checkpoint back
        if phase is Phase.REEXECUTING:
            return self.table.max_level.p_comp  # re-execution runs at max frequency
        return 0.0

    def _transition(self, p: _Proc, phase: Phase):
        """Close the running ledger interval and open a new one at `now`."""
        if self.now > p.interval_start:
            self.ledgers[p.node].append(LedgerInterval(
                node=p.node, phase=p.phase, freq_label=p.freq.label,
                power=self._power(p, p.phase), start=p.interval_start, end=self.now))
        p.phase = phase
        p.interval_start = self.now

    # -- compute/checkpoint machinery -------------------------------------

    def _flush_compute(self, p: _Proc):
        """Account the partial compute segment up to now (at the current beta)."""
        elapsed = self.now - p.seg_start
        if elapsed > 0.0:
            p.work_left -= elapsed / p.freq.beta
            p.ckpt_acc += elapsed
            if p.work_left < 1e-12:
                p.work_left = 0.0
        p.seg_start = self.now

    def _start_compute(self, p: _Proc):
        self._transition(p, Phase.COMPUTING)
        p.seg_start = self.now
        to_fire = self.ft.ckpt_interval - p.ckpt_acc
        to_done = p.work_left * p.freq.beta
        p.epoch += 1
        if to_fire < to_done:  # a tie resolves to completing the work first
            self._schedule(to_fire, _CKPT_TIMER, p.node, p.epoch)
        else:
            self._schedule(to_done, _COMPUTE_DONE, p.node, p.epoch)

    def _start_checkpoint(self, p: _Proc):
        self._transition(p, Phase.CHECKPOINTING)
        p.epoch += 1
        self._schedule(self.ft.t_ckpt * p.freq.gamma, _CKPT_DONE, p.node, p.epoch)

    def _set_freq(self, p: _Proc, freq: FrequencyLevel):
        if p.freq is freq:
            return
        if p.phase is Phase.CHECKPOINTING:
            # a checkpoint in progress finishes at its original speed;
            # the switch applies at the phase boundary
            p.pending_freq = freq
            return
        if p.phase is Phase.COMPUTING:
            self._flush_compute(p)
        self._transition(p, p.phase)  # close the old-frequency segment
        p.freq = freq
        if p.phase is Phase.COMPUTING:
            self._start_compute(p)

    # -- script dispatch ----------------------------------------------------

    def _dispatch(self, p: _Proc):
        """Advance the process to its next activity."""
        op = p.current_op
        if op is None:
            self._transition(p, Phase.DONE)
            p.done = True
            self.end_times[p.node] = self.now
            return
        if isinstance(op, ComputeFor):
            if p.work_left <= 0.0:
                p.work_left = op.duration
            if p.work_left <= 0.0:
                p.pc += 1
                self._dispatch(p)
                return
            self._start_compute(p)
            return
        self._reach_message_op(p, op)

    def _channel(self, node, op):
        if isinstance(op, SsendTo):
            return (node, op.peer), "send"
        return (op.peer, node), "recv"

    def _reach_message_op(self, p: _Proc, op):
        chan, side = self._channel(p.node, op)
        other_side = "recv" if side == "send" else "send"
        posted = self.posted.setdefault(chan, {})
        if other_side in posted:
            posted[side] = self.now
            partner = self.procs[op.peer]
            if partner.phase in ASLEEP_PHASES:
                # the partner wakes at its scheduled time; the rendezvous
                # completes when the wake finishes
                self._block(p, op, enact_wait=False)
                return
            self._complete_rendezvous(chan)
            return
        # the process is going to block: a moving-ahead checkpoint may be
        # taken first when the peer is the recovering node
        if self._should_move_ahead(p, op):
            p.pending_block = op
            self._start_checkpoint(p)
            return
        self._post_and_block(p, op)

    def _should_move_ahead(self, p: _Proc, op) -> bool:
        rho = self.sc.move_ahead_policy
        if rho is None or self.failure is None or not self.failure_seen:
            return False
        if op.peer != self.failure.failed_node or p.node == self.failure.failed_node:
            return False
        if p.node in self.intervention_end:
            return False  # only the wait against the recovering process qualifies
        age = self.now - p.last_ckpt_end
        return age >= rho * self.ft.ckpt_interval

    def _post_and_block(self, p: _Proc, op):
        chan, side = self._channel(p.node, op)
        self.posted.setdefault(chan, {})[side] = self.now
        self._block(p, op, enact_wait=True)

    def _block(self, p: _Proc, op, enact_wait: bool):
        phase = Phase.BLOCKED_SEND if isinstance(op, SsendTo) else Phase.BLOCKED_RECV
        self._transition(p, phase)
        if enact_wait:
            self._maybe_enact_wait(p, op.peer)

    def _maybe_enact_wait(self, p: _Proc, peer: int):
        """Apply the plan's wait action when blocking on the recovering node."""
        if p.plan is None or p.intervention_done or self.failure is None:
            return
        if peer != self.failure.failed_node:
            return
        action = p.plan.wait_action
        if action is WaitAction.MIN_FREQ:
            self._set_freq(p, self.table.min_level)
        elif action is WaitAction.SLEEP and not p.sleep_started:
            p.sleep_started = True
            arrival = self.failure.failure_time + p.plan.t_failed
            wake_start = max(arrival - self.prof.t_wakeup,
                             self.now + self.prof.t_go_sleep)
            self._transition(p, Phase.GOING_TO_SLEEP)
            p.epoch += 1
            self._schedule(self.prof.t_go_sleep, _GO_SLEEP_DONE, p.node, p.epoch)
            self._schedule(wake_start - self.now, _WAKE_START, p.node, p.epoch)
            self._schedule(wake_start + self.prof.t_wakeup - self.now,
                           _WAKE_DONE, p.node, p.epoch)

    def _complete_rendezvous(self, chan):
        sender, receiver = chan
        seq = self.matched.get(chan, 0)
        self.matched[chan] = seq + 1
        del self.posted[chan]
        self.rendezvous.append((self.now, sender, receiver, seq))
        for node in chan:
            p = self.procs[node]
            self._finish_wait(p, chan)
            p.pc += 1
            p.work_left = 0.0
            self._dispatch(p)

    def _finish_wait(self, p: _Proc, chan):
        other = chan[0] if chan[1] == p.node else chan[1]
        failed = self.failure.failed_node if self.failure else None
        if (failed is not None and other == failed and self.failure_seen
                and p.node != failed and p.node not in self.intervention_end):
            self.intervention_end[p.node] = self.now
            if p.plan is not None and not p.intervention_done:
                p.intervention_done = True
                self._set_freq(p, self.table.max_level)

    # -- failure & recovery ---------------------------------------------------

    def _on_failure(self):
        self.failure_seen = True
        failed = self.procs[self.failure.failed_node]
        if failed.done:
            self.no_failure_effect = True
            return
        if failed.phase is Phase.COMPUTING:
            self._flush_compute(failed)
        elif failed.phase in BLOCKED_PHASES:
            chan, side = self._channel(failed.node, failed.current_op)
            self.posted[chan].pop(side, None)
            if not self.posted[chan]:
                del self.posted[chan]
            failed.repost = True
        elif failed.phase is Phase.CHECKPOINTING:
            failed.pending_block = None  # the in-progress checkpoint is discarded
        failed.epoch += 1

        self.context = self._build_context()
        if self.enact:
            self.plans = evaluate_all(self.failure, self.sc, self.context)
            for node, plan in self.plans.items():
                p = self.procs[node]
                p.plan = plan
                self._set_freq(p, plan.compute_freq)
                if p.phase in BLOCKED_PHASES:
                    self._maybe_enact_wait(p, p.current_op.peer)

        self._transition(failed, Phase.DOWN)
        self._schedule(self.ft.t_down, _DOWN_DONE, failed.node, failed.epoch)

    def _t_reexec(self, p: _Proc) -> float:
        origin = max(p.last_completed_ckpt or 0.0, 0.0)
        return self.failure.failure_time - origin

    def _remaining_compute_to(self, p: _Proc, peer: int) -> float | None:
        """Max-frequency compute seconds until p's next message op toward peer.

        Message ops toward other peers on the way are assumed to match without
        blocking (indirect blocking chains are out of scope).
        """
        op = p.current_op
        if op is not None and not isinstance(op, ComputeFor):
            if op.peer == peer:
                return 0.0
            total = 0.0
        else:
            total = p.work_left
        for op in p.ops[p.pc + 1:]:
            if isinstance(op, ComputeFor):
                total += op.duration
            elif op.peer == peer:
                return total
        return None

    def _build_context(self) -> FailureContext:
        failed = self.procs[self.failure.failed_node]
        observations = {}
        survivors = tuple(n for n in self.procs if n != failed.node)
        for node in survivors:
            p = self.procs[node]
            if p.phase is Phase.COMPUTING:
                self._flush_compute(p)  # observations need up-to-date progress
            to_block = self._remaining_compute_to(p, failed.node)
            if to_block is None:
                continue
            to_match = self._remaining_compute_to(failed, node)
            if to_match is None:
                continue
            observations[node] = NodeObservation(
                node=node,
                compute_to_block=to_block,
                failed_to_match=to_match,
                ckpt_phase=CheckpointPhase(acc=p.ckpt_acc,
                                           age=self.now - p.last_ckpt_end),
            )
        return FailureContext(failure=self.failure, t_reexec=self._t_reexec(failed),
                              survivors=survivors, observations=observations)

    # -- event handlers ---------------------------------------------------------

    def _handle(self, kind, node):
        p = self.procs[node]
        if kind == _COMPUTE_DONE:
            self._flush_compute(p)
            p.work_left = 0.0
            p.pc += 1
            self._dispatch(p)
        elif kind == _CKPT_TIMER:
            self._flush_compute(p)
            self._start_checkpoint(p)
        elif kind == _CKPT_DONE:
            self._transition(p, p.phase)  # close the checkpoint at its own frequency
            p.ckpt_acc = 0.0
            p.last_ckpt_end = self.now
            p.last_completed_ckpt = self.now
            if p.pending_freq is not None:
                p.freq = p.pending_freq
                p.pending_freq = None
            if p.pending_block is not None:
                # the partner may have arrived during the early checkpoint;
                # re-run the match logic (the fresh checkpoint cannot trigger
                # another moving-ahead)
                op = p.pending_block
                p.pending_block = None
                self._reach_message_op(p, op)
            elif p.work_left > 0.0:
                self._start_compute(p)
            else:
                p.pc += 1
                self._dispatch(p)
        elif kind == _DOWN_DONE:
            self._transition(p, Phase.RESTARTING)
            self._schedule(self.ft.t_restart, _RESTART_DONE, node, p.epoch)
        elif kind == _RESTART_DONE:
            self._transition(p, Phase.REEXECUTING)
            self._schedule(self._t_reexec(p), _REEXEC_DONE, node, p.epoch)
        elif kind == _REEXEC_DONE:
            # recovery restored checkpointed state; the checkpoint cycle restarts
            p.ckpt_acc = 0.0
            p.last_ckpt_end = self.now
            p.last_completed_ckpt = self.now
            if p.repost:
                p.repost = False
                self._reach_message_op(p, p.current_op)
            elif p.work_left > 0.0:
                self._start_compute(p)
            else:
                self._dispatch(p)
        elif kind == _GO_SLEEP_DONE:
            self._transition(p, Phase.SLEEPING)
        elif kind == _WAKE_START:
            self._transition(p, Phase.WAKING)
        elif kind == _WAKE_DONE:
            op = p.current_op
            phase = Phase.BLOCKED_SEND if isinstance(op, SsendTo) else Phase.BLOCKED_RECV
            self._transition(p, phase)
            chan, _ = self._channel(p.node, op)
            if len(self.posted.get(chan, {})) == 2:
                self._complete_rendezvous(chan)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> RunResult:
        for p in self.procs.values():
            self._dispatch(p)
        if self.failure is not None:
            self._schedule(self.failure.failure_time, _FAILURE,
                           self.failure.failed_node, None)
        steps = 0
        while self.events:
            time, _, kind, node, epoch = heapq.heappop(self.events)
            if kind == _FAILURE:
                self.now = time
                self._on_failure()
                continue
            if epoch != self.procs[node].epoch:
                continue  # superseded by a frequency change or the failure
            self.now = time
            self._handle(kind, node)
            steps += 1
            if steps > _MAX_EVENTS:
                raise ScriptError("event budget exceeded; runaway scenario")
        stuck = [p.node for p in self.procs.values() if not p.done]
        if stuck:
            raise ScriptError(
                f"deadlock: nodes {stuck} never completed their scripts "
                f"(blocked on unmatched communication)")
        return RunResult(ledgers=self.ledgers, rendezvous=self.rendezvous,
                         intervention_end=self.intervention_end,
                         end_times=self.end_times, context=self.context,
                         plans=self.plans, no_failure_effect=self.no_failure_effect)


def simulate_pass(scenario: Scenario, enact: bool) -> RunResult:
    """One deterministic simulation pass (baseline when enact is False)."""
    return _Sim(scenario, enact).run()


def snapshot_at_failure(scenario: Scenario,
                        failure: FailureSpec | None = None) -> FailureContext:
    """Failure-time observations, obtained by replaying the baseline pass."""
    sc = scenario
    if failure is not None and failure != scenario.failure:
        sc = replace(scenario, failure=failure)
    if sc.failure is None:
        raise ValueError("scenario has no failure specification")
    result = _Sim(sc, enact=False).run()
    if result.context is None:
        raise ValueError("failure time lies beyond the application end")
    return result.context


def run(scenario: Scenario) -> SimResult:
    """Simulate baseline and intervened passes and compute per-node savings."""
    baseline = simulate_pass(scenario, enact=False)
    if scenario.failure is None or baseline.no_failure_effect:
        intervened = baseline
    else:
        intervened = simulate_pass(scenario, enact=True)
    plans = intervened.plans
    savings: dict[int, NodeSaving] = {}
    failure = scenario.failure
    if failure is not None and not baseline.no_failure_effect:
        start = failure.failure_time
        for node in range(scenario.nodes):
            if node == failure.failed_node:
                continue
            end = baseline.intervention_end.get(node)
            plan = plans.get(node)
            if end is None:
                savings[node] = NodeSaving(node, None, 0.0, 0.0, 0.0, plan)
                continue
            eni_j = baseline.energy(node, start, end)
            ei_j = intervened.energy(node, start, end)
            savings[node] = NodeSaving(node, (start, end), eni_j, ei_j,
                                       eni_j - ei_j, plan)
    else:
        for node in range(scenario.nodes):
            savings[node] = NodeSaving(node, None, 0.0, 0.0, 0.0, None)
    return SimResult(scenario=scenario, baseline=baseline, intervened=intervened,
                     plans=plans, savings=savings)
