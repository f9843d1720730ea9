"""Simulator tests: rendezvous, checkpoint timers, recovery, plan enactment."""

import pytest

from ckptsim import engine
from ckptsim.engine import Phase, ScriptError, simulate_pass
from ckptsim.model import (
    FrequencyLevel,
    FrequencyTable,
    FTConfig,
    NodePowerProfile,
    SleepThresholds,
    WaitMode,
)
from ckptsim.scenario import ComputeFor, FailureSpec, RecvFrom, Scenario, SsendTo

MAX = FrequencyLevel(2.8, 166.0, 1.0, 150.0, 1.0)
MIN = FrequencyLevel(1.2, 126.0, 2.1, 125.0, 1.4)
TABLE = FrequencyTable((MAX, MIN))
PROFILE = NodePowerProfile(p_base=60.0, p_active_wait=166.0, p_idle_wait=60.0,
                           t_go_sleep=25.0, t_wakeup=5.0, p_go_sleep=51.0,
                           p_wakeup=91.0, p_sleep=12.0)


def make(script, *, nodes=2, ft=None, failure=None, mode=WaitMode.ACTIVE,
         offsets=None, move_ahead=0.5, th=None, table=TABLE):
    return Scenario(
        name="t", nodes=nodes, freq_table=table, node_profile=PROFILE,
        ft=ft or FTConfig(t_ckpt=120.0, ckpt_interval=1800.0, t_down=60.0,
                          t_restart=120.0),
        wait_mode=mode, thresholds=th or SleepThresholds(1.0, 1.0),
        comm_script=script, ckpt_phase_offsets=offsets or (),
        failure=failure, move_ahead_policy=move_ahead)


def phases(run, node):
    return [(iv.phase, iv.start, iv.end) for iv in run.ledgers[node]]


class TestRendezvous:
    def test_sender_waits_for_late_receiver(self):
        sc = make({0: (ComputeFor(10.0), SsendTo(1)),
                   1: (ComputeFor(25.0), RecvFrom(0))})
        run = simulate_pass(sc, enact=False)
        assert run.rendezvous == [(25.0, 0, 1, 0)]
        blocked = [iv for iv in run.ledgers[0] if iv.phase is Phase.BLOCKED_SEND]
        assert len(blocked) == 1
        assert (blocked[0].start, blocked[0].end) == (10.0, 25.0)

    def test_simultaneous_posts_do_not_wait(self):
        sc = make({0: (ComputeFor(10.0), SsendTo(1)),
                   1: (ComputeFor(10.0), RecvFrom(0))})
        run = simulate_pass(sc, enact=False)
        assert run.rendezvous == [(10.0, 0, 1, 0)]
        assert not any(iv.phase is Phase.BLOCKED_SEND for iv in run.ledgers[0])

    def test_receiver_waits_for_late_sender(self):
        sc = make({0: (ComputeFor(40.0), SsendTo(1)), 1: (RecvFrom(0),)})
        run = simulate_pass(sc, enact=False)
        assert run.rendezvous == [(40.0, 0, 1, 0)]
        blocked = [iv for iv in run.ledgers[1] if iv.phase is Phase.BLOCKED_RECV]
        assert (blocked[0].start, blocked[0].end) == (0.0, 40.0)

    def test_messages_pair_in_script_order(self):
        sc = make({0: (SsendTo(1), ComputeFor(5.0), SsendTo(1)),
                   1: (RecvFrom(0), RecvFrom(0))})
        run = simulate_pass(sc, enact=False)
        assert [r[3] for r in run.rendezvous] == [0, 1]

    def test_cross_blocked_receives_deadlock(self):
        sc = make({0: (RecvFrom(1), SsendTo(1)),
                   1: (RecvFrom(0), SsendTo(0))})
        with pytest.raises(ScriptError, match="deadlock"):
            simulate_pass(sc, enact=False)


class TestCheckpointTimer:
    def test_timer_fires_every_interval_of_compute(self):
        ft = FTConfig(t_ckpt=120.0, ckpt_interval=600.0, t_down=0.0, t_restart=60.0)
        sc = make({0: (ComputeFor(1500.0), SsendTo(1)), 1: (RecvFrom(0),)}, ft=ft)
        run = simulate_pass(sc, enact=False)
        ckpts = [iv for iv in run.ledgers[0] if iv.phase is Phase.CHECKPOINTING]
        # fires at 600 and 1200 compute-seconds (walls 600 and 1320)
        assert [(iv.start, iv.end) for iv in ckpts] == [(600.0, 720.0), (1320.0, 1440.0)]

    def test_interval_longer_than_run_means_no_checkpoints(self):
        sc = make({0: (ComputeFor(500.0), SsendTo(1)), 1: (RecvFrom(0),)})
        run = simulate_pass(sc, enact=False)
        assert not any(iv.phase is Phase.CHECKPOINTING for iv in run.ledgers[0])

    def test_offset_advances_the_first_fire(self):
        ft = FTConfig(t_ckpt=60.0, ckpt_interval=600.0, t_down=0.0, t_restart=60.0)
        sc = make({0: (ComputeFor(300.0), SsendTo(1)), 1: (RecvFrom(0),)},
                  ft=ft, offsets=(500.0, 0.0))
        run = simulate_pass(sc, enact=False)
        ckpts = [iv for iv in run.ledgers[0] if iv.phase is Phase.CHECKPOINTING]
        assert [(iv.start, iv.end) for iv in ckpts] == [(100.0, 160.0)]

    def test_checkpoint_duration_follows_frequency(self):
        # the survivor switches to 1.2 GHz at the failure; the stretched
        # compute phase crosses the timer, and that checkpoint takes 120*1.4 s
        ft = FTConfig(t_ckpt=120.0, ckpt_interval=600.0, t_down=30.0, t_restart=60.0)
        sc = make({0: (ComputeFor(400.0), SsendTo(1), ComputeFor(10.0)),
                   1: (ComputeFor(80.0), RecvFrom(0), ComputeFor(10.0))},
                  ft=ft, offsets=(0.0, 500.0), failure=FailureSpec(0, 20.0),
                  move_ahead=None, th=SleepThresholds(1e9, 1.0))
        run = simulate_pass(sc, enact=True)
        plan = run.plans[1]
        assert plan.compute_freq is MIN
        assert plan.n_ckpt == 1
        ckpts = [iv for iv in run.ledgers[1] if iv.phase is Phase.CHECKPOINTING]
        assert [(iv.start, iv.end) for iv in ckpts] == [(100.0, 268.0)]
        assert ckpts[0].freq_label == "1.2 GHz"
        assert ckpts[0].power == MIN.p_ckpt


class TestMoveAhead:
    def _scenario(self, policy, offsets=(1700.0, 0.0)):
        # node 1 blocks on the recovering node 0 at t = 500
        ft = FTConfig(t_ckpt=120.0, ckpt_interval=1800.0, t_down=30.0,
                      t_restart=60.0)
        return make({0: (ComputeFor(600.0), SsendTo(1), ComputeFor(10.0)),
                     1: (ComputeFor(500.0), RecvFrom(0), ComputeFor(10.0))},
                    ft=ft, offsets=offsets, move_ahead=policy,
                    failure=FailureSpec(0, 400.0))

    def _early_ckpts(self, run):
        return [iv for iv in run.ledgers[1]
                if iv.phase is Phase.CHECKPOINTING and iv.start >= 400.0]

    def test_recent_checkpoint_skips_move_ahead(self):
        # age at block is 500 < 0.5 * 1800
        run = simulate_pass(self._scenario(0.5), enact=False)
        assert not self._early_ckpts(run)

    def test_stale_checkpoint_moves_ahead(self):
        # policy 0.25: 500 >= 450
        run = simulate_pass(self._scenario(0.25), enact=False)
        early = self._early_ckpts(run)
        assert [(iv.start, iv.end) for iv in early] == [(500.0, 620.0)]

    def test_zero_policy_always_moves_ahead(self):
        run = simulate_pass(self._scenario(0.0), enact=False)
        assert self._early_ckpts(run)

    def test_disabled_policy_never_moves_ahead(self):
        run = simulate_pass(self._scenario(None), enact=False)
        assert not self._early_ckpts(run)

    def test_move_ahead_resets_the_timer(self):
        run = simulate_pass(self._scenario(0.25), enact=False)
        # after the early checkpoint at [500, 620] the node waits, then
        # computes 10 s; no further timer checkpoint fires
        later = [iv for iv in run.ledgers[1]
                 if iv.phase is Phase.CHECKPOINTING and iv.start > 620.0]
        assert not later


class TestFailureRecovery:
    def test_recovery_chain_and_reexecution(self):
        ft = FTConfig(t_ckpt=60.0, ckpt_interval=600.0, t_down=30.0, t_restart=90.0)
        sc = make({0: (ComputeFor(700.0), SsendTo(1), ComputeFor(5.0)),
                   1: (ComputeFor(30.0), RecvFrom(0), ComputeFor(5.0))},
                  ft=ft, failure=FailureSpec(0, 800.0), move_ahead=None)
        run = simulate_pass(sc, enact=False)
        seq = [p for p, *_ in phases(run, 0)]
        assert seq == [Phase.COMPUTING, Phase.CHECKPOINTING, Phase.COMPUTING,
                       Phase.DOWN, Phase.RESTARTING, Phase.REEXECUTING,
                       Phase.COMPUTING, Phase.BLOCKED_SEND, Phase.COMPUTING]
        down = next(iv for iv in run.ledgers[0] if iv.phase is Phase.DOWN)
        assert (down.start, down.end) == (800.0, 830.0)
        reexec = next(iv for iv in run.ledgers[0] if iv.phase is Phase.REEXECUTING)
        # checkpoint completed at 660; failure at 800 -> re-execute 140 s
        assert reexec.end - reexec.start == pytest.approx(140.0)
        assert run.context.t_reexec == pytest.approx(140.0)

    def test_failure_with_no_prior_checkpoint_reexecutes_from_start(self):
        sc = make({0: (ComputeFor(300.0), SsendTo(1), ComputeFor(5.0)),
                   1: (ComputeFor(30.0), RecvFrom(0), ComputeFor(5.0))},
                  failure=FailureSpec(0, 200.0), move_ahead=None)
        run = simulate_pass(sc, enact=False)
        assert run.context.t_reexec == pytest.approx(200.0)

    def test_failure_during_checkpoint_discards_it(self):
        ft = FTConfig(t_ckpt=100.0, ckpt_interval=600.0, t_down=10.0, t_restart=20.0)
        sc = make({0: (ComputeFor(900.0), SsendTo(1), ComputeFor(5.0)),
                   1: (ComputeFor(30.0), RecvFrom(0), ComputeFor(5.0))},
                  ft=ft, failure=FailureSpec(0, 650.0), move_ahead=None)
        # first checkpoint spans [600, 700]; the failure interrupts it
        run = simulate_pass(sc, enact=False)
        assert run.context.t_reexec == pytest.approx(650.0)  # back to the start
        ck = [iv for iv in run.ledgers[0] if iv.phase is Phase.CHECKPOINTING]
        assert (ck[0].start, ck[0].end) == (600.0, 650.0)  # truncated by the failure

    def test_blocked_failed_node_reposts_after_recovery(self):
        ft = FTConfig(t_ckpt=60.0, ckpt_interval=600.0, t_down=30.0, t_restart=60.0)
        sc = make({0: (ComputeFor(10.0), SsendTo(1), ComputeFor(5.0)),
                   1: (ComputeFor(500.0), RecvFrom(0), ComputeFor(5.0))},
                  ft=ft, failure=FailureSpec(0, 100.0), move_ahead=None)
        run = simulate_pass(sc, enact=False)
        # recovery: 100 + 30 + 60 + 100 = 290; node 1 arrives at 500
        assert run.rendezvous == [(500.0, 0, 1, 0)]

    def test_failure_beyond_application_end(self):
        sc = make({0: (ComputeFor(10.0), SsendTo(1)), 1: (RecvFrom(0),)},
                  failure=FailureSpec(0, 1e6))
        result = engine.run(sc)
        assert result.baseline.no_failure_effect
        assert result.intervened is result.baseline
        assert all(s.saving_j == 0.0 for s in result.savings.values())

    def test_no_failure_run(self):
        sc = make({0: (ComputeFor(10.0), SsendTo(1)), 1: (RecvFrom(0),)})
        result = engine.run(sc)
        assert result.intervened is result.baseline
        assert all(s.saving_j == 0.0 for s in result.savings.values())


class TestEnactment:
    def _sleep_scenario(self):
        ft = FTConfig(t_ckpt=60.0, ckpt_interval=1800.0, t_down=30.0,
                      t_restart=60.0)
        return make({0: (ComputeFor(400.0), SsendTo(1), ComputeFor(10.0)),
                     1: (ComputeFor(150.0), RecvFrom(0), ComputeFor(10.0))},
                    ft=ft, failure=FailureSpec(0, 100.0), move_ahead=None,
                    th=SleepThresholds(1.0, 1.0))

    def test_sleep_wake_completes_exactly_at_partner_arrival(self):
        sc = self._sleep_scenario()
        result = engine.run(sc)
        plan = result.plans[1]
        assert plan.wait_action.value == "sleep"
        base_rv = result.baseline.rendezvous
        int_rv = result.intervened.rendezvous
        assert base_rv == int_rv
        waking = [iv for iv in result.intervened.ledgers[1]
                  if iv.phase is Phase.WAKING]
        assert waking[-1].end == base_rv[0][0]

    def test_sleep_phases_are_contiguous(self):
        result = engine.run(self._sleep_scenario())
        seq = [iv.phase for iv in result.intervened.ledgers[1]]
        i = seq.index(Phase.GOING_TO_SLEEP)
        assert seq[i:i + 3] == [Phase.GOING_TO_SLEEP, Phase.SLEEPING, Phase.WAKING]

    def test_min_freq_wait_billing_and_restore(self):
        ft = FTConfig(t_ckpt=60.0, ckpt_interval=1800.0, t_down=30.0, t_restart=60.0)
        sc = make({0: (ComputeFor(150.0), SsendTo(1), ComputeFor(10.0)),
                   1: (ComputeFor(120.0), RecvFrom(0), ComputeFor(10.0))},
                  ft=ft, failure=FailureSpec(0, 100.0), move_ahead=None,
                  th=SleepThresholds(1e9, 1.0))
        result = engine.run(sc)
        plan = result.plans[1]
        assert plan.wait_action.value == "min-freq"
        blocked = [iv for iv in result.intervened.ledgers[1]
                   if iv.phase is Phase.BLOCKED_RECV and iv.start >= 100.0]
        assert blocked[0].power == MIN.p_comp
        tail = [iv for iv in result.intervened.ledgers[1]
                if iv.phase is Phase.COMPUTING and iv.start >= blocked[0].end]
        assert tail[0].freq_label == "2.8 GHz"  # restored after the rendezvous

    def test_idle_no_action_plan_keeps_baseline_timeline(self):
        ft = FTConfig(t_ckpt=60.0, ckpt_interval=1800.0, t_down=30.0, t_restart=60.0)
        sc = make({0: (ComputeFor(150.0), SsendTo(1), ComputeFor(10.0)),
                   1: (ComputeFor(20.0), RecvFrom(0), ComputeFor(10.0))},
                  ft=ft, mode=WaitMode.IDLE, failure=FailureSpec(0, 10.0),
                  move_ahead=None, th=SleepThresholds(1e9, 1.0),
                  table=FrequencyTable((MAX,)))
        result = engine.run(sc)
        assert result.plans[1].wait_action.value == "no-action"
        assert result.baseline.ledgers == result.intervened.ledgers


class TestLedger:
    def test_intervals_tile_each_node_timeline(self):
        sc = make({0: (ComputeFor(700.0), SsendTo(1), ComputeFor(5.0)),
                   1: (ComputeFor(30.0), RecvFrom(0), ComputeFor(5.0))},
                  ft=FTConfig(t_ckpt=60.0, ckpt_interval=600.0, t_down=30.0,
                              t_restart=90.0),
                  failure=FailureSpec(0, 800.0))
        run = simulate_pass(sc, enact=True)
        for node, ivs in run.ledgers.items():
            assert ivs[0].start == 0.0
            for a, b in zip(ivs, ivs[1:]):
                assert a.end == b.start
                assert a.start < a.end
            assert ivs[-1].end == run.end_times[node]

    def test_energy_is_invariant_under_window_splitting(self):
        sc = make({0: (ComputeFor(100.0), SsendTo(1)), 1: (RecvFrom(0),)})
        run = simulate_pass(sc, enact=False)
        whole = run.energy(0, 0.0, 100.0)
        split = run.energy(0, 0.0, 33.3) + run.energy(0, 33.3, 100.0)
        assert whole == pytest.approx(split)

    def test_runs_are_deterministic(self):
        sc = make({0: (ComputeFor(700.0), SsendTo(1), ComputeFor(5.0)),
                   1: (ComputeFor(30.0), RecvFrom(0), ComputeFor(5.0))},
                  ft=FTConfig(t_ckpt=60.0, ckpt_interval=600.0, t_down=30.0,
                              t_restart=90.0),
                  failure=FailureSpec(0, 800.0))
        a = simulate_pass(sc, enact=True)
        b = simulate_pass(sc, enact=True)
        assert a.ledgers == b.ledgers
        assert a.rendezvous == b.rendezvous
