"""Property tests: units closure, consistency, gating, monotonicity."""

from hypothesis import given, settings
from hypothesis import strategies as st

from ckptsim.model import (
    FrequencyLevel,
    FrequencyTable,
    FTConfig,
    NodePowerProfile,
    SleepThresholds,
    WaitAction,
    WaitMode,
    e_awake_wait,
    e_comp,
    ei,
    ei_sleep_wait,
    ei_wait,
    energy_saving,
    eni,
    t_comp,
    t_failed,
    t_wait,
)

finite = dict(allow_nan=False, allow_infinity=False)
durations = st.floats(min_value=0.0, max_value=1e5, **finite)
powers = st.floats(min_value=1.0, max_value=500.0, **finite)
fractions = st.floats(min_value=0.0, max_value=1.0, **finite)
slowdowns = st.floats(min_value=1.0, max_value=4.0, **finite)

PROFILE = NodePowerProfile(p_base=60.0, p_active_wait=166.0, p_idle_wait=60.0,
                           t_go_sleep=25.0, t_wakeup=5.0, p_go_sleep=51.0,
                           p_wakeup=91.0, p_sleep=12.0)
FT = FTConfig(t_ckpt=120.0, ckpt_interval=1800.0, t_down=60.0, t_restart=120.0)


def integrate(segments):
    """Independent oracle: explicit piecewise power-over-time integration."""
    return sum(p * dt for p, dt in segments)


@given(alpha=fractions, i_comm=st.floats(min_value=0.1, max_value=1e4, **finite),
       beta=slowdowns, p=powers, n=st.integers(0, 5), gamma=slowdowns, pc=powers)
def test_compute_energy_is_piecewise_integration(alpha, i_comm, beta, p, n, gamma, pc):
    f = FrequencyLevel(2.0, p, beta, pc, gamma)
    base = alpha * i_comm
    got = e_comp(base, n, f, FT)
    want = integrate([(p, base * beta)] + [(pc, FT.t_ckpt * gamma)] * n)
    assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


@given(wait=st.floats(min_value=30.0, max_value=1e5, **finite))
def test_sleep_energy_is_piecewise_integration(wait):
    got = ei_sleep_wait(wait, PROFILE)
    want = integrate([(51.0, 25.0), (12.0, wait - 30.0), (91.0, 5.0)])
    assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


@given(wait=durations, mode=st.sampled_from(list(WaitMode)))
def test_awake_energy_is_rate_times_duration(wait, mode):
    got = e_awake_wait(wait, mode, PROFILE)
    rate = 166.0 if mode is WaitMode.ACTIVE else 60.0
    assert abs(got - integrate([(rate, wait)])) <= 1e-9 * max(1.0, got)


@given(recover=durations, alpha_ij=fractions, alpha_ji=fractions,
       i_comm=st.floats(min_value=0.1, max_value=1e4, **finite), beta=slowdowns)
def test_wait_plus_compute_reconstructs_t_failed(recover, alpha_ij, alpha_ji,
                                                 i_comm, beta):
    f = FrequencyLevel(2.0, 100.0, beta, 100.0, 1.0)
    tf = t_failed(recover, alpha_ji, i_comm)
    tc = t_comp(alpha_ij, i_comm, f)
    if tc <= tf:  # feasible region only; t_wait clamps elsewhere
        assert abs(t_wait(tf, tc) + tc - tf) <= 1e-9 * max(1.0, tf)


@given(wait=durations, mode=st.sampled_from(list(WaitMode)),
       mu1=st.floats(min_value=0.1, max_value=100.0, **finite),
       mu2=st.floats(min_value=0.1, max_value=2.0, **finite))
def test_sleep_gating(wait, mode, mu1, mu2):
    th = SleepThresholds(mu1, mu2)
    e, action = ei_wait(wait, mode, PROFILE, th)
    awake = e_awake_wait(wait, mode, PROFILE)
    if action is WaitAction.SLEEP:
        assert wait > mu1 * PROFILE.t_transitions
        assert wait >= PROFILE.t_transitions
        assert e < mu2 * awake
        if mu2 <= 1.0:
            assert e < awake
    else:
        assert e == awake
        expected = WaitAction.MIN_FREQ if mode is WaitMode.ACTIVE else WaitAction.NO_ACTION
        assert action is expected


@given(wait=st.floats(min_value=30.0, max_value=1e5, **finite),
       delta=st.floats(min_value=0.25, max_value=1e4, **finite))
def test_sleep_energy_increases_at_sleep_power(wait, delta):
    lo = ei_sleep_wait(wait, PROFILE)
    hi = ei_sleep_wait(wait + delta, PROFILE)
    assert abs((hi - lo) - delta * PROFILE.p_sleep) <= 1e-9 * max(1.0, hi)


@given(wait=durations, delta=st.floats(min_value=0.25, max_value=1e4, **finite),
       mode=st.sampled_from(list(WaitMode)))
def test_awake_energy_increases_at_billed_power(wait, delta, mode):
    rate = PROFILE.p_active_wait if mode is WaitMode.ACTIVE else PROFILE.p_idle_wait
    lo = e_awake_wait(wait, mode, PROFILE)
    hi = e_awake_wait(wait + delta, mode, PROFILE)
    assert abs((hi - lo) - delta * rate) <= 1e-9 * max(1.0, hi)


@settings(max_examples=200)
@given(t_comp_max=st.floats(min_value=0.0, max_value=2e3, **finite),
       slack=st.floats(min_value=0.0, max_value=5e3, **finite),
       n=st.integers(0, 3), mode=st.sampled_from(list(WaitMode)))
def test_identity_at_max_frequency(t_comp_max, slack, n, mode):
    """With one frequency, sleep disabled, and matching wait billing, the
    intervened energy equals the baseline exactly."""
    level = FrequencyLevel(2.8, 166.0, 1.0, 150.0, 1.0)
    table = FrequencyTable((level,))
    tf = t_comp_max + n * FT.t_ckpt + slack
    base = eni(t_comp_max, n, tf, table, mode, PROFILE, FT)
    got, _ = ei(level, t_comp_max, n, tf, table, mode, PROFILE, FT,
                SleepThresholds(1e15, 1.0))
    assert abs(energy_saving(base, got)) <= 1e-9 * max(1.0, base)
