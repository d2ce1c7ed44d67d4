import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncfbs import AgentProfile, BoundedDelayError, AsyncParams, ParameterError, ScheduleConfig, make_quadratic, measure_tau, run_async
from asyncfbs.scheduler import EventQueue, SimulationComplete, next_event, sample_durations


def test_zero_std_gives_mean():
    s = sample_durations(ScheduleConfig((AgentProfile(0, 0.5, 0.0),)))
    np.testing.assert_array_equal(s.take(0, 10), 0.5)


def test_duration_stream_is_seeded():
    cfg = ScheduleConfig((AgentProfile.of_class(0, "small"), AgentProfile.of_class(1, "medium")), seed=7)
    a, b = sample_durations(cfg), sample_durations(cfg)
    np.testing.assert_array_equal(a.take(0, 50), b.take(0, 50))
    np.testing.assert_array_equal(a.take(1, 50), b.take(1, 50))


def test_small_profile_mean_and_truncation():
    s = sample_durations(ScheduleConfig((AgentProfile.of_class(0, "small"),), seed=1))
    d = s.take(0, 1000)
    assert abs(d.mean() - 0.070) <= 0.002
    assert d.min() >= 0.070 - 3 * 0.010 and d.max() <= 0.070 + 3 * 0.010


def test_event_queue_tie_break():
    q = EventQueue()
    q.push(1.0, 2, "x")
    q.push(1.0, 1, "x")
    assert next_event(q).agent == 1
    assert next_event(q).agent == 2
    with pytest.raises(SimulationComplete):
        next_event(q)


def test_event_queue_single():
    q = EventQueue()
    q.push(0.3, 5, "a")
    ev = next_event(q)
    assert (ev.sim_time, ev.agent, ev.kind) == (0.3, 5, "a")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.integers(0, 9)), min_size=1, max_size=60))
def test_event_queue_pops_in_time_order(events):
    q = EventQueue()
    for t, a in events:
        q.push(t, a, "e")
    out = []
    while len(q):
        e = next_event(q)
        out.append((e.sim_time, e.agent))
    assert out == sorted(out)


def test_profile_validation():
    with pytest.raises(ParameterError):
        AgentProfile(0, 0.0)
    with pytest.raises(ParameterError):
        AgentProfile(0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        AgentProfile.of_class(0, "huge")
    with pytest.raises(ParameterError):
        ScheduleConfig(())
    with pytest.raises(ParameterError):
        ScheduleConfig((AgentProfile(0, 1.0), AgentProfile(1, 1.0)), tau_epochs=1)
    with pytest.raises(ParameterError):
        ScheduleConfig((AgentProfile(0, 1.0),), pull_policy="lifo")


def _trace(profiles, iters=300, **kw):
    inst = make_quadratic(len(profiles), 1, seed=0)
    pair = inst.pair()
    sched = ScheduleConfig(tuple(profiles), **kw)
    _, trace = run_async(pair, AsyncParams(gamma=pair.gamma, eta=0.5, max_iters=iters, stop_tol=1e-300,
                                           dense=True), sched)
    return trace


def test_tau_round_robin_three():
    inst = make_quadratic(3, 1, seed=0)
    pair = inst.pair()
    _, trace = run_async(pair, AsyncParams(gamma=pair.gamma, eta=0.5, max_iters=60, stop_tol=1e-300,
                                           update="coordinate"), ScheduleConfig.round_robin(3))
    assert measure_tau(trace).tau_obs == 3


def test_tau_single_agent():
    assert measure_tau(_trace([AgentProfile(0, 1.0)])).tau_obs == 1


def test_tau_four_to_one():
    tr = _trace([AgentProfile(0, 1.0, 0.05), AgentProfile(1, 4.0, 0.2)], iters=500, seed=3)
    rep = measure_tau(tr)
    assert 4 <= rep.tau_obs <= 6
    assert rep.counts[0] > 3 * rep.counts[1]


def test_tau_infinite_for_silent_agent():
    tr = _trace([AgentProfile(0, 1.0), AgentProfile(1, 1000.0)], iters=20, tau_epochs=1000)
    with pytest.warns(UserWarning):
        rep = measure_tau(tr)
    assert rep.per_agent[1] == float("inf")


def test_starvation_guard_enforces_bound():
    profiles = [AgentProfile(0, 0.01), AgentProfile(1, 0.01), AgentProfile(2, 0.5)]
    tr = _trace(profiles, iters=600, tau_epochs=10)
    assert measure_tau(tr).tau_obs <= 10
    assert any(e.kind == "guard" for e in tr.events)


@pytest.mark.filterwarnings("ignore:agent 2 has")
def test_starvation_guard_off_measures_only():
    profiles = [AgentProfile(0, 0.01), AgentProfile(1, 0.01), AgentProfile(2, 0.5)]
    tr = _trace(profiles, iters=600, tau_epochs=10, starvation_guard="off")
    assert measure_tau(tr).tau_obs > 10


def test_simulated_time_nondecreasing():
    tr = _trace([AgentProfile.of_class(i, c) for i, c in enumerate(["small", "medium", "battery"])], seed=4)
    t = [e.sim_time for e in tr.events]
    assert all(a <= b for a, b in zip(t, t[1:]))


def test_starvation_guard_raise():
    profiles = [AgentProfile(0, 0.01), AgentProfile(1, 0.01), AgentProfile(2, 0.5)]
    with pytest.raises(BoundedDelayError):
        _trace(profiles, iters=600, tau_epochs=10, starvation_guard="raise")
