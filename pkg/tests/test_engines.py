import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncfbs import (
    BackwardBlocks,
    BlockPartition,
    BoxProjection,
    DivergenceError,
    IdentityBlock,
    OperatorPair,
    ParameterError,
    SyncParams,
    apply_T,
    make_quadratic,
    quadratic_forward,
    run_cyclic_coordinate_km,
    run_heavy_ball,
    run_km,
    run_sync_fbs,
)


def test_heavy_ball_one_step_minimizer():
    res = run_heavy_ball(lambda x: x, SyncParams(gamma=1.0, max_iters=1, x0=[7.0]))
    assert res.iterates[1][0] == 0.0
    assert res.terminated_by in ("tol", "max_iters")


def test_heavy_ball_zero_step_is_constant():
    res = run_heavy_ball(lambda x: x, SyncParams(gamma=0.0, max_iters=5, x0=[3.0]))
    np.testing.assert_array_equal(res.iterates[:, 0], 3.0)


def test_heavy_ball_geometric_rate(rng):
    lam = np.array([0.5, 1.0, 2.0])
    gamma = 0.4
    res = run_heavy_ball(lambda x: lam * x, SyncParams(gamma=gamma, max_iters=30, stop_tol=1e-300, x0=np.ones(3)))
    factor = np.max(np.abs(1 - gamma * lam))
    norms = np.linalg.norm(res.iterates, axis=1)
    assert np.all(norms[1:] <= factor * norms[:-1] * (1 + 1e-12))


def test_heavy_ball_divergence_guard():
    with pytest.raises(DivergenceError):
        run_heavy_ball(lambda x: x, SyncParams(gamma=10.0, max_iters=100, x0=[1.0]))


def test_km_constant_map():
    c = np.array([1.0, -2.0])
    res = run_km(lambda x: c, 1.0, SyncParams(max_iters=3, x0=[5.0, 5.0]))
    np.testing.assert_array_equal(res.iterates[1], c)
    assert res.terminated_by == "tol"


def test_km_zero_relaxation_is_constant():
    res = run_km(lambda x: -x, 0.0, SyncParams(max_iters=4, x0=[1.0, 2.0]))
    np.testing.assert_array_equal(res.iterates, np.tile([1.0, 2.0], (5, 1)))


def test_km_rotation_contracts_at_known_rate():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    res = run_km(lambda x: R @ x, 0.5, SyncParams(max_iters=40, stop_tol=1e-300, x0=[3.0, 4.0]))
    norms = np.linalg.norm(res.iterates, axis=1)
    expected = 5.0 * (math.sqrt(2) / 2) ** np.arange(len(norms))
    np.testing.assert_allclose(norms, expected, rtol=1e-12)


def test_km_rejects_bad_relaxation():
    with pytest.raises(ParameterError):
        run_km(lambda x: x + 1, lambda k: 1.5, SyncParams(max_iters=3, x0=[0.0]))


def test_km_residual_nonincreasing_for_averaged_map(quad):
    pair = quad.pair()
    res = run_km(pair.T, 0.5, SyncParams(max_iters=200, stop_tol=1e-300, x0=np.full(6, 3.0)))
    assert np.all(np.diff(res.residuals) <= 1e-14)


def test_sync_fbs_gradient_descent_coincides_with_heavy_ball():
    Q = np.diag([1.0, 3.0])
    fwd = quadratic_forward(Q)
    pair = OperatorPair(fwd, BackwardBlocks([IdentityBlock(2)]), 0.3)
    p = SyncParams(gamma=0.3, max_iters=25, stop_tol=1e-300, x0=[1.0, -1.0])
    a = run_sync_fbs(pair, p).iterates
    b = run_heavy_ball(lambda x: Q @ x, p).iterates
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)


def test_sync_fbs_equals_repeated_T(quad):
    pair = quad.pair()
    x = np.full(6, 2.0)
    res = run_sync_fbs(pair, SyncParams(gamma=pair.gamma, max_iters=30, stop_tol=1e-300, x0=x))
    for k in range(30):
        x = apply_T(pair, x).data
        np.testing.assert_array_equal(res.iterates[k + 1], x)


def test_sync_fbs_contraction_bound(quad):
    x_star = quad.reference()
    pair = quad.pair()
    lip = math.sqrt(1 - 2 * pair.gamma * quad.mu + quad.mu * pair.gamma ** 2 * quad.L)
    x0 = np.full(6, 5.0)
    res = run_sync_fbs(pair, SyncParams(gamma=pair.gamma, max_iters=40, stop_tol=1e-300, x0=x0), reference=x_star)
    d0 = res.distances[0]
    k = np.arange(len(res.distances))
    assert np.all(res.distances <= lip ** k * d0 * (1 + 1e-9) + 1e-14)
    assert np.all(np.diff(res.distances) <= 1e-14)


def test_sync_fbs_stops_at_solution(quad):
    x_star = quad.reference()
    pair = quad.pair()
    res = run_sync_fbs(pair, SyncParams(gamma=pair.gamma, max_iters=10, stop_tol=1e-9, x0=x_star))
    assert res.terminated_by == "tol" and res.iterations == 0
    assert res.residuals[-1] <= 1e-9


def test_sync_fbs_rejects_beta_one(quad):
    with pytest.raises(ParameterError):
        run_sync_fbs(quad.pair(), SyncParams(beta=1.0, max_iters=3))


def test_run_result_shapes(quad):
    res = run_sync_fbs(quad.pair(), SyncParams(max_iters=7, stop_tol=1e-300))
    assert len(res.residuals) == len(res.iterates) == 8
    assert res.distances is None
    res2 = run_sync_fbs(quad.pair(), SyncParams(max_iters=7, stop_tol=1e-300), reference=np.zeros(6))
    assert len(res2.distances) == 8


def test_cyclic_single_block_equals_km(quad):
    inst = make_quadratic(1, 4, seed=3)
    pair = inst.pair()
    p = SyncParams(eta=0.7, max_iters=30, stop_tol=1e-300, x0=np.ones(4))
    a = run_cyclic_coordinate_km(pair, p).iterates
    b = run_km(pair.T, 0.7, p).iterates
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)


def test_cyclic_separable_sweep_is_sync_step():
    Q = np.diag([1.0, 2.0, 0.5])
    fwd = quadratic_forward(Q, [0.3, -0.2, 0.1])
    pair = OperatorPair(fwd, BackwardBlocks([BoxProjection(-0.1, 0.1, 1)] * 3), 0.5)
    x0 = np.array([1.0, -1.0, 0.4])
    p = SyncParams(eta=0.8, max_iters=3, stop_tol=1e-300, x0=x0)
    sweep = run_cyclic_coordinate_km(pair, p).iterates[3]
    step = run_sync_fbs(pair, SyncParams(eta=0.8, max_iters=1, stop_tol=1e-300, x0=x0)).iterates[1]
    np.testing.assert_allclose(sweep, step, rtol=1e-14)


def test_cyclic_zero_relaxation_is_constant(quad):
    res = run_cyclic_coordinate_km(quad.pair(), SyncParams(eta=0.0, max_iters=6, stop_tol=1e-300, x0=np.ones(6)))
    np.testing.assert_array_equal(res.iterates, np.ones((7, 6)))


def test_params_validation():
    with pytest.raises(ParameterError):
        SyncParams(eta=1.5)
    with pytest.raises(ParameterError):
        SyncParams(beta=-0.1)
    with pytest.raises(ParameterError):
        SyncParams(stop_tol=0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.1, 1.9), st.floats(0.1, 1.0))
def test_distance_monotone_for_relaxed_fbs(seed, gfac, eta):
    inst = make_quadratic(2, 2, mu=0.3, L=1.0, seed=seed)
    pair = inst.pair(gfac)
    x_star = inst.reference()
    x0 = np.random.default_rng(seed).normal(size=4) * 4
    res = run_sync_fbs(pair, SyncParams(gamma=pair.gamma, eta=eta, max_iters=50, stop_tol=1e-300, x0=x0),
                       reference=x_star)
    assert np.all(np.diff(res.distances) <= 1e-12)
