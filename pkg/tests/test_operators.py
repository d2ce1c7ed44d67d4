import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncfbs import (
    BackwardBlocks,
    BlockPartition,
    BlockVector,
    BoxProjection,
    BoxQP,
    ContractError,
    IdentityBlock,
    OperatorPair,
    ParameterError,
    PreconditionError,
    SeparableQuadraticProx,
    apply_S,
    apply_T,
    apply_forward_step,
    make_quadratic,
    probe_cocoercive,
    probe_nonexpansive,
    probe_quasi_strong,
    prox_box_qp,
    prox_separable_quadratic,
    quadratic_forward,
)
from asyncfbs.operators import BoxQPProx, estimate_lipschitz, power_iteration, smallest_eigenvalue


def scalar_pair(Q, q=None, blocks=None, gamma=1.0, dims=None, strict=True):
    fwd = quadratic_forward(Q, q)
    dims = dims or (len(np.atleast_1d(np.diag(np.atleast_2d(Q)))),)
    blocks = blocks or [IdentityBlock(d) for d in dims]
    return OperatorPair(fwd, BackwardBlocks(blocks), gamma, strict=strict)


# -- partitions and vectors --------------------------------------------------


def test_partition_slices_and_total():
    p = BlockPartition((2, 3, 1))
    assert p.total == 6 and p.N == 3
    assert [(s.start, s.stop) for s in p.slices] == [(0, 2), (2, 5), (5, 6)]


def test_partition_rejects_empty_blocks():
    with pytest.raises((ParameterError, ContractError)):
        BlockPartition((2, 0))


def test_block_vector_roundtrip():
    v = BlockVector.from_blocks([np.array([1.0, 2.0]), np.array([3.0])])
    assert v.partition.dims == (2, 1)
    np.testing.assert_array_equal(v.block(1), [3.0])
    with pytest.raises(ContractError):
        BlockVector(BlockPartition((2, 2)), np.zeros(3))


# -- spectral helpers ---------------------------------------------------------


def test_power_iteration_and_smallest_eigenvalue(rng):
    U, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    Q = (U * np.array([0.3, 0.5, 1.0, 2.0, 3.0, 4.5])) @ U.T
    assert power_iteration(Q) == pytest.approx(4.5, rel=1e-6)
    assert smallest_eigenvalue(Q) == pytest.approx(0.3, rel=1e-6)


# -- forward step, T and S ----------------------------------------------------


def test_forward_step_hand_value():
    pair = scalar_pair(np.diag([1.0, 2.0]), gamma=0.1, dims=(2,))
    np.testing.assert_allclose(apply_forward_step(pair, [1.0, 1.0]).data, [0.9, 0.8])


def test_T_with_nonnegative_orthant():
    # f = x^2/2, g = indicator of [0, inf), gamma = 1, x = -3
    pair = scalar_pair([[1.0]], blocks=[BoxProjection(0.0, np.inf, 1)], gamma=1.0, strict=False)
    assert apply_forward_step(pair, [-3.0]).data[0] == 0.0
    assert apply_T(pair, [-3.0]).data[0] == 0.0


def test_S_equals_gamma_B_without_backward_step():
    pair = scalar_pair([[1.0]], gamma=1.0, strict=False)
    assert apply_S(pair, [5.0]).data[0] == pytest.approx(5.0)


def test_S_vanishes_at_interior_optimum():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    x_star = np.array([0.2, -0.3])
    q = -Q @ x_star
    pair = scalar_pair(Q, q, blocks=[BoxProjection(-1, 1, 1), BoxProjection(-1, 1, 1)], gamma=0.5, dims=(1, 1))
    assert np.linalg.norm(apply_S(pair, x_star).data) <= 1e-9


def test_inadmissible_gamma_rejected():
    with pytest.raises(ParameterError):
        scalar_pair([[1.0]], gamma=2.0)


def test_wrong_length_rejected(quad):
    with pytest.raises(ContractError):
        apply_T(quad.pair(), np.zeros(5))


# -- proximal maps -------------------------------------------------------------


def test_prox_separable_hand_values():
    assert prox_separable_quadratic([1.0], [0.0], 1.0, [2.0])[0] == pytest.approx(1.0)
    assert prox_separable_quadratic([1.0], [1.0], 1.0, [0.0])[0] == pytest.approx(-0.5)
    p = SeparableQuadraticProx([1.0], [1.0], 1.0)
    assert p(np.array([0.0]))[0] == pytest.approx(-0.5)


def test_prox_box_qp_clamps_unconstrained_solution():
    # Q = 0: the unconstrained prox returns v, here 4, clamped to 1 ... with Q = I it is 2
    out = prox_box_qp(np.eye(1), [0.0], 0.0, 1.0, 1.0, [4.0])
    assert out[0] == pytest.approx(1.0)


def test_prox_box_qp_interior():
    out = prox_box_qp(np.eye(2), [-1.0, -1.0], 0.0, 10.0, 0.5, [0.0, 0.0])
    np.testing.assert_allclose(out, [1 / 3, 1 / 3], atol=1e-12)


def test_box_qp_matches_kkt_on_random_problems(rng):
    for _ in range(20):
        n = 6
        A = rng.normal(size=(n, n))
        H = A @ A.T + 0.1 * np.eye(n)
        h = 3 * rng.normal(size=n)
        qp = BoxQP(H, -1.0, 1.0)
        u = qp.solve(h, tol=1e-12)
        assert qp.stationarity(u, h) <= 1e-9
        g = H @ u + h
        # KKT sign conditions
        free = (u > -1 + 1e-9) & (u < 1 - 1e-9)
        assert np.all(np.abs(g[free]) <= 1e-8)
        assert np.all(g[u <= -1 + 1e-9] >= -1e-8)
        assert np.all(g[u >= 1 - 1e-9] <= 1e-8)


def test_box_qp_warm_start_is_path_independent(rng):
    A = rng.normal(size=(8, 8))
    qp = BoxQP(A @ A.T + np.eye(8), 0.0, 1.0)
    hs = [2 * rng.normal(size=8) for _ in range(10)]
    warm = [qp.solve(h) for h in hs]
    cold = [BoxQP(qp.H, 0.0, 1.0).solve(h) for h in hs]
    for a, b in zip(warm, cold):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_box_qp_prox_object_matches_function():
    Q, q = np.array([[2.0, 0.3], [0.3, 1.0]]), np.array([0.5, -0.2])
    p = BoxQPProx(Q, q, -0.5, 0.5, 0.7)
    v = np.array([1.0, -2.0])
    np.testing.assert_allclose(p(v), prox_box_qp(Q, q, -0.5, 0.5, 0.7, v), atol=1e-12)


def test_box_rejects_inverted_bounds():
    with pytest.raises(ParameterError):
        BoxProjection(1.0, 0.0, 2)


# -- probes ------------------------------------------------------------------


def test_box_projection_is_nonexpansive():
    assert probe_nonexpansive(BoxProjection(0.0, 1.0, 5), 5, n_pairs=500).passed


def test_cocoercivity_probe_passes_for_admissible_gamma(quad):
    pair = quad.pair()
    assert probe_cocoercive(pair, 6, n_pairs=500).passed


def test_cocoercivity_probe_catches_inadmissible_gamma():
    failed = False
    for seed in range(20):
        inst = make_quadratic(2, 2, mu=0.1, L=1.0, seed=seed)
        blocks = BackwardBlocks([IdentityBlock(2), IdentityBlock(2)])
        pair = OperatorPair(inst.forward(), blocks, 4.0, strict=False)
        if not probe_cocoercive(pair, 4, n_pairs=200, seed=seed).passed:
            failed = True
            break
    assert failed


def test_lipschitz_of_contraction():
    c = 0.6
    ratio, _ = estimate_lipschitz(lambda x: x - c * x, 3, 100)  # S = I - cI
    assert ratio >= 1 - c - 1e-12


def test_quasi_strong_estimate_scalar():
    # f = mu x^2 / 2, T_A = I, gamma = 1/mu: T = 0 and S = I
    mu = 2.0
    pair = scalar_pair([[mu]], gamma=1 / mu)
    assert probe_quasi_strong(pair, np.zeros(1), 1) == pytest.approx(1.0)


def test_quasi_strong_needs_a_zero(quad):
    with pytest.raises(PreconditionError):
        probe_quasi_strong(quad.pair(), np.ones(6), 6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.95))
def test_T_is_nonexpansive_on_random_quadratics(seed, gfac):
    inst = make_quadratic(2, 2, mu=0.2, L=1.0, seed=seed)
    pair = inst.pair(gfac / inst.L)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        x, y = rng.normal(size=4) * 3, rng.normal(size=4) * 3
        assert np.linalg.norm(pair.T(x) - pair.T(y)) <= np.linalg.norm(x - y) * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_box_projection_firmly_nonexpansive(x, y):
    P = BoxProjection(-1.0, 2.0, 3)
    x, y = np.array(x), np.array(y)
    d = P(x) - P(y)
    assert d @ d <= d @ (x - y) + 1e-9
