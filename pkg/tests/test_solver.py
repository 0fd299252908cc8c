"""ADMM sub-steps, residuals, stopping rule, penalty adaptation, initialization."""

import math

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import scalar_operator
from cmmodes.errors import RankDeficient
from cmmodes.operators import build_laplacian, generalized_eigs
from cmmodes.solver import (
    AdmmState,
    EFactorCache,
    SolveConfig,
    adapt_penalty,
    admm_step,
    check_stop,
    initialize,
    objective,
    project_A_orthonormal,
    residuals,
    shrink,
    stop_thresholds,
    update_E,
)


def _state(Phi, E, S, dual_E, dual_S, rho=1.0):
    return AdmmState(
        Phi=np.asarray(Phi, dtype=float),
        E=np.asarray(E, dtype=float),
        S=np.asarray(S, dtype=float),
        dual_E=np.asarray(dual_E, dtype=float),
        dual_S=np.asarray(dual_S, dtype=float),
        rho=rho,
    )


# ---------------------------------------------------------------------------
# config


def test_config_validation():
    SolveConfig(mu=0.0, k=1).validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=-1.0, k=1).validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=0.1, k=0).validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=0.1, k=1, rho0=0.0).validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=0.1, k=1, eta=1.0).validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=0.1, k=1, init="warm").validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=0.1, k=1, variant="sor").validate()
    with pytest.raises(ValueError):
        SolveConfig(mu=0.1, k=1, restart_rule="never").validate()


def test_config_defaults():
    cfg = SolveConfig(mu=0.02, k=10)
    assert cfg.eta == 0.999
    assert cfg.eps_abs == 1e-8
    assert cfg.eps_rel == 1e-6


# ---------------------------------------------------------------------------
# shrink


def test_shrink_scalars():
    assert shrink(np.array(0.5), 0.2) == pytest.approx(0.3)
    assert shrink(np.array(-0.1), 0.2) == pytest.approx(0.0)
    assert shrink(np.array(-0.7), 0.2) == pytest.approx(-0.5)


def test_shrink_rejects_negative_threshold():
    with pytest.raises(ValueError):
        shrink(np.array([1.0]), -0.1)


def test_shrink_per_row_threshold_broadcast():
    Z = np.ones((3, 2))
    t = np.array([[0.25], [0.5], [2.0]])
    np.testing.assert_allclose(shrink(Z, t), [[0.75, 0.75], [0.5, 0.5], [0.0, 0.0]])


def test_shrink_matches_brute_force_minimizer():
    # shrink(z, t) is argmin_s 0.5 (s - z)^2 + t |s|; cross-check against a
    # generic 1-D numerical minimizer on random instances
    rng = np.random.default_rng(42)
    for _ in range(100):
        z = rng.uniform(-3, 3)
        t = rng.uniform(0, 2)
        res = scipy.optimize.minimize_scalar(
            lambda s: 0.5 * (s - z) ** 2 + t * abs(s),
            bounds=(-4, 4),
            method="bounded",
            options={"xatol": 1e-10},
        )
        assert shrink(np.array(z), t) == pytest.approx(res.x, abs=1e-6)


@given(
    xy=hnp.arrays(
        np.float64,
        (2, 5),
        elements=st.floats(-1e6, 1e6, allow_nan=False),
    ),
    t=st.floats(0, 1e6, allow_nan=False),
)
def test_shrink_nonexpansive(xy, t):
    x, y = xy
    assert np.linalg.norm(shrink(x, t) - shrink(y, t)) <= np.linalg.norm(x - y) + 1e-9


# ---------------------------------------------------------------------------
# projection


@pytest.mark.parametrize("kind", ["lumped", "unlumped"])
def test_projection_orthonormal(lshape8, kind):
    op = build_laplacian(lshape8, kind)
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((op.n, 6))
    Phi = project_A_orthonormal(Y, op.mass)
    gram = Phi.T @ (op.mass @ Phi)
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)


def test_projection_idempotent(lshape8_lumped):
    rng = np.random.default_rng(1)
    Phi = project_A_orthonormal(rng.standard_normal((lshape8_lumped.n, 4)),
                                lshape8_lumped.mass)
    again = project_A_orthonormal(Phi, lshape8_lumped.mass)
    np.testing.assert_allclose(again, Phi, atol=1e-10)


def test_projection_preserves_column_span():
    A = sp.eye_array(4, format="csr")
    rng = np.random.default_rng(2)
    Y = rng.standard_normal((4, 2))
    Phi = project_A_orthonormal(Y, A)
    # Phi = Y M for an invertible 2x2 M, so residual of lstsq onto Y is zero
    _, res, _, _ = np.linalg.lstsq(Y, Phi, rcond=None)
    assert np.all(res < 1e-20)


def test_projection_rank_deficient():
    A = sp.eye_array(3, format="csr")
    Y = np.ones((3, 2))  # collinear columns
    with pytest.raises(RankDeficient):
        project_A_orthonormal(Y, A)


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 10_000))
def test_projection_orthonormal_property(seed, sphere1_lumped):
    rng = np.random.default_rng(seed)
    Y = rng.uniform(0.0, 1.0, (sphere1_lumped.n, 3)) + 1e-3 * rng.standard_normal(
        (sphere1_lumped.n, 3)
    )
    Phi = project_A_orthonormal(Y, sphere1_lumped.mass)
    gram = Phi.T @ (sphere1_lumped.mass @ Phi)
    assert np.abs(gram - np.eye(3)).max() <= 1e-8


# ---------------------------------------------------------------------------
# E-step


def test_update_E_zero_weight():
    W = sp.csr_array(np.zeros((3, 3)))
    A = sp.csr_array(np.diag([1.0, 2.0, 3.0]))
    Phi = np.arange(6, dtype=float).reshape(3, 2)
    dual = np.full((3, 2), 0.5)
    E = update_E(Phi, dual, W, A, rho=2.0)
    np.testing.assert_allclose(E, Phi - dual, atol=1e-12)


def test_update_E_scalar():
    W = sp.csr_array([[1.0]])
    A = sp.csr_array([[1.0]])
    E = update_E(np.array([[3.0]]), np.array([[0.0]]), W, A, rho=2.0)
    # (2*1 + 2*1) E = 2 * 3
    assert E[0, 0] == pytest.approx(1.5)


def test_update_E_normal_equations(lshape8_unlumped):
    op = lshape8_unlumped
    rng = np.random.default_rng(3)
    Phi = rng.standard_normal((op.n, 5))
    dual = rng.standard_normal((op.n, 5))
    rho = 7.3
    E = update_E(Phi, dual, op.weight, op.mass, rho)
    rhs = rho * (op.mass @ (Phi - dual))
    lhs = 2.0 * (op.weight @ E) + rho * (op.mass @ E)
    assert np.abs(lhs - rhs).max() <= 1e-8 * np.abs(rhs).max()


def test_factor_cache_reuse_and_invalidation(lshape8_lumped):
    op = lshape8_lumped
    cache = EFactorCache(op.weight, op.mass)
    rhs = np.ones((op.n, 1))
    x1 = cache.solve(2.0, rhs)
    solver_obj = cache._solve
    x2 = cache.solve(2.0, rhs)
    assert cache._solve is solver_obj  # same rho reuses the factorization
    np.testing.assert_array_equal(x1, x2)
    cache.solve(4.0, rhs)
    assert cache._solve is not solver_obj
    cache.invalidate()
    assert cache._solve is None


def test_cache_row_mass_is_lumped_row_sums(lshape8_unlumped):
    cache = EFactorCache(lshape8_unlumped.weight, lshape8_unlumped.mass)
    expect = np.asarray(lshape8_unlumped.mass.sum(axis=1)).ravel()
    np.testing.assert_allclose(cache.row_mass.ravel(), expect, atol=1e-14)


# ---------------------------------------------------------------------------
# residuals and stopping


def test_residuals_zero_at_consensus():
    Z = np.zeros((3, 2))
    s = _state(Z, Z, Z, Z, Z)
    assert residuals(s, s, rho=2.0) == (0.0, 0.0)


def test_residuals_primal_norm():
    n, k = 4, 3
    Phi = np.ones((n, k))
    E = np.zeros((n, k))
    prev = _state(Phi, E, Phi, E, E)
    cur = _state(Phi, E, Phi, E, E)
    primal, dual = residuals(prev, cur, rho=5.0)
    assert primal == pytest.approx(math.sqrt(n * k))
    assert dual == 0.0


def test_residuals_dual_cancellation():
    D = np.random.default_rng(4).standard_normal((3, 2))
    prev = _state(np.zeros((3, 2)), np.zeros((3, 2)), D, 0 * D, 0 * D)
    cur = _state(np.zeros((3, 2)), D, np.zeros((3, 2)), 0 * D, 0 * D)
    # E moved by +D while S moved by -D: the two motions cancel in the dual
    _, dual = residuals(prev, cur, rho=3.0)
    assert dual == pytest.approx(0.0, abs=1e-12)


def test_residuals_dual_scale():
    D = np.ones((2, 2))
    prev = _state(0 * D, 0 * D, 0 * D, 0 * D, 0 * D)
    cur = _state(0 * D, D, 0 * D, 0 * D, 0 * D)
    _, dual = residuals(prev, cur, rho=3.0)
    assert dual == pytest.approx(3.0 * 2.0)  # rho * ||ones(2x2)||_F


def test_stop_thresholds_hand_example():
    # n=100, eps_abs=1e-8, eps_rel=1e-6, ||Phi||=1, ||[E;S]||=sqrt(2),
    # unscaled stacked dual norm 2
    n = 100
    Phi = np.zeros((n, 1)); Phi[0] = 1.0
    E = np.zeros((n, 1)); E[0] = 1.0
    S = np.zeros((n, 1)); S[0] = 1.0
    dual = np.zeros((n, 1)); dual[0] = math.sqrt(2.0)
    state = _state(Phi, E, S, dual, dual.copy(), rho=1.0)
    cfg = SolveConfig(mu=0.0, k=1, eps_abs=1e-8, eps_rel=1e-6)
    eps_pri, eps_dual = stop_thresholds(state, cfg, n)
    assert eps_pri == pytest.approx(math.sqrt(200) * 1e-8 + 1e-6 * math.sqrt(2), abs=1e-10)
    assert eps_dual == pytest.approx(2.1e-6, abs=1e-10)


def test_check_stop_conjunction():
    n = 4
    Z = np.zeros((n, 1))
    state = _state(Z, Z, Z, Z, Z)
    cfg = SolveConfig(mu=0.0, k=1)
    state.residual_history.append((0.0, 0.0, math.nan))
    assert check_stop(state, cfg, n)  # zero residuals always pass
    state.residual_history.append((0.0, 1.0, math.nan))
    assert not check_stop(state, cfg, n)  # primal passes, dual fails
    state.residual_history.append((1.0, 0.0, math.nan))
    assert not check_stop(state, cfg, n)


def test_check_stop_requires_history():
    Z = np.zeros((2, 1))
    with pytest.raises(ValueError):
        check_stop(_state(Z, Z, Z, Z, Z), SolveConfig(mu=0.0, k=1), 2)


# ---------------------------------------------------------------------------
# penalty adaptation


def _adapt_state(rho=4.0, floor=0.0):
    D = np.ones((2, 2))
    s = _state(0 * D, 0 * D, 0 * D, D, 2 * D, rho=rho)
    s.rho_floor = floor
    return s


def test_adapt_penalty_increase():
    s = _adapt_state(rho=4.0)
    cfg = SolveConfig(mu=0.0, k=1)
    scale = adapt_penalty(s, primal=1.0, dual=0.05, cfg=cfg)
    assert s.rho == 8.0
    assert scale == 0.5
    np.testing.assert_allclose(s.dual_E, 0.5)
    np.testing.assert_allclose(s.dual_S, 1.0)


def test_adapt_penalty_decrease():
    s = _adapt_state(rho=4.0)
    cfg = SolveConfig(mu=0.0, k=1)
    scale = adapt_penalty(s, primal=0.05, dual=1.0, cfg=cfg)
    assert s.rho == 2.0
    assert scale == 2.0
    np.testing.assert_allclose(s.dual_E, 2.0)


def test_adapt_penalty_balanced_noop():
    s = _adapt_state(rho=4.0)
    cfg = SolveConfig(mu=0.0, k=1)
    assert adapt_penalty(s, primal=1.0, dual=1.0, cfg=cfg) == 1.0
    assert s.rho == 4.0
    np.testing.assert_allclose(s.dual_E, 1.0)


def test_adapt_penalty_respects_floor():
    s = _adapt_state(rho=4.0, floor=3.0)
    cfg = SolveConfig(mu=0.0, k=1)
    scale = adapt_penalty(s, primal=0.05, dual=1.0, cfg=cfg)
    assert s.rho == 3.0  # clamped, not halved
    assert scale == pytest.approx(4.0 / 3.0)
    s2 = _adapt_state(rho=3.0, floor=3.0)
    assert adapt_penalty(s2, primal=0.05, dual=1.0, cfg=cfg) == 1.0
    assert s2.rho == 3.0


def test_adapt_penalty_invalidates_cache(lshape8_lumped):
    cache = EFactorCache(lshape8_lumped.weight, lshape8_lumped.mass)
    cache.solve(4.0, np.ones((lshape8_lumped.n, 1)))
    s = _adapt_state(rho=4.0)
    adapt_penalty(s, primal=1.0, dual=0.01, cfg=SolveConfig(mu=0.0, k=1), cache=cache)
    assert cache._solve is None


# ---------------------------------------------------------------------------
# initialization


def test_initialize_deterministic(sphere1_lumped):
    cfg = SolveConfig(mu=0.02, k=4, seed=7)
    a = initialize(sphere1_lumped, cfg)
    b = initialize(sphere1_lumped, cfg)
    for fa, fb in [(a.Phi, b.Phi), (a.E, b.E), (a.S, b.S)]:
        np.testing.assert_array_equal(fa, fb)


def test_initialize_seed_changes_state(sphere1_lumped):
    a = initialize(sphere1_lumped, SolveConfig(mu=0.02, k=4, seed=7))
    b = initialize(sphere1_lumped, SolveConfig(mu=0.02, k=4, seed=8))
    assert np.abs(a.Phi - b.Phi).max() > 0


def test_initialize_random_orthonormal(sphere1_lumped):
    state = initialize(sphere1_lumped, SolveConfig(mu=0.02, k=4, seed=0))
    gram = state.Phi.T @ (sphere1_lumped.mass @ state.Phi)
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)
    assert np.all(state.dual_E == 0) and np.all(state.dual_S == 0)


def test_initialize_eigen(sphere1_lumped):
    state = initialize(sphere1_lumped, SolveConfig(mu=0.0, k=3, init="eigen"))
    _, vecs = generalized_eigs(sphere1_lumped.weight, sphere1_lumped.mass, 3)
    np.testing.assert_allclose(state.Phi, vecs, atol=1e-12)
    np.testing.assert_array_equal(state.E, state.Phi)
    np.testing.assert_array_equal(state.S, state.Phi)


def test_initialize_explicit_rho(sphere1_lumped):
    state = initialize(sphere1_lumped, SolveConfig(mu=0.0, k=2, rho0=5.0))
    assert state.rho == 5.0
    assert state.rho_floor == 0.0


def test_initialize_auto_rho_scales_with_spectrum(sphere1_lumped):
    s2 = initialize(sphere1_lumped, SolveConfig(mu=0.0, k=2))
    s5 = initialize(sphere1_lumped, SolveConfig(mu=0.0, k=5))
    assert s2.rho >= 1.0
    assert s5.rho > s2.rho  # higher modes push the penalty up
    assert s2.rho_floor == s2.rho


# ---------------------------------------------------------------------------
# full ADMM cycle


def test_admm_step_orthonormal_after_phi_update(lshape8_lumped):
    cfg = SolveConfig(mu=0.02, k=5, seed=1)
    state = initialize(lshape8_lumped, cfg)
    cache = EFactorCache(lshape8_lumped.weight, lshape8_lumped.mass)
    for _ in range(3):
        admm_step(state, lshape8_lumped, cfg, cache)
        gram = state.Phi.T @ (lshape8_lumped.mass @ state.Phi)
        assert np.abs(gram - np.eye(5)).max() <= 1e-10


def test_admm_step_eigen_init_is_fixed_point_for_phi(sphere1_lumped):
    cfg = SolveConfig(mu=0.0, k=4, init="eigen")
    state = initialize(sphere1_lumped, cfg)
    Phi0 = state.Phi.copy()
    cache = EFactorCache(sphere1_lumped.weight, sphere1_lumped.mass)
    admm_step(state, sphere1_lumped, cfg, cache)
    assert np.abs(state.Phi - Phi0).max() < 1e-8


def test_admm_step_scalar_toy_matches_transcript():
    # N = K = 1, W = A = [[1]], mu = 0.1: replay the cycle with plain floats
    op = scalar_operator(1.0, 1.0)
    cfg = SolveConfig(mu=0.1, k=1, rho0=2.0, penalty_adapt=False, seed=0)
    state = initialize(op, cfg)
    cache = EFactorCache(op.weight, op.mass)

    phi, e, s = state.Phi[0, 0], state.E[0, 0], state.S[0, 0]
    le = ls = 0.0
    rho, mu = 2.0, 0.1
    for _ in range(50):
        admm_step(state, op, cfg, cache)
        y = 0.5 * ((e + le) + (s + ls))
        phi = math.copysign(1.0, y)            # A-orthonormal projection in 1-D
        e = rho * (phi - le) / (2.0 + rho)     # (2W + rho A) e = rho A (phi - le)
        t = mu / rho                           # unit vertex mass
        z = phi - ls
        s = math.copysign(max(abs(z) - t, 0.0), z)
        le = le - (phi - e)
        ls = ls - (phi - s)
        assert state.Phi[0, 0] == pytest.approx(phi, abs=1e-12)
        assert state.E[0, 0] == pytest.approx(e, abs=1e-12)
        assert state.S[0, 0] == pytest.approx(s, abs=1e-12)
        assert state.dual_E[0, 0] == pytest.approx(le, abs=1e-12)
        assert state.dual_S[0, 0] == pytest.approx(ls, abs=1e-12)
    assert abs(state.Phi[0, 0]) == 1.0


def test_objective_value():
    op = scalar_operator(2.0)
    assert objective(np.array([[3.0]]), op, mu=4.0) == pytest.approx(2 * 9 + 4 * 3)
