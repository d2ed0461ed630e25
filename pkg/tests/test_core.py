import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfrls import core, linalg
from gfrls.exceptions import DimensionMismatch, IllPosedForgetting, NotPositiveDefinite
from gfrls.forgetting import ExponentialForgetting
from oracles import batch_from_scratch, random_samples, random_spd

seeds = st.integers(0, 2**32 - 1)


def scalar(y, phi, gamma=1.0):
    return core.Sample(y=[y], phi=[[phi]], gamma=[[gamma]])


def test_init_examples():
    s = core.init([0.0], [[1.0]], 1)
    assert s.k == 0 and s.info.tolist() == [[1.0]] and s.theta.tolist() == [0.0]
    s = core.init([1.0, 2.0], np.diag([10.0, 10.0]), 1)
    np.testing.assert_allclose(s.info, np.diag([0.1, 0.1]))


def test_init_round_trip_and_errors():
    p0 = random_spd(np.random.default_rng(0), 3)
    np.testing.assert_allclose(core.init(np.zeros(3), p0, 2).covariance, p0, rtol=1e-12, atol=1e-12)
    with pytest.raises(NotPositiveDefinite):
        core.init([0.0], [[-1.0]], 1)
    with pytest.raises(DimensionMismatch):
        core.init([0.0, 1.0], np.eye(3), 1)


def test_sample_defaults_and_validation():
    s = core.Sample(y=[1.0, 2.0], phi=np.ones((2, 3)))
    np.testing.assert_array_equal(s.gamma, np.eye(2))
    assert (s.p, s.n) == (2, 3)
    with pytest.raises(ValueError):
        s.phi[0, 0] = 5.0
    with pytest.raises(DimensionMismatch):
        core.Sample(y=[1.0], phi=np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        core.Sample(y=[1.0, 2.0], phi=np.ones((2, 3)), gamma=np.eye(3))


def test_hand_evaluated_scalar_step():
    state = core.init([0.0], [[1.0]], 1)
    new, diag = core.step(state, scalar(1.0, 1.0), [[0.0]])
    assert new.info[0, 0] == 2.0
    assert new.theta[0] == pytest.approx(0.5, rel=1e-15)
    assert new.k == 1
    assert diag.proper and diag.well_posed_margin == 1.0


def test_zero_regressor_no_forgetting_is_identity():
    rng = np.random.default_rng(3)
    state = core.init(rng.standard_normal(3), random_spd(rng, 3), 2)
    new, _ = core.step(state, core.Sample(y=rng.standard_normal(2), phi=np.zeros((2, 3))), np.zeros((3, 3)))
    np.testing.assert_array_equal(new.theta, state.theta)
    np.testing.assert_array_equal(new.info, state.info)


def test_zero_innovation_keeps_theta():
    rng = np.random.default_rng(4)
    state = core.init(rng.standard_normal(2), np.eye(2), 1)
    phi = rng.standard_normal((1, 2))
    new, _ = core.step(state, core.Sample(y=phi @ state.theta, phi=phi), 0.3 * state.info)
    np.testing.assert_allclose(new.theta, state.theta, atol=1e-15)
    assert not np.allclose(new.info, state.info)


def test_ill_posed_forgetting_raises():
    state = core.init([0.0, 0.0], np.eye(2), 1)
    with pytest.raises(IllPosedForgetting):
        core.step(state, core.Sample(y=[0.0], phi=[[1.0, 0.0]]), np.eye(2))
    with pytest.raises(IllPosedForgetting):
        core.step(state, core.Sample(y=[0.0], phi=[[1.0, 0.0]]), 2 * np.eye(2))


def test_step_dimension_checks():
    state = core.init([0.0, 0.0], np.eye(2), 1)
    with pytest.raises(DimensionMismatch):
        core.step(state, core.Sample(y=[0.0], phi=[[1.0, 0.0, 0.0]]), np.zeros((2, 2)))
    with pytest.raises(DimensionMismatch):
        core.step(state, core.Sample(y=[0.0], phi=[[1.0, 0.0]]), np.zeros((3, 3)))


def test_batch_scalar_hand_example():
    acc = core.new_accumulator([0.0], [[1.0]])
    assert core.batch_minimizer(acc).tolist() == [0.0]
    acc = core.batch_accumulate(acc, scalar(1.0, 1.0), [[0.0]], [0.0])
    assert acc.h.tolist() == [[2.0]] and acc.b.tolist() == [-1.0]
    assert core.batch_minimizer(acc)[0] == pytest.approx(0.5, rel=1e-15)
    assert len(acc.theta_history) == 2


def test_batch_prior_only_returns_theta0():
    theta0 = np.array([1.0, -2.0, 0.5])
    acc = core.new_accumulator(theta0, random_spd(np.random.default_rng(5), 3))
    np.testing.assert_allclose(core.batch_minimizer(acc), theta0, rtol=1e-12)


def test_batch_no_information_step_changes_only_history():
    acc = core.new_accumulator([1.0, 2.0], np.eye(2))
    nxt = core.batch_accumulate(acc, core.Sample(y=[3.0], phi=[[0.0, 0.0]]), np.zeros((2, 2)), [1.0, 2.0])
    np.testing.assert_array_equal(nxt.h, acc.h)
    np.testing.assert_array_equal(nxt.b, acc.b)
    assert len(nxt.theta_history) == 2


def test_fifty_step_batch_oracle_exponential_forgetting():
    rng = np.random.default_rng(6)
    raw = random_samples(rng, 3, 2, 50, weighted=True)
    samples = [core.Sample(y=y, phi=phi, gamma=g) for y, phi, g in raw]
    theta0, p0 = np.zeros(3), 10.0 * np.eye(3)
    state = core.init(theta0, p0, 2)
    acc = core.new_accumulator(theta0, p0)
    strat = ExponentialForgetting(0.9)
    fs, thetas = [], []
    for s in samples:
        f = strat(state, s).f
        fs.append(f)
        thetas.append(state.theta)
        acc = core.batch_accumulate(acc, s, f, state.theta)
        state, _ = core.step(state, s, f)
        batch = core.batch_minimizer(acc)
        assert np.linalg.norm(batch - state.theta) <= 1e-8 * np.linalg.norm(state.theta)
    scratch = batch_from_scratch(theta0, p0, raw, fs, thetas)
    assert np.linalg.norm(scratch - state.theta) <= 1e-8 * np.linalg.norm(state.theta)


def _random_run(seed, n, p, count, lam):
    rng = np.random.default_rng(seed)
    raw = random_samples(rng, n, p, count, weighted=True)
    state = core.init(rng.standard_normal(n), random_spd(rng, n), p)
    traj = core.propagate(state, [core.Sample(y=y, phi=phi, gamma=g) for y, phi, g in raw], ExponentialForgetting(lam))
    return traj


@settings(max_examples=30)
@given(seeds, st.integers(1, 4), st.integers(1, 2), st.floats(0.5, 1.0))
def test_information_equals_accumulated_sum(seed, n, p, lam):
    traj = _random_run(seed, n, p, 30, lam)
    info = traj.states[0].info.copy()
    for k, (s, d) in enumerate(zip(traj.samples, traj.directives)):
        info = info - d.f + s.phi.T @ np.linalg.solve(s.gamma, s.phi)
        assert np.max(np.abs(info - traj.states[k + 1].info)) <= 1e-10 * max(1.0, np.max(np.abs(info)))


@settings(max_examples=30)
@given(seeds, st.integers(1, 4), st.integers(1, 2), st.floats(0.5, 1.0))
def test_noiseless_error_recursion(seed, n, p, lam):
    rng = np.random.default_rng(seed)
    theta_true = rng.standard_normal(n)
    state = core.init(np.zeros(n), np.eye(n), p)
    strat = ExponentialForgetting(lam)
    for _ in range(30):
        phi = rng.standard_normal((p, n))
        sample = core.Sample(y=phi @ theta_true, phi=phi, gamma=random_spd(rng, p))
        new, diag = core.step(state, sample, strat(state, sample).f)
        np.testing.assert_allclose(new.theta - theta_true, diag.m_matrix @ (state.theta - theta_true), atol=1e-10)
        state = new


@settings(max_examples=30)
@given(seeds, st.integers(1, 4), st.integers(1, 2), st.floats(0.3, 1.0))
def test_lyapunov_decrease_lower_bound(seed, n, p, lam):
    traj = _random_run(seed, n, p, 30, lam)
    for state, diag in zip(traj.states, traj.diagnostics):
        assert diag.delta_v_gap_mineig >= -diag.lemma_tolerance(state.info)


@settings(max_examples=30)
@given(seeds, st.integers(1, 4), st.integers(1, 2), st.floats(0.3, 1.0))
def test_m_matrix_inverse_identity(seed, n, p, lam):
    traj = _random_run(seed, n, p, 20, lam)
    for k, diag in enumerate(traj.diagnostics):
        reduced = traj.states[k].info - traj.directives[k].f
        nxt = traj.states[k + 1].info
        np.testing.assert_allclose(diag.m_matrix, np.linalg.solve(nxt, reduced), atol=1e-9)
        np.testing.assert_allclose(np.linalg.inv(diag.m_matrix), np.linalg.solve(reduced, nxt), atol=1e-9)


def test_weighted_phi_gram_matches_gamma_solve():
    traj = _random_run(11, 3, 2, 10, 0.9)
    for s, d in zip(traj.samples, traj.diagnostics):
        np.testing.assert_allclose(d.weighted_phi.T @ d.weighted_phi, s.phi.T @ np.linalg.solve(s.gamma, s.phi), atol=1e-10)


def test_states_are_immutable_and_trajectory_lengths():
    traj = _random_run(12, 2, 1, 7, 0.95)
    assert len(traj) == 7 and len(traj.states) == 8 and traj.final is traj.states[-1]
    with pytest.raises(ValueError):
        traj.final.info[0, 0] = 1.0
    assert linalg.is_spd(traj.final.info)
