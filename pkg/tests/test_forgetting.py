import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfrls import core, linalg
from gfrls.exceptions import ConfigError, InvalidParameter, NotPositiveDefinite, UnsupportedDimension
from gfrls.forgetting import (
    STRATEGY_TAGS,
    CovarianceResetting,
    DataDependentUpdating,
    DirectionalForgettingIMD,
    DirectionalForgettingSlow,
    ExponentialForgetting,
    ExponentialResetting,
    MultipleForgetting,
    PlainRLS,
    VariableDirectionForgetting,
    VariableRateForgetting,
    make_strategy,
    never,
    reset_every,
    reset_when_trace_below,
)
from oracles import (
    ddu_native,
    multiple_forgetting_gain_form,
    random_samples,
    random_spd,
    rls_covariance_form,
    slow_directional_native,
)

seeds = st.integers(0, 2**32 - 1)


def to_samples(raw):
    return [core.Sample(y=y, phi=phi, gamma=g) for y, phi, g in raw]


def thetas(theta0, p0, raw, strategy, p=None):
    p = raw[0][1].shape[0] if p is None else p
    traj = core.propagate(core.init(theta0, p0, p), to_samples(raw), strategy)
    return np.array([s.theta for s in traj.states]), traj


def scalar_state(info=1.0, theta=0.0):
    return core.init([theta], [[1.0 / info]], 1)


# --- plain RLS -------------------------------------------------------------


def test_plain_rls_zero_matrix_and_covariance_form():
    rng = np.random.default_rng(0)
    raw = random_samples(rng, 3, 2, 100, weighted=True)
    d = PlainRLS()(core.init(np.zeros(3), np.eye(3), 2), to_samples(raw)[0])
    assert np.array_equal(d.f, np.zeros((3, 3))) and d.declared_proper and d.strategy_tag == "rls"
    got, traj = thetas(np.zeros(3), np.eye(3), raw, PlainRLS())
    np.testing.assert_allclose(got, rls_covariance_form(np.zeros(3), np.eye(3), raw), rtol=1e-10, atol=1e-12)
    for a, b in zip(traj.states, traj.states[1:]):
        assert linalg.is_psd(b.info - a.info)


# --- exponential / variable-rate ------------------------------------------


def test_exponential_forgetting_hand_value_and_domain():
    state = scalar_state()
    new, _ = core.step(state, core.Sample(y=[1.0], phi=[[1.0]]), ExponentialForgetting(0.5)(state, None).f)
    assert new.info[0, 0] == 1.5
    for bad in (0.0, -0.1, 1.2, float("nan")):
        with pytest.raises(InvalidParameter):
            ExponentialForgetting(bad)


@settings(max_examples=20)
@given(seeds, st.floats(0.5, 1.0))
def test_exponential_forgetting_matches_covariance_form(seed, lam):
    rng = np.random.default_rng(seed)
    raw = random_samples(rng, 3, 2, 100, weighted=True)
    got, _ = thetas(np.zeros(3), np.eye(3), raw, ExponentialForgetting(lam))
    want = rls_covariance_form(np.zeros(3), np.eye(3), raw, [lam] * 100)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_variable_rate_matches_covariance_form():
    rng = np.random.default_rng(1)
    raw = random_samples(rng, 2, 1, 100)
    lams = rng.uniform(0.6, 1.0, 100)
    got, _ = thetas(np.zeros(2), np.eye(2), raw, VariableRateForgetting(lams))
    np.testing.assert_allclose(got, rls_covariance_form(np.zeros(2), np.eye(2), raw, lams), rtol=1e-10, atol=1e-12)


def test_variable_rate_schedule_forms_and_errors():
    state = scalar_state(2.0)
    assert VariableRateForgetting(lambda k: 0.5)(state, None).f[0, 0] == pytest.approx(1.0)
    with pytest.raises(InvalidParameter):
        VariableRateForgetting([0.9, 1.5])
    with pytest.raises(InvalidParameter):
        VariableRateForgetting([])
    strat = VariableRateForgetting([0.9])
    strat(state, None)
    with pytest.raises(InvalidParameter):
        strat(core.EstimatorState(k=1, theta=state.theta, info=state.info, p=1), None)
    with pytest.raises(InvalidParameter):
        VariableRateForgetting(lambda k: 2.0)(state, None)


# --- data-dependent updating ----------------------------------------------


def test_ddu_first_mapped_lambda_is_one():
    strat = DataDependentUpdating(0.5)
    d = strat(scalar_state(3.0), None)
    assert d.f[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert strat.memory["mu_prev"] == 0.5


def test_ddu_rejects_zero_and_one():
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidParameter):
            DataDependentUpdating(bad)


@settings(max_examples=20)
@given(seeds)
def test_ddu_matches_native_recursion_and_rescaling(seed):
    rng = np.random.default_rng(seed)
    raw = random_samples(rng, 1, 1, 100)
    mus = rng.uniform(0.05, 0.95, 100)
    strat = DataDependentUpdating(mus)
    state = core.init([0.0], [[1.0]], 1)
    native_theta = ddu_native([0.0], np.eye(1), raw, mus)
    R = np.eye(1)
    for k, s in enumerate(to_samples(raw)):
        state, _ = core.step(state, s, strat(state, s).f)
        R = (1 - mus[k]) * R + mus[k] * s.phi.T @ s.phi
        np.testing.assert_allclose(state.theta, native_theta[k + 1], rtol=1e-10, atol=1e-12)
        # Pbar_k = mu_{k-1} P_k
        np.testing.assert_allclose(strat.native_info(state), R, rtol=1e-10)


# --- exponential resetting -------------------------------------------------


def test_exponential_resetting_with_zero_floor_is_exponential_forgetting():
    rng = np.random.default_rng(2)
    raw = random_samples(rng, 3, 1, 100)
    a, _ = thetas(np.zeros(3), np.eye(3), raw, ExponentialResetting(0.8, np.zeros((3, 3))))
    b, _ = thetas(np.zeros(3), np.eye(3), raw, ExponentialForgetting(0.8))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_exponential_resetting_relaxes_geometrically():
    r_inf = np.diag([0.5, 2.0])
    strat = ExponentialResetting(0.7, r_inf)
    state = core.init(np.zeros(2), np.diag([0.1, 0.2]), 1)
    zero = core.Sample(y=[0.0], phi=[[0.0, 0.0]])
    prev = np.linalg.norm(state.info - r_inf)
    for _ in range(40):
        state, _ = core.step(state, zero, strat(state, zero).f)
        cur = np.linalg.norm(state.info - r_inf)
        assert cur == pytest.approx(0.7 * prev, rel=1e-9)
        prev = cur


@settings(max_examples=20)
@given(seeds)
def test_exponential_resetting_proper_when_initial_dominates(seed):
    rng = np.random.default_rng(seed)
    p0 = random_spd(rng, 3)
    r_inf = 0.5 * np.linalg.inv(p0)
    _, traj = thetas(np.zeros(3), p0, random_samples(rng, 3, 1, 100), ExponentialResetting(0.9, r_inf))
    for d in traj.directives:
        assert d.declared_proper and linalg.is_psd(d.f)


def test_exponential_resetting_validation():
    with pytest.raises(InvalidParameter):
        ExponentialResetting(0.9, -np.eye(2))
    with pytest.raises(InvalidParameter):
        ExponentialResetting(0.9, np.eye(2))(core.init(np.zeros(3), np.eye(3), 1), None)


# --- covariance resetting --------------------------------------------------


def test_covariance_resetting_never_firing_is_plain_rls():
    rng = np.random.default_rng(3)
    raw = random_samples(rng, 2, 2, 100)
    a, _ = thetas(np.zeros(2), np.eye(2), raw, CovarianceResetting(never, np.eye(2)))
    b, _ = thetas(np.zeros(2), np.eye(2), raw, PlainRLS())
    np.testing.assert_array_equal(a, b)


def test_covariance_resetting_firing_step_sets_information():
    rng = np.random.default_rng(4)
    p_inf = np.diag([5.0, 3.0])
    strat = CovarianceResetting(reset_every(3), p_inf)
    state = core.init(np.zeros(2), np.eye(2), 1)
    for s in to_samples(random_samples(rng, 2, 1, 10)):
        d = strat(state, s)
        new, _ = core.step(state, s, d.f)
        if state.k in (3, 6, 9):
            np.testing.assert_allclose(new.info, np.linalg.inv(p_inf) + s.phi.T @ s.phi, rtol=1e-12)
            assert d.declared_proper
        else:
            assert not d.f.any()
        state = new
    assert strat.memory["fired"] == [3, 6, 9]


def test_covariance_resetting_improper_when_reset_target_is_small():
    strat = CovarianceResetting(lambda st, s: True, 0.01 * np.eye(2))
    d = strat(core.init(np.zeros(2), np.eye(2), 1), None)
    assert not d.declared_proper and not linalg.is_psd(d.f)


def test_trace_criterion():
    crit = reset_when_trace_below(1.0)
    assert crit(core.init(np.zeros(2), 0.4 * np.eye(2), 1), None)
    assert not crit(core.init(np.zeros(2), np.eye(2), 1), None)
    with pytest.raises(InvalidParameter):
        reset_every(0)


def test_covariance_resetting_rejects_bad_target():
    with pytest.raises(NotPositiveDefinite):
        CovarianceResetting(lambda st, s: True, -np.eye(1))(scalar_state(), None)


# --- directional forgetting (decomposition) --------------------------------


def test_imd_small_regressor_and_unit_lambda_give_zero():
    state = core.init(np.zeros(2), np.eye(2), 1)
    strat = DirectionalForgettingIMD(0.5, 1e-3)
    assert not strat(state, core.Sample(y=[0.0], phi=[[1e-4, 0.0]])).f.any()
    d = DirectionalForgettingIMD(1.0, 1e-3)(state, core.Sample(y=[0.0], phi=[[1.0, 2.0]]))
    np.testing.assert_allclose(d.f, 0.0, atol=1e-15)


def test_imd_scalar_is_exponential_forgetting():
    state = scalar_state(3.0)
    d = DirectionalForgettingIMD(0.6, 1e-8)(state, core.Sample(y=[0.0], phi=[[2.0]]))
    assert d.f[0, 0] == pytest.approx(0.4 * 3.0, rel=1e-14)


def test_imd_requires_scalar_measurement_and_is_proper():
    state = core.init(np.zeros(2), np.eye(2), 2)
    with pytest.raises(UnsupportedDimension):
        DirectionalForgettingIMD(0.5, 1e-8)(state, core.Sample(y=[0.0, 0.0], phi=np.eye(2)))
    rng = np.random.default_rng(5)
    _, traj = thetas(np.zeros(3), np.eye(3), random_samples(rng, 3, 1, 100), DirectionalForgettingIMD(0.7, 1e-8))
    assert all(d.declared_proper and linalg.is_psd(d.f) for d in traj.directives)


# --- variable-direction forgetting -----------------------------------------


def test_variable_direction_reductions():
    rng = np.random.default_rng(6)
    raw = random_samples(rng, 3, 1, 100)
    a, _ = thetas(np.zeros(3), np.eye(3), raw, VariableDirectionForgetting(np.eye(3)))
    b, _ = thetas(np.zeros(3), np.eye(3), raw, PlainRLS())
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    a, _ = thetas(np.zeros(3), np.eye(3), raw, VariableDirectionForgetting(np.sqrt(0.8) * np.eye(3)))
    b, _ = thetas(np.zeros(3), np.eye(3), raw, ExponentialForgetting(0.8))
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_variable_direction_random_lambda_well_posed():
    rng = np.random.default_rng(7)

    def provider(state, sample):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        return q @ np.diag(rng.uniform(0.8, 1.0, 3)) @ q.T

    _, traj = thetas(np.zeros(3), np.eye(3), random_samples(rng, 3, 1, 100), VariableDirectionForgetting(provider))
    for state, d in zip(traj.states, traj.directives):
        assert linalg.is_spd(state.info - d.f)


def test_variable_direction_rejects_indefinite_lambda():
    with pytest.raises(NotPositiveDefinite):
        VariableDirectionForgetting(-np.eye(1))(scalar_state(), None)


# --- slowly-varying directional forgetting ---------------------------------


def test_slow_unit_mu_is_plain_rls():
    rng = np.random.default_rng(8)
    raw = random_samples(rng, 2, 1, 100)
    a, _ = thetas(np.zeros(2), np.eye(2), raw, DirectionalForgettingSlow(1.0))
    b, _ = thetas(np.zeros(2), np.eye(2), raw, PlainRLS())
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_slow_zero_excitation_branch():
    strat = DirectionalForgettingSlow(0.5)
    state = core.init(np.zeros(2), np.eye(2), 1)
    strat(state, core.Sample(y=[0.0], phi=[[0.0, 0.0]]))
    assert strat.memory["beta_prev"] == 1.0


@settings(max_examples=20)
@given(seeds, st.floats(0.1, 1.0))
def test_slow_matches_native_recursion(seed, mu):
    rng = np.random.default_rng(seed)
    raw = random_samples(rng, 3, 1, 100)
    got, traj = thetas(np.zeros(3), np.eye(3), raw, DirectionalForgettingSlow(mu))
    np.testing.assert_allclose(got, slow_directional_native(np.zeros(3), np.eye(3), raw, mu), rtol=1e-10, atol=1e-10)
    assert all(d.declared_proper and linalg.is_psd(d.f) for d in traj.directives)


def test_slow_requires_scalar_measurement():
    with pytest.raises(UnsupportedDimension):
        DirectionalForgettingSlow(0.5)(core.init(np.zeros(2), np.eye(2), 2), core.Sample(y=[0.0, 0.0], phi=np.eye(2)))


# --- multiple forgetting ---------------------------------------------------


@settings(max_examples=20)
@given(seeds)
def test_multiple_forgetting_matches_gain_form(seed):
    rng = np.random.default_rng(seed)
    raw = random_samples(rng, 2, 1, 100)
    l1 = rng.uniform(0.6, 1.0, 100)
    l2 = rng.uniform(0.6, 1.0, 100)
    p0 = random_spd(rng, 2)
    info0 = np.linalg.inv(p0)
    got, _ = thetas(np.zeros(2), p0, raw, MultipleForgetting(l1, l2))
    want = multiple_forgetting_gain_form(np.zeros(2), info0[0, 0], info0[1, 1], raw, l1, l2)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_multiple_forgetting_diagonal_is_exponential():
    state = core.init(np.zeros(2), np.diag([0.5, 0.25]), 1)
    d = MultipleForgetting(0.7, 0.7)(state, None)
    np.testing.assert_allclose(d.f, 0.3 * state.info)


def test_multiple_forgetting_unit_lambdas_keep_well_posed():
    rng = np.random.default_rng(9)
    _, traj = thetas(np.zeros(2), random_spd(rng, 2), random_samples(rng, 2, 1, 50), MultipleForgetting(1.0, 1.0))
    for state, d in zip(traj.states, traj.directives):
        np.testing.assert_allclose(np.diag(d.f), 0.0, atol=1e-14)
        assert linalg.is_spd(state.info - d.f)


def test_multiple_forgetting_dimension_guard():
    with pytest.raises(UnsupportedDimension):
        MultipleForgetting(0.9, 0.9)(core.init(np.zeros(3), np.eye(3), 1), None)


# --- registry and cross-cutting --------------------------------------------


def test_registry_builds_every_tag():
    params = {
        "rls": {},
        "exponential": {"lambda": 0.9},
        "variable-rate": {"lambda": [0.9, 0.95]},
        "data-dependent": {"mu": 0.5},
        "exponential-resetting": {"lambda": 0.9, "r_inf": 0.1},
        "covariance-resetting": {"p_inf": 1.0, "criterion": {"kind": "period", "period": 10}},
        "directional-imd": {"lambda": 0.9},
        "variable-direction": {"lambda_matrix": 0.95},
        "directional-slow": {"mu": 0.9},
        "multiple": {"lambda1": 0.9, "lambda2": 0.8},
    }
    assert set(params) == set(STRATEGY_TAGS)
    for tag, p in params.items():
        assert make_strategy(tag, p, n=2).tag == tag


def test_registry_errors_name_valid_tags():
    with pytest.raises(ConfigError, match="exponential"):
        make_strategy("bogus", {})
    with pytest.raises(ConfigError):
        make_strategy("exponential", {"lambda": 1.5})
    with pytest.raises(ConfigError):
        make_strategy("exponential", {})
    with pytest.raises(ConfigError):
        make_strategy("covariance-resetting", {"p_inf": 1.0, "criterion": {"kind": "sometimes"}})


def test_declared_proper_implies_psd_across_strategies():
    rng = np.random.default_rng(10)
    raw = random_samples(rng, 2, 1, 100)
    strategies = [
        PlainRLS(),
        ExponentialForgetting(0.9),
        VariableRateForgetting(rng.uniform(0.7, 1.0, 100)),
        DataDependentUpdating(rng.uniform(0.2, 0.8, 100)),
        ExponentialResetting(0.9, 0.1 * np.eye(2)),
        CovarianceResetting(reset_every(10), np.eye(2)),
        DirectionalForgettingIMD(0.8, 1e-8),
        VariableDirectionForgetting(np.diag([0.9, 0.95])),
        DirectionalForgettingSlow(0.9),
        MultipleForgetting(0.9, 0.8),
    ]
    for strat in strategies:
        _, traj = thetas(np.zeros(2), np.eye(2), raw, strat)
        for state, d in zip(traj.states, traj.directives):
            assert linalg.is_spd(state.info - d.f)
            if d.declared_proper:
                assert linalg.is_psd(d.f)


def test_reset_makes_strategy_reusable():
    rng = np.random.default_rng(11)
    raw = random_samples(rng, 2, 1, 30)
    strat = DirectionalForgettingSlow(0.8)
    a, _ = thetas(np.zeros(2), np.eye(2), raw, strat)
    strat.reset()
    b, _ = thetas(np.zeros(2), np.eye(2), raw, strat)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=20)
@given(seeds, st.floats(0.1, 1.0))
def test_slow_weighted_equals_prescaled_unweighted(seed, mu):
    rng = np.random.default_rng(seed)
    raw = random_samples(rng, 3, 1, 60, weighted=True)
    scaled = [(y / np.sqrt(g[0, 0]), phi / np.sqrt(g[0, 0]), np.eye(1)) for y, phi, g in raw]
    got, _ = thetas(np.zeros(3), np.eye(3), raw, DirectionalForgettingSlow(mu))
    want, _ = thetas(np.zeros(3), np.eye(3), scaled, DirectionalForgettingSlow(mu))
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)
