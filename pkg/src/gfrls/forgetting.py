"""Forgetting-matrix strategies for the published RLS forgetting variants.

Each strategy is a callable ``strategy(state, sample) -> ForgettingDirective``
that emits the symmetric forgetting matrix ``F_k`` for the step about to be
taken. Strategies that need history keep it in an explicit ``memory`` dict of
plain Python values, so a run can be replayed from a snapshot; call
:meth:`ForgettingStrategy.reset` before reusing an instance on a new run.

Per-step parameters (``lambda_k``, ``mu_k``, ...) accept a constant, a sequence
indexed by step, or a callable ``k -> value``.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import ConfigError, InvalidParameter, NotPositiveDefinite, UnsupportedDimension


@dataclass(frozen=True)
class ForgettingDirective:
    f: np.ndarray
    declared_proper: bool
    strategy_tag: str


def _schedule(value, name, check=None):
    """Normalise a per-step parameter to ``k -> value``; fixed values are checked eagerly."""
    if callable(value):
        return value
    if isinstance(value, (Sequence, np.ndarray)) and not isinstance(value, str):
        values = [float(v) for v in value]
        if not values:
            raise InvalidParameter(f"{name} schedule is empty")
        if check is not None:
            for v in values:
                check(v, name)

        def lookup(k):
            if k >= len(values):
                raise InvalidParameter(f"{name} schedule has no entry for step {k}")
            return values[k]

        return lookup
    constant = float(value)
    if check is not None:
        check(constant, name)
    return lambda k: constant


def _check_lambda(lam, name="lambda"):
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise InvalidParameter(f"{name} must lie in (0, 1], got {lam}")
    return lam


def _check_mu_open(mu, name="mu"):
    mu = float(mu)
    if not 0.0 < mu < 1.0:
        raise InvalidParameter(f"{name} must lie in (0, 1) for the rescaled form, got {mu}")
    return mu


def _require_scalar_measurement(state, tag):
    if state.p != 1:
        raise UnsupportedDimension(f"{tag} is defined for scalar measurements only (p = 1), got p = {state.p}")


class ForgettingStrategy:
    tag = "abstract"

    def __init__(self):
        self.memory = {}
        self.reset()

    def reset(self):
        self.memory = {}

    def forgetting_matrix(self, state, sample):
        raise NotImplementedError

    def __call__(self, state, sample):
        f, declared = self.forgetting_matrix(state, sample)
        f = linalg.mirror_upper(np.asarray(f, dtype=float))
        return ForgettingDirective(f=f, declared_proper=bool(declared), strategy_tag=self.tag)

    def __repr__(self):
        return f"{type(self).__name__}()"


class PlainRLS(ForgettingStrategy):
    """No forgetting: ``F = 0``."""

    tag = "rls"

    def forgetting_matrix(self, state, sample):
        return np.zeros((state.n, state.n)), True


class ExponentialForgetting(ForgettingStrategy):
    """``F = (1 - lambda) P_k^{-1}``, so the information matrix is scaled by lambda."""

    tag = "exponential"

    def __init__(self, lam):
        self.lam = _check_lambda(lam)
        super().__init__()

    def forgetting_matrix(self, state, sample):
        return (1.0 - self.lam) * state.info, True


class VariableRateForgetting(ForgettingStrategy):
    """``F = (1 - lambda_k) P_k^{-1}`` with a per-step forgetting factor."""

    tag = "variable-rate"

    def __init__(self, lam):
        self.lam = _schedule(lam, "lambda", _check_lambda)
        super().__init__()

    def forgetting_matrix(self, state, sample):
        lam = _check_lambda(self.lam(state.k), "lambda_k")
        return (1.0 - lam) * state.info, True


class DataDependentUpdating(ForgettingStrategy):
    """Data-dependent updating recast as variable-rate forgetting.

    The native recursion ``P^{-1} <- (1 - mu_k) P^{-1} + mu_k phi.T phi`` is run
    on the rescaled covariance ``Pbar_k = mu_{k-1} P_k`` (``mu_{-1} = 1``), which
    is variable-rate forgetting with
    ``lambda_k = (1 - mu_k) mu_{k-1} / mu_k``. The estimator's information
    matrix is therefore ``Pbar_k^{-1}``; :meth:`native_info` maps back.

    ``mu_k = 0`` is allowed by the native algorithm (it freezes the estimate) but
    has no rescaled form, so it is rejected here.
    """

    tag = "data-dependent"

    def __init__(self, mu):
        self.mu = _schedule(mu, "mu", _check_mu_open)
        super().__init__()

    def reset(self):
        self.memory = {"mu_prev": 1.0}

    def forgetting_matrix(self, state, sample):
        mu = _check_mu_open(self.mu(state.k), "mu_k")
        lam = (1.0 - mu) * self.memory["mu_prev"] / mu
        self.memory["mu_prev"] = mu
        # lambda_k > 1 is legal here and makes F negative definite
        return (1.0 - lam) * state.info, lam <= 1.0

    def native_info(self, state):
        """Native ``P_k^{-1}`` from the rescaled ``Pbar_k^{-1}`` held by ``state``.

        Valid right after the step for ``state.k - 1`` was emitted.
        """
        return state.info * self.memory["mu_prev"]


class ExponentialResetting(ForgettingStrategy):
    """``F = (1 - lambda)(P_k^{-1} - R_inf)``; the information matrix relaxes to ``R_inf``.

    Declared proper when the initial information matrix dominates ``R_inf``.
    """

    tag = "exponential-resetting"

    def __init__(self, lam, r_inf):
        self.lam = _check_lambda(lam)
        r_inf = linalg.as_symmetric(np.atleast_2d(r_inf), "r_inf")
        if not linalg.is_psd(r_inf):
            raise InvalidParameter("r_inf must be positive semidefinite")
        self.r_inf = r_inf
        super().__init__()

    def reset(self):
        self.memory = {"initial_dominates": None}

    def forgetting_matrix(self, state, sample):
        if self.r_inf.shape != (state.n, state.n):
            raise InvalidParameter(f"r_inf has shape {self.r_inf.shape}, expected {(state.n, state.n)}")
        if self.memory["initial_dominates"] is None:
            self.memory["initial_dominates"] = linalg.is_psd(state.info - self.r_inf)
        f = (1.0 - self.lam) * (state.info - self.r_inf)
        return f, self.memory["initial_dominates"] or linalg.is_psd(f)


def reset_every(period, offset=0):
    """Resetting criterion that fires at steps ``offset, offset + period, ...`` (after step 0)."""
    period = int(period)
    if period < 1:
        raise InvalidParameter("reset period must be positive")

    def criterion(state, sample):
        return state.k > 0 and (state.k - offset) % period == 0

    return criterion


def reset_when_trace_below(threshold):
    """Resetting criterion that fires when ``trace(P_k)`` drops below ``threshold``."""
    threshold = float(threshold)

    def criterion(state, sample):
        return float(np.trace(state.covariance)) < threshold

    return criterion


def never(state, sample):
    return False


class CovarianceResetting(ForgettingStrategy):
    """Reset ``P_k`` to ``P_inf`` when ``criterion(state, sample)`` fires.

    ``F = P_k^{-1} - P_inf^{-1}`` at firing steps and zero otherwise. Proper at a
    firing step iff ``P_k <= P_inf``, which is checked numerically.
    """

    tag = "covariance-resetting"

    def __init__(self, criterion, p_inf):
        self.criterion = criterion
        self.p_inf = p_inf
        super().__init__()

    def reset(self):
        self.memory = {"fired": []}

    def forgetting_matrix(self, state, sample):
        if not self.criterion(state, sample):
            return np.zeros((state.n, state.n)), True
        p_inf = self.p_inf(state) if callable(self.p_inf) else self.p_inf
        p_inf = np.atleast_2d(np.asarray(p_inf, dtype=float))
        if p_inf.shape != (state.n, state.n):
            raise InvalidParameter(f"p_inf has shape {p_inf.shape}, expected {(state.n, state.n)}")
        self.memory["fired"].append(state.k)
        f = state.info - linalg.spd_inverse(p_inf)
        return f, linalg.is_psd(f)


class DirectionalForgettingIMD(ForgettingStrategy):
    """Directional forgetting by information-matrix decomposition (p = 1).

    Forgets only along the current regressor direction:
    ``F = (1 - lambda) R phi.T phi R / (phi R phi.T)`` with ``R = P_k^{-1}`` when
    ``||phi|| > eps``, else zero.
    """

    tag = "directional-imd"

    def __init__(self, lam, eps):
        self.lam = _check_lambda(lam)
        self.eps = float(eps)
        if not self.eps > 0.0:
            raise InvalidParameter(f"eps must be positive, got {eps}")
        super().__init__()

    def forgetting_matrix(self, state, sample):
        _require_scalar_measurement(state, self.tag)
        phi = sample.phi
        if np.linalg.norm(phi) <= self.eps:
            return np.zeros((state.n, state.n)), True
        r_phi = state.info @ phi.T
        return (1.0 - self.lam) * (r_phi @ r_phi.T) / (phi @ r_phi).item(), True


class VariableDirectionForgetting(ForgettingStrategy):
    """``F = P_k^{-1} - Lambda_k P_k^{-1} Lambda_k`` for a user-supplied SPD ``Lambda_k``.

    ``provider(state, sample)`` returns ``Lambda_k``; a constant matrix is also
    accepted. Well-posedness is automatic; properness is checked numerically.
    """

    tag = "variable-direction"

    def __init__(self, provider):
        self.provider = provider
        super().__init__()

    def forgetting_matrix(self, state, sample):
        lam = self.provider(state, sample) if callable(self.provider) else self.provider
        lam, _ = linalg.cholesky(np.atleast_2d(lam), "Lambda_k")
        if lam.shape != (state.n, state.n):
            raise InvalidParameter(f"Lambda_k has shape {lam.shape}, expected {(state.n, state.n)}")
        f = state.info - lam @ state.info @ lam
        return f, linalg.is_psd(f)


class DirectionalForgettingSlow(ForgettingStrategy):
    """Directional forgetting for slowly varying parameters (p = 1).

    The native algorithm updates ``P_{k+1}^{-1} = P_k^{-1} + beta_k phi_k.T phi_k``
    with ``beta_k = mu - (1 - mu) / (phi_k P_k phi_k.T)`` (or 1 when that
    quadratic form vanishes). In generalized-forgetting form the estimator
    carries ``Pbar_{k+1}^{-1} = P_k^{-1} + phi_k.T phi_k`` and the forgetting
    matrix is ``F_k = (1 - beta_{k-1}) phi_{k-1}.T phi_{k-1}``, so that
    ``Pbar_k^{-1} - F_k`` recovers the native ``P_k^{-1}``. With a noise weight
    ``Gamma_k`` the weighted regressor ``phi_k / sqrt(Gamma_k)`` replaces ``phi_k``.
    """

    tag = "directional-slow"

    def __init__(self, mu):
        self.mu = _check_lambda(mu, "mu")
        super().__init__()

    def reset(self):
        self.memory = {"phi_prev": None, "beta_prev": 0.0}

    def forgetting_matrix(self, state, sample):
        _require_scalar_measurement(state, self.tag)
        phi_prev = self.memory["phi_prev"]
        phi_prev = np.zeros((1, state.n)) if phi_prev is None else np.asarray(phi_prev, dtype=float)
        f = (1.0 - self.memory["beta_prev"]) * (phi_prev.T @ phi_prev)
        native_info = linalg.mirror_upper(state.info - f)
        # weighted regressor, so the rewrite matches the phi.T inv(Gamma) phi information update
        phi = sample.phi / np.sqrt(sample.gamma.item())
        quad = (phi @ linalg.spd_solve(native_info, phi.T, "native information matrix")).item()
        beta = self.mu - (1.0 - self.mu) / quad if quad > 0.0 else 1.0
        self.memory["phi_prev"] = phi.tolist()
        self.memory["beta_prev"] = beta
        return f, True


class MultipleForgetting(ForgettingStrategy):
    """Separate forgetting factors for the two parameters (n = 2, p = 1).

    With ``R = P_k^{-1}``, ``F = [[(1 - l1) R11, R12], [R12, (1 - l2) R22]]`` so
    that ``R - F = diag(l1 R11, l2 R22)``. ``F`` need not be PSD; properness is
    reported numerically.
    """

    tag = "multiple"

    def __init__(self, lam1, lam2):
        self.lam1 = _schedule(lam1, "lambda1", _check_lambda)
        self.lam2 = _schedule(lam2, "lambda2", _check_lambda)
        super().__init__()

    def forgetting_matrix(self, state, sample):
        if state.n != 2 or state.p != 1:
            raise UnsupportedDimension(f"{self.tag} requires n = 2 and p = 1, got n = {state.n}, p = {state.p}")
        l1 = _check_lambda(self.lam1(state.k), "lambda1_k")
        l2 = _check_lambda(self.lam2(state.k), "lambda2_k")
        r = state.info
        f = np.array([[(1.0 - l1) * r[0, 0], r[0, 1]], [r[0, 1], (1.0 - l2) * r[1, 1]]])
        return f, linalg.is_psd(f)


def _matrix_param(value, n, name):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    a = np.atleast_2d(a)
    if a.shape != (n, n):
        raise ConfigError(f"{name} has shape {a.shape}, expected {(n, n)}")
    return a


def _criterion_from_config(spec):
    if spec is None:
        return never
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("criterion must be a table with a 'kind' key")
    kind = spec["kind"]
    if kind == "never":
        return never
    if kind == "period":
        return reset_every(spec["period"], spec.get("offset", 0))
    if kind == "trace":
        return reset_when_trace_below(spec["threshold"])
    raise ConfigError(f"unknown resetting criterion {kind!r}; valid kinds: never, period, trace")


def _required(params, key, tag):
    if key not in params:
        raise ConfigError(f"strategy {tag!r} requires parameter {key!r}")
    return params[key]


def _build(tag, params, n):
    if tag == "rls":
        return PlainRLS()
    if tag == "exponential":
        return ExponentialForgetting(_required(params, "lambda", tag))
    if tag == "variable-rate":
        return VariableRateForgetting(_required(params, "lambda", tag))
    if tag == "data-dependent":
        return DataDependentUpdating(_required(params, "mu", tag))
    if tag == "exponential-resetting":
        return ExponentialResetting(_required(params, "lambda", tag), _matrix_param(params.get("r_inf", 0.0), n, "r_inf"))
    if tag == "covariance-resetting":
        return CovarianceResetting(
            _criterion_from_config(params.get("criterion")),
            _matrix_param(_required(params, "p_inf", tag), n, "p_inf"),
        )
    if tag == "directional-imd":
        return DirectionalForgettingIMD(_required(params, "lambda", tag), params.get("eps", 1e-8))
    if tag == "variable-direction":
        return VariableDirectionForgetting(_matrix_param(_required(params, "lambda_matrix", tag), n, "lambda_matrix"))
    if tag == "directional-slow":
        return DirectionalForgettingSlow(_required(params, "mu", tag))
    if tag == "multiple":
        return MultipleForgetting(_required(params, "lambda1", tag), _required(params, "lambda2", tag))
    raise AssertionError(tag)


STRATEGY_TAGS = (
    "rls",
    "exponential",
    "variable-rate",
    "data-dependent",
    "exponential-resetting",
    "covariance-resetting",
    "directional-imd",
    "variable-direction",
    "directional-slow",
    "multiple",
)


def make_strategy(tag, params=None, n=None):
    """Build a strategy from a registry tag and a parameter mapping.

    Matrix-valued parameters (``r_inf``, ``p_inf``, ``lambda_matrix``) may be
    given as a scalar multiple of the identity, which needs ``n``.
    """
    if tag not in STRATEGY_TAGS:
        raise ConfigError(f"unknown strategy {tag!r}; valid tags: {', '.join(STRATEGY_TAGS)}")
    params = dict(params or {})
    try:
        return _build(tag, params, n if n is not None else 1)
    except (InvalidParameter, NotPositiveDefinite) as exc:
        raise ConfigError(f"strategy {tag!r}: {exc}") from exc


__all__ = [
    "ForgettingDirective",
    "ForgettingStrategy",
    "PlainRLS",
    "ExponentialForgetting",
    "VariableRateForgetting",
    "DataDependentUpdating",
    "ExponentialResetting",
    "CovarianceResetting",
    "DirectionalForgettingIMD",
    "VariableDirectionForgetting",
    "DirectionalForgettingSlow",
    "MultipleForgetting",
    "STRATEGY_TAGS",
    "make_strategy",
    "reset_every",
    "reset_when_trace_below",
    "never",
]

