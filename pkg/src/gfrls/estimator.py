"""scikit-learn style wrapper around the recursive estimator (scalar measurements)."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import core
from .forgetting import ForgettingStrategy, make_strategy


class GFRLSRegressor(RegressorMixin, BaseEstimator):
    """Online linear regression with a pluggable forgetting strategy.

    Each row of ``X`` is the regressor of one time step and the rows are
    processed in order, so the fitted coefficients track the most recent data
    when the strategy forgets. ``sample_weight`` is the inverse of the per-step
    noise weighting (``Gamma_k = 1 / w_k``).

    Parameters
    ----------
    forgetting : str or ForgettingStrategy
        Registry tag (``"rls"``, ``"exponential"``, ...) or a strategy instance.
    forgetting_params : dict, optional
        Parameters for the registry tag, e.g. ``{"lambda": 0.98}``.
    theta0 : array-like, optional
        Initial estimate; zeros by default.
    p0 : float or array-like
        Initial covariance, a scalar meaning ``p0 * I``.
    keep_trajectory : bool
        Keep the full state history in ``trajectory_``.
    """

    def __init__(self, forgetting="rls", forgetting_params=None, theta0=None, p0=1e3, keep_trajectory=False):
        self.forgetting = forgetting
        self.forgetting_params = forgetting_params
        self.theta0 = theta0
        self.p0 = p0
        self.keep_trajectory = keep_trajectory

    def _make_strategy(self, n):
        if isinstance(self.forgetting, ForgettingStrategy):
            self.forgetting.reset()
            return self.forgetting
        return make_strategy(self.forgetting, self.forgetting_params, n)

    def _initial_state(self, n):
        theta0 = np.zeros(n) if self.theta0 is None else self.theta0
        p0 = np.asarray(self.p0, dtype=float)
        if p0.ndim == 0:
            p0 = float(p0) * np.eye(n)
        return core.init(theta0, p0, 1)

    def _samples(self, X, y, sample_weight):
        if sample_weight is None:
            return [core.Sample(y=[yk], phi=xk[None, :]) for xk, yk in zip(X, y)]
        w = np.asarray(sample_weight, dtype=float)
        if w.shape != (X.shape[0],) or np.any(w <= 0.0):
            raise ValueError("sample_weight must be a positive vector with one entry per row")
        return [core.Sample(y=[yk], phi=xk[None, :], gamma=[[1.0 / wk]]) for xk, yk, wk in zip(X, y, w)]

    def _consume(self, X, y, sample_weight):
        traj = core.propagate(self.state_, self._samples(X, y, sample_weight), self.strategy_)
        self.state_ = traj.final
        if self.keep_trajectory:
            if self.trajectory_ is None:
                self.trajectory_ = traj
            else:
                self.trajectory_.states.extend(traj.states[1:])
                self.trajectory_.directives.extend(traj.directives)
                self.trajectory_.samples.extend(traj.samples)
                self.trajectory_.diagnostics.extend(traj.diagnostics)
        self.coef_ = np.array(self.state_.theta)
        self.info_ = np.array(self.state_.info)
        self.n_steps_ = self.state_.k
        return self

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        self.strategy_ = self._make_strategy(X.shape[1])
        self.state_ = self._initial_state(X.shape[1])
        self.trajectory_ = None
        return self._consume(X, y, sample_weight)

    def partial_fit(self, X, y, sample_weight=None):
        """Continue from the current state; the first call initialises like ``fit``."""
        if not hasattr(self, "state_"):
            return self.fit(X, y, sample_weight)
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self._consume(X, y, sample_weight)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_
