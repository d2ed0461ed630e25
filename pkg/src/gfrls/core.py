"""The generalized-forgetting RLS state machine and its batch least-squares oracle.

The canonical estimator state is the information matrix ``P_k^{-1}``. One
step with forgetting matrix ``F_k`` computes::

    P_{k+1}^{-1} = P_k^{-1} - F_k + phi_k.T Gamma_k^{-1} phi_k
    theta_{k+1}  = theta_k + P_{k+1} phi_k.T Gamma_k^{-1} (y_k - phi_k theta_k)

and requires ``P_k^{-1} - F_k`` to be positive definite, which is exactly the
condition for the accumulated least-squares cost to have a unique minimizer.
The covariance ``P_{k+1}`` is never stored; it enters only through SPD solves
against the new information matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import DimensionMismatch, IllPosedForgetting, NotPositiveDefinite

LEMMA_RTOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    """One time step of data: measurement ``y`` (p,), regressor ``phi`` (p, n),
    weighting ``gamma`` (p, p, SPD). ``gamma=None`` means the identity."""

    y: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray = None

    def __post_init__(self):
        phi = linalg.as_rect(np.atleast_2d(self.phi), "phi")
        p = phi.shape[0]
        y = linalg.as_vector(self.y, p, "y")
        if self.gamma is None:
            gamma = np.eye(p)
        else:
            gamma = linalg.as_symmetric(np.atleast_2d(self.gamma), "gamma")
            if gamma.shape != (p, p):
                raise DimensionMismatch(f"gamma has shape {gamma.shape}, expected {(p, p)}")
        object.__setattr__(self, "phi", _frozen(phi))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "gamma", _frozen(gamma))

    @property
    def p(self):
        return self.phi.shape[0]

    @property
    def n(self):
        return self.phi.shape[1]


@dataclass(frozen=True)
class EstimatorState:
    """Parameter estimate ``theta`` and information matrix ``info`` at step ``k``."""

    k: int
    theta: np.ndarray
    info: np.ndarray
    p: int

    @property
    def n(self):
        return self.theta.shape[0]

    @property
    def covariance(self):
        return linalg.spd_inverse(self.info)


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step quantities used by the stability analysis.

    ``m_matrix`` is the error-propagation matrix ``I - P_{k+1} phi.T Gamma^{-1} phi``;
    ``delta_v`` is ``P_k^{-1} - M.T P_{k+1}^{-1} M``; ``delta_v_gap_mineig`` is the
    smallest eigenvalue of ``delta_v`` minus its guaranteed lower bound
    ``F + phibar.T phibar / (1 + lmax(phibar phibar.T) / lmin(P_k^{-1} - F))``,
    which must be nonnegative up to rounding.
    """

    m_matrix: np.ndarray
    well_posed_margin: float
    proper: bool
    delta_v: np.ndarray
    delta_v_gap_mineig: float
    weighted_phi: np.ndarray

    def lemma_tolerance(self, info):
        return LEMMA_RTOL * (1.0 + abs(linalg.max_eig(info)))


def init(theta0, p0, p):
    """Initial state with ``info = inv(p0)``."""
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    theta0 = linalg.as_vector(theta0, p0.shape[0], "theta0")
    if int(p) < 1:
        raise DimensionMismatch("measurement dimension p must be positive")
    info = linalg.spd_inverse(p0)
    return EstimatorState(k=0, theta=_frozen(theta0), info=_frozen(info), p=int(p))


def init_from_info(theta0, info0, p):
    """Initial state given the information matrix ``P_0^{-1}`` directly."""
    info0, _ = linalg.cholesky(np.atleast_2d(info0), "info0")
    theta0 = linalg.as_vector(theta0, info0.shape[0], "theta0")
    return EstimatorState(k=0, theta=_frozen(theta0), info=_frozen(info0), p=int(p))


def _check_sample(state, sample):
    if sample.phi.shape != (state.p, state.n):
        raise DimensionMismatch(
            f"regressor has shape {sample.phi.shape}, estimator expects {(state.p, state.n)}"
        )


def step(state, sample, f):
    """Advance ``state`` by one sample with forgetting matrix ``f``.

    Returns ``(new_state, StepDiagnostics)``. Raises :class:`IllPosedForgetting`
    if ``state.info - f`` is not positive definite.
    """
    _check_sample(state, sample)
    f = linalg.as_symmetric(np.atleast_2d(f), "forgetting matrix")
    if f.shape != (state.n, state.n):
        raise DimensionMismatch(f"forgetting matrix has shape {f.shape}, expected {(state.n, state.n)}")
    reduced = linalg.mirror_upper(state.info - f)
    try:
        linalg.cholesky(reduced, "info - F")
    except NotPositiveDefinite as exc:
        raise IllPosedForgetting(
            f"step {state.k}: information matrix minus forgetting matrix is not positive definite"
        ) from exc

    phi, y = sample.phi, sample.y
    gamma_inv_phi = linalg.spd_solve(sample.gamma, phi, "gamma")
    gram = linalg.mirror_upper(phi.T @ gamma_inv_phi)
    info_new = linalg.mirror_upper(reduced + gram)
    innovation = y - phi @ state.theta
    theta_new = state.theta + linalg.spd_solve(info_new, gamma_inv_phi.T @ innovation, "new info")

    m = np.eye(state.n) - linalg.spd_solve(info_new, gram, "new info")
    delta_v = linalg.mirror_upper(state.info - m.T @ info_new @ m)
    weighted_phi = linalg.spd_inverse_sqrt(sample.gamma) @ phi
    margin = linalg.min_eig(reduced)
    phibar_gram = weighted_phi.T @ weighted_phi
    lmax_phibar = linalg.max_eig(weighted_phi @ weighted_phi.T)
    bound = f + phibar_gram / (1.0 + lmax_phibar / margin)
    diag = StepDiagnostics(
        m_matrix=_frozen(m),
        well_posed_margin=margin,
        proper=linalg.is_psd(f),
        delta_v=_frozen(delta_v),
        delta_v_gap_mineig=linalg.min_eig(delta_v - bound),
        weighted_phi=_frozen(weighted_phi),
    )
    new_state = EstimatorState(k=state.k + 1, theta=_frozen(theta_new), info=_frozen(info_new), p=state.p)
    return new_state, diag


@dataclass(frozen=True)
class BatchAccumulator:
    """Quadratic-cost coefficients ``H_k`` and ``b_k`` of the accumulated cost.

    The cost is ``x.T H x + 2 b.T x + c``; the constant ``c`` is not tracked
    because it does not move the minimizer.
    """

    h: np.ndarray
    b: np.ndarray
    theta_history: tuple = field(default_factory=tuple)


def new_accumulator(theta0, p0):
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    theta0 = linalg.as_vector(theta0, p0.shape[0], "theta0")
    p0_inv = linalg.spd_inverse(p0)
    return BatchAccumulator(h=_frozen(p0_inv), b=_frozen(-p0_inv @ theta0), theta_history=(_frozen(theta0),))


def batch_accumulate(acc, sample, f, theta_i):
    """Add one step's loss and forgetting terms to the cost coefficients.

    ``theta_i`` is the recursive estimate at the step the forgetting matrix was
    applied; the forgetting term is centred on it.
    """
    n = acc.h.shape[0]
    if sample.n != n:
        raise DimensionMismatch(f"regressor has {sample.n} columns, accumulator expects {n}")
    f = linalg.as_symmetric(np.atleast_2d(f), "forgetting matrix")
    if f.shape != (n, n):
        raise DimensionMismatch(f"forgetting matrix has shape {f.shape}, expected {(n, n)}")
    theta_i = linalg.as_vector(theta_i, n, "theta_i")
    # LU solve, deliberately a different route from the recursive update
    gamma_inv_phi = np.linalg.solve(sample.gamma, sample.phi)
    gamma_inv_y = np.linalg.solve(sample.gamma, sample.y)
    h = acc.h - f + sample.phi.T @ gamma_inv_phi
    b = acc.b - sample.phi.T @ gamma_inv_y + f @ theta_i
    return BatchAccumulator(h=_frozen(h), b=_frozen(b), theta_history=acc.theta_history + (_frozen(theta_i),))


def batch_minimizer(acc):
    """Global minimizer ``-inv(H) b`` of the accumulated cost."""
    return linalg.quadratic_minimizer(linalg.mirror_upper(acc.h), acc.b)


@dataclass
class Trajectory:
    """States ``0..K``, with the directive, sample and diagnostics of steps ``0..K-1``."""

    states: list
    directives: list
    samples: list
    diagnostics: list

    def __len__(self):
        return len(self.samples)

    @property
    def final(self):
        return self.states[-1]


def propagate(state, samples, strategy):
    """Run ``strategy`` (callable ``(state, sample) -> directive``) over ``samples``."""
    traj = Trajectory(states=[state], directives=[], samples=[], diagnostics=[])
    for sample in samples:
        directive = strategy(state, sample)
        state, diag = step(state, sample, directive.f)
        traj.states.append(state)
        traj.directives.append(directive)
        traj.samples.append(sample)
        traj.diagnostics.append(diag)
    return traj
