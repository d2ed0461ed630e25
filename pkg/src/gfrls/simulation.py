"""Synthetic identification scenarios and instrumented estimator runs.

Data model: ``theta_true_{k+1} = theta_true_k + dtheta_k`` and
``y_k = (phi_k + dphi_k) theta_true_k + dy_k``. Every noise draw is uniform on
a ball (Frobenius ball for ``dphi_k``), so the drift, measurement-noise and
regressor-noise bounds hold with probability one.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import core, linalg
from .excitation import smallest_window
from .exceptions import InsufficientData, InvalidParameter
from .guarantees import (
    NoiseProfile,
    StabilityTier,
    classify_stability,
    compute_bound,
    profile_conditions,
)

REGRESSOR_KINDS = ("sinusoidal-pe", "random-pe", "constant", "zero", "custom-trace")
GAMMA_KINDS = ("identity", "diagonal-schedule")
GOLDEN = 0.6180339887498949


@dataclass
class ScenarioSpec:
    n: int
    p: int
    horizon: int
    theta_true_0: np.ndarray
    walk_bound: float = 0.0
    meas_noise_bound: float = 0.0
    reg_noise_bound: float = 0.0
    regressor_kind: str = "sinusoidal-pe"
    gamma_kind: str = "identity"
    seed: int = 0
    theta_max: float | None = None
    trace: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.n, self.p, self.horizon, self.seed = int(self.n), int(self.p), int(self.horizon), int(self.seed)
        if self.n < 1 or self.p < 1:
            raise InvalidParameter("n and p must be positive")
        if self.horizon < 1:
            raise InvalidParameter("horizon must be at least 1")
        self.theta_true_0 = linalg.as_vector(self.theta_true_0, self.n, "theta_true_0")
        for name in ("walk_bound", "meas_noise_bound", "reg_noise_bound"):
            value = float(getattr(self, name))
            if not value >= 0.0:
                raise InvalidParameter(f"{name} must be nonnegative, got {value}")
            setattr(self, name, value)
        if self.regressor_kind not in REGRESSOR_KINDS:
            raise InvalidParameter(f"unknown regressor kind {self.regressor_kind!r}; valid: {', '.join(REGRESSOR_KINDS)}")
        if self.gamma_kind not in GAMMA_KINDS:
            raise InvalidParameter(f"unknown gamma kind {self.gamma_kind!r}; valid: {', '.join(GAMMA_KINDS)}")
        if self.theta_max is not None:
            self.theta_max = float(self.theta_max)
            if np.linalg.norm(self.theta_true_0) > self.theta_max:
                raise InvalidParameter("theta_true_0 lies outside the theta_max ball")
        if self.regressor_kind == "custom-trace":
            if not self.trace or len(self.trace) < self.horizon:
                raise InvalidParameter("custom-trace scenarios need a trace with at least `horizon` samples")


@dataclass(frozen=True)
class GeneratedStep:
    sample: core.Sample
    theta_true: np.ndarray
    delta_theta: np.ndarray
    delta_y: np.ndarray
    delta_phi: np.ndarray


def uniform_ball(rng, radius, shape):
    """One draw uniform on the (Frobenius) ball of ``radius`` in ``R^shape``."""
    size = int(np.prod(shape))
    if radius == 0.0:
        return np.zeros(shape)
    direction = rng.standard_normal(size)
    direction /= np.linalg.norm(direction)
    return (radius * rng.uniform() ** (1.0 / size) * direction).reshape(shape)


def sinusoidal_regressor(k, n, p):
    """Unit-amplitude sinusoids with incommensurate frequencies, one per column;
    rows differ by a quarter-period phase shift."""
    omegas = 2.0 * np.pi * np.mod(GOLDEN * np.arange(1, n + 1), 1.0)
    phases = 0.5 * np.pi * np.arange(p)
    return np.sin(omegas[None, :] * k + phases[:, None])


def _gamma(kind, k, p):
    if kind == "identity":
        return np.eye(p)
    return np.diag(1.0 + 0.5 * np.sin(0.05 * k + np.arange(p)))


def generate(spec):
    """Deterministic list of :class:`GeneratedStep` for ``spec`` (one per step)."""
    rng_phi, rng_theta, rng_y, rng_dphi = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(4))
    theta = spec.theta_true_0.copy()
    steps = []
    for k in range(spec.horizon):
        if spec.regressor_kind == "sinusoidal-pe":
            phi = sinusoidal_regressor(k, spec.n, spec.p)
        elif spec.regressor_kind == "random-pe":
            phi = rng_phi.uniform(-1.0, 1.0, (spec.p, spec.n))
        elif spec.regressor_kind == "constant":
            phi = np.ones((spec.p, spec.n))
        elif spec.regressor_kind == "zero":
            phi = np.zeros((spec.p, spec.n))
        else:
            phi = np.asarray(spec.trace[k].phi, dtype=float)
        if spec.regressor_kind == "custom-trace":
            gamma = np.asarray(spec.trace[k].gamma, dtype=float)
        else:
            gamma = _gamma(spec.gamma_kind, k, spec.p)
        dphi = uniform_ball(rng_dphi, spec.reg_noise_bound, (spec.p, spec.n))
        dy = uniform_ball(rng_y, spec.meas_noise_bound, (spec.p,))
        y = (phi + dphi) @ theta + dy
        nxt = theta + uniform_ball(rng_theta, spec.walk_bound, (spec.n,))
        if spec.theta_max is not None:
            norm = np.linalg.norm(nxt)
            if norm > spec.theta_max:
                # projection onto a ball containing theta never lengthens the step
                nxt = nxt * (spec.theta_max / norm)
        steps.append(
            GeneratedStep(
                sample=core.Sample(y=y, phi=phi, gamma=gamma),
                theta_true=theta.copy(),
                delta_theta=nxt - theta,
                delta_y=dy,
                delta_phi=dphi,
            )
        )
        theta = nxt
    return steps


def empirical_noise_profile(steps, k0=0):
    """Tightest drift/noise/magnitude bounds realised by ``steps`` from ``k0`` on."""
    tail = steps[k0:]
    dtheta = max(float(np.linalg.norm(s.delta_theta)) for s in tail)
    dy, dphi = 0.0, 0.0
    for s in tail:
        w = linalg.spd_inverse_sqrt(s.sample.gamma)
        dy = max(dy, float(np.linalg.norm(w @ s.delta_y)))
        dphibar = w @ s.delta_phi
        dphi = max(dphi, linalg.max_eig(dphibar.T @ dphibar))
    thetas = [s.theta_true for s in tail] + [tail[-1].theta_true + tail[-1].delta_theta]
    theta_max = max(float(np.linalg.norm(t)) for t in thetas)
    return NoiseProfile(delta_theta=dtheta, delta_y_bar=dy, delta_phi_bar=max(dphi, 0.0), theta_max=theta_max)


@dataclass
class RunRecord:
    """Per-step arrays are indexed by ``k = 0..K`` (one more entry than samples)."""

    trajectory: core.Trajectory
    steps: list
    theta: np.ndarray
    theta_true: np.ndarray
    err_tilde: np.ndarray
    err_check: np.ndarray
    lyapunov: np.ndarray
    info_min_eig: np.ndarray
    profile: object = None
    tier: StabilityTier = StabilityTier.NONE
    noise: NoiseProfile | None = None
    bound: object = None
    transient: int | None = None
    burn_in: int | None = None
    exceedances: int | None = None

    @property
    def horizon(self):
        return len(self.steps)


def run(scenario, strategy, theta0, p0, window=None, burn_in=None, k0=None, noise=None):
    """Drive the estimator over a scenario and analyse the result.

    ``scenario`` is a :class:`ScenarioSpec` or a list of :class:`GeneratedStep`.
    ``window`` is the persistency window for the excitation certificate; by
    default the smallest window (up to ``10 n``) certifying excitation is used.
    Bound compliance is reported as the smallest step after which the
    one-step-delay error stays within the bound (``transient``) and the number
    of exceedances at or after ``burn_in`` (default: half the horizon). Both
    stay ``None`` when the bound is zero.
    ``noise`` overrides the noise constants measured from the scenario.
    """
    steps = generate(scenario) if isinstance(scenario, ScenarioSpec) else list(scenario)
    if not steps:
        raise InsufficientData("scenario has no steps")
    p = steps[0].sample.p
    state = core.init(theta0, p0, p)
    if hasattr(strategy, "reset"):
        strategy.reset()
    traj = core.propagate(state, [s.sample for s in steps], strategy)

    count = len(steps)
    theta = np.array([s.theta for s in traj.states])
    theta_true = np.array([s.theta_true for s in steps] + [steps[-1].theta_true + steps[-1].delta_theta])
    delayed = np.vstack([theta_true[:1], theta_true[:-1]])
    tilde = theta - theta_true
    err_tilde = np.linalg.norm(tilde, axis=1)
    err_check = np.linalg.norm(theta - delayed, axis=1)
    lyap = np.array([t @ s.info @ t for t, s in zip(tilde, traj.states)])
    info_min = np.array([linalg.min_eig(s.info) for s in traj.states])

    record = RunRecord(
        trajectory=traj,
        steps=steps,
        theta=theta,
        theta_true=theta_true,
        err_tilde=err_tilde,
        err_check=err_check,
        lyapunov=lyap,
        info_min_eig=info_min,
    )
    if window is None:
        phibars = [d.weighted_phi for d in traj.diagnostics]
        window = smallest_window(phibars, max_window=10 * state.n).window
    record.profile = profile_conditions(traj, window, k0=k0)
    record.tier = classify_stability(record.profile)
    record.noise = noise if noise is not None else empirical_noise_profile(steps, record.profile.k0)
    if record.tier is StabilityTier.GLOBAL_UNIFORM_EXPONENTIAL:
        record.bound = compute_bound(record.profile, record.noise)
        eps = record.bound.eps
        record.burn_in = count // 2 if burn_in is None else int(burn_in)
        # a zero bound is only reached in the limit; convergence is then judged by the rate fit
        if eps > 0.0:
            above = np.nonzero(err_check > eps)[0]
            record.transient = int(above[-1]) + 1 if above.size else 0
            record.exceedances = int(np.count_nonzero(err_check[record.burn_in :] > eps))
    return record


def run_grid(jobs, workers=None):
    """Run independent ``(scenario, strategy, theta0, p0)`` jobs, optionally on threads.

    Each job must own its strategy instance. Results come back in job order.
    """
    jobs = list(jobs)
    if workers is None or workers <= 1:
        return [run(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: run(*job), jobs))


def fit_exponential_rate(record, k_start, k_end):
    """Least-squares line through ``log ||theta_tilde_k||`` for ``k_start <= k <= k_end``.

    Returns ``(alpha_fit, beta_fit, r_squared)`` for the model
    ``||theta_tilde_k|| ~ alpha_fit * beta_fit**(-k)``; ``beta_fit > 1`` means decay.
    ``record`` may be a :class:`RunRecord` or a sequence of error norms.
    """
    errors = record.err_tilde if isinstance(record, RunRecord) else np.asarray(record, dtype=float)
    k_start, k_end = int(k_start), int(min(k_end, len(errors) - 1))
    if k_end - k_start + 1 < 2:
        raise InsufficientData(f"need at least two points in [{k_start}, {k_end}]")
    ks = np.arange(k_start, k_end + 1, dtype=float)
    logs = np.log(np.maximum(errors[k_start : k_end + 1], 1e-300))
    slope, intercept = np.polyfit(ks, logs, 1)
    resid = logs - (slope * ks + intercept)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else float("nan")
    return float(np.exp(intercept)), float(np.exp(-slope)), r2
