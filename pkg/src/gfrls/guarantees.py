"""Stability conditions, stability tiers and ultimate-bound constants for a run.

The stability conditions checked on a trajectory from step ``k0`` on are

* ``a1``: every forgetting matrix is positive semidefinite;
* ``a2``: ``inv(P_k^{-1} - F_k) <= b I`` for some finite ``b``;
* ``a3``: ``P_k >= a I`` for some ``a > 0``;
* ``a4``: the weighted regressors are persistently exciting (``alpha_bar``,
  ``N``) and bounded (``beta_bar``).

On a finite trajectory ``a2`` and ``a3`` always hold with *some* constant; the
profile reports the tightest constants consistent with the data, which in turn
give the tightest ultimate bound. All certificates are empirical statements
about the observed horizon, not proofs about its continuation.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .excitation import ExcitationReport, certify_excitation
from .exceptions import EmptyTrajectory, InvalidParameter, MissingCondition

LEMMA_RTOL = 1e-9


class StabilityTier(str, enum.Enum):
    NONE = "None"
    LYAPUNOV = "Lyapunov"
    UNIFORM_LYAPUNOV = "UniformLyapunov"
    GLOBAL_ASYMPTOTIC = "GlobalAsymptotic"
    GLOBAL_UNIFORM_EXPONENTIAL = "GlobalUniformExponential"


@dataclass(frozen=True)
class ConditionProfile:
    a1_proper: bool
    a2_b: float | None
    a3_a: float | None
    a4: ExcitationReport | None
    k0: int
    horizon_end: int

    def to_dict(self):
        return {
            "a1_proper": self.a1_proper,
            "a2_b": self.a2_b,
            "a3_a": self.a3_a,
            "a4": None if self.a4 is None else self.a4.to_dict(),
            "k0": self.k0,
            "horizon_end": self.horizon_end,
        }


@dataclass(frozen=True)
class NoiseProfile:
    """Bounds on parameter drift, weighted noise and parameter magnitude.

    ``delta_phi_bar`` bounds ``dphibar_k.T dphibar_k`` in the PSD order, so it is
    a squared quantity; its square root multiplies ``theta_max`` in the bound.
    """

    delta_theta: float = 0.0
    delta_y_bar: float = 0.0
    delta_phi_bar: float = 0.0
    theta_max: float = 0.0

    def __post_init__(self):
        for name in ("delta_theta", "delta_y_bar", "delta_phi_bar", "theta_max"):
            value = float(getattr(self, name))
            if not value >= 0.0 or not math.isfinite(value):
                raise InvalidParameter(f"{name} must be a finite nonnegative number, got {value}")
            object.__setattr__(self, name, value)

    def to_dict(self):
        return {
            "delta_theta": self.delta_theta,
            "delta_y_bar": self.delta_y_bar,
            "delta_phi_bar": self.delta_phi_bar,
            "theta_max": self.theta_max,
        }


def weighted_noise_bounds(delta_y, delta_phi, gamma_min):
    """Weighted-noise bounds implied by ``Gamma_k >= gamma_min I``.

    ``delta_y`` bounds ``||dy_k||`` and ``delta_phi`` bounds ``dphi_k.T dphi_k``.
    Returns ``(delta_y_bar, delta_phi_bar)``.
    """
    if not gamma_min > 0.0:
        raise InvalidParameter("gamma_min must be positive")
    return delta_y / math.sqrt(gamma_min), delta_phi / gamma_min


@dataclass(frozen=True)
class RobustnessBound:
    a: float
    b: float
    alpha_bar: float
    beta_bar: float
    N: int
    delta_n: float
    eps_star: float
    eps: float

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "alpha_bar": self.alpha_bar,
            "beta_bar": self.beta_bar,
            "N": self.N,
            "delta_n": self.delta_n,
            "eps_star": self.eps_star,
            "eps": self.eps,
        }


def profile_conditions(traj, window, k0=None):
    """Certify conditions a1-a4 on ``traj`` (a :class:`gfrls.core.Trajectory`).

    When ``k0`` is omitted it is the earliest step after which every
    forgetting matrix is PSD, provided that leaves at least ``window`` steps;
    otherwise ``k0 = 0`` and a1 is reported as failing.
    """
    count = len(traj)
    if count == 0:
        raise EmptyTrajectory("trajectory has no steps")
    window = int(window)
    proper = [linalg.is_psd(d.f) for d in traj.directives]
    if k0 is None:
        improper = [k for k, ok in enumerate(proper) if not ok]
        k0 = improper[-1] + 1 if improper else 0
        if count - k0 < window:
            k0 = 0
    k0 = int(k0)
    if not 0 <= k0 < count:
        raise InvalidParameter(f"k0 = {k0} outside the trajectory [0, {count})")

    a1 = all(proper[k0:])
    margins = [traj.diagnostics[k].well_posed_margin for k in range(k0, count)]
    a2_b = 1.0 / min(margins) if min(margins) > 0.0 else None
    info_max = [linalg.max_eig(s.info) for s in traj.states[k0:]]
    a3_a = 1.0 / max(info_max) if np.all(np.isfinite(info_max)) else None
    a4 = None
    if count - k0 >= window:
        phibars = [traj.diagnostics[k].weighted_phi for k in range(k0, count)]
        a4 = certify_excitation(phibars, window, k_start=k0)
    return ConditionProfile(a1_proper=a1, a2_b=a2_b, a3_a=a3_a, a4=a4, k0=k0, horizon_end=count)


def _a4_holds(profile):
    return profile.a4 is not None and profile.a4.is_pe and profile.a4.beta_bar > 0.0


def classify_stability(profile):
    """Strongest stability tier whose sufficient conditions hold on ``profile``."""
    if not (profile.a1_proper and profile.a2_b is not None):
        return StabilityTier.NONE
    a3 = profile.a3_a is not None
    a4 = _a4_holds(profile)
    if a3 and a4:
        return StabilityTier.GLOBAL_UNIFORM_EXPONENTIAL
    if a4:
        return StabilityTier.GLOBAL_ASYMPTOTIC
    if a3:
        return StabilityTier.UNIFORM_LYAPUNOV
    return StabilityTier.LYAPUNOV


def robustness_bound(a, b, alpha_bar, beta_bar, N, noise):
    """Ultimate bound ``eps`` and its intermediate constants from raw constants."""
    for name, value in (("a", a), ("b", b), ("alpha_bar", alpha_bar), ("beta_bar", beta_bar), ("N", N)):
        if value is None:
            raise MissingCondition(f"constant {name} is unavailable")
    a, b, alpha_bar, beta_bar, N = float(a), float(b), float(alpha_bar), float(beta_bar), int(N)
    if not (a > 0 and b > 0 and alpha_bar > 0 and beta_bar > 0 and N >= 1):
        raise MissingCondition(
            f"need a, b, alpha_bar, beta_bar > 0 and N >= 1, got {a}, {b}, {alpha_bar}, {beta_bar}, {N}"
        )
    # every trajectory satisfies a <= b (covariance bound) and alpha_bar <= N beta_bar
    if a > b * (1.0 + 1e-9) or alpha_bar > N * beta_bar * (1.0 + 1e-9):
        raise InvalidParameter(
            f"inconsistent constants: need a <= b and alpha_bar <= N beta_bar, got a={a}, b={b}, "
            f"alpha_bar={alpha_bar}, N beta_bar={N * beta_bar}"
        )
    bb = b * beta_bar
    delta_n = (N / (a * alpha_bar)) * (1.0 + bb) * (1.0 + 0.5 * (N - 1) * bb**2) - 1.0
    eps_star = max(1.0, 1.0 / math.sqrt(a)) * (delta_n + math.sqrt(delta_n + delta_n**2)) * N
    zeta = noise.delta_theta + b * math.sqrt(beta_bar) * (
        math.sqrt(noise.delta_phi_bar) * noise.theta_max + noise.delta_y_bar
    )
    return RobustnessBound(
        a=a, b=b, alpha_bar=alpha_bar, beta_bar=beta_bar, N=N, delta_n=delta_n, eps_star=eps_star, eps=eps_star * zeta
    )


def compute_bound(profile, noise):
    """Ultimate bound on the one-step-delay estimation error for a certified profile."""
    if profile.a4 is None:
        raise MissingCondition("excitation certificate (a4) is unavailable")
    return robustness_bound(profile.a3_a, profile.a2_b, profile.a4.alpha_bar, profile.a4.beta_bar, profile.a4.window, noise)


def eiv_bound(profile, noise):
    """Errors-in-variables specialisation: fixed parameters, so drift is zero."""
    fixed = NoiseProfile(
        delta_theta=0.0, delta_y_bar=noise.delta_y_bar, delta_phi_bar=noise.delta_phi_bar, theta_max=noise.theta_max
    )
    return compute_bound(profile, fixed)


def lemma_tolerance(traj):
    return LEMMA_RTOL * max(1.0, max(linalg.max_eig(s.info) for s in traj.states))


def c_n(alpha_bar, b, beta_bar, N):
    bb = b * beta_bar
    return (alpha_bar / N) / (1.0 + bb) / (1.0 + 0.5 * (N - 1) * bb**2)


def window_decrease_margins(traj, profile, window=None):
    """Margins ``lmin(Delta^N V_k) - c_N`` for every window start ``k0 <= k <= K - N``.

    ``Delta^N V_k = P_k^{-1} - Pi.T P_{k+N}^{-1} Pi`` with ``Pi = M_{k+N-1} ... M_k``.
    Every margin must be nonnegative up to :func:`lemma_tolerance`.
    """
    if not (profile.a1_proper and profile.a2_b is not None and _a4_holds(profile)):
        raise MissingCondition("window decrease check needs a1, a2 and a persistently exciting, bounded a4")
    N = profile.a4.window
    if window is not None and int(window) != N:
        raise InvalidParameter(f"window {window} differs from the profile's window {N}")
    cn = c_n(profile.a4.alpha_bar, profile.a2_b, profile.a4.beta_bar, N)
    margins = []
    for k in range(profile.k0, len(traj) - N + 1):
        prod = np.eye(traj.states[k].n)
        for i in range(k, k + N):
            prod = traj.diagnostics[i].m_matrix @ prod
        dnv = traj.states[k].info - prod.T @ traj.states[k + N].info @ prod
        margins.append(linalg.min_eig(dnv) - cn)
    return margins


def lyapunov_decrease_residuals(traj, k0=0):
    """Smallest eigenvalue of each one-step Lyapunov decrease gap, at steps whose forgetting matrix is PSD."""
    return [d.delta_v_gap_mineig for d, dirv in zip(traj.diagnostics[k0:], traj.directives[k0:]) if linalg.is_psd(dirv.f)]


def max_covariance(traj, profile):
    """``max_k lmax(P_k)`` over states ``k0..K``; must not exceed ``a2_b`` under a1."""
    return max(1.0 / linalg.min_eig(s.info) for s in traj.states[profile.k0 :])


def guarantee_report(profile, tier=None, bound=None, noise=None, lemma_checks=None, rate_fit=None):
    """JSON-ready report with exactly the keys profile, tier, bound, lemma_checks, rate_fit.

    The noise constants that produced ``bound`` are nested under ``bound["noise"]``.
    """
    bound_dict = None
    if bound is not None:
        bound_dict = bound.to_dict()
        bound_dict["noise"] = None if noise is None else noise.to_dict()
    return {
        "profile": None if profile is None else profile.to_dict(),
        "tier": None if tier is None else StabilityTier(tier).value,
        "bound": bound_dict,
        "lemma_checks": lemma_checks,
        "rate_fit": rate_fit,
    }


def lemma_checks(traj, profile):
    """Summary of the Lyapunov and covariance invariants on a trajectory, with pass flags."""
    tol = lemma_tolerance(traj)
    out = {"tolerance": tol}
    res5 = lyapunov_decrease_residuals(traj, profile.k0)
    out["lyapunov_decrease_min_residual"] = min(res5) if res5 else None
    out["lyapunov_decrease_ok"] = (min(res5) >= -tol) if res5 else None
    if profile.a1_proper and profile.a2_b is not None:
        cov = max_covariance(traj, profile)
        out["max_covariance"] = cov
        out["covariance_bounded_ok"] = bool(cov <= profile.a2_b * (1.0 + 1e-9))
    else:
        out["max_covariance"] = None
        out["covariance_bounded_ok"] = None
    try:
        margins = window_decrease_margins(traj, profile)
    except MissingCondition:
        margins = []
    out["window_decrease_min_margin"] = min(margins) if margins else None
    out["window_decrease_ok"] = (min(margins) >= -tol) if margins else None
    return out


# name used by the published operation list
lemma7_check = window_decrease_margins
