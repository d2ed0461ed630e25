"""Experiment configuration files (TOML, schema version 1).

Example::

    version = 1

    [scenario]              # or: [trace] path = "data.csv"
    n = 2
    p = 1
    horizon = 500
    theta_true_0 = [1.0, -0.5]
    walk_bound = 0.0
    meas_noise_bound = 0.0
    reg_noise_bound = 0.0
    theta_max = 2.0         # optional
    regressor = "sinusoidal-pe"
    gamma = "identity"
    seed = 0

    [strategy]
    tag = "exponential"
    params = { lambda = 0.95 }

    [estimator]
    theta0 = [0.0, 0.0]
    p0 = 1.0                # scalar (times I) or a matrix

    [analysis]
    window = 4              # optional; smallest certifying window otherwise
    checks = ["conditions", "tier", "bound", "lemmas", "rate_fit"]
    rate_fit = { k_start = 50, k_end = 500 }
    burn_in = 250           # optional
    noise = { delta_theta = 0.0, delta_y_bar = 0.0, delta_phi_bar = 0.0, theta_max = 1.0 }  # optional

    [output]
    dir = "out"
    formats = ["csv", "json"]
    plot_data = true

Every value is validated when the file is loaded, before anything runs.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .exceptions import ConfigError, GFRLSError
from .forgetting import make_strategy
from .guarantees import NoiseProfile
from .simulation import GAMMA_KINDS, REGRESSOR_KINDS, ScenarioSpec

SCHEMA_VERSION = 1
CHECKS = ("conditions", "tier", "bound", "lemmas", "rate_fit")
FORMATS = ("csv", "json")

_TOP = {"version", "scenario", "trace", "strategy", "estimator", "analysis", "output"}
_SCENARIO = {
    "n", "p", "horizon", "theta_true_0", "walk_bound", "meas_noise_bound", "reg_noise_bound",
    "theta_max", "regressor", "gamma", "seed",
}
_TRACE = {"path", "n", "p"}
_STRATEGY = {"tag", "params"}
_ESTIMATOR = {"theta0", "p0"}
_ANALYSIS = {"window", "checks", "rate_fit", "burn_in", "noise"}
_OUTPUT = {"dir", "formats", "plot_data"}


@dataclass
class ExperimentConfig:
    n: int
    p: int
    strategy_tag: str
    strategy_params: dict
    theta0: np.ndarray
    p0: np.ndarray
    scenario: ScenarioSpec | None = None
    trace_path: str | None = None
    window: int | None = None
    checks: tuple = CHECKS
    rate_fit: tuple | None = None
    burn_in: int | None = None
    noise: NoiseProfile | None = None
    out_dir: str = "out"
    formats: tuple = FORMATS
    plot_data: bool = True
    source: str | None = field(default=None, repr=False)

    def make_strategy(self):
        return make_strategy(self.strategy_tag, self.strategy_params, self.n)

    def with_seed(self, seed):
        if self.scenario is None:
            raise ConfigError("--seed needs a [scenario] table; trace-driven runs have no randomness")
        return replace(self, scenario=replace(self.scenario, seed=int(seed)))


def _table(doc, key, allowed, required=True):
    if key not in doc:
        if required:
            raise ConfigError(f"missing [{key}] table")
        return {}
    tab = doc[key]
    if not isinstance(tab, dict):
        raise ConfigError(f"[{key}] must be a table")
    unknown = set(tab) - allowed
    if unknown:
        raise ConfigError(f"[{key}] has unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    return tab


def _int(tab, key, where, minimum=None, default=None):
    if key not in tab:
        if default is None:
            raise ConfigError(f"{where}.{key} is required")
        return default
    value = tab[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key} must be at least {minimum}, got {value}")
    return value


def _nonneg(tab, key, where, default=0.0):
    value = tab.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise ConfigError(f"{where}.{key} must be a finite nonnegative number, got {value!r}")
    return float(value)


def _vector(value, n, name):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ConfigError(f"{name} must be a finite vector of length {n}, got {value!r}")
    return v


def _spd(value, n, name):
    try:
        m = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number or a matrix") from None
    if m.ndim == 0:
        m = float(m) * np.eye(n)
    if m.shape != (n, n) or not np.all(np.isfinite(m)):
        raise ConfigError(f"{name} must be a scalar or an {n}x{n} matrix")
    if not np.allclose(m, m.T) or np.linalg.eigvalsh(0.5 * (m + m.T))[0] <= 0:
        raise ConfigError(f"{name} must be symmetric positive definite")
    return m


def parse_config(doc, base_dir="."):
    """Validate a decoded TOML document and build an :class:`ExperimentConfig`."""
    unknown = set(doc) - _TOP
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if doc.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"config version must be {SCHEMA_VERSION}, got {doc.get('version')!r}")
    if ("scenario" in doc) == ("trace" in doc):
        raise ConfigError("exactly one of [scenario] and [trace] must be present")

    scenario, trace_path = None, None
    if "scenario" in doc:
        sc = _table(doc, "scenario", _SCENARIO)
        n = _int(sc, "n", "scenario", 1)
        p = _int(sc, "p", "scenario", 1)
        regressor = sc.get("regressor", "sinusoidal-pe")
        if regressor not in REGRESSOR_KINDS or regressor == "custom-trace":
            raise ConfigError(f"scenario.regressor {regressor!r} invalid; valid: {', '.join(REGRESSOR_KINDS[:-1])}")
        gamma = sc.get("gamma", "identity")
        if gamma not in GAMMA_KINDS:
            raise ConfigError(f"scenario.gamma {gamma!r} invalid; valid: {', '.join(GAMMA_KINDS)}")
        theta_max = sc.get("theta_max")
        if theta_max is not None:
            theta_max = _nonneg(sc, "theta_max", "scenario")
        try:
            scenario = ScenarioSpec(
                n=n,
                p=p,
                horizon=_int(sc, "horizon", "scenario", 1),
                theta_true_0=_vector(sc.get("theta_true_0", [0.0] * n), n, "scenario.theta_true_0"),
                walk_bound=_nonneg(sc, "walk_bound", "scenario"),
                meas_noise_bound=_nonneg(sc, "meas_noise_bound", "scenario"),
                reg_noise_bound=_nonneg(sc, "reg_noise_bound", "scenario"),
                regressor_kind=regressor,
                gamma_kind=gamma,
                seed=_int(sc, "seed", "scenario", 0, default=0),
                theta_max=theta_max,
            )
        except GFRLSError as exc:
            raise ConfigError(f"[scenario]: {exc}") from None
    else:
        tr = _table(doc, "trace", _TRACE)
        if not isinstance(tr.get("path"), str):
            raise ConfigError("trace.path must be a string")
        trace_path = os.path.join(base_dir, tr["path"])
        n = _int(tr, "n", "trace", 1)
        p = _int(tr, "p", "trace", 1)

    st = _table(doc, "strategy", _STRATEGY)
    tag = st.get("tag")
    params = st.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("strategy.params must be a table")
    make_strategy(tag, params, n)  # raises ConfigError for bad tags or parameter domains

    est = _table(doc, "estimator", _ESTIMATOR, required=False)
    theta0 = _vector(est.get("theta0", [0.0] * n), n, "estimator.theta0")
    p0 = _spd(est.get("p0", 1.0), n, "estimator.p0")

    an = _table(doc, "analysis", _ANALYSIS, required=False)
    window = _int(an, "window", "analysis", 1) if "window" in an else None
    checks = tuple(an.get("checks", CHECKS))
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"analysis.checks has unknown entries {bad}; valid: {', '.join(CHECKS)}")
    rate_fit = None
    if "rate_fit" in an:
        rf = an["rate_fit"]
        if not isinstance(rf, dict) or set(rf) != {"k_start", "k_end"}:
            raise ConfigError("analysis.rate_fit must be a table with k_start and k_end")
        rate_fit = (_int(rf, "k_start", "analysis.rate_fit", 0), _int(rf, "k_end", "analysis.rate_fit", 0))
        if rate_fit[1] <= rate_fit[0]:
            raise ConfigError("analysis.rate_fit needs k_end > k_start")
    burn_in = _int(an, "burn_in", "analysis", 0) if "burn_in" in an else None
    noise = None
    if "noise" in an:
        nz = an["noise"]
        keys = {"delta_theta", "delta_y_bar", "delta_phi_bar", "theta_max"}
        if not isinstance(nz, dict) or set(nz) - keys:
            raise ConfigError(f"analysis.noise must be a table with keys among {sorted(keys)}")
        noise = NoiseProfile(**{k: _nonneg(nz, k, "analysis.noise") for k in keys})

    out = _table(doc, "output", _OUTPUT, required=False)
    out_dir = out.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ConfigError("output.dir must be a string")
    formats = tuple(out.get("formats", FORMATS))
    if not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"output.formats must be a non-empty subset of {list(FORMATS)}")
    plot_data = out.get("plot_data", True)
    if not isinstance(plot_data, bool):
        raise ConfigError("output.plot_data must be true or false")

    return ExperimentConfig(
        n=n,
        p=p,
        strategy_tag=tag,
        strategy_params=params,
        theta0=theta0,
        p0=p0,
        scenario=scenario,
        trace_path=trace_path,
        window=window,
        checks=checks,
        rate_fit=rate_fit,
        burn_in=burn_in,
        noise=noise,
        out_dir=os.path.join(base_dir, out_dir),
        formats=formats,
        plot_data=plot_data,
    )


def load_config(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = parse_config(doc, os.path.dirname(os.path.abspath(path)))
    cfg.source = path
    return cfg
