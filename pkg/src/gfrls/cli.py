"""Command-line harness: ``gfrls run|certify-pe|bound|oracle``.

Exit status is 0 on success, 1 on any error (bad config, unreadable trace,
estimator failure) and 2 when ``--strict`` is given and a checked invariant or
the ultimate bound is violated.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import core, guarantees, linalg, simulation
from .config import load_config
from .excitation import certify_excitation, smallest_window, weighted_regressor
from .exceptions import ConfigError, GFRLSError
from .io import emit_trace, ingest_trace, jsonable, write_table

EXIT_OK, EXIT_ERROR, EXIT_STRICT = 0, 1, 2
ORACLE_RTOL = 1e-8


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(jsonable(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _samples_for(cfg):
    if cfg.scenario is not None:
        steps = simulation.generate(cfg.scenario)
        return steps, [s.sample for s in steps]
    try:
        samples = ingest_trace(cfg.trace_path, cfg.n, cfg.p)
    except OSError as exc:
        raise ConfigError(f"cannot read trace {cfg.trace_path}: {exc.strerror}") from None
    return None, samples


def _rate_fit(record, window):
    k_start, k_end = window if window is not None else (0, record.horizon)
    try:
        alpha, beta, r2 = simulation.fit_exponential_rate(record, k_start, k_end)
    except GFRLSError as exc:
        return {"k_start": k_start, "k_end": k_end, "error": str(exc)}
    return {"k_start": k_start, "k_end": k_end, "alpha_fit": alpha, "beta_fit": beta, "r_squared": r2}


def analyse(cfg):
    """Run one experiment in memory. Returns ``(report, columns, violations, samples)``.

    ``columns`` maps per-step column names to arrays indexed by ``k = 0..K``.
    """
    steps, samples = _samples_for(cfg)
    strategy = cfg.make_strategy()
    if steps is not None:
        record = simulation.run(steps, strategy, cfg.theta0, cfg.p0, window=cfg.window, burn_in=cfg.burn_in, noise=cfg.noise)
        traj, profile, tier, noise, bound = record.trajectory, record.profile, record.tier, record.noise, record.bound
    else:
        traj = core.propagate(core.init(cfg.theta0, cfg.p0, cfg.p), samples, strategy)
        window = cfg.window
        if window is None:
            window = smallest_window([d.weighted_phi for d in traj.diagnostics], max_window=10 * cfg.n).window
        profile = guarantees.profile_conditions(traj, window)
        tier = guarantees.classify_stability(profile)
        noise, bound, record = cfg.noise, None, None
        if tier is guarantees.StabilityTier.GLOBAL_UNIFORM_EXPONENTIAL and noise is not None:
            bound = guarantees.compute_bound(profile, noise)

    violations = []
    columns = {"k": np.arange(len(traj) + 1)}
    theta = np.array([s.theta for s in traj.states])
    for i in range(cfg.n):
        columns[f"theta_{i + 1}"] = theta[:, i]
    if record is not None:
        for i in range(cfg.n):
            columns[f"theta_true_{i + 1}"] = record.theta_true[:, i]
        columns["err_tilde"] = record.err_tilde
        columns["err_check"] = record.err_check
        columns["lyapunov"] = record.lyapunov
    columns["info_min_eig"] = np.array([linalg.min_eig(s.info) for s in traj.states])

    bound_out = None
    if "bound" in cfg.checks and bound is not None:
        bound_out = bound
    lemma_out = None
    if "lemmas" in cfg.checks:
        lemma_out = guarantees.lemma_checks(traj, profile)
        violations += [k for k, v in lemma_out.items() if k.endswith("_ok") and v is False]
    rate = _rate_fit(record, cfg.rate_fit) if ("rate_fit" in cfg.checks and record is not None) else None

    report = guarantees.guarantee_report(
        profile if "conditions" in cfg.checks else None,
        tier=tier if "tier" in cfg.checks else None,
        bound=bound_out,
        noise=noise,
        lemma_checks=lemma_out,
        rate_fit=rate,
    )
    if bound_out is not None and record is not None:
        report["bound"]["compliance"] = {
            "transient": record.transient,
            "burn_in": record.burn_in,
            "exceedances": record.exceedances,
        }
        if record.exceedances:
            violations.append("bound_exceeded")
    if bound_out is not None:
        columns["eps"] = np.full(len(traj) + 1, bound_out.eps)
    return report, columns, violations, samples


def run_experiment(cfg, fmt=None, strict=False):
    """Run ``cfg`` and write its artifacts to ``cfg.out_dir``. Returns an exit status."""
    report, columns, violations, samples = analyse(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    formats = (fmt,) if fmt else cfg.formats
    names = list(columns)
    if "csv" in formats:
        write_table(os.path.join(cfg.out_dir, "trajectory.csv"), names, zip(*(columns[c].tolist() for c in names)))
    if "json" in formats:
        _write_json(os.path.join(cfg.out_dir, "trajectory.json"), {c: columns[c] for c in names})
    _write_json(os.path.join(cfg.out_dir, "report.json"), report)
    if cfg.plot_data:
        plot_cols = [c for c in ("k", "err_tilde", "err_check", "info_min_eig", "eps") if c in columns]
        write_table(os.path.join(cfg.out_dir, "plot_data.csv"), plot_cols, zip(*(columns[c].tolist() for c in plot_cols)))
    if cfg.scenario is not None:
        emit_trace(os.path.join(cfg.out_dir, "trace.csv"), samples)
    if violations:
        print(f"{cfg.source or 'experiment'}: violated {', '.join(violations)}", file=sys.stderr)
        if strict:
            return EXIT_STRICT
    return EXIT_OK


def oracle_check(cfg):
    """Compare recursive estimates against the batch least-squares minimizer at every step."""
    _, samples = _samples_for(cfg)
    strategy = cfg.make_strategy()
    state = core.init(cfg.theta0, cfg.p0, cfg.p)
    acc = core.new_accumulator(cfg.theta0, cfg.p0)
    worst, worst_k = 0.0, None
    for sample in samples:
        directive = strategy(state, sample)
        acc = core.batch_accumulate(acc, sample, directive.f, state.theta)
        state, _ = core.step(state, sample, directive.f)
        batch = core.batch_minimizer(acc)
        scale = max(np.linalg.norm(state.theta), np.finfo(float).tiny)
        rel = float(np.linalg.norm(state.theta - batch) / scale)
        if rel > worst:
            worst, worst_k = rel, state.k
    return {"steps": len(samples), "max_relative_error": worst, "worst_step": worst_k, "tolerance": ORACLE_RTOL, "pass": worst <= ORACLE_RTOL}


def _bound_from_inputs(doc):
    noise_doc = doc.get("noise")
    if noise_doc is None and isinstance(doc.get("bound"), dict):
        noise_doc = doc["bound"].get("noise")
    if not isinstance(noise_doc, dict):
        raise ConfigError("bound inputs need a 'noise' table")
    noise_doc = dict(noise_doc)
    if "gamma_min" in noise_doc:
        dy, dphi = guarantees.weighted_noise_bounds(
            noise_doc.pop("delta_y", 0.0), noise_doc.pop("delta_phi", 0.0), noise_doc.pop("gamma_min")
        )
        noise_doc.setdefault("delta_y_bar", dy)
        noise_doc.setdefault("delta_phi_bar", dphi)
    try:
        noise = guarantees.NoiseProfile(**noise_doc)
    except TypeError as exc:
        raise ConfigError(f"bad noise table: {exc}") from None
    if isinstance(doc.get("profile"), dict):
        prof = doc["profile"]
        a4 = prof.get("a4") or {}
        consts = (prof.get("a3_a"), prof.get("a2_b"), a4.get("alpha_bar"), a4.get("beta_bar"), a4.get("window"))
    else:
        consts = tuple(doc.get(k) for k in ("a", "b", "alpha_bar", "beta_bar", "N"))
    bound = guarantees.robustness_bound(*consts, noise)
    out = bound.to_dict()
    out["noise"] = noise.to_dict()
    return out


def _certify(path, window, n, p):
    try:
        samples = ingest_trace(path, n, p)
    except OSError as exc:
        raise ConfigError(f"cannot read trace {path}: {exc.strerror}") from None
    phibars = [weighted_regressor(s.phi, s.gamma) for s in samples]
    if window is not None:
        return certify_excitation(phibars, window).to_dict()
    sweep = [certify_excitation(phibars, w) for w in range(1, len(phibars) + 1)]
    first = next((r for r in sweep if r.is_pe), None)
    return {
        "smallest_window": None if first is None else first.window,
        "sweep": [r.to_dict() for r in sweep],
    }


def build_parser():
    parser = argparse.ArgumentParser(prog="gfrls", description="Generalized-forgetting RLS experiments and certificates.")
    parser.add_argument("--strict", action="store_true", help="exit 2 on any invariant or bound violation")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--out-dir", help="override the output directory")
    parser.add_argument("--format", choices=("csv", "json"), help="trajectory output format")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run experiments from config files")
    p_run.add_argument("configs", nargs="+")
    p_run.add_argument("--workers", type=int, default=1, help="threads for several configs")

    p_pe = sub.add_parser("certify-pe", help="excitation certificate for a trace")
    p_pe.add_argument("trace")
    p_pe.add_argument("--window", type=int, help="window length; sweep all windows when omitted")
    p_pe.add_argument("--n", type=int)
    p_pe.add_argument("--p", type=int)

    p_bound = sub.add_parser("bound", help="ultimate bound from constants in a JSON file")
    p_bound.add_argument("inputs")

    p_oracle = sub.add_parser("oracle", help="recursive vs batch least-squares check")
    p_oracle.add_argument("config")
    return parser


def _prepare(path, args, multi):
    cfg = load_config(path)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out_dir is not None:
        out = args.out_dir
        if multi:
            out = os.path.join(out, os.path.splitext(os.path.basename(path))[0])
        cfg.out_dir = out
    return cfg


def _emit(obj, args, name):
    text = json.dumps(jsonable(obj), indent=2, allow_nan=False)
    print(text)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        _write_json(os.path.join(args.out_dir, name), obj)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            # validate every config before running any of them
            cfgs = [_prepare(p, args, len(args.configs) > 1) for p in args.configs]
            workers = max(1, args.workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                codes = list(pool.map(lambda c: run_experiment(c, args.format, args.strict), cfgs))
            return max(codes)
        if args.verb == "certify-pe":
            _emit(_certify(args.trace, args.window, args.n, args.p), args, "excitation.json")
            return EXIT_OK
        if args.verb == "bound":
            try:
                with open(args.inputs, encoding="utf-8") as fh:
                    doc = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read {args.inputs}: {exc.strerror}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.inputs}: {exc}") from None
            _emit(_bound_from_inputs(doc), args, "bound.json")
            return EXIT_OK
        cfg = _prepare(args.config, args, False)
        result = oracle_check(cfg)
        _emit(result, args, "oracle.json")
        return EXIT_STRICT if (args.strict and not result["pass"]) else EXIT_OK
    except (GFRLSError, np.linalg.LinAlgError) as exc:
        print(f"gfrls: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
