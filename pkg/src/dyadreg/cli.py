"""Command-line interface: simulate / estimate / rates / minimax / diagnose.

Exit codes: 0 success, 2 configuration error (message names the offending
key), 3 assumption-violation refusal (e.g. truncation infeasibility, KL
precondition). Refusals never leave partial output files: everything is
computed first and written atomically afterwards.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .decomposition import variance_dominance
from .dgp import DGP_KINDS, load_dataset, make_dgp, save_dataset, simulate
from .errors import AssumptionViolation, ConfigError
from .estimator import BANDWIDTH_MODES, BandwidthRule, bandwidth, nw_estimate
from .kernels import KERNEL_IDS, make_kernel
from .minimax import (fano_kl_average, holder_membership_check, hypothesis_g,
                      kl_two_point, make_fano, make_two_point, separation_check,
                      build_selection, woodbury_gap)
from .rates import (RateExperiment, plot_data, rate_fit_json, rate_rows_csv,
                    run_rate_experiment)

__all__ = ["main"]


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_run_manifest(subcommand: str, config: dict, outputs: list[str]):
    if not outputs:
        return
    manifest = {
        "subcommand": subcommand,
        "config_hash": _config_hash(config),
        "seed": config.get("seed"),
        "artifact_version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [os.path.abspath(p) for p in outputs],
    }
    _atomic_write(outputs[0] + ".run.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_bandwidth(text: str, beta: float, d_x: int) -> BandwidthRule:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"bandwidth must look like mode:c0, got {text!r}")
    mode, c0 = parts
    if mode not in BANDWIDTH_MODES:
        raise ConfigError(f"bandwidth mode {mode!r} unknown; known: {', '.join(BANDWIDTH_MODES)}")
    try:
        c0_val = float(c0)
    except ValueError:
        raise ConfigError(f"bandwidth c0 must be a number, got {c0!r}") from None
    return BandwidthRule(mode=mode, c0=c0_val, beta=beta, d_x=d_x)


def _parse_int_list(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated integer list, got {text!r}") from None


def _parse_float_list(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated number list, got {text!r}") from None


# --- simulate ----------------------------------------------------------------


def _cmd_simulate(args) -> list[str]:
    spec = make_dgp(args.dgp, g_name=args.g, d_x=args.d_x, law=args.law)
    data = simulate(spec, args.n, args.seed)
    meta = {"dgp": args.dgp, "g": args.g, "law": args.law, "d_x": args.d_x,
            "seed": args.seed, "n_units": args.n}
    save_dataset(data, args.out, meta=meta)
    base, _ = os.path.splitext(args.out)
    return [args.out, base + ".units.csv", base + ".manifest.json"]


# --- estimate ----------------------------------------------------------------


def _parse_grid(text: str, dim: int) -> np.ndarray:
    specs = text.split(",")
    if len(specs) == 1:
        specs = specs * dim
    if len(specs) != dim:
        raise ConfigError(f"grid needs 1 or {dim} coordinate specs min:max:steps, got {len(specs)}")
    axes = []
    for sp in specs:
        parts = sp.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid coordinate spec must be min:max:steps, got {sp!r}")
        try:
            lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"bad grid coordinate spec {sp!r}") from None
        if steps < 1 or hi < lo:
            raise ConfigError(f"bad grid coordinate spec {sp!r}")
        axes.append(np.linspace(lo, hi, steps))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _cmd_estimate(args) -> list[str]:
    data, _manifest = load_dataset(args.data)
    if args.kernel not in KERNEL_IDS:
        raise ConfigError(f"kernel {args.kernel!r} unknown; known: {', '.join(KERNEL_IDS)}")
    kernel = make_kernel(args.kernel, 2 * data.d_x)
    rule = _parse_bandwidth(args.bandwidth, args.beta, data.d_x)
    h = bandwidth(rule, data.n_units)
    grid = _parse_grid(args.grid, 2 * data.d_x)
    res = nw_estimate(data, kernel, h, grid)
    header = [f"w_{c + 1}" for c in range(2 * data.d_x)] + ["f_hat", "g_hat", "defined"]
    lines = [",".join(header)]
    for i in range(grid.shape[0]):
        cells = [repr(float(v)) for v in grid[i]]
        cells.append(repr(float(res.f_hat[i])))
        cells.append(repr(float(res.g_hat[i])) if res.defined[i] else "")
        cells.append("1" if res.defined[i] else "0")
        lines.append(",".join(cells))
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return [args.out]


# --- rates -------------------------------------------------------------------

_RATES_KEYS = {
    "dgp.kind", "dgp.g", "dgp.d_x", "dgp.law", "dgp.beta", "dgp.l",
    "kernel", "bandwidth.mode", "bandwidth.c0",
    "mode", "w0", "grid.lo", "grid.hi", "grid.steps",
    "n_list", "reps", "seed", "metric", "out.prefix",
}


def _read_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, value = (tok.strip() for tok in line.split("=", 1))
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def _cmd_rates(args) -> list[str]:
    cfg = _read_config(args.config)
    unknown = set(cfg) - _RATES_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")

    def need(key):
        if key not in cfg:
            raise ConfigError(f"missing required config key {key!r}")
        return cfg[key]

    d_x = int(cfg.get("dgp.d_x", "1"))
    beta = float(cfg.get("dgp.beta", "2.0"))
    l_const = float(cfg.get("dgp.l", "5.0"))
    kernel_id = cfg.get("kernel", "gaussian")
    if kernel_id not in KERNEL_IDS:
        raise ConfigError(f"kernel: {kernel_id!r} unknown; known: {', '.join(KERNEL_IDS)}")
    try:
        spec = make_dgp(cfg.get("dgp.kind", "theorem1"), g_name=cfg.get("dgp.g", "sin_additive"),
                        d_x=d_x, law=cfg.get("dgp.law", "uniform"), beta=beta, l_const=l_const)
    except ValueError as exc:
        raise ConfigError(f"dgp.*: {exc}") from None
    mode = cfg.get("mode", "pointwise")
    w0 = _parse_float_list(need("w0"), "w0") if mode == "pointwise" else None
    try:
        rule = BandwidthRule(mode=cfg.get("bandwidth.mode", "pointwise-optimal"),
                             c0=float(cfg.get("bandwidth.c0", "1.0")), beta=beta, d_x=d_x)
        exp = RateExperiment(
            dgp=spec,
            kernel_id=kernel_id,
            rule=rule,
            mode=mode,
            n_list=_parse_int_list(need("n_list"), "n_list"),
            reps=int(need("reps")),
            seed=int(cfg.get("seed", "0")),
            w0=w0,
            grid_lo=float(cfg.get("grid.lo", "0.2")),
            grid_hi=float(cfg.get("grid.hi", "0.8")),
            grid_steps=int(cfg.get("grid.steps", "9")),
            metric=cfg.get("metric", "median"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fit = run_rate_experiment(exp)
    prefix = need("out.prefix")
    csv_path, json_path, plot_path = prefix + ".csv", prefix + ".fit.json", prefix + ".plot.dat"
    _atomic_write(csv_path, rate_rows_csv(fit))
    _atomic_write(json_path, rate_fit_json(fit))
    _atomic_write(plot_path, plot_data(fit, exp.n_list))
    return [csv_path, json_path, plot_path]


# --- minimax -----------------------------------------------------------------


def _cmd_minimax(args) -> list[str]:
    reports = []
    for n in _parse_int_list(args.n, "--n"):
        if args.variant == "two-point":
            con = make_two_point(args.beta, args.l, args.c0, args.d_x, n)
            kl = kl_two_point(con, n, args.reps, args.seed)
            centers_grid = np.concatenate([np.concatenate(con.centers)[None, :],
                                           np.tile(con.centers[0], 2)[None, :]])
            sep = separation_check(con, 1, 0, centers_grid, n)
        elif args.variant == "fano":
            con = make_fano(args.beta, args.l, args.c0, args.d_x, n)
            kl = fano_kl_average(con, n, args.reps, args.seed)
            centers = con.fano_centers(n)
            grid = np.hstack([centers, centers])
            sep = separation_check(con, 1, 2, grid, n)
        else:
            raise ConfigError(f"unknown variant {args.variant!r}")
        h = con.h_n(n)
        g1 = lambda w: hypothesis_g(con, 1, w, n)
        hold = holder_membership_check(g1, args.beta, args.l, 2 * args.d_x,
                                       n_pairs=400, seed=args.seed, box=(-0.25, 1.25))
        sel = build_selection(n)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(args.seed, 99))))
        gaps = [abs(woodbury_gap(sel, rng.standard_normal(n))) for _ in range(3)]
        body = {
            "n_units": n,
            "h_n": h,
            "bound": kl.bound,
            "separation": {"gap": sep.gap, "required": sep.required, "passed": sep.passed},
            "holder_pass": hold.passed,
            "holder_max_ratio": hold.max_violation_ratio,
            "woodbury_max_gap": max(gaps),
        }
        if args.variant == "two-point":
            body["kl_mean"] = kl.kl_mean
            body["kl_se"] = kl.kl_se
            body["kl_within_bound"] = kl.kl_mean <= kl.bound + 3.0 * kl.kl_se
        else:
            body["avg_kl"] = kl.avg_kl
            body["kl_se"] = kl.kl_se
            body["alpha_implied"] = kl.alpha_implied
            body["ln_m_n"] = kl.ln_m_n
            body["ln_m_lower"] = kl.ln_m_lower
            body["n_hypotheses"] = kl.n_hypotheses
            body["kl_within_bound"] = kl.avg_kl <= kl.bound + 3.0 * kl.kl_se
        reports.append(body)
    text = json.dumps({"variant": args.variant, "beta": args.beta, "l": args.l,
                       "c0": args.c0, "d_x": args.d_x, "seed": args.seed,
                       "reports": reports}, indent=2, sort_keys=True) + "\n"
    if args.out:
        _atomic_write(args.out, text)
        return [args.out]
    sys.stdout.write(text)
    return []


# --- diagnose ----------------------------------------------------------------


def _cmd_diagnose(args) -> list[str]:
    spec = make_dgp(args.dgp, g_name=args.g, d_x=args.d_x, law=args.law)
    kernel_id = args.kernel
    if kernel_id not in KERNEL_IDS:
        raise ConfigError(f"kernel {kernel_id!r} unknown; known: {', '.join(KERNEL_IDS)}")
    kernel = make_kernel(kernel_id, 2 * args.d_x)
    rule = _parse_bandwidth(args.bandwidth, args.beta, args.d_x)
    w = np.asarray(_parse_float_list(args.w, "--w"))
    if w.shape != (2 * args.d_x,):
        raise ConfigError(f"--w must have {2 * args.d_x} coordinates")
    rows = variance_dominance(spec, kernel, rule, _parse_int_list(args.n, "--n"),
                              args.reps, w, args.seed)
    lines = ["n,var_t1,var_t2,ratio,n_excluded"]
    for r in rows:
        lines.append(f"{r.n_units},{r.var_t1!r},{r.var_t2!r},{r.ratio!r},{r.n_excluded}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return [args.out]


# --- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyadreg",
                                description="Dyadic kernel regression toolkit")
    p.add_argument("--version", action="version", version=f"dyadreg {__version__}")
    p.add_argument("--manifest", action="store_true",
                   help="write a .run.json manifest next to the first output")
    p.add_argument("--threads", type=int, default=None,
                   help="cap internal (BLAS) parallelism; default DYADREG_THREADS or all cores")
    sub = p.add_subparsers(dest="subcommand", required=True)

    ps = sub.add_parser("simulate", help="draw a dyadic dataset and write it to CSV")
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--dgp", default="theorem1", choices=DGP_KINDS)
    ps.add_argument("--g", default="sin_additive")
    ps.add_argument("--d-x", dest="d_x", type=int, default=1)
    ps.add_argument("--law", default="uniform", choices=("uniform", "truncnorm"))
    ps.add_argument("--seed", type=int, required=True)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=_cmd_simulate)

    pe = sub.add_parser("estimate", help="evaluate the regression estimator on a grid")
    pe.add_argument("--data", required=True, help="pair-list CSV written by simulate")
    pe.add_argument("--kernel", default="gaussian")
    pe.add_argument("--bandwidth", default="uniform-optimal:1.0", help="mode:c0")
    pe.add_argument("--beta", type=float, default=2.0)
    pe.add_argument("--grid", required=True, help="min:max:steps per coordinate, comma-separated")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=_cmd_estimate)

    pr = sub.add_parser("rates", help="run a Monte Carlo rate experiment from a config file")
    pr.add_argument("--config", required=True)
    pr.set_defaults(func=_cmd_rates)

    pm = sub.add_parser("minimax", help="evaluate the lower-bound constructions")
    pm.add_argument("--variant", default="two-point", choices=("two-point", "fano"))
    pm.add_argument("--beta", type=float, default=2.0)
    pm.add_argument("--l", type=float, default=1.0)
    pm.add_argument("--c0", type=float, default=1.0)
    pm.add_argument("--d-x", dest="d_x", type=int, default=1)
    pm.add_argument("--n", required=True, help="comma-separated unit counts")
    pm.add_argument("--reps", type=int, default=200)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--out", default=None)
    pm.set_defaults(func=_cmd_minimax)

    pd = sub.add_parser("diagnose", help="Hoeffding variance-dominance table")
    pd.add_argument("--dgp", default="theorem1", choices=DGP_KINDS)
    pd.add_argument("--g", default="sin_additive")
    pd.add_argument("--d-x", dest="d_x", type=int, default=1)
    pd.add_argument("--law", default="uniform", choices=("uniform", "truncnorm"))
    pd.add_argument("--kernel", default="epanechnikov")
    pd.add_argument("--bandwidth", default="uniform-optimal:1.0")
    pd.add_argument("--beta", type=float, default=2.0)
    pd.add_argument("--n", required=True, help="comma-separated unit counts")
    pd.add_argument("--reps", type=int, default=100)
    pd.add_argument("--w", required=True, help="comma-separated evaluation point")
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=_cmd_diagnose)
    return p


def _apply_thread_cap(args):
    cap = args.threads
    if cap is None:
        env = os.environ.get("DYADREG_THREADS")
        cap = int(env) if env else None
    if cap is None:
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        print("--threads ignored: threadpoolctl not installed", file=sys.stderr)
        return
    threadpool_limits(limits=cap)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "manifest", "threads")}
    _apply_thread_cap(args)
    try:
        outputs = args.func(args)
        if args.manifest:
            _write_run_manifest(args.subcommand, config, outputs)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssumptionViolation as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
