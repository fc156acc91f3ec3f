"""Monte Carlo rate experiments: error curves over N and log-log exponents.

A rate experiment simulates `reps` datasets per sample size, evaluates the
regression estimator pointwise or in sup norm over a fixed grid, and fits
the log error against log N (pointwise) or log(N / ln N) (sup norm). Foil
fits against the dyad count n = N(N-1) and the naive d_W-based exponent are
reported alongside, since the whole point is which sample size and which
dimension govern the rate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dgp import DgpSpec, simulate, true_g_on_grid
from .estimator import BandwidthRule, bandwidth, nw_estimate
from .kernels import make_kernel

__all__ = [
    "RateExperiment",
    "RateRow",
    "RateFit",
    "FitResult",
    "fit_exponent",
    "run_rate_experiment",
    "measure_delta_n",
    "product_grid",
    "rate_rows_csv",
    "rate_fit_json",
]

_DEGENERATE_ERR = 1e-13


def product_grid(lo: float, hi: float, steps: int, dim: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, steps)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class RateExperiment:
    dgp: DgpSpec
    kernel_id: str
    rule: BandwidthRule
    mode: str                      # "pointwise" or "sup-norm"
    n_list: tuple[int, ...]
    reps: int
    seed: int
    w0: tuple[float, ...] | None = None
    grid_lo: float = 0.2
    grid_hi: float = 0.8
    grid_steps: int = 9
    metric: str = "median"         # which per-N statistic the slope is fit on

    def __post_init__(self):
        if self.mode not in ("pointwise", "sup-norm"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.n_list) < 4:
            raise ValueError("n_list must have at least 4 entries")
        if list(self.n_list) != sorted(set(self.n_list)):
            raise ValueError("n_list must be strictly increasing")
        if self.reps < 50:
            raise ValueError("reps must be >= 50")
        if self.mode == "pointwise" and self.w0 is None:
            raise ValueError("pointwise mode requires w0")
        if self.metric not in ("median", "mean", "rmse"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class RateRow:
    n_units: int
    median_err: float
    mean_err: float
    rmse: float
    sd: float
    n_undefined: int
    n_excluded_reps: int


@dataclass(frozen=True)
class FitResult:
    slope: float
    se: float
    r2: float


def fit_exponent(points) -> FitResult:
    """OLS of log(error) on log(n_value); exact on synthetic power laws."""
    xs, ys = [], []
    for n_value, err in points:
        if err <= 0:
            warnings.warn(f"rejecting nonpositive error {err!r} at n={n_value}")
            continue
        xs.append(math.log(float(n_value)))
        ys.append(math.log(float(err)))
    if len(xs) < 4:
        raise ValueError("need at least 4 usable points to fit an exponent")
    x = np.asarray(xs)
    y = np.asarray(ys)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = len(x) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    se = math.sqrt(sigma2 / sxx)
    tss = float((y - y.mean()) @ (y - y.mean()))
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 1.0
    return FitResult(slope=slope, se=se, r2=r2)


@dataclass(frozen=True)
class RateFit:
    rows: tuple[RateRow, ...]
    slope: float
    slope_se: float
    r2: float
    theory_exponent: float
    foil_vs_n: float               # fitted exponent against dyad count N(N-1)
    foil_vs_dw: float              # theoretical exponent if d_W ruled the rate
    mode: str
    metric: str
    valid: bool
    degenerate: bool
    invalid_reason: str = ""


def _metric_value(errs: np.ndarray, metric: str) -> float:
    if metric == "median":
        return float(np.median(errs))
    if metric == "mean":
        return float(np.mean(errs))
    return float(np.sqrt(np.mean(errs**2)))


def run_rate_experiment(exp: RateExperiment) -> RateFit:
    d_x = exp.dgp.d_x
    kernel = make_kernel(exp.kernel_id, 2 * d_x)
    if exp.mode == "pointwise":
        grid = np.atleast_2d(np.asarray(exp.w0, dtype=float))
    else:
        grid = product_grid(exp.grid_lo, exp.grid_hi, exp.grid_steps, 2 * d_x)
    g_true = true_g_on_grid(exp.dgp, grid)

    rows = []
    per_n_errs = []
    valid = True
    reason = ""
    for idx, n in enumerate(exp.n_list):
        h = bandwidth(exp.rule, n)
        errs = []
        undefined = 0
        excluded = 0
        for rep in range(exp.reps):
            rep_seed = int(np.random.SeedSequence(entropy=(exp.seed, idx, rep)).generate_state(1)[0])
            data = simulate(exp.dgp, n, rep_seed)
            res = nw_estimate(data, kernel, h, grid)
            undefined += res.n_undefined
            if not np.any(res.defined):
                excluded += 1
                continue
            diff = np.abs(res.g_hat[res.defined] - g_true[res.defined])
            errs.append(float(np.max(diff)))
        frac_undef = undefined / (exp.reps * grid.shape[0])
        if frac_undef > 0.10:
            valid = False
            reason = f"{frac_undef:.1%} undefined grid evaluations at N={n}"
        errs = np.asarray(errs)
        if errs.size == 0:
            valid = False
            reason = f"all replications undefined at N={n}"
            errs = np.array([math.nan])
        rows.append(RateRow(
            n_units=n,
            median_err=float(np.median(errs)),
            mean_err=float(np.mean(errs)),
            rmse=float(np.sqrt(np.mean(errs**2))),
            sd=float(np.std(errs, ddof=1)),
            n_undefined=undefined,
            n_excluded_reps=excluded,
        ))
        per_n_errs.append(errs)

    metric_errs = [_metric_value(e, exp.metric) for e in per_n_errs]
    degenerate = any(not math.isfinite(me) or me < _DEGENERATE_ERR for me in metric_errs)
    theory = -exp.dgp.holder.beta / (2.0 * exp.dgp.holder.beta + d_x)
    foil_dw = -exp.dgp.holder.beta / (2.0 * exp.dgp.holder.beta + 2.0 * d_x)
    if degenerate:
        return RateFit(rows=tuple(rows), slope=math.nan, slope_se=math.nan, r2=math.nan,
                       theory_exponent=theory, foil_vs_n=math.nan, foil_vs_dw=foil_dw,
                       mode=exp.mode, metric=exp.metric, valid=valid,
                       degenerate=True, invalid_reason=reason or "errors at machine scale")
    if exp.mode == "pointwise":
        xs = [float(n) for n in exp.n_list]
    else:
        xs = [n / math.log(n) for n in exp.n_list]
    fit = fit_exponent(list(zip(xs, metric_errs)))
    foil_fit = fit_exponent([(n * (n - 1), me) for n, me in zip(exp.n_list, metric_errs)])
    return RateFit(rows=tuple(rows), slope=fit.slope, slope_se=fit.se, r2=fit.r2,
                   theory_exponent=theory, foil_vs_n=foil_fit.slope, foil_vs_dw=foil_dw,
                   mode=exp.mode, metric=exp.metric, valid=valid, degenerate=False,
                   invalid_reason=reason)


def measure_delta_n(data, kernel, h: float, grid) -> float:
    """Measured stand-in for the density floor: min of f_hat over the grid."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    res = nw_estimate(data, kernel, h, grid)
    return float(np.min(res.f_hat))


# --- stable text renderings (byte-identical across runs) --------------------


def rate_rows_csv(fit: RateFit) -> str:
    lines = ["n,median_err,mean_err,rmse,sd,n_undefined,n_excluded_reps"]
    for r in fit.rows:
        lines.append(
            f"{r.n_units},{r.median_err!r},{r.mean_err!r},{r.rmse!r},{r.sd!r},"
            f"{r.n_undefined},{r.n_excluded_reps}"
        )
    return "\n".join(lines) + "\n"


def rate_fit_json(fit: RateFit) -> str:
    payload = {
        "mode": fit.mode,
        "metric": fit.metric,
        "slope": fit.slope,
        "slope_se": fit.slope_se,
        "r2": fit.r2,
        "theory_exponent": fit.theory_exponent,
        "foil_vs_n": fit.foil_vs_n,
        "foil_vs_dw": fit.foil_vs_dw,
        "valid": fit.valid,
        "degenerate": fit.degenerate,
        "invalid_reason": fit.invalid_reason,
        "rows": [
            {
                "n": r.n_units,
                "median_err": r.median_err,
                "mean_err": r.mean_err,
                "rmse": r.rmse,
                "sd": r.sd,
                "n_undefined": r.n_undefined,
                "n_excluded_reps": r.n_excluded_reps,
            }
            for r in fit.rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def plot_data(fit: RateFit, n_list) -> str:
    """Two-column (ln n_value, ln err) text for external plotting."""
    xs = [float(n) for n in n_list] if fit.mode == "pointwise" else [n / math.log(n) for n in n_list]
    lines = []
    for x, r in zip(xs, fit.rows):
        err = {"median": r.median_err, "mean": r.mean_err, "rmse": r.rmse}[fit.metric]
        lines.append(f"{math.log(x)!r} {math.log(err)!r}")
    return "\n".join(lines) + "\n"
