# Monte Carlo rate study: how fast does the pointwise error shrink with the
# number of sampled units N, and what happens if you pretend the dyad count
# n = N(N-1) were the sample size?
#
# With beta = 2 smoothness and scalar regressors the error exponent in N is
# -2/5; against n it should look like half that.

from dyadreg.dgp import make_dgp
from dyadreg.estimator import BandwidthRule
from dyadreg.rates import RateExperiment, run_rate_experiment


def main():
    exp = RateExperiment(
        dgp=make_dgp("theorem1", "sin_additive"),
        kernel_id="gaussian",
        rule=BandwidthRule("pointwise-optimal", 0.5, beta=2.0, d_x=1),
        mode="pointwise",
        n_list=(50, 100, 200, 400),
        reps=100,
        seed=7,
        w0=(0.5, 0.5),
        metric="rmse",
    )
    fit = run_rate_experiment(exp)
    print(f"{'N':>5} {'median':>8} {'rmse':>8} {'sd':>8}")
    for row in fit.rows:
        print(f"{row.n_units:>5} {row.median_err:8.4f} {row.rmse:8.4f} {row.sd:8.4f}")
    print(f"fitted exponent vs ln N        : {fit.slope:7.3f} +- {fit.slope_se:.3f}")
    print(f"theory exponent (-b/(2b+d_x))  : {fit.theory_exponent:7.3f}")
    print(f"foil: refit vs ln N(N-1)       : {fit.foil_vs_n:7.3f}  (~ half the N exponent)")
    print(f"foil: naive d_W exponent       : {fit.foil_vs_dw:7.3f}  (not what the data shows)")
    _maybe_plot(exp, fit)


def _maybe_plot(exp, fit):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    import numpy as np

    ns = np.array([r.n_units for r in fit.rows], dtype=float)
    errs = np.array([r.rmse for r in fit.rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, errs, "o-", label=f"measured (slope {fit.slope:.2f})")
    ref = errs[0] * (ns / ns[0]) ** fit.theory_exponent
    ax.loglog(ns, ref, "--", label=f"theory slope {fit.theory_exponent:.2f}")
    ax.set_xlabel("N (sampled units)")
    ax.set_ylabel("RMSE at w0")
    ax.legend()
    fig.tight_layout()
    fig.savefig("rate_study.png", dpi=120)
    print("wrote rate_study.png")


if __name__ == "__main__":
    main()
