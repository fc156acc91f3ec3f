"""Empirical Hoeffding decomposition of the symmetrized kernel average.

For unordered pairs, Z_ij = (1/2)[Y_ij 1(|Y_ij|<tau) K_h(W_ij - w)
+ Y_ji 1(|Y_ji|<tau) K_h(W_ji - w)], and the statistic is the pair average
of Z. The data-based projection uses row means R_i = mean_j Z_ij and the
grand mean; because sum_i (R_i - mean) = 0 identically on the complete dyad
array, the scalar projection terms t1 and t2 vanish exactly (the identity
statistic = mean + t1 + t2 is exact but degenerate). The variance diagnostics
therefore come from within-replication variance-component estimates:

    var1_hat ~ Var(T_1) = (4/N) Var(E[Z|unit i]),   via centered row means
               (with the row-mean noise bias removed),
    var2_hat ~ Var(T_2) = Var(residual)/C(N,2),     via the doubly centered
               residual matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dgp import DgpSpec, DyadicDataset, simulate
from .estimator import BandwidthRule, _check_dims, _half_weights, bandwidth

__all__ = ["HoeffdingParts", "DominanceRow", "hoeffding_decompose", "variance_dominance"]


@dataclass(frozen=True)
class HoeffdingParts:
    statistic: float
    mean_term: float
    t1: float
    t2: float
    unit_contributions: np.ndarray
    var1_hat: float
    var2_hat: float


def hoeffding_decompose(data: DyadicDataset, kernel, h: float, tau: float, w) -> HoeffdingParts:
    """Exact algebraic split statistic = mean_term + t1 + t2 plus the
    projection / degenerate variance-component estimates."""
    _check_dims(data, kernel, h)
    if not tau > 0:
        raise ValueError("tau must be positive")
    n = data.n_units
    a, b = _half_weights(data, kernel, h, w)
    k_mat = h ** (-kernel.dim) * np.outer(a, b)
    y = data.y_filled()
    y = y * (np.abs(y) < tau)
    m = y * k_mat
    z = 0.5 * (m + m.T)           # symmetric; Z_ij for unordered pairs
    np.fill_diagonal(z, 0.0)
    n_pairs = n * (n - 1) // 2
    statistic = float(np.sum(z) / 2.0 / n_pairs)
    mean_term = statistic
    row_means = z.sum(axis=1) / (n - 1)
    uc = row_means - mean_term
    t1 = 2.0 / n * float(np.sum(uc))
    t2 = statistic - mean_term - t1

    resid = z - row_means[:, None] - row_means[None, :] + mean_term
    np.fill_diagonal(resid, 0.0)
    resid_ms = float(np.sum(resid**2) / 2.0 / n_pairs)
    s2_uc = float(np.sum(uc**2) / (n - 1))
    var1 = 4.0 / n * max(s2_uc - resid_ms / (n - 1), 0.0)
    var2 = resid_ms / n_pairs
    return HoeffdingParts(statistic=statistic, mean_term=mean_term, t1=t1, t2=t2,
                          unit_contributions=uc, var1_hat=var1, var2_hat=var2)


@dataclass(frozen=True)
class DominanceRow:
    n_units: int
    var_t1: float
    var_t2: float
    ratio: float
    n_excluded: int


def variance_dominance(spec: DgpSpec, kernel, rule: BandwidthRule, n_list, reps: int,
                       w, seed: int, tau: float = math.inf) -> list[DominanceRow]:
    """Monte Carlo table of projection vs degenerate variance per N; the
    ratio var_t2/var_t1 should fall with N when unit effects are present."""
    if reps < 50:
        raise ValueError("reps must be >= 50")
    rows = []
    for idx, n in enumerate(n_list):
        h = bandwidth(rule, n)
        v1, v2, excluded = [], [], 0
        for rep in range(reps):
            rep_seed = int(np.random.SeedSequence(entropy=(seed, idx, rep)).generate_state(1)[0])
            data = simulate(spec, n, rep_seed)
            parts = hoeffding_decompose(data, kernel, h, tau, w)
            if not (np.isfinite(parts.var1_hat) and np.isfinite(parts.var2_hat)):
                excluded += 1
                continue
            v1.append(parts.var1_hat)
            v2.append(parts.var2_hat)
        var1 = float(np.mean(v1)) if v1 else math.nan
        var2 = float(np.mean(v2)) if v2 else math.nan
        ratio = var2 / var1 if var1 > 0 else math.inf
        rows.append(DominanceRow(n_units=n, var_t1=var1, var_t2=var2,
                                 ratio=ratio, n_excluded=excluded))
    return rows
