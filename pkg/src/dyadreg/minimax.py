"""Numerical realizations of the risk lower-bound constructions.

Two-point route: null g0 = 0 against a bump-kernel perturbation g1 built
from two centers, with the Gaussian KL divergence between the induced data
laws available in closed form through the error covariance I + T T^T (T the
dyad-to-unit selection matrix). Fano route: a packing of bump perturbations
on a regular center grid with disjoint supports.

Quadratic forms through (I + T T^T)^{-1} are evaluated through the N x N
core (I + T^T T) so nothing of size N(N-1) is ever factorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product as iter_product

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .dgp import RegressorLaw, uniform_law
from .errors import AssumptionViolation, PackingDegenerate
from .kernels import KernelSpec, make_kernel

__all__ = [
    "SelectionMatrices",
    "MinimaxConstruction",
    "SeparationResult",
    "KlReport",
    "FanoReport",
    "HolderReport",
    "build_selection",
    "omega",
    "omega_inverse",
    "kl_quadratic_form",
    "woodbury_sides",
    "woodbury_gap",
    "make_two_point",
    "make_fano",
    "hypothesis_g",
    "separation_check",
    "kl_two_point",
    "fano_kl_average",
    "holder_membership_check",
    "fit_bump_amplitude",
    "holder_floor",
]

_OMEGA_DENSE_LIMIT = 40  # beyond this, materializing I + T T^T is refused


@dataclass(frozen=True)
class SelectionMatrices:
    """Dyad-to-unit selection: row p of t_script marks the two units of the
    p-th unordered pair (lexicographic); t_big stacks two copies (both
    directions of each dyad load the same unit effects)."""

    n_units: int
    pair_i: np.ndarray
    pair_j: np.ndarray

    @cached_property
    def t1(self) -> np.ndarray:
        m = np.zeros((len(self.pair_i), self.n_units))
        m[np.arange(len(self.pair_i)), self.pair_i] = 1.0
        return m

    @cached_property
    def t2(self) -> np.ndarray:
        m = np.zeros((len(self.pair_j), self.n_units))
        m[np.arange(len(self.pair_j)), self.pair_j] = 1.0
        return m

    @cached_property
    def t_script(self) -> np.ndarray:
        return self.t1 + self.t2

    @cached_property
    def t_big(self) -> np.ndarray:
        return np.vstack([self.t_script, self.t_script])

    def t_matvec(self, x: np.ndarray) -> np.ndarray:
        tx = x[self.pair_i] + x[self.pair_j]
        return np.concatenate([tx, tx])

    def t_rmatvec(self, y: np.ndarray) -> np.ndarray:
        c = len(self.pair_i)
        yy = y[:c] + y[c:]
        out = np.zeros(self.n_units)
        np.add.at(out, self.pair_i, yy)
        np.add.at(out, self.pair_j, yy)
        return out


def build_selection(n_units: int) -> SelectionMatrices:
    if n_units < 2:
        raise ValueError("n_units must be >= 2")
    iu, ju = np.triu_indices(n_units, k=1)
    return SelectionMatrices(n_units=n_units, pair_i=iu, pair_j=ju)


def _core_matrix(n: int) -> np.ndarray:
    # I_N + T^T T = (2N - 3) I + 2 J
    return (2 * n - 3) * np.eye(n) + 2.0 * np.ones((n, n))


def omega(sel: SelectionMatrices) -> np.ndarray:
    """Error covariance I + T T^T, materialized (small N only)."""
    if sel.n_units > _OMEGA_DENSE_LIMIT:
        raise ValueError(
            f"refusing to materialize the N(N-1) x N(N-1) covariance for N={sel.n_units}; "
            "use kl_quadratic_form / woodbury_sides instead"
        )
    t = sel.t_big
    return np.eye(t.shape[0]) + t @ t.T


def omega_inverse(sel: SelectionMatrices) -> np.ndarray:
    """(I + T T^T)^{-1} = I - T (I_N + T^T T)^{-1} T^T; only the N x N core
    is inverted. Verified against identity before returning."""
    if sel.n_units > _OMEGA_DENSE_LIMIT:
        raise ValueError(
            f"refusing to materialize the N(N-1) x N(N-1) inverse for N={sel.n_units}; "
            "use kl_quadratic_form / woodbury_sides instead"
        )
    t = sel.t_big
    core = np.linalg.solve(_core_matrix(sel.n_units), t.T)
    inv = np.eye(t.shape[0]) - t @ core
    gap = float(np.max(np.abs(omega(sel) @ inv - np.eye(t.shape[0]))))
    if gap > 1e-8:
        raise AssumptionViolation(f"omega inverse verification failed: max |Omega Omega^-1 - I| = {gap:.3e}")
    return inv


def kl_quadratic_form(k_vec: np.ndarray, n_units: int | None = None) -> np.ndarray:
    """(T K)^T (I + T T^T)^{-1} (T K) = K^T S (I + S)^{-1} K with
    S = T^T T = 2[(N-2) I + J]; accepts a batch of K vectors (rows)."""
    k = np.atleast_2d(np.asarray(k_vec, dtype=float))
    n = k.shape[1] if n_units is None else n_units
    if k.shape[1] != n:
        raise ValueError("k_vec length must equal n_units")
    a = 2.0 * n - 3.0
    ksum = k.sum(axis=1, keepdims=True)
    z = k / a - (2.0 * ksum / (a * (a + 2.0 * n)))
    zsum = z.sum(axis=1, keepdims=True)
    sz = 2.0 * (n - 2.0) * z + 2.0 * zsum
    out = np.einsum("rn,rn->r", k, sz)
    return out if np.ndim(k_vec) > 1 else float(out[0])


def woodbury_sides(sel: SelectionMatrices, k_vec) -> tuple[float, float]:
    """Both sides of K^T K - (TK)^T (I + T T^T)^{-1} (TK) = K^T (I + T^T T)^{-1} K.

    Left side solves the big system iteratively through T matvecs; right side
    is a dense N x N solve. Their agreement certifies the Woodbury identity."""
    k = np.asarray(k_vec, dtype=float)
    n = sel.n_units
    if k.shape != (n,):
        raise ValueError(f"k_vec must have length {n}")
    tk = sel.t_matvec(k)
    dim = 2 * len(sel.pair_i)

    def matvec(y):
        return y + sel.t_matvec(sel.t_rmatvec(y))

    op = LinearOperator((dim, dim), matvec=matvec)
    scale = float(np.linalg.norm(tk))
    z, info = cg(op, tk, rtol=1e-13, atol=1e-16 * max(scale, 1.0), maxiter=200)
    if info != 0:
        raise AssumptionViolation(f"conjugate gradient failed to converge (info={info})")
    lhs = float(k @ k - tk @ z)
    rhs = float(k @ np.linalg.solve(_core_matrix(n), k))
    return lhs, rhs


def woodbury_gap(sel: SelectionMatrices, k_vec) -> float:
    lhs, rhs = woodbury_sides(sel, k_vec)
    return lhs - rhs


# ---------------------------------------------------------------------------
# hypothesis constructions


@dataclass(frozen=True)
class MinimaxConstruction:
    variant: str                 # "two-point" or "fano"
    beta: float
    l_const: float
    c0: float
    d_x: int
    n_units: int
    kernel: KernelSpec           # bump kernel on R^d_x
    centers: tuple | None = None  # two-point: (x10, x20)
    regressor_law: RegressorLaw | None = None

    def __post_init__(self):
        if self.variant not in ("two-point", "fano"):
            raise ValueError(f"unknown variant {self.variant!r}")

    def h_n(self, n_units: int | None = None) -> float:
        n = float(self.n_units if n_units is None else n_units)
        expo = 1.0 / (2.0 * self.beta + self.d_x)
        if self.variant == "two-point":
            return self.c0 * n**-expo
        return self.c0 * (n / math.log(n)) ** -expo

    def psi_n(self, n_units: int | None = None) -> float:
        n = float(self.n_units if n_units is None else n_units)
        expo = self.beta / (2.0 * self.beta + self.d_x)
        if self.variant == "two-point":
            return n**-expo
        return (n / math.log(n)) ** -expo

    def m_n(self, n_units: int | None = None) -> int:
        # floor keeps center spacing 1/m >= h, hence disjoint supports
        return int(math.floor(1.0 / self.h_n(n_units)))

    def n_hypotheses(self, n_units: int | None = None) -> int:
        return self.m_n(n_units) ** self.d_x

    def fano_centers(self, n_units: int | None = None) -> np.ndarray:
        if self.variant != "fano":
            raise ValueError("centers grid exists only for the fano variant")
        m = self.m_n(n_units)
        if m**self.d_x < 2:
            raise PackingDegenerate(
                f"packing degenerate: m_N={m} gives {m ** self.d_x} hypothesis(es); "
                "increase N or decrease c0"
            )
        axes = [(np.arange(1, m + 1) - 0.5) / m] * self.d_x
        return np.array([c for c in iter_product(*axes)], dtype=float)

    @property
    def k_at_zero(self) -> float:
        return self.kernel.k_max  # bump peaks at the origin


def _law_or_default(law, d_x):
    return law if law is not None else uniform_law(d_x)


def make_two_point(beta: float, l_const: float, c0: float, d_x: int, n_units: int,
                   centers=None, law: RegressorLaw | None = None,
                   bump_a: float | None = None) -> MinimaxConstruction:
    if centers is None:
        centers = (np.full(d_x, 0.3), np.full(d_x, 0.7))
    centers = (np.asarray(centers[0], dtype=float), np.asarray(centers[1], dtype=float))
    kernel = make_kernel("bump", d_x, bump_a=bump_a, bump_beta=beta)
    return MinimaxConstruction(variant="two-point", beta=beta, l_const=l_const, c0=c0,
                               d_x=d_x, n_units=n_units, kernel=kernel,
                               centers=centers, regressor_law=_law_or_default(law, d_x))


def make_fano(beta: float, l_const: float, c0: float, d_x: int, n_units: int,
              law: RegressorLaw | None = None, bump_a: float | None = None) -> MinimaxConstruction:
    kernel = make_kernel("bump", d_x, bump_a=bump_a, bump_beta=beta)
    return MinimaxConstruction(variant="fano", beta=beta, l_const=l_const, c0=c0,
                               d_x=d_x, n_units=n_units, kernel=kernel,
                               centers=None, regressor_law=_law_or_default(law, d_x))


def _kernel_at(kernel: KernelSpec, pts: np.ndarray) -> np.ndarray:
    # pts (..., d) -> product of the univariate factor over the last axis
    return np.prod(kernel.factor.fn(np.asarray(pts, dtype=float)), axis=-1)


def hypothesis_g(con: MinimaxConstruction, which, w, n_units: int | None = None):
    """Evaluate hypothesis `which` at w = (x1, x2); which = 0 is the null.

    For the fano variant `which` is a 1-based flat index into the center grid
    (or a multi-index tuple)."""
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    w2 = np.atleast_2d(w)
    d = con.d_x
    if w2.shape[-1] != 2 * d:
        raise ValueError(f"w must have length {2 * d}")
    x1, x2 = w2[:, :d], w2[:, d:]
    h = con.h_n(n_units)
    if isinstance(which, tuple):
        m = con.m_n(n_units)
        which = 1 + int(np.ravel_multi_index(tuple(np.asarray(which) - 1), (m,) * d))
    if which == 0:
        vals = np.zeros(w2.shape[0])
    elif con.variant == "two-point":
        if which != 1:
            raise ValueError("two-point variant has hypotheses 0 and 1")
        c1, c2 = con.centers
        vals = (con.l_const * h**con.beta / 2.0) * (
            _kernel_at(con.kernel, (x1 - c1) / h)
            + _kernel_at(con.kernel, (x1 - c2) / h)
            + _kernel_at(con.kernel, (x2 - c1) / h)
            + _kernel_at(con.kernel, (x2 - c2) / h)
        )
    else:
        centers = con.fano_centers(n_units)
        if not 1 <= which <= len(centers):
            raise ValueError(f"fano hypothesis index must be in 1..{len(centers)}")
        ck = centers[which - 1]
        vals = (con.l_const * h**con.beta) * (
            _kernel_at(con.kernel, (x1 - ck) / h) + _kernel_at(con.kernel, (x2 - ck) / h)
        )
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class SeparationResult:
    gap: float
    required: float
    passed: bool
    a_const: float
    psi_n: float


def separation_check(con: MinimaxConstruction, k, l, grid, n_units: int | None = None) -> SeparationResult:
    """Sup over the grid of |g_k - g_l| against the 2 A psi_N separation."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    gk = hypothesis_g(con, k, grid, n_units)
    gl = hypothesis_g(con, l, grid, n_units)
    gap = float(np.max(np.abs(gk - gl)))
    k0 = con.k_at_zero
    psi = con.psi_n(n_units)
    if con.variant == "two-point":
        a_const = con.l_const * k0 * con.c0**con.beta / 2.0
    else:
        a_const = con.l_const * k0 * con.c0**con.beta
    required = 2.0 * a_const * psi if k != l else 0.0
    passed = gap >= required * (1.0 - 1e-12)
    return SeparationResult(gap=gap, required=required, passed=passed,
                            a_const=a_const, psi_n=psi)


# ---------------------------------------------------------------------------
# KL evaluations


@dataclass(frozen=True)
class KlReport:
    kl_mean: float
    kl_se: float
    bound: float
    n_h_dx: float


def _check_kl_precondition(con, n_units):
    h = con.h_n(n_units)
    n_h = n_units * h**con.d_x
    if n_h < 1.0:
        raise AssumptionViolation(
            f"KL evaluation requires N h_N^d_x >= 1; got {n_h:.4f} at N={n_units}"
        )
    return h, n_h


def kl_two_point(con: MinimaxConstruction, n_units: int, mc_reps: int, seed: int) -> KlReport:
    """MC over regressor draws of KL(P0, P1) = E[ (TK)^T Omega^{-1} (TK) ] / 2,
    against the closed-form bound L^2 K_max^2 B3 c0^(2 beta + d_x) / 2."""
    if con.variant != "two-point":
        raise ValueError("kl_two_point requires a two-point construction")
    h, n_h = _check_kl_precondition(con, n_units)
    law = con.regressor_law
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(seed, 10))))
    c1, c2 = con.centers
    scale = con.l_const * h**con.beta / 2.0
    kls = np.empty(mc_reps)
    for r in range(mc_reps):
        x = law.sample(rng, n_units)
        kv = scale * (_kernel_at(con.kernel, (x - c1) / h) + _kernel_at(con.kernel, (x - c2) / h))
        kls[r] = 0.5 * kl_quadratic_form(kv, n_units)
    bound = 0.5 * con.l_const**2 * con.k_at_zero**2 * law.b3 * con.c0 ** (2 * con.beta + con.d_x)
    return KlReport(kl_mean=float(np.mean(kls)), kl_se=float(np.std(kls, ddof=1) / math.sqrt(mc_reps)),
                    bound=bound, n_h_dx=n_h)


@dataclass(frozen=True)
class FanoReport:
    avg_kl: float
    kl_se: float
    bound: float
    alpha_implied: float
    ln_m_n: float
    ln_m_lower: float
    m_n: int
    n_hypotheses: int


def fano_kl_average(con: MinimaxConstruction, n_units: int, mc_reps: int, seed: int) -> FanoReport:
    """MC average over the packing of KL(P_k, P_0), with the disjoint-support
    bound (N/M) L^2 h^(2 beta) K_max^2 / 2 and the ln M_N arithmetic check."""
    if con.variant != "fano":
        raise ValueError("fano_kl_average requires a fano construction")
    h, _ = _check_kl_precondition(con, n_units)
    centers = con.fano_centers(n_units)  # raises PackingDegenerate when M < 2
    m_total = len(centers)
    law = con.regressor_law
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(seed, 11))))
    scale = con.l_const * h**con.beta
    rep_means = np.empty(mc_reps)
    for r in range(mc_reps):
        x = law.sample(rng, n_units)                       # (N, d)
        diffs = (x[None, :, :] - centers[:, None, :]) / h  # (M, N, d)
        kvs = scale * _kernel_at(con.kernel, diffs)        # (M, N)
        rep_means[r] = float(np.mean(0.5 * kl_quadratic_form(kvs, n_units)))
    avg = float(np.mean(rep_means))
    se = float(np.std(rep_means, ddof=1) / math.sqrt(mc_reps))
    bound = 0.5 * con.l_const**2 * h ** (2 * con.beta) * con.k_at_zero**2 * n_units / m_total
    ln_m = math.log(m_total)
    ln_lower = con.d_x / (2.0 * con.beta + con.d_x + 1.0) * math.log(n_units)
    return FanoReport(avg_kl=avg, kl_se=se, bound=bound,
                      alpha_implied=avg / ln_m, ln_m_n=ln_m, ln_m_lower=ln_lower,
                      m_n=con.m_n(n_units), n_hypotheses=m_total)


# ---------------------------------------------------------------------------
# Holder class membership by finite differences


def holder_floor(beta: float) -> int:
    """Greatest integer strictly less than beta."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return int(math.ceil(beta)) - 1 if float(beta).is_integer() else int(math.floor(beta))


_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def _multi_indices(d: int, total: int):
    if d == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _multi_indices(d - 1, total - head):
            yield (head,) + rest


def _fd_partial(g, pts: np.ndarray, s: tuple[int, ...], step: float) -> np.ndarray:
    """Central-difference estimate of D^s g at each row of pts."""
    offsets = [np.array([0.0])]
    coeffs = [np.array([1.0])]
    for order in s:
        off, cf = _STENCILS[order]
        offsets.append(np.asarray(off, dtype=float))
        coeffs.append(np.asarray(cf, dtype=float))
    total = np.zeros(pts.shape[0])
    d = pts.shape[1]
    grids = list(iter_product(*[range(len(o)) for o in offsets[1:]]))
    for combo in grids:
        shift = np.array([offsets[c + 1][combo[c]] for c in range(d)])
        weight = math.prod(coeffs[c + 1][combo[c]] for c in range(d))
        if weight == 0.0:
            continue
        total += weight * np.asarray(g(pts + step * shift), dtype=float)
    return total / step ** sum(s)


@dataclass(frozen=True)
class HolderReport:
    max_violation_ratio: float
    passed: bool
    n_pairs: int
    beta: float
    l_const: float


def holder_membership_check(g, beta: float, l_const: float, d: int,
                            n_pairs: int = 1500, seed: int = 0, tol: float = 0.05,
                            box: tuple[float, float] = (-1.0, 1.0)) -> HolderReport:
    """Sampled check that g lies in the Holder class: all order-floor(beta)
    partial derivatives satisfy |D^s g(w) - D^s g(w')| <= L ||w-w'||_inf^(beta-l).

    g must be vectorized over points (shape (..., d) -> (...))."""
    if beta > 4:
        raise ValueError("finite-difference check supports beta <= 4")
    l = holder_floor(beta)
    frac = beta - l
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(seed, 12))))
    lo, hi = box
    width = hi - lo
    w = lo + rng.random((n_pairs, d)) * width
    direction = rng.standard_normal((n_pairs, d))
    direction /= np.max(np.abs(direction), axis=1, keepdims=True)
    log_r = rng.random(n_pairs)
    r = 10.0 ** (np.log10(1e-3 * width) + log_r * (np.log10(0.5 * width) - np.log10(1e-3 * width)))
    w2 = w + direction * r[:, None]
    dist = np.max(np.abs(w2 - w), axis=1)

    step = float(np.finfo(float).eps ** (1.0 / (2.0 + l)))
    max_ratio = 0.0
    for s in _multi_indices(d, l):
        d1 = _fd_partial(g, w, s, step)
        d2 = _fd_partial(g, w2, s, step)
        for vals, pts in ((d1, w), (d2, w2)):
            bad = ~np.isfinite(vals)
            if np.any(bad):
                where = pts[np.argmax(bad)]
                raise AssumptionViolation(
                    f"non-finite derivative estimate for multi-index {s} at point {where}"
                )
        ratio = np.abs(d1 - d2) / (l_const * dist**frac)
        max_ratio = max(max_ratio, float(np.max(ratio)))
    return HolderReport(max_violation_ratio=max_ratio, passed=max_ratio <= 1.0 + tol,
                        n_pairs=n_pairs, beta=beta, l_const=l_const)


def fit_bump_amplitude(beta: float, d: int, l_const: float = 0.5, margin: float = 0.1,
                       seed: int = 1234, n_pairs: int = 1200) -> float:
    """Bisect the bump amplitude so the product bump kernel passes the Holder
    check for Sigma(beta, l_const) with the given relative margin."""
    from .kernels import _bump_factor  # local import; kernels lazily calls back here

    def max_ratio(a: float) -> float:
        factor = _bump_factor(a)
        g = lambda pts: np.prod(factor.fn(np.asarray(pts, dtype=float)), axis=-1)
        rep = holder_membership_check(g, beta, l_const, d, n_pairs=n_pairs,
                                      seed=seed, tol=0.0, box=(-0.75, 0.75))
        return rep.max_violation_ratio

    target = 1.0 / (1.0 + margin)
    lo, hi = 1e-6, 1.0
    if max_ratio(hi) <= target:
        return hi
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if max_ratio(mid) <= target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-9:
            break
    return lo
