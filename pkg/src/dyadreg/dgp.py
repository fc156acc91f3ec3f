"""Conditionally-independent-dyad simulator and test regression functions.

Outcomes follow Y_ij = h(X_i, X_j, U_i, U_j, V_ij) for ordered pairs i != j.
The gaussian-regression mode fixes h = g(X_i, X_j) + U_i + U_j + V_ij with
U, V standard normal, which is the model the minimax bounds are stated for.
Latent draws come from Philox streams keyed by (seed, role) so a dataset is
bit-identical given (spec, n_units, seed).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import AssumptionViolation

__all__ = [
    "DyadicDataset",
    "DgpSpec",
    "HolderInfo",
    "HolderFunction",
    "RegressorLaw",
    "MomentBounds",
    "uniform_law",
    "truncnorm_law",
    "make_dgp",
    "simulate",
    "simulate_latents",
    "dyad_moment_bounds",
    "true_g_on_grid",
    "save_dataset",
    "load_dataset",
    "REGRESSION_FUNCS",
    "DGP_KINDS",
]

_ROLE_X, _ROLE_U, _ROLE_V = 0, 1, 2


def _stream(seed: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(int(seed), role))))


@dataclass(frozen=True)
class RegressorLaw:
    name: str
    d_x: int
    b3: float
    support_lo: tuple[float, ...]
    support_hi: tuple[float, ...]
    sample: Callable[[np.random.Generator, int], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray]


def uniform_law(d_x: int) -> RegressorLaw:
    """X uniform on the unit cube; density bounded by B3 = 1."""

    def sample(rng, n):
        return rng.random((n, d_x))

    def density(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        return inside.astype(float)

    return RegressorLaw("uniform", d_x, 1.0, (0.0,) * d_x, (1.0,) * d_x, sample, density)


def truncnorm_law(d_x: int, radius: float = 2.0) -> RegressorLaw:
    """Standard normal truncated to [-radius, radius] per coordinate."""
    z = 2.0 * ndtr(radius) - 1.0
    peak = (1.0 / math.sqrt(2.0 * math.pi)) / z

    def sample(rng, n):
        u = rng.random((n, d_x))
        lo = ndtr(-radius)
        return ndtri(lo + u * (1.0 - 2.0 * lo))

    def density(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(np.abs(x) <= radius, axis=-1)
        vals = np.prod(np.exp(-0.5 * x**2) / (math.sqrt(2.0 * math.pi) * z), axis=-1)
        return np.where(inside, vals, 0.0)

    return RegressorLaw("truncnorm", d_x, peak**d_x,
                        (-radius,) * d_x, (radius,) * d_x, sample, density)


@dataclass(frozen=True)
class HolderInfo:
    beta: float
    l_const: float


@dataclass(frozen=True)
class HolderFunction:
    """A callable with declared smoothness: g in Sigma(beta, l_const) on R^d."""

    g: Callable
    beta: float
    l_const: float
    d: int

    def __call__(self, w):
        return self.g(w)

    def check(self, n_pairs: int = 800, seed: int = 0, tol: float = 0.05,
              box: tuple[float, float] = (-1.0, 1.0)):
        """Sampled finite-difference membership check of the declared class."""
        from .minimax import holder_membership_check

        return holder_membership_check(self.g, self.beta, self.l_const, self.d,
                                       n_pairs=n_pairs, seed=seed, tol=tol, box=box)


@dataclass(frozen=True)
class DgpSpec:
    kind: str                    # "gaussian-regression" or "graphon"
    name: str
    regressor_law: RegressorLaw
    holder: HolderInfo
    g: Callable | None = None          # (x1, x2) -> mean, gaussian-regression mode
    graphon: Callable | None = None    # (x1, x2, u1, u2, v) -> outcome, graphon mode
    cond_mean: Callable | None = None  # analytic E[Y|x1,x2] for graphon mode, if known
    y_bound: float | None = None       # sup |Y| when outcomes are bounded

    def __post_init__(self):
        if self.kind not in ("gaussian-regression", "graphon"):
            raise ValueError(f"unknown dgp kind {self.kind!r}")
        if self.kind == "gaussian-regression" and self.g is None:
            raise ValueError("gaussian-regression mode requires a regression function g")
        if self.kind == "graphon" and self.graphon is None:
            raise ValueError("graphon mode requires a graphon h")

    @property
    def d_x(self) -> int:
        return self.regressor_law.d_x


@dataclass
class DyadicDataset:
    """Regressors x (N x d_x) and directed outcomes y (N x N, NaN diagonal).

    The diagonal holds structural zeros; it is stored as NaN so that any
    consumer reading it poisons its output instead of silently using it.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        n = self.x.shape[0]
        if self.x.ndim != 2 or n < 2:
            raise ValueError("x must be (N, d_x) with N >= 2")
        if self.y.shape != (n, n):
            raise ValueError(f"y must be ({n}, {n}), got {self.y.shape}")
        off = ~np.eye(n, dtype=bool)
        if not np.all(np.isfinite(self.y[off])):
            raise ValueError("off-diagonal outcomes must be finite")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("regressors must be finite")
        self.y = self.y.copy()
        np.fill_diagonal(self.y, np.nan)

    @property
    def n_units(self) -> int:
        return self.x.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    def y_filled(self, value: float = 0.0) -> np.ndarray:
        out = self.y.copy()
        np.fill_diagonal(out, value)
        return out


# --- shipped regression functions (vectorized over leading axes) -----------


def _coordsum(x):
    return np.sum(np.asarray(x, dtype=float), axis=-1)


REGRESSION_FUNCS: dict[str, Callable] = {
    "zero": lambda x1, x2: np.zeros(np.broadcast(_coordsum(x1), _coordsum(x2)).shape),
    "constant": lambda x1, x2: np.ones(np.broadcast(_coordsum(x1), _coordsum(x2)).shape),
    "linear_additive": lambda x1, x2: _coordsum(x1) + _coordsum(x2),
    "sin_additive": lambda x1, x2: np.sum(np.sin(np.asarray(x1, dtype=float)), axis=-1)
    + np.sum(np.sin(np.asarray(x2, dtype=float)), axis=-1),
    "sin3_additive": lambda x1, x2: np.sum(np.sin(3.0 * np.asarray(x1, dtype=float)), axis=-1)
    + np.sum(np.sin(3.0 * np.asarray(x2, dtype=float)), axis=-1),
    "product": lambda x1, x2: _coordsum(x1) * _coordsum(x2),
}

DGP_KINDS = ("theorem1", "sigmoid_graphon", "threshold_graphon", "noiseless")


def make_dgp(kind: str, g_name: str = "sin_additive", d_x: int = 1,
             law: str = "uniform", beta: float = 2.0, l_const: float = 5.0) -> DgpSpec:
    """Shipped data-generating processes, addressable from config files."""
    reg_law = uniform_law(d_x) if law == "uniform" else truncnorm_law(d_x)
    if law not in ("uniform", "truncnorm"):
        raise ValueError(f"unknown regressor law {law!r}")
    holder = HolderInfo(beta=beta, l_const=l_const)
    if kind == "theorem1":
        if g_name not in REGRESSION_FUNCS:
            raise ValueError(f"unknown regression function {g_name!r}; known: {', '.join(sorted(REGRESSION_FUNCS))}")
        return DgpSpec(kind="gaussian-regression", name=f"theorem1:{g_name}",
                       regressor_law=reg_law, holder=holder, g=REGRESSION_FUNCS[g_name])
    if kind == "noiseless":
        if g_name not in REGRESSION_FUNCS:
            raise ValueError(f"unknown regression function {g_name!r}")
        g = REGRESSION_FUNCS[g_name]
        return DgpSpec(kind="graphon", name=f"noiseless:{g_name}", regressor_law=reg_law,
                       holder=holder, graphon=lambda x1, x2, u1, u2, v: g(x1, x2),
                       cond_mean=g, y_bound=None)
    if kind == "sigmoid_graphon":
        def h(x1, x2, u1, u2, v):
            return 1.0 / (1.0 + np.exp(-(_coordsum(x1) + _coordsum(x2) + u1 + u2 + v)))

        return DgpSpec(kind="graphon", name="sigmoid_graphon", regressor_law=reg_law,
                       holder=holder, graphon=h, y_bound=1.0)
    if kind == "threshold_graphon":
        def h(x1, x2, u1, u2, v):
            return (u1 + u2 + _coordsum(x1) + _coordsum(x2) > 0).astype(float)

        def cond_mean(x1, x2):
            return ndtr((_coordsum(x1) + _coordsum(x2)) / math.sqrt(2.0))

        return DgpSpec(kind="graphon", name="threshold_graphon", regressor_law=reg_law,
                       holder=holder, graphon=h, cond_mean=cond_mean, y_bound=1.0)
    raise ValueError(f"unknown dgp kind {kind!r}; known: {', '.join(DGP_KINDS)}")


# --- simulation -------------------------------------------------------------


def simulate_latents(spec: DgpSpec, n_units: int, seed: int):
    """Latent draws (x, u, v_pairs); v_pairs[p] = (V_ij, V_ji) for the p-th
    unordered pair (i < j) in lexicographic order."""
    if n_units < 2:
        raise ValueError("n_units must be >= 2")
    x = spec.regressor_law.sample(_stream(seed, _ROLE_X), n_units)
    x = np.asarray(x, dtype=float).reshape(n_units, spec.d_x)
    u = _stream(seed, _ROLE_U).standard_normal(n_units)
    n_pairs = n_units * (n_units - 1) // 2
    v_pairs = _stream(seed, _ROLE_V).standard_normal((n_pairs, 2))
    return x, u, v_pairs


def _v_matrix(n_units: int, v_pairs: np.ndarray) -> np.ndarray:
    v = np.zeros((n_units, n_units))
    iu, ju = np.triu_indices(n_units, k=1)
    v[iu, ju] = v_pairs[:, 0]
    v[ju, iu] = v_pairs[:, 1]
    return v


def simulate(spec: DgpSpec, n_units: int, seed: int) -> DyadicDataset:
    """Draw a dyadic dataset; deterministic in (spec, n_units, seed)."""
    x, u, v_pairs = simulate_latents(spec, n_units, seed)
    v = _v_matrix(n_units, v_pairs)
    x1 = x[:, None, :]
    x2 = x[None, :, :]
    if spec.kind == "gaussian-regression":
        y = spec.g(x1, x2) + u[:, None] + u[None, :] + v
    else:
        y = spec.graphon(x1, x2, u[:, None], u[None, :], v)
    y = np.asarray(y, dtype=float)
    np.fill_diagonal(y, 0.0)  # placeholder; DyadicDataset re-marks it NaN
    return DyadicDataset(x=x, y=y)


# --- assumption diagnostics -------------------------------------------------


@dataclass(frozen=True)
class MomentBounds:
    b4_hat: float
    b5_hat: float
    cond_moment_s: float | None
    s: float
    bounded_y: bool


def _conditional_draws(spec: DgpSpec, x1, x2, u1, u2, v) -> np.ndarray:
    # x1, x2: (G, d_x); latents: (mc, 1); result (mc, G)
    if spec.kind == "gaussian-regression":
        return spec.g(x1, x2)[None, :] + u1 + u2 + v
    return spec.graphon(x1, x2, u1, u2, v)


def dyad_moment_bounds(spec: DgpSpec, mc_reps: int, seed: int, s: float = 4.0,
                       grid_points: int = 9) -> MomentBounds:
    """Monte Carlo estimates of the density-weighted conditional moment
    suprema over a regressor grid (roles of B4, B5, and the s-th moment)."""
    if mc_reps < 1000:
        raise ValueError("mc_reps must be >= 1000")
    law = spec.regressor_law
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in zip(law.support_lo, law.support_hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)  # (G, d_x)
    g_count = pts.shape[0]
    rng = _stream(seed, 3)

    # pairs (x1, x2) over the grid product
    i1, i2 = np.meshgrid(np.arange(g_count), np.arange(g_count), indexing="ij")
    x1 = pts[i1.ravel()]
    x2 = pts[i2.ravel()]
    u1 = rng.standard_normal((mc_reps, 1))
    u2 = rng.standard_normal((mc_reps, 1))
    v12 = rng.standard_normal((mc_reps, 1))
    y12 = _conditional_draws(spec, x1, x2, u1, u2, v12)
    w_pair = law.density(x1) * law.density(x2)
    m2 = np.mean(y12**2, axis=0)
    if not np.all(np.isfinite(m2)):
        raise AssumptionViolation("non-finite conditional second moment encountered")
    b4_hat = float(np.max(m2 * w_pair))

    bounded = spec.y_bound is not None
    if bounded:
        cond_s = None
        s_out = math.inf
    else:
        ms = np.mean(np.abs(y12) ** s, axis=0)
        if not np.all(np.isfinite(ms)):
            raise AssumptionViolation(f"non-finite conditional moment of order {s}")
        cond_s = float(np.max(ms * w_pair))
        s_out = s

    # triples for B5 on a coarser grid; Y12 and Y13 share U1
    coarse = [ax[:: max(1, len(ax) // 5)] for ax in axes]
    cmesh = np.meshgrid(*coarse, indexing="ij")
    cpts = np.stack([m.ravel() for m in cmesh], axis=-1)
    cg = cpts.shape[0]
    j1, j2, j3 = np.meshgrid(np.arange(cg), np.arange(cg), np.arange(cg), indexing="ij")
    x1t, x2t, x3t = cpts[j1.ravel()], cpts[j2.ravel()], cpts[j3.ravel()]
    tu1 = rng.standard_normal((mc_reps, 1))
    tu2 = rng.standard_normal((mc_reps, 1))
    tu3 = rng.standard_normal((mc_reps, 1))
    tv12 = rng.standard_normal((mc_reps, 1))
    tv13 = rng.standard_normal((mc_reps, 1))
    y12t = _conditional_draws(spec, x1t, x2t, tu1, tu2, tv12)
    y13t = _conditional_draws(spec, x1t, x3t, tu1, tu3, tv13)
    m11 = np.mean(np.abs(y12t * y13t), axis=0)
    if not np.all(np.isfinite(m11)):
        raise AssumptionViolation("non-finite conditional cross moment encountered")
    w3 = law.density(x1t) * law.density(x2t) * law.density(x3t)
    b5_hat = float(np.max(m11 * w3))
    return MomentBounds(b4_hat=b4_hat, b5_hat=b5_hat, cond_moment_s=cond_s,
                        s=s_out, bounded_y=bounded)


def true_g_on_grid(spec: DgpSpec, grid, mc_integration: bool = False,
                   mc_reps: int = 20000, seed: int = 0) -> np.ndarray:
    """g(w) = E[Y_12 | W_12 = w] on a list of points w in R^(2 d_x)."""
    w = np.atleast_2d(np.asarray(grid, dtype=float))
    d = spec.d_x
    if w.shape[1] != 2 * d:
        raise ValueError(f"grid points must have length {2 * d}")
    x1, x2 = w[:, :d], w[:, d:]
    if spec.kind == "gaussian-regression":
        return np.asarray(spec.g(x1, x2), dtype=float)
    if spec.cond_mean is not None:
        return np.asarray(spec.cond_mean(x1, x2), dtype=float)
    if not mc_integration:
        raise ValueError(
            "graphon has no tractable conditional mean; pass mc_integration=True "
            "to integrate the latent noise by Monte Carlo"
        )
    rng = _stream(seed, 4)
    u1 = rng.standard_normal((mc_reps, 1))
    u2 = rng.standard_normal((mc_reps, 1))
    v = rng.standard_normal((mc_reps, 1))
    vals = spec.graphon(x1, x2, u1, u2, v)
    return np.mean(vals, axis=0)


# --- persistence ------------------------------------------------------------


def _sibling_paths(pairs_path: str):
    base, _ = os.path.splitext(pairs_path)
    return pairs_path, base + ".units.csv", base + ".manifest.json"


def save_dataset(data: DyadicDataset, pairs_path: str, meta: dict | None = None) -> dict:
    """Write pair-list CSV (i,j,y), unit CSV (i,x_1..x_d), and a JSON manifest.

    Floats are written with repr so the round trip is exact."""
    pairs_file, units_file, manifest_file = _sibling_paths(pairs_path)
    n, d = data.n_units, data.d_x
    with open(pairs_file, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "j", "y"])
        for i in range(n):
            for j in range(n):
                if i != j:
                    wr.writerow([i, j, repr(float(data.y[i, j]))])
    with open(units_file, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i"] + [f"x_{c + 1}" for c in range(d)])
        for i in range(n):
            wr.writerow([i] + [repr(float(v)) for v in data.x[i]])
    manifest = {
        "format": "dyadreg-dataset-v1",
        "n_units": n,
        "d_x": d,
        "pairs_file": os.path.basename(pairs_file),
        "units_file": os.path.basename(units_file),
        "meta": meta or {},
    }
    with open(manifest_file, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_dataset(pairs_path: str):
    """Inverse of save_dataset; returns (DyadicDataset, manifest dict)."""
    pairs_file, units_file, manifest_file = _sibling_paths(pairs_path)
    with open(manifest_file) as fh:
        manifest = json.load(fh)
    n, d = manifest["n_units"], manifest["d_x"]
    x = np.zeros((n, d))
    with open(units_file, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for row in rd:
            x[int(row[0])] = [float(v) for v in row[1:]]
    y = np.zeros((n, n))
    with open(pairs_file, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for row in rd:
            y[int(row[0]), int(row[1])] = float(row[2])
    return DyadicDataset(x=x, y=y), manifest
