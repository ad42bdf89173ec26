"""Synthetic benchmark generators, Latin hypercube designs, CSV ingestion,
and the train/test split protocol.

Each generator returns a Dataset carrying the noiseless truth (and regime
labels where the surface is piecewise) so tests can score against the
underlying function rather than noisy observations. Generators are pure
functions of (config, seed).

Closed forms not fully pinned down by their sources are documented
reconstructions: the 1D jump uses sin(6x) + 4*1{x > 0.5}; the 2D jump uses
a sinusoidal class boundary sin(2.2 x1 + 0.3) > x2 with Gaussian component
means 0.2 / 0.8 and sd 0.05; the offset Michalewicz plateau is the set
where the standard m=10 function is within 1e-3 of zero, raised to exactly
0.5; exp2d is x1 exp(-x1^2 - x2^2) on [-2, 4]^2 rescaled to the unit
square; proxy7d is an additive sinusoid/quadratic mix.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .gp import gp_prior_sample
from .rng import SeededRng

__all__ = [
    "Dataset",
    "BgpConfig",
    "friedman",
    "gen_friedman",
    "gen_bgp",
    "gen_jump1d",
    "gen_jump2d_sine",
    "michalewicz_offset",
    "exp2d",
    "proxy7d",
    "gen_michalewicz",
    "gen_exp2d",
    "gen_proxy7d",
    "gen_heteroskedastic",
    "lhs",
    "split",
    "load_csv",
    "save_csv",
]


@dataclass
class Dataset:
    """Inputs, responses, and generator-side metadata for one problem."""

    x: np.ndarray
    y: np.ndarray
    truth: np.ndarray | None = None
    regime: np.ndarray | None = None
    name: str = ""
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if self.x.shape[0] == 1 and np.asarray(self.y).size > 1:
            self.x = self.x.T
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        n = self.y.shape[0]
        if self.x.shape[0] != n:
            raise ValueError(
                f"x has {self.x.shape[0]} rows but y has {n}")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("inputs must be finite")
        for attr in ("truth", "regime"):
            v = getattr(self, attr)
            if v is not None:
                v = np.asarray(v).reshape(-1)
                if v.shape[0] != n:
                    raise ValueError(f"{attr} length {v.shape[0]} != n {n}")
                setattr(self, attr, v.astype(
                    np.float64 if attr == "truth" else np.int64))

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    def take(self, idx):
        """Row subset preserving metadata."""
        return Dataset(
            x=self.x[idx],
            y=self.y[idx],
            truth=None if self.truth is None else self.truth[idx],
            regime=None if self.regime is None else self.regime[idx],
            name=self.name,
            seed=self.seed,
            meta=dict(self.meta),
        )


def friedman(x):
    """f(x) = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 on [0,1]^10.

    Inputs 6..10 are inert. Scalar version of the benchmark surface.
    """
    scalar = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 10:
        raise ValueError("friedman expects 10 input dimensions")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("friedman inputs must lie in [0, 1]^10")
    f = (10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
         + 20.0 * (x[:, 2] - 0.5) ** 2 + 10.0 * x[:, 3] + 5.0 * x[:, 4])
    return float(f[0]) if scalar else f


def gen_friedman(n, noise_sd=1.0, seed=0):
    rng = _rng(seed)
    x = rng.uniform(size=(n, 10))
    truth = friedman(x)
    y = truth + (rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 else 0.0)
    return Dataset(x, y, truth=truth, name="friedman", seed=_seed_of(seed),
                   meta={"noise_sd": noise_sd})


@dataclass
class BgpConfig:
    """Piecewise-stationary GP benchmark constants.

    Two squared-exponential GP draws (means 0 and 13, variance 9,
    lengthscale 0.1 d) glued along a random hyperplane a.x = 0, plus
    N(0, 4) noise: jump-to-noise ratio 13/2.
    """

    d: int = 2
    n: int = 2000
    noise_sd: float = 2.0
    variance: float = 9.0
    means: tuple = (0.0, 13.0)
    seed: int = 0

    def __post_init__(self):
        if self.d not in (2, 3, 4):
            raise ValueError("bgp dimension must be 2, 3, or 4")
        if self.n > 4000:
            raise ValueError("bgp generation is dense-Cholesky bound; n <= 4000")

    @property
    def lengthscale(self):
        return 0.1 * self.d


def gen_bgp(cfg: BgpConfig):
    """Draw one piecewise-stationary instance.

    Both latent surfaces are sampled jointly on the full point set so the
    discontinuity is purely the regime switch. Regime label 1 marks the
    a.x >= 0 half (the mean-0 surface).
    """
    rng = SeededRng(cfg.seed)
    x = rng.uniform(-0.5, 0.5, size=(cfg.n, cfg.d))
    a = rng.choice(np.array([-1.0, 1.0]), size=cfg.d)
    regime = (x @ a >= 0).astype(np.int64)
    f1 = gp_prior_sample(x, rng, variance=cfg.variance, mean=cfg.means[0],
                         kernel="se", se_lengthscale=cfg.lengthscale)
    f2 = gp_prior_sample(x, rng, variance=cfg.variance, mean=cfg.means[1],
                         kernel="se", se_lengthscale=cfg.lengthscale)
    truth = np.where(regime == 1, f1, f2)
    y = truth + rng.normal(0.0, cfg.noise_sd, size=cfg.n)
    return Dataset(x, y, truth=truth, regime=regime,
                   name=f"bgp_d{cfg.d}", seed=cfg.seed,
                   meta={"a": a.tolist(), "lengthscale": cfg.lengthscale,
                         "noise_sd": cfg.noise_sd, "means": list(cfg.means),
                         "variance": cfg.variance})


def gen_jump1d(n, noise_sd=0.3, seed=0, jump_height=4.0):
    """1D step benchmark: sin(6x) + jump_height * 1{x > 0.5} on [0, 1]."""
    rng = _rng(seed)
    x = rng.uniform(size=(n, 1))
    truth = np.sin(6.0 * x[:, 0]) + jump_height * (x[:, 0] > 0.5)
    y = truth + (rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 else 0.0)
    return Dataset(x, y, truth=truth,
                   regime=(x[:, 0] > 0.5).astype(np.int64),
                   name="jump1d", seed=_seed_of(seed),
                   meta={"noise_sd": noise_sd, "jump_height": jump_height})


JUMP2D_SCALE = 2.2
JUMP2D_PHASE = 0.3
JUMP2D_MEANS = (0.2, 0.8)
JUMP2D_SD = 0.05


def gen_jump2d_sine(n, seed=0):
    """2D two-component benchmark with a sinusoidal class boundary.

    regime = 1{sin(2.2 x1 + 0.3) > x2}; responses are Gaussian with means
    0.2 (regime 0) and 0.8 (regime 1), sd 0.05, so the marginal response
    is bimodal by construction. When n is a perfect square the inputs
    form a regular sqrt(n) x sqrt(n) grid (10201 -> 101 x 101), otherwise
    they are uniform draws.
    """
    rng = _rng(seed)
    root = int(round(math.sqrt(n)))
    if root * root == n:
        axis = np.linspace(0.0, 1.0, root)
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        x = np.column_stack([g1.ravel(), g2.ravel()])
    else:
        x = rng.uniform(size=(n, 2))
    regime = (np.sin(JUMP2D_SCALE * x[:, 0] + JUMP2D_PHASE)
              > x[:, 1]).astype(np.int64)
    truth = np.where(regime == 1, JUMP2D_MEANS[1], JUMP2D_MEANS[0])
    y = truth + JUMP2D_SD * rng.normal(size=n)
    return Dataset(x, y, truth=truth, regime=regime, name="jump2d",
                   seed=_seed_of(seed),
                   meta={"scale": JUMP2D_SCALE, "phase": JUMP2D_PHASE,
                         "means": list(JUMP2D_MEANS), "sd": JUMP2D_SD})


def michalewicz_offset(x):
    """Offset Michalewicz (m=10) on the unit cube, d=4.

    The cube is mapped to [0, pi]^4; wherever the standard function is
    within 1e-3 of zero (its plateau) the value is exactly 0.5, creating
    a jump boundary around the steep valleys.
    """
    scalar = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 4:
        raise ValueError("michalewicz_offset expects 4 input dimensions")
    z = math.pi * x
    i = np.arange(1, 5)
    base = -np.sum(np.sin(z) * np.sin(i * z * z / math.pi) ** 20, axis=1)
    out = np.where(np.abs(base) < 1e-3, 0.5, base)
    return float(out[0]) if scalar else out


def exp2d(x):
    """2D exponential test function on the unit square.

    Internal coordinates u = 6x - 2 span [-2, 4]^2; f = u1 exp(-u1^2 - u2^2).
    """
    scalar = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 2:
        raise ValueError("exp2d expects 2 input dimensions")
    u = 6.0 * x - 2.0
    out = u[:, 0] * np.exp(-u[:, 0] ** 2 - u[:, 1] ** 2)
    return float(out[0]) if scalar else out


def proxy7d(x):
    """Additive smooth 7D proxy: sum_i [sin(2 pi x_i)/i + (i/7)(x_i-0.5)^2]."""
    scalar = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 7:
        raise ValueError("proxy7d expects 7 input dimensions")
    i = np.arange(1, 8)
    out = np.sum(np.sin(2.0 * math.pi * x) / i + (i / 7.0) * (x - 0.5) ** 2,
                 axis=1)
    return float(out[0]) if scalar else out


def _gen_from_function(fn, d, name, n, noise_sd, seed):
    rng = _rng(seed)
    x = lhs(n, d, rng)
    truth = fn(x)
    y = truth + (rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 else 0.0)
    return Dataset(x, y, truth=truth, name=name, seed=_seed_of(seed),
                   meta={"noise_sd": noise_sd})


def gen_michalewicz(n, noise_sd=0.0, seed=0):
    return _gen_from_function(michalewicz_offset, 4, "michalewicz", n,
                              noise_sd, seed)


def gen_exp2d(n, noise_sd=0.0, seed=0):
    return _gen_from_function(exp2d, 2, "exp2d", n, noise_sd, seed)


def gen_proxy7d(n, noise_sd=0.0, seed=0):
    return _gen_from_function(proxy7d, 7, "proxy7d", n, noise_sd, seed)


def gen_heteroskedastic(n, seed=0, sd_low=0.1, sd_high=1.0, change=0.5):
    """1D smooth mean with a step change in noise scale at x = change."""
    rng = _rng(seed)
    x = rng.uniform(size=(n, 1))
    truth = np.sin(2.0 * math.pi * x[:, 0])
    sd = np.where(x[:, 0] < change, sd_low, sd_high)
    y = truth + sd * rng.normal(size=n)
    return Dataset(x, y, truth=truth,
                   regime=(x[:, 0] >= change).astype(np.int64),
                   name="heteroskedastic", seed=_seed_of(seed),
                   meta={"sd_low": sd_low, "sd_high": sd_high,
                         "change": change})


def lhs(n, d, seed=0):
    """Latin hypercube on [0,1]^d: one point per stratum per dimension,
    independently permuted columns, uniform jitter within strata."""
    if n < 1 or d < 1:
        raise ValueError("lhs needs n >= 1 and d >= 1")
    rng = _rng(seed)
    out = np.empty((n, d))
    for k in range(d):
        out[:, k] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return out


def split(dataset, train_frac, seed=0):
    """Seeded permutation split; train size floors so identical seeds give
    identical index sets across methods."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly inside (0, 1)")
    rng = _rng(seed)
    perm = rng.permutation(dataset.n)
    n_train = int(math.floor(dataset.n * train_frac))
    if n_train == 0 or n_train == dataset.n:
        raise ValueError("split would leave an empty train or test side")
    return dataset.take(perm[:n_train]), dataset.take(perm[n_train:])


def save_csv(dataset, path):
    """Write a dataset as numeric CSV with x1..xd, y, optional truth and
    regime columns. Floats use shortest round-trip decimal form."""
    cols = [f"x{k + 1}" for k in range(dataset.d)] + ["y"]
    if dataset.truth is not None:
        cols.append("truth")
    if dataset.regime is not None:
        cols.append("regime")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[i]]
            row.append(repr(float(dataset.y[i])))
            if dataset.truth is not None:
                row.append(repr(float(dataset.truth[i])))
            if dataset.regime is not None:
                row.append(str(int(dataset.regime[i])))
            writer.writerow(row)


def load_csv(path, input_columns, response_column, truth_column=None,
             regime_column=None, name=None):
    """Read a headed CSV into a Dataset.

    Errors name the offending column or the (row, column) of the first
    non-numeric cell; header row counts as row 0.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    wanted = list(input_columns) + [response_column]
    if truth_column:
        wanted.append(truth_column)
    if regime_column:
        wanted.append(regime_column)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise ValueError(
            f"{path}: missing column(s) {missing}; header has {header}")
    idx = {c: header.index(c) for c in wanted}

    def parse(cell, r, c):
        try:
            return float(cell)
        except ValueError:
            raise ValueError(
                f"{path}: non-numeric cell at row {r}, column {c!r}: "
                f"{cell!r}") from None

    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    x = np.array([[parse(row[idx[c]], r + 1, c) for c in input_columns]
                  for r, row in enumerate(body)])
    y = np.array([parse(row[idx[response_column]], r + 1, response_column)
                  for r, row in enumerate(body)])
    truth = regime = None
    if truth_column:
        truth = np.array([parse(row[idx[truth_column]], r + 1, truth_column)
                          for r, row in enumerate(body)])
    if regime_column:
        regime = np.array([int(parse(row[idx[regime_column]], r + 1,
                                     regime_column))
                           for r, row in enumerate(body)])
    return Dataset(x, y, truth=truth, regime=regime,
                   name=name or os.path.splitext(os.path.basename(path))[0])


def _rng(seed):
    return seed if isinstance(seed, SeededRng) else SeededRng(seed)


def _seed_of(seed):
    return None if isinstance(seed, SeededRng) else int(seed)
