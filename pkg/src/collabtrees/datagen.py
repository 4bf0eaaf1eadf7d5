"""Synthetic data generators for the simulation designs.

Covariates come from a Gaussian copula with an AR(1) latent correlation, so
marginals are Uniform(0,1) with adjacent-column dependence controlled by one
parameter.  Response generators: a Friedman-style regression surface with one
pairwise interaction, a variant with three interactions sharing one feature,
and an independent-Bernoulli model with linear main effects plus signed XOR
interactions.  Feature indices are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ArgumentError


@dataclass(frozen=True)
class CopulaConfig:
    n: int
    p: int
    lam: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise ArgumentError("lam must lie in [0, 1)")
        if self.n < 1 or self.p < 1:
            raise ArgumentError("n and p must be positive")


def gaussian_copula_ar1(cfg: CopulaConfig) -> np.ndarray:
    """Sample (n, p) uniforms with AR(1) Gaussian-copula dependence.

    Latent normals follow ``Z_j = lam * Z_{j-1} + sqrt(1 - lam^2) * xi_j`` and
    are mapped through the standard normal CDF column by column.
    """
    rng = np.random.default_rng(cfg.seed)
    xi = rng.standard_normal((cfg.n, cfg.p))
    z = np.empty_like(xi)
    z[:, 0] = xi[:, 0]
    scale = math.sqrt(1.0 - cfg.lam**2)
    for j in range(1, cfg.p):
        z[:, j] = cfg.lam * z[:, j - 1] + scale * xi[:, j]
    return stats.norm.cdf(z)


def model_y1(x: np.ndarray, rng: np.random.Generator, noise_sd: float = 1.0) -> np.ndarray:
    """Friedman-variant response: three additive terms, a weak additive term,
    and one sine interaction between columns 8 and 9, plus Gaussian noise."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 10:
        raise ArgumentError("model_y1 needs at least 10 feature columns")
    signal = (
        5.0 * x[:, 0]
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 15.0 * x[:, 4]
        + 2.0 * x[:, 8]
        + 10.0 * np.sin(np.pi * (x[:, 8] - 0.5) * (x[:, 9] - 0.5))
    )
    if noise_sd > 0:
        signal = signal + rng.normal(0.0, noise_sd, size=x.shape[0])
    return signal


def model_y2(x: np.ndarray, rng: np.random.Generator, noise_sd: float = 1.0) -> np.ndarray:
    """Response with a weak additive term on column 9 and three sine
    interactions pairing columns 1, 5 and 8 with column 9."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 10:
        raise ArgumentError("model_y2 needs at least 10 feature columns")
    x10 = x[:, 9] - 0.5
    signal = (
        2.0 * x[:, 9]
        + 10.0 * np.sin(np.pi * (x[:, 1] - 0.5) * x10)
        + 10.0 * np.sin(np.pi * (x[:, 5] - 0.5) * x10)
        + 10.0 * np.sin(np.pi * (x[:, 8] - 0.5) * x10)
    )
    if noise_sd > 0:
        signal = signal + rng.normal(0.0, noise_sd, size=x.shape[0])
    return signal


def xor_linear_binary(
    n: int,
    p: int,
    s1: dict[int, float],
    s2: dict[tuple[int, int], float],
    marginals,
    rng: np.random.Generator,
    noise_sd: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Independent Bernoulli features with linear plus signed-XOR response.

    ``s1`` maps feature index -> linear coefficient on the centered feature;
    ``s2`` maps index pairs -> amplitude of the sign of the centered product.
    ``marginals`` is a success probability or one per feature.
    """
    pi = np.broadcast_to(np.asarray(marginals, dtype=float), (p,))
    if ((pi <= 0) | (pi >= 1)).any():
        raise ArgumentError("marginals must lie strictly inside (0, 1)")
    for j in s1:
        if not 0 <= j < p:
            raise ArgumentError(f"linear index {j} out of range")
    for pair in s2:
        l, k = pair
        if not (0 <= l < p and 0 <= k < p and l != k):
            raise ArgumentError(f"interaction pair {pair} malformed")
    x = (rng.random((n, p)) < pi).astype(float)
    centered = x - pi
    y = np.zeros(n)
    for j, beta in s1.items():
        y += beta * centered[:, j]
    for (l, k), beta in s2.items():
        prod = centered[:, l] * centered[:, k]
        y += beta * (np.sign(prod))
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, size=n)
    return x, y


def model_y1_r2_ceiling(p: int, lam: float, n_mc: int = 1_000_000, seed: int = 0) -> float:
    """Monte-Carlo population R-squared ceiling of the y1 surface with unit
    noise: signal variance over signal variance plus one."""
    cfg = CopulaConfig(n=n_mc, p=p, lam=lam, seed=seed)
    x = gaussian_copula_ar1(cfg)
    signal = model_y1(x, np.random.default_rng(seed), noise_sd=0.0)
    v = float(np.var(signal))
    return v / (v + 1.0)


def matrix_to_table(x: np.ndarray, y: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Name columns ``x1..xp`` (plus ``y``) for the CSV/encoding pipeline."""
    table = {f"x{j + 1}": x[:, j] for j in range(x.shape[1])}
    if y is not None:
        table["y"] = np.asarray(y)
    return table
