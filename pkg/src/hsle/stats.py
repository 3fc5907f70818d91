"""Statistics utilities for the experiment harness: two-sample KS, Wilson
intervals, variance-slope fits and chain diagnostics."""

from __future__ import annotations

import math

import numpy as np

from .errors import TooFewSamples

KS_MIN_SAMPLES = 20


def kolmogorov_q(lam: float) -> float:
    """Tail of the Kolmogorov distribution: Q(lam) = 2 sum (-1)^{j-1} e^{-2 j^2 lam^2}."""
    if lam <= 0:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(max(total, 0.0), 1.0)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Exact two-sample KS statistic with the asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n1, n2 = a.size, b.size
    if n1 < KS_MIN_SAMPLES or n2 < KS_MIN_SAMPLES:
        raise TooFewSamples(f"need >= {KS_MIN_SAMPLES} samples per side")
    pooled = np.concatenate((a, b))
    cdf1 = np.searchsorted(a, pooled, side="right") / n1
    cdf2 = np.searchsorted(b, pooled, side="right") / n2
    d = float(np.max(np.abs(cdf1 - cdf2)))
    n_eff = n1 * n2 / (n1 + n2)
    p = kolmogorov_q(math.sqrt(n_eff) * d)
    return d, p


def ks_one_sample_normal(x, mean: float, std: float) -> tuple[float, float]:
    """One-sample KS against N(mean, std^2) with the asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n < KS_MIN_SAMPLES:
        raise TooFewSamples(f"need >= {KS_MIN_SAMPLES} samples")
    z = (x - mean) / std
    cdf = 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))
    up = np.arange(1, n + 1) / n - cdf
    lo = cdf - np.arange(0, n) / n
    d = float(max(up.max(), lo.max()))
    return d, kolmogorov_q(math.sqrt(n) * d)


def wilson_interval(k: int, n: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion at z sigmas."""
    if n <= 0:
        raise TooFewSamples("empty sample")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def variance_slope(w: np.ndarray, times, n_boot: int = 200,
                   seed: int = 0) -> dict:
    """OLS through the origin of Var(W_t) against t.

    ``w`` has shape (n_paths, n_times).  The confidence interval comes from
    a bootstrap over paths (times are strongly correlated along a path).
    """
    w = np.asarray(w, dtype=float)
    times = np.asarray(times, dtype=float)
    if w.ndim != 2 or w.shape[1] != times.size:
        raise TooFewSamples("w must be (n_paths, n_times)")
    if w.shape[0] < 200 or times.size < 3:
        raise TooFewSamples("need >= 200 paths and >= 3 time points")

    def slope_of(block: np.ndarray) -> float:
        var = block.var(axis=0, ddof=1)
        return float(np.dot(var, times) / np.dot(times, times))

    est = slope_of(w)
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = w.shape[0]
    boot = np.empty(n_boot)
    for b in range(n_boot):
        take = rng.integers(0, n, size=n)
        boot[b] = slope_of(w[take])
    se = float(boot.std(ddof=1))
    return {"slope": est, "se": se,
            "ci_low": est - 3.0 * se, "ci_high": est + 3.0 * se}


def batch_means_se(x, n_batches: int = 20) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    x = np.asarray(x, dtype=float)
    m = x.size // n_batches
    if m < 1:
        raise TooFewSamples("series too short for batch means")
    means = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def gelman_rubin(chains: list[np.ndarray]) -> float:
    """Potential scale reduction factor across scalar chains."""
    arrs = [np.asarray(c, dtype=float) for c in chains]
    n = min(a.size for a in arrs)
    if n < 10 or len(arrs) < 2:
        raise TooFewSamples("need >= 2 chains of length >= 10")
    arrs = np.stack([a[-n:] for a in arrs])
    m = arrs.shape[0]
    means = arrs.mean(axis=1)
    variances = arrs.var(axis=1, ddof=1)
    b = n * means.var(ddof=1)
    w = variances.mean()
    if w <= 0:
        return 1.0
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
