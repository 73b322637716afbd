"""Bootstrap confidence intervals and the two hypothesis tests used to compare models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import McRepeatError, UndefinedMetricError
from .repeatability import empirical_percentile

DEFAULT_ITERATIONS = 500
ALPHA = 0.05


@dataclass(frozen=True)
class BootstrapResult:
    point_estimate: float
    samples: np.ndarray
    ci_low: float
    ci_high: float
    iterations: int
    seed: int


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str

    @property
    def significant(self) -> bool:
        return self.p_value < ALPHA


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    """Independent PCG64 stream for one bootstrap iteration.

    Equivalent to the ``iteration``-th child of ``SeedSequence(seed).spawn``,
    so results do not depend on how iterations are scheduled.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(iteration,))))


def bootstrap_metric(
    units: Sequence,
    metric: Callable[[Sequence], float],
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    max_retries: int = 50,
) -> BootstrapResult:
    """Bootstrap ``metric`` by resampling whole units with replacement.

    Each iteration draws ``len(units)`` indices from its own substream. If the
    metric raises :class:`UndefinedMetricError` on a resample (for example a
    degenerate kappa), the iteration redraws from the same substream up to
    ``max_retries`` times.
    """
    n = len(units)
    if n < 2:
        raise McRepeatError(f"bootstrap needs at least 2 units, got {n}")
    is_array = isinstance(units, np.ndarray)

    def take(idx):
        return units[idx] if is_array else [units[i] for i in idx]

    point = float(metric(units))
    samples = np.empty(iterations)
    for it in range(iterations):
        rng = iteration_rng(seed, it)
        for _attempt in range(max_retries + 1):
            idx = rng.integers(0, n, size=n)
            try:
                samples[it] = metric(take(idx))
                break
            except UndefinedMetricError:
                continue
        else:
            raise UndefinedMetricError(
                f"metric undefined on {max_retries + 1} consecutive resamples at iteration {it}"
            )
    ordered = np.sort(samples)
    return BootstrapResult(
        point_estimate=point,
        samples=samples,
        ci_low=empirical_percentile(ordered, 0.025),
        ci_high=empirical_percentile(ordered, 0.975),
        iterations=iterations,
        seed=seed,
    )


def welch_t_test(a, b) -> TestResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise McRepeatError("each sample needs at least 2 values")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0.0:
        # both samples constant
        if diff == 0.0:
            return TestResult(0.0, 1.0, "welch_t")
        return TestResult(math.copysign(math.inf, diff), 0.0, "welch_t")
    t = diff / math.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    # P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TestResult(float(t), min(1.0, max(0.0, p)), "welch_t")


# Royston (1995) AS R94 coefficients
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)
_SMALL = 1e-19


def _poly(coefs, x):
    """Evaluate ``coefs[0] + coefs[1]*x + ...``."""
    result = 0.0
    for c in reversed(coefs):
        result = result * x + c
    return result


def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights ``a`` for the W statistic of a sample of size ``n``."""
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    # approximate expected normal order statistics, ascending
    m = special.ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    summ2 = float(np.sum(m**2))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    w_last = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        w_next = _poly(_C2, rsn) - m[1] / ssumm2
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * w_last**2 - 2 * w_next**2))
        a = m / fac
        a[1], a[-2] = -w_next, w_next
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * w_last**2))
        a = m / fac
    a[0], a[-1] = -w_last, w_last
    return a


def shapiro_wilk(sample) -> TestResult:
    """Shapiro-Wilk normality test using Royston's approximation.

    Valid for ``3 <= n <= 5000``. The p-value is the upper normal tail of a
    transformed W (exact for n = 3).
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 3 or n > 5000:
        raise McRepeatError(f"Shapiro-Wilk requires 3 <= n <= 5000, got n={n}")
    rng_ = x[-1] - x[0]
    if rng_ < _SMALL:
        raise McRepeatError("zero range: sample is constant")
    a = shapiro_wilk_coefficients(n)
    xs = x / rng_
    xs = xs - xs.mean()
    w = float(np.dot(a, xs) ** 2 / np.dot(xs, xs))
    w = min(w, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return TestResult(w, float(min(1.0, max(0.0, p))), "shapiro_wilk")

    w1 = math.log(1.0 - w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 == -math.inf or w1 >= gamma:
            p = 1e-99 if w1 >= gamma else 1.0
            return TestResult(w, p, "shapiro_wilk")
        y = -math.log(gamma - w1)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        if w1 == -math.inf:
            return TestResult(w, 1.0, "shapiro_wilk")
        xx = math.log(n)
        y = w1
        mean = _poly(_C5, xx)
        sd = math.exp(_poly(_C6, xx))
    p = float(special.ndtr(-(y - mean) / sd))
    return TestResult(w, p, "shapiro_wilk")
