"""Small statistical helpers shared by the diagnostics."""

import math

import numpy as np
from scipy import stats as sps


def wilson_interval(successes, trials, confidence=0.95):
    """Wilson score interval for a binomial proportion.

    Well-behaved at the boundary frequencies 0 and 1, which matter here:
    event certificates are one-sided, so the lower bound at small success
    counts is what gets reported.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z = sps.norm.ppf(0.5 + confidence / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    # At the boundary counts the exact bounds are 0 and 1; rounding in the
    # formula above can land a hair inside, so snap them.
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


def batch_mean_ci(values, confidence=0.95):
    """Mean and Student-t confidence interval from batch means."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise ValueError("need at least 2 batch means")
    mean = float(values.mean())
    sem = float(values.std(ddof=1) / math.sqrt(n))
    t = sps.t.ppf(0.5 + confidence / 2.0, n - 1)
    return mean, (mean - t * sem, mean + t * sem)
