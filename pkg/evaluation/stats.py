"""
Paired significance test for success-rate drops.
"""
from typing import Sequence

from scipy.stats import binomtest


def paired_sign_test(baseline: Sequence[bool], treated: Sequence[bool]) -> float:
    """
    One-sided sign test that `treated` succeeds less often than `baseline`.

    Only discordant pairs (success under one condition but not the other)
    carry information; with none the p-value is 1.
    """
    if len(baseline) != len(treated):
        raise ValueError(f"paired samples differ in length: {len(baseline)} vs {len(treated)}")
    drops = sum(1 for b, t in zip(baseline, treated) if b and not t)
    gains = sum(1 for b, t in zip(baseline, treated) if t and not b)
    if drops + gains == 0:
        return 1.0
    return float(binomtest(drops, drops + gains, 0.5, alternative="greater").pvalue)
