"""
Significance tests for the results tables
One-way ANOVA and Bonferroni-corrected pairwise Welch t-tests, with tails from
the regularized incomplete beta function.
"""
from typing import Sequence, Tuple

import numpy as np
from scipy.special import betainc

from errors import DimensionError


def _as_groups(groups: Sequence[Sequence[float]]):
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(arrays) < 2:
        raise DimensionError(f"need at least 2 groups, got {len(arrays)}")
    for i, g in enumerate(arrays):
        if g.shape[0] < 2:
            raise DimensionError(f"group {i} has {g.shape[0]} samples, need at least 2")
    return arrays


def f_tail(f_stat: float, df_between: float, df_within: float) -> float:
    """P(F > f_stat) for the F(df_between, df_within) distribution"""
    if f_stat <= 0.0:
        return 1.0
    x = df_within / (df_within + df_between * f_stat)
    return float(betainc(0.5 * df_within, 0.5 * df_between, x))


def t_two_sided(t_stat: float, df: float) -> float:
    """Two-sided Student-t tail P(|T| > |t_stat|)"""
    x = df / (df + t_stat * t_stat)
    return float(betainc(0.5 * df, 0.5, x))


def anova_oneway(groups: Sequence[Sequence[float]]) -> Tuple[float, float]:
    """
    Classical one-way ANOVA

    Args:
        groups: At least two groups of at least two samples each

    Returns:
        (F, p); with zero within-group variance, p is 0 if the means
        differ and 1 if every value is identical
    """
    arrays = _as_groups(groups)
    k = len(arrays)
    n_total = sum(g.shape[0] for g in arrays)
    grand_mean = np.concatenate(arrays).mean()
    ss_between = sum(g.shape[0] * (g.mean() - grand_mean) ** 2 for g in arrays)
    ss_within = sum(np.sum((g - g.mean()) ** 2) for g in arrays)
    df_between = k - 1
    df_within = n_total - k

    if ss_within == 0.0:
        if ss_between == 0.0:
            return 0.0, 1.0
        return float("inf"), 0.0

    f_stat = (ss_between / df_between) / (ss_within / df_within)
    return float(f_stat), f_tail(f_stat, df_between, df_within)


def welch_test(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Welch t statistic and uncorrected two-sided p with Welch-Satterthwaite df"""
    a, b = _as_groups([a, b])
    va, vb = a.var(ddof=1) / a.shape[0], b.var(ddof=1) / b.shape[0]
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0.0:
        return (0.0, 1.0) if diff == 0.0 else (float("inf") * np.sign(diff), 0.0)
    t_stat = diff / np.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (a.shape[0] - 1) + vb ** 2 / (b.shape[0] - 1))
    return float(t_stat), t_two_sided(t_stat, df)


def pairwise_welch(groups: Sequence[Sequence[float]]) -> np.ndarray:
    """
    Symmetric matrix of Bonferroni-corrected pairwise Welch p-values
    (diagonal is 1)
    """
    arrays = _as_groups(groups)
    k = len(arrays)
    n_pairs = k * (k - 1) // 2
    p_matrix = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            _, p = welch_test(arrays[i], arrays[j])
            p_matrix[i, j] = p_matrix[j, i] = min(1.0, p * n_pairs)
    return p_matrix
