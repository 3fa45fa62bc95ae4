"""
Summary statistics of local Lyapunov exponents.
"""

from typing import List, Optional, Sequence, Tuple, Union
import math

import attr
import numpy as np
from scipy import stats as _stats

from pysymde import InputError

__all__ = ['weighted_mean', 't_test_one_sample', 'ExponentSummary', 'summarize']

ArrayLike = Union[Sequence[float], np.ndarray]

def weighted_mean(values: ArrayLike, weights: Optional[ArrayLike] = None) -> float:
    """
    M{sum_i w_i v_i / sum_i w_i}.

    >>> weighted_mean([1.0, 2.0, 4.0], [1.0, 1.0, 2.0])
    2.75

    @raises InputError: If there are no values, or the weights do not sum to a positive number.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InputError("no values to average")
    if weights is None:
        return float(np.mean(v))
    w = np.asarray(weights, dtype=float)
    if w.shape != v.shape:
        raise InputError(f"{v.size} values but {w.size} weights")
    if not np.sum(w) > 0 or np.any(w < 0):
        raise InputError("weights must be non-negative with a positive sum")
    return float(np.average(v, weights=w))

def t_test_one_sample(values: ArrayLike) -> Tuple[float, float]:
    """
    Student's one-sample t-test of the null hypothesis "the mean is zero".

    @return: The t statistic M{mean / (s / sqrt(N))} and the two-sided p-value.
        Without variance, the p-value is 1 for a zero mean and 0 otherwise.
    @raises InputError: With fewer than two values.

    >>> t_test_one_sample([-1.0, 1.0])
    (0.0, 1.0)
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise InputError("the t-test needs at least two values")
    mean = float(np.mean(v))
    s = float(np.std(v, ddof=1))
    if s == 0:
        if mean == 0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (s / math.sqrt(len(v)))
    p = float(2 * _stats.t.sf(abs(t), len(v) - 1))
    return t, min(p, 1.0)

@attr.s(auto_attribs=True, frozen=True)
class ExponentSummary:
    """
    @ivar mean: Weighted mean of the local exponents.
    @ivar t: Statistic of the unweighted t-test against zero.
    @ivar p: Its two-sided p-value.
    """
    mean: float
    t: float
    p: float

def summarize(local_exponents: ArrayLike, weights: Optional[ArrayLike] = None) -> List[ExponentSummary]:
    """
    Summary of local exponents per column: rows are samples, columns exponents.
    The t-test ignores the weights.
    """
    table = np.asarray(local_exponents, dtype=float)
    if table.ndim == 1:
        table = table[:, np.newaxis]
    result = []
    for column in table.T:
        t, p = t_test_one_sample(column)
        result.append(ExponentSummary(weighted_mean(column, weights), t, p))
    return result
