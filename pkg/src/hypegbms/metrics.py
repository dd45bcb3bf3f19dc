"""External agreement scores between two labelings: ARI and NMI.

NMI uses the arithmetic mean of the two entropies as normalizer (the same
default as scikit-learn). Reported values differ between normalization
variants, so compare numbers only under the same convention.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import factorize
from .errors import InvalidArgument


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int


def contingency(labels_a, labels_b) -> ContingencyTable:
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if len(a) != len(b):
        raise InvalidArgument(f"label lengths differ: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise InvalidArgument("need at least two labels")
    ia = factorize(a.tolist())
    ib = factorize(b.tolist())
    ka, kb = int(ia.max()) + 1, int(ib.max()) + 1
    counts = np.bincount(ia * kb + ib, minlength=ka * kb).reshape(ka, kb)
    return ContingencyTable(counts, counts.sum(axis=1), counts.sum(axis=0), len(a))


def _pairs(counts):
    return sum(int(k) * (int(k) - 1) // 2 for k in counts)


def ari(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index.

    Pair counts are exact integers, so the only rounding is the final
    division. The expected index equals the maximum index only when both
    labelings are a single cluster or both are all singletons; those
    identical partitions score 1.
    """
    t = contingency(labels_a, labels_b)
    index = _pairs(t.counts.ravel())
    sum_a = _pairs(t.row_sums)
    sum_b = _pairs(t.col_sums)
    total = t.n * (t.n - 1) // 2
    # (index - expected) / (max - expected), scaled by 2 * total
    num = 2 * (index * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return -math.fsum(p * np.log(p))


def mutual_info(labels_a, labels_b) -> float:
    return _mutual_info(contingency(labels_a, labels_b))


def _mutual_info(t):
    nz = t.counts > 0
    pij = t.counts[nz] / t.n
    outer = np.outer(t.row_sums, t.col_sums)[nz] / (t.n * t.n)
    # fsum is order independent, which keeps nmi(a, b) == nmi(b, a) bit for bit
    return max(0.0, math.fsum(pij * np.log(pij / outer)))


def nmi(labels_a, labels_b) -> float:
    """Mutual information over the mean of the two label entropies.

    Two single-cluster labelings score 1; a single cluster against a
    non-trivial partition scores 0.
    """
    t = contingency(labels_a, labels_b)
    h_a = _entropy(t.row_sums, t.n)
    h_b = _entropy(t.col_sums, t.n)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    mi = _mutual_info(t)
    return float(min(1.0, mi / (0.5 * (h_a + h_b))))
