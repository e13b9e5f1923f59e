"""Group distance ratio and intra-group distance.

For groups L_1, ..., L_C (the node classes) the group distance ratio is::

    r_group = [1 / (C - 1)^2 * sum_{i != j} D(L_i, L_j)] / [1 / C * sum_i D(L_i, L_i)]

where ``D(A, B)`` is the mean L2 distance over all ordered pairs in A x B.
Intra-group means include the self-pairs at distance zero. Only nonempty
groups take part, so C is the number of distinct labels.

Group pairs with more than ``pair_cap`` node pairs are estimated from
``pair_cap`` uniformly sampled pairs. Sampling for group pair (i, j) is
seeded with ``(seed, i, j)``, so the intra-group means are identical in
:func:`group_distance_ratio` and :func:`intra_group_distance`.
"""

from typing import NamedTuple

import numba
import numpy as np

from dgnflow.errors import ParameterError, ShapeError

__all__ = [
    "GroupDistances",
    "group_distance_ratio",
    "group_distances",
    "intra_group_distance",
]

RATIO_EPS = 1e-12
DEFAULT_PAIR_CAP = 1_000_000


@numba.njit(nogil=True, cache=True)
def _block_distance_rows(a, b):
    rows = np.zeros(a.shape[0])
    for i in range(a.shape[0]):
        total = 0.0
        for j in range(b.shape[0]):
            s = 0.0
            for k in range(a.shape[1]):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            total += np.sqrt(s)
        rows[i] = total
    return rows


@numba.njit(nogil=True, cache=True)
def _pair_distances(a, b, ia, ib):
    out = np.zeros(ia.shape[0])
    for p in range(ia.shape[0]):
        s = 0.0
        for k in range(a.shape[1]):
            diff = a[ia[p], k] - b[ib[p], k]
            s += diff * diff
        out[p] = np.sqrt(s)
    return out


def _mean_distance(a, b, pair_cap, seed, i, j):
    p, q = a.shape[0], b.shape[0]
    if pair_cap is None or p * q <= pair_cap:
        return _block_distance_rows(a, b).sum() / (p * q), False
    rng = np.random.default_rng([seed, i, j])
    ia = rng.integers(0, p, size=pair_cap)
    ib = rng.integers(0, q, size=pair_cap)
    return _pair_distances(a, b, ia, ib).mean(), True


class GroupDistances(NamedTuple):
    """Group distance summary.

    Attributes
    ----------
    r_group : float
        Group distance ratio (nan with fewer than two groups).
    intra_group : float
        Mean intra-group distance, the denominator of the ratio.
    inter_group : float
        Mean inter-group distance, the numerator of the ratio.
    pair_sample_size : int
        ``pair_cap`` if any group pair was sampled, 0 if all were exact.
    """

    r_group: float
    intra_group: float
    inter_group: float
    pair_sample_size: int


def _groups(h, labels):
    h = np.ascontiguousarray(getattr(h, "data", h), dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if h.ndim != 2 or labels.shape[0] != h.shape[0]:
        raise ShapeError("group distance", h.shape, labels.shape)
    groups = [np.ascontiguousarray(h[labels == c]) for c in np.unique(labels)]
    return groups


def _intra_means(groups, pair_cap, seed):
    means, sampled = [], False
    for i, g in enumerate(groups):
        value, was_sampled = _mean_distance(g, g, pair_cap, seed, i, i)
        means.append(value)
        sampled |= was_sampled
    return np.array(means), sampled


def group_distances(h, labels, pair_cap=DEFAULT_PAIR_CAP, seed=0):
    """Inter- and intra-group distances and their ratio.

    Parameters
    ----------
    h : Tensor or numpy.ndarray
        n x d representations.
    labels : array_like
        Group of every row.
    pair_cap : int or None, optional
        Maximum number of node pairs evaluated per group pair, by default
        1e6; None for exact computation.
    seed : int, optional
        Seed of the pair sampling, by default 0

    Returns
    -------
    GroupDistances
    """
    groups = _groups(h, labels)
    if not groups:
        raise ParameterError("no nonempty group")
    intra, sampled = _intra_means(groups, pair_cap, seed)
    c = len(groups)
    denominator = intra.sum() / c
    if c < 2:
        cap = pair_cap if sampled else 0
        return GroupDistances(np.nan, denominator, np.nan, cap)
    inter = 0.0
    for i in range(c):
        for j in range(i + 1, c):
            value, was_sampled = _mean_distance(groups[i], groups[j], pair_cap, seed, i, j)
            inter += 2 * value
            sampled |= was_sampled
    numerator = inter / (c - 1) ** 2
    if denominator < RATIO_EPS:
        ratio = 1.0 if numerator < RATIO_EPS else numerator / RATIO_EPS
    else:
        ratio = numerator / denominator
    return GroupDistances(ratio, denominator, numerator, pair_cap if sampled else 0)


def group_distance_ratio(h, labels, pair_cap=DEFAULT_PAIR_CAP, seed=0):
    """Ratio of mean inter-group to mean intra-group distance.

    Small values indicate over-smoothing. When both distances vanish the
    representations have collapsed and 1.0 is returned.

    Parameters
    ----------
    h : Tensor or numpy.ndarray
        n x d representations.
    labels : array_like
        Group of every row.
    pair_cap : int or None, optional
        Maximum number of node pairs evaluated per group pair, by default 1e6
    seed : int, optional
        Seed of the pair sampling, by default 0

    Returns
    -------
    float

    Raises
    ------
    ParameterError
        If fewer than two groups are nonempty.
    """
    groups = np.unique(np.asarray(labels))
    if groups.size < 2:
        raise ParameterError("group distance ratio needs at least two nonempty groups")
    return float(group_distances(h, labels, pair_cap, seed).r_group)


def intra_group_distance(h, labels, pair_cap=DEFAULT_PAIR_CAP, seed=0):
    """Mean over groups of the mean pairwise distance within each group.

    Self-pairs are included. This is the denominator of
    :func:`group_distance_ratio`.
    """
    groups = _groups(h, labels)
    if not groups:
        raise ParameterError("no nonempty group")
    intra, _ = _intra_means(groups, pair_cap, seed)
    return float(intra.sum() / len(groups))
