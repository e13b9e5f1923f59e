"""Instance information gain.

Kernel density estimate of the mutual information between the input
features X and the final representation, with every node binned by the
argmax of its logits. With the Gaussian kernel
``K_ij = exp(-||x_i - x_j||^2 / (8 sigma2))``::

    H(X)   = -1/n sum_i log(1/n sum_j K_ij)
    H(X|Z) = sum_c p_c * [-1/P_c sum_{i in c} log(1/P_c sum_{j in c} K_ij)]
    g_ins  = max(0, H(X) - H(X|Z))

where P_c is the size of bin c and ``p_c = P_c / n``. The sums include
``j = i``.

Example::

    from dgnflow.metrics import InfoGainEstimator

    estimator = InfoGainEstimator(graph.features, sigma2=1.0)
    estimator.gain(logits)  # reuses the pairwise feature distances
"""

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from dgnflow.errors import ParameterError, ShapeError

__all__ = ["InfoGainEstimator", "instance_info_gain"]

# rows of the kernel matrix evaluated at once
CHUNK_ROWS = 1024
# largest n*n kernel kept in memory between calls
MAX_CACHED_ENTRIES = 50_000_000


class InfoGainEstimator:
    """Instance information gain for fixed input features.

    The pairwise feature kernel does not depend on the representation, so it
    is evaluated once and kept when it fits in memory.

    Parameters
    ----------
    features : Tensor or numpy.ndarray
        n x d input features.
    sigma2 : float, optional
        Variance of the Gaussian kernel, by default 1.0

    Raises
    ------
    ParameterError
        If ``sigma2 <= 0`` or ``features`` is empty.
    """

    def __init__(self, features, sigma2=1.0):
        if sigma2 <= 0:
            raise ParameterError(f"sigma2 must be positive, got {sigma2}")
        x = np.asarray(getattr(features, "data", features), dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
            raise ParameterError("instance information gain needs non-empty features")
        self.x = x
        self.sigma2 = sigma2
        self.n = x.shape[0]
        self._kernel = None
        if self.n * self.n <= MAX_CACHED_ENTRIES:
            self._kernel = self._log_kernel(slice(0, self.n))
        row_lse = [logsumexp(k, axis=1) for _, k in self._chunks()]
        self.marginal = np.log(self.n) - np.concatenate(row_lse)

    def __repr__(self):
        return f"InfoGainEstimator(n={self.n}, sigma2={self.sigma2})"

    def _log_kernel(self, rows):
        return -cdist(self.x[rows], self.x, "sqeuclidean") / (8.0 * self.sigma2)

    def _chunks(self):
        for start in range(0, self.n, CHUNK_ROWS):
            rows = slice(start, min(start + CHUNK_ROWS, self.n))
            if self._kernel is not None:
                yield rows, self._kernel[rows]
            else:
                yield rows, self._log_kernel(rows)

    @property
    def entropy(self):
        """Kernel estimate of the feature entropy H(X)."""
        return float(self.marginal.mean())

    def conditional_entropy(self, bins):
        """Kernel estimate of H(X|Z) for integer bin assignments."""
        bins = np.asarray(bins).ravel()
        if bins.shape[0] != self.n:
            raise ShapeError("conditional_entropy", bins.shape, (self.n,))
        conditional = np.empty(self.n)
        members = {c: np.flatnonzero(bins == c) for c in np.unique(bins)}
        for rows, k in self._chunks():
            chunk_bins = bins[rows]
            for c, cols in members.items():
                local = np.flatnonzero(chunk_bins == c)
                if local.size == 0:
                    continue
                lse = logsumexp(k[np.ix_(local, cols)], axis=1)
                conditional[rows.start + local] = np.log(cols.size) - lse
        return float(conditional.mean())

    def gain(self, logits):
        """Instance information gain of representations binned by argmax.

        Ties are broken by the lowest class index.
        """
        logits = np.asarray(getattr(logits, "data", logits))
        if logits.ndim != 2 or logits.shape[0] != self.n or logits.shape[1] < 1:
            raise ShapeError("instance_info_gain", logits.shape, (self.n, "C"))
        bins = np.argmax(logits, axis=1)
        return max(0.0, self.entropy - self.conditional_entropy(bins))


def instance_info_gain(features, logits, sigma2=1.0):
    """Instance information gain of ``logits`` about ``features``.

    Parameters
    ----------
    features : Tensor or numpy.ndarray
        n x d input features.
    logits : Tensor or numpy.ndarray
        n x C final representations; nodes are binned by their argmax.
    sigma2 : float, optional
        Variance of the Gaussian kernel, by default 1.0

    Returns
    -------
    float
        Non-negative estimate.

    Raises
    ------
    ParameterError
        If ``sigma2 <= 0`` or the input is empty.
    """
    return InfoGainEstimator(features, sigma2).gain(logits)
