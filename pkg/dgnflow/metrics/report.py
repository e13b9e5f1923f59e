from dataclasses import asdict, dataclass

from dgnflow.metrics.distance import DEFAULT_PAIR_CAP, group_distances
from dgnflow.metrics.information import InfoGainEstimator

__all__ = ["MetricsReport", "measure"]


@dataclass
class MetricsReport:
    """Accuracy and over-smoothing metrics of one trained model.

    Attributes
    ----------
    depth : int
        Number of propagation layers K.
    test_accuracy : float
        Fraction of correctly classified test nodes.
    r_group : float
        Group distance ratio of the hidden representation.
    g_ins : float
        Instance information gain of the logits, clamped at zero.
    intra_group : float
        Mean intra-group distance of the hidden representation.
    pair_sample_size : int
        Pairs sampled per group pair, 0 when computed exactly.
    """

    depth: int
    test_accuracy: float
    r_group: float
    g_ins: float
    intra_group: float
    pair_sample_size: int = 0

    def to_dict(self):
        return asdict(self)


def measure(
    depth,
    test_accuracy,
    features,
    logits,
    hidden,
    labels,
    sigma2=1.0,
    pair_cap=DEFAULT_PAIR_CAP,
    seed=0,
    estimator=None,
):
    """Compute a :class:`MetricsReport`.

    The information gain is measured on the logits and the group distances
    on the hidden representation, grouped by ``labels``.

    Parameters
    ----------
    depth : int
    test_accuracy : float
    features : numpy.ndarray
        Input features given to the model.
    logits, hidden : Tensor or numpy.ndarray
    labels : numpy.ndarray
    sigma2 : float, optional
        Kernel variance of the information gain, by default 1.0
    pair_cap : int or None, optional
        Pair cap of the distance computations, by default 1e6
    seed : int, optional
        Seed of the pair sampling, by default 0
    estimator : InfoGainEstimator, optional
        Estimator for ``features`` to reuse across calls.

    Returns
    -------
    MetricsReport
    """
    if estimator is None:
        estimator = InfoGainEstimator(features, sigma2)
    distances = group_distances(hidden, labels, pair_cap, seed)
    return MetricsReport(
        depth=int(depth),
        test_accuracy=float(test_accuracy),
        r_group=float(distances.r_group),
        g_ins=float(estimator.gain(logits)),
        intra_group=float(distances.intra_group),
        pair_sample_size=int(distances.pair_sample_size),
    )

