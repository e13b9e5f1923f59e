# ruff : noqa: F401
from dgnflow.metrics.distance import (
    GroupDistances,
    group_distance_ratio,
    group_distances,
    intra_group_distance,
)
from dgnflow.metrics.information import InfoGainEstimator, instance_info_gain
from dgnflow.metrics.report import MetricsReport, measure
