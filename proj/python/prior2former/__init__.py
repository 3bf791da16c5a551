"""Evidential mask segmentation toolkit (native core)."""

from ._p2f import (
    beta_nll,
    dbscan_cosine,
    digamma,
    evidential_sample,
    expected_mask,
    generate_sample,
    hungarian,
    lgamma,
    pixel_anomaly_metrics,
    symmetric_dice,
)

__all__ = [
    "beta_nll",
    "dbscan_cosine",
    "digamma",
    "evidential_sample",
    "expected_mask",
    "generate_sample",
    "hungarian",
    "lgamma",
    "pixel_anomaly_metrics",
    "symmetric_dice",
]
