"""Lightweight detection blocks, box losses, mAP evaluation and a static
cost model for a small-object road-anomaly detector."""

__version__ = "0.1.0"
