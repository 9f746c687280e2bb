"""Anomaly detection with bootstrapped inverse reinforcement learning."""

from ._core import Model, gradient_check, metrics, read_canonical, roc_area, run

__all__ = ["Model", "gradient_check", "metrics", "read_canonical", "roc_area", "run"]
