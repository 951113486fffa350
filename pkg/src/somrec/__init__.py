"""Sensorimotor object recognition with graph object models and evidence-based pose inference."""

__version__ = "0.1.0"
