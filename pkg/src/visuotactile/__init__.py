"""Visuotactile sensor simulation and multimodal resting-state prediction."""

__version__ = "0.1.0"
