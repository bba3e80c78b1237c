"""Trajectory preprocessing, metrics and numerical references for trace-grounded vision-language models."""
__version__ = "1.0.0"
