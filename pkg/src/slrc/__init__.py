"""Reservoir-computing forecasting: echo state networks, next-generation RC and a
simulated solitary-like-wave film reservoir driven without output feedback."""

from .timeseries import TimeSeries

__version__ = "0.1.0"
__all__ = ["TimeSeries"]
