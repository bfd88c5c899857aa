"""Forecasting private-equity fund cash flows with the Yale model and
recurrent networks written in numpy."""

__version__ = "0.1.0"
