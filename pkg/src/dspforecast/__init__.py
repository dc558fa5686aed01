"""Load forecasting toolkit and benchmark harness for stream-processing ingress rates."""

__version__ = "0.1.0"
