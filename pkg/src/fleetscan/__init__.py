"""Connectivity-preserving coverage planning and execution for a UAV line formation."""

__version__ = "0.1.0"
