"""Simulation and analysis of two-stage (JSDM) massive MIMO downlink precoding."""

__version__ = "0.1.0"
