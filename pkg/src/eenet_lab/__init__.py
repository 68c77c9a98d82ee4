"""Contextual-bandit laboratory built around the EE-Net agent."""

__version__ = "0.1.0"
