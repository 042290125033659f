"""Local density of states and survival probability for one-dimensional models."""

__version__ = "0.1.0"
