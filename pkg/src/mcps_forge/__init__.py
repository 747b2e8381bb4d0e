"""Compose, optimise and analyse multicomponent predictive systems."""

__version__ = "0.1.0"
