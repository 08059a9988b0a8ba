"""Demand maximization for water networks: MINLP models, piecewise-linear
relaxations and feasibility recovery by neighborhood search."""

__version__ = "0.1.0"
