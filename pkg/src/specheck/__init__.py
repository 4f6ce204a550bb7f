"""Numerical verification toolkit for singular-value inequalities of matrix means."""

__version__ = "0.1.0"
