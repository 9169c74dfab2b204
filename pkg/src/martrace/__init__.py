"""Numerical laboratory for trace inequalities of Sobolev martingales on m-adic trees."""

__version__ = "0.1.0"
