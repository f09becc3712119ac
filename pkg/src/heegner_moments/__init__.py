"""Numerical experiments on central derivatives of quadratic twists of
elliptic curves, Heegner point heights and their first moment."""

__version__ = "0.1.0"
