"""Numerical audits of weighted Sobolev and isoperimetric inequalities on
rotationally symmetric spaces with radial density."""

__version__ = "0.1.0"
