"""Numerical laboratory for sparse domination and weighted singular integrals."""

from .dyadic import Box, DyadicCube, cover_ball, cover_ball_within
from .errors import ConvergenceError, InternalDefect, InvalidInput, ResolutionError
from .grid import Grid, GridFunction

__version__ = "0.1.0"

__all__ = [
    "Box",
    "DyadicCube",
    "cover_ball",
    "cover_ball_within",
    "Grid",
    "GridFunction",
    "InvalidInput",
    "ResolutionError",
    "InternalDefect",
    "ConvergenceError",
]
