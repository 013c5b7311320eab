"""Simulation of stochastic Volterra equations through Markovian lifts."""

from ._backend import USING_NUMBA, backend_name

__version__ = "0.1.0"
