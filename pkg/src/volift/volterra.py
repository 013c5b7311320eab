"""Direct Euler discretization of the convolution equation.

This solver never sees the lift: kernel values enter through per-lag weight
tables. Drift weights are exact cell integrals of the kernel; diffusion
weights are the cell integral divided by the step (the L^2 projection onto
step functions), so singular kernels keep finite weights at lag one. It is
the independent reference the factor simulation is compared against.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gamma as gamma_fn

from .coefficients import Coefficients
from .kernels import (
    DampedKernel,
    ExpSumKernel,
    FractionalKernel,
    GammaKernel,
    Kernel,
    KernelError,
    ShiftedKernel,
)
from .lifted import SimGrid, direct_euler_ensemble
from .quadrature import DiscreteLiftMeasure

__all__ = [
    "ConvolutionWeights",
    "kernel_cell_integrals",
    "direct_euler",
    "compare_paths",
]


def _cell_integrals_closed(k: Kernel, edges: np.ndarray):
    """Exact antiderivative-difference cell integrals where closed forms exist."""
    if isinstance(k, ExpSumKernel):
        out = np.zeros(edges.size - 1)
        for c, y in k.terms:
            if y == 0.0:
                out += c * np.diff(edges)
            else:
                out += c * (np.exp(-y * edges[:-1]) - np.exp(-y * edges[1:])) / y
        return out
    if isinstance(k, FractionalKernel):
        a = k.alpha
        return np.diff(edges ** a) / gamma_fn(a + 1.0)
    if isinstance(k, GammaKernel):
        a, beta = k.alpha, k.beta
        return np.diff(gammainc(a, beta * edges)) / beta ** a
    if isinstance(k, ShiftedKernel) and isinstance(k.base, FractionalKernel):
        a, d = k.base.alpha, k.delta
        return np.diff((edges + d) ** a) / gamma_fn(a + 1.0)
    if isinstance(k, DampedKernel) and isinstance(k.base, FractionalKernel):
        a, beta = k.base.alpha, k.beta
        return np.diff(gammainc(a, beta * edges)) / beta ** a
    return None


def kernel_cell_integrals(k: Kernel, h: float, n: int) -> np.ndarray:
    """w[l] = integral of k over ((l-1)h, lh], l = 1..n; w[0] = 0."""
    if h <= 0 or n < 1:
        raise KernelError("need h > 0 and n >= 1")
    edges = h * np.arange(n + 1, dtype=float)
    vals = _cell_integrals_closed(k, edges)
    if vals is None:
        vals = np.empty(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for i in range(n):
                vals[i], _ = integrate.quad(
                    lambda u: float(k(u)), edges[i], edges[i + 1],
                    limit=200, epsabs=1e-14, epsrel=1e-10)
    return np.concatenate([[0.0], vals])


@dataclass(frozen=True)
class ConvolutionWeights:
    """Per-lag weight tables for one grid: wb (drift), ws (diffusion)."""

    h: float
    wb: np.ndarray
    ws: np.ndarray

    @staticmethod
    def from_kernels(k_b: Kernel, k_sigma: Kernel, g: SimGrid
                     ) -> "ConvolutionWeights":
        wb = kernel_cell_integrals(k_b, g.h, g.N)
        ws = kernel_cell_integrals(k_sigma, g.h, g.N) / g.h
        return ConvolutionWeights(h=g.h, wb=wb, ws=ws)

    @staticmethod
    def from_atoms(atoms_b: DiscreteLiftMeasure,
                   atoms_sigma: DiscreteLiftMeasure, g: SimGrid
                   ) -> "ConvolutionWeights":
        """Weights of the atomized (exponential-sum) kernels."""
        kb = ExpSumKernel(terms=tuple(zip(atoms_b.masses, atoms_b.nodes)))
        ks = ExpSumKernel(terms=tuple(zip(atoms_sigma.masses,
                                          atoms_sigma.nodes)))
        return ConvolutionWeights.from_kernels(kb, ks, g)


def direct_euler(k_b: Kernel, k_sigma: Kernel, c: Coefficients, x0: float,
                 g: SimGrid, dW: np.ndarray, t0: float = 0.0):
    """Euler path(s) of the convolution equation on shared noise.

    Returns (X, explosion) where X has one row per row of dW.
    """
    w = ConvolutionWeights.from_kernels(k_b, k_sigma, g)
    return direct_euler_ensemble(w.wb, w.ws, x0, c, g, dW, t0=t0)


def compare_paths(p1: np.ndarray, p2: np.ndarray) -> tuple[float, float]:
    """(sup_abs, rms) of the pointwise difference of two grid paths."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("paths must share the grid")
    d = np.abs(p1 - p2)
    return float(np.max(d)), float(np.sqrt(np.mean(d * d)))
