"""Weighted Sobolev norms, weight-triple admissibility and dual-norm estimates.

The weights are polynomial families (1+x)^(2 eta - 1 + 2 i) for derivative
order i. Dual norms of discrete measures are estimated from below by pairing
against a dictionary of smooth test functions; decay exponents of the factor
semigroup come from a log-log fit of that estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .quadrature import DiscreteLiftMeasure

__all__ = [
    "WeightFamily",
    "WeightTriple",
    "GridFunction",
    "TripleReport",
    "DecayFit",
    "validate_weight_triple",
    "sobolev_norm",
    "dual_norm_estimate",
    "semigroup_decay_fit",
    "embedding_ratio",
    "default_grid",
    "default_dictionary",
]


def default_grid(x_max: float = 1e4, n: int = 4096) -> np.ndarray:
    """Log-spaced nodes on [0, x_max] with the origin included."""
    return np.concatenate([[0.0], np.geomspace(1e-4, x_max, n - 1)])


@dataclass(frozen=True)
class WeightFamily:
    """Weights w_i(x) = (1+x)^(2 eta - 1 + 2 i) for i = 0..order."""

    eta: float
    order: int = 1

    def exponent(self, i: int) -> float:
        return 2.0 * self.eta - 1.0 + 2.0 * i

    def component(self, i: int, x) -> np.ndarray:
        return (1.0 + np.asarray(x, dtype=float)) ** self.exponent(i)


@dataclass(frozen=True)
class WeightTriple:
    """Ordered weight exponents eta_+ < eta_~ < eta_- with decay data."""

    eta_plus: float
    eta_sim: float
    eta_minus: float
    theta_b: float
    theta_sigma: float
    eps: Optional[float] = None
    delta: Optional[float] = None


@dataclass
class TripleReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_weight_triple(t: WeightTriple) -> TripleReport:
    """Check every admissibility clause; returns the violated ones."""
    for theta in (t.theta_b, t.theta_sigma):
        if not (0.0 <= theta < 1.0):
            raise ValueError(f"decay exponents must lie in [0,1), got {theta}")
    v = []
    if not (t.eta_plus < t.eta_sim < t.eta_minus):
        v.append("ordering eta_+ < eta_~ < eta_- must be strict")
    if not (t.eta_minus > max(t.theta_b, t.theta_sigma)):
        v.append("eta_- must exceed max(theta_b, theta_sigma)")
    if t.theta_sigma == 0.5:
        v.append("boundary case theta_sigma = 1/2 unsupported")
    elif t.theta_sigma < 0.5:
        if t.eps is None or not (0.0 < t.eps < 0.5 - t.theta_sigma):
            v.append("need 0 < eps < 1/2 - theta_sigma")
        elif t.eta_plus != -t.eps:
            v.append("eta_+ must equal -eps")
    else:
        if t.delta is None or not (0.0 < t.delta < 0.5):
            v.append("need 0 < delta < 1/2")
        elif t.eta_plus != t.theta_sigma - 0.5 + t.delta:
            v.append("eta_+ must equal theta_sigma - 1/2 + delta")
    return TripleReport(v)


@dataclass(frozen=True)
class GridFunction:
    """Sampled test function on a fixed increasing grid."""

    x: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)
        if x.ndim != 1 or x.shape != v.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")

    def __call__(self, xq) -> np.ndarray:
        return np.interp(np.asarray(xq, dtype=float), self.x, self.values)


def sobolev_norm(f: GridFunction, w: WeightFamily, m: Optional[int] = None) -> float:
    """Weighted W^{m,2} norm via nonuniform central differences and trapezoid."""
    if m is None:
        m = w.order
    if f.x.size < m + 2:
        raise ValueError(f"grid too coarse for order-{m} derivatives")
    total = 0.0
    d = f.values
    for j in range(m + 1):
        if j > 0:
            d = np.gradient(d, f.x)
        total += float(np.trapezoid(d * d * w.component(j, f.x), f.x))
    return math.sqrt(total)


def _pairings(atoms: DiscreteLiftMeasure, dictionary: Sequence[GridFunction]) -> np.ndarray:
    return np.array([u(atoms.nodes) for u in dictionary])


def dual_norm_estimate(atoms: DiscreteLiftMeasure, w: WeightFamily,
                       dictionary: Sequence[GridFunction]) -> float:
    """Certified lower bound of the dual norm via a test-function dictionary."""
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    norms = np.array([sobolev_norm(u, w, m=1) for u in dictionary])
    pair = np.abs(_pairings(atoms, dictionary) @ atoms.masses)
    return float(np.max(pair / norms))


@dataclass
class DecayFit:
    gamma_hat: float
    t_used: np.ndarray
    dual_norms: np.ndarray
    excluded: int  # points dropped as numerically zero


def semigroup_decay_fit(atoms: DiscreteLiftMeasure, w: WeightFamily,
                        t_grid: Sequence[float],
                        dictionary: Sequence[GridFunction]) -> DecayFit:
    """Fit the small-time decay exponent of the dual norm of the decayed measure.

    Returns gamma_hat with dual_norm(t) ~ C t^(-gamma_hat) fitted by least
    squares on the small-t half of the grid.
    """
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    t_grid = np.asarray(t_grid, dtype=float)
    norms = np.array([sobolev_norm(u, w, m=1) for u in dictionary])
    pair = _pairings(atoms, dictionary)
    d_vals = np.empty_like(t_grid)
    for i, t in enumerate(t_grid):
        weights_t = atoms.masses * np.exp(-atoms.nodes * t)
        d_vals[i] = np.max(np.abs(pair @ weights_t) / norms)
    keep = d_vals > 1e-14
    excluded = int(np.sum(~keep))
    t_k, d_k = t_grid[keep], d_vals[keep]
    half = t_k <= np.median(t_k)
    slope, _ = np.polyfit(np.log(t_k[half]), np.log(d_k[half]), 1)
    return DecayFit(gamma_hat=-float(slope), t_used=t_k, dual_norms=d_k,
                    excluded=excluded)


def embedding_ratio(dictionary: Sequence[GridFunction],
                    w_c: Callable[[np.ndarray], np.ndarray],
                    w: WeightFamily) -> float:
    """Empirical sup-norm/Sobolev-norm constant over the dictionary."""
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    ratios = []
    for u in dictionary:
        sup = float(np.max(np.abs(w_c(u.x) * u.values)))
        ratios.append(sup / sobolev_norm(u, w, m=1))
    return max(ratios)


def default_dictionary(grid: Optional[np.ndarray] = None,
                       center_max: float = 1e3,
                       n_centers: int = 26) -> list[GridFunction]:
    """Gaussians across scales, constants and power decays on the default grid.

    Gaussian centers must reach ~1/t_min of the intended probing window for
    decay fits to see the localized branch of the dual norm.
    """
    if grid is None:
        grid = default_grid()
    out = [GridFunction(grid, np.ones_like(grid), label="const")]
    for q in (0.5, 1.0, 2.0):
        out.append(GridFunction(grid, (1.0 + grid) ** (-q), label=f"pow{q}"))
    for mu in np.geomspace(1e-2, center_max, n_centers):
        for frac in (0.5, 0.125):
            s = mu * frac
            vals = np.exp(-0.5 * ((grid - mu) / s) ** 2)
            out.append(GridFunction(grid, vals, label=f"gauss(mu={mu:.3g},s={s:.3g})"))
    return out
