"""Catalog of completely monotone kernels and their lift measures.

Every kernel k in the catalog is the Laplace transform of a nonnegative
measure nu on [0, inf): k(t) = int exp(-t x) nu(dx). The measure is what
gets discretized into the factor system, so each catalog entry carries
its measure in closed form (atoms or a density).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

__all__ = [
    "Kernel",
    "ExpSumKernel",
    "FractionalKernel",
    "GammaKernel",
    "DampedKernel",
    "ShiftedKernel",
    "LiftMeasureSpec",
    "KernelError",
    "TailError",
    "eval_kernel",
    "lift_measure",
    "laplace_of_measure",
    "check_complete_monotonicity",
    "CMReport",
    "kernel_from_config",
    "theta_integral",
]

# Additive slack on the minimal decay exponent of power-law measures; keeps
# the decay integral strictly convergent.
THETA_MARGIN = 0.05

DEFAULT_X_MIN = 1e-6
DEFAULT_X_MAX = 1e6


class KernelError(ValueError):
    """Invalid kernel parameters or evaluation outside the domain."""


class TailError(RuntimeError):
    """Truncated measure integral with a tail estimate above tolerance."""

    def __init__(self, message: str, tail_estimate: float):
        super().__init__(message)
        self.tail_estimate = tail_estimate


def _as_positive_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise KernelError("kernel evaluation requires t > 0")
    return t


class Kernel:
    """Base class; subclasses implement _eval on validated positive t."""

    def __call__(self, t):
        t = _as_positive_times(t)
        out = self._eval(t)
        return float(out) if np.isscalar(t) or out.ndim == 0 else out

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ExpSumKernel(Kernel):
    """k(t) = sum_i c_i exp(-y_i t) with c_i > 0, y_i >= 0."""

    terms: Tuple[Tuple[float, float], ...]  # (c_i, y_i)

    def __post_init__(self):
        if not self.terms:
            raise KernelError("ExpSum kernel needs at least one term")
        for c, y in self.terms:
            if c <= 0:
                raise KernelError(f"ExpSum coefficient must be positive, got {c}")
            if y < 0:
                raise KernelError(f"ExpSum rate must be nonnegative, got {y}")
        object.__setattr__(self, "terms", tuple((float(c), float(y)) for c, y in self.terms))

    def _eval(self, t):
        out = np.zeros_like(t)
        for c, y in self.terms:
            out += c * np.exp(-y * t)
        return out


@dataclass(frozen=True)
class FractionalKernel(Kernel):
    """k(t) = t^(alpha-1) / Gamma(alpha), alpha in (0, 1). Singular at 0."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise KernelError(f"fractional order must lie in (0,1), got {self.alpha}")

    def _eval(self, t):
        return t ** (self.alpha - 1.0) / gamma_fn(self.alpha)


@dataclass(frozen=True)
class GammaKernel(Kernel):
    """k(t) = exp(-beta t) t^(alpha-1) / Gamma(alpha)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise KernelError(f"gamma-kernel order must lie in (0,1), got {self.alpha}")
        if self.beta <= 0:
            raise KernelError(f"gamma-kernel damping must be positive, got {self.beta}")

    def _eval(self, t):
        return np.exp(-self.beta * t) * t ** (self.alpha - 1.0) / gamma_fn(self.alpha)


def _check_base(base: Kernel):
    if isinstance(base, (DampedKernel, ShiftedKernel)):
        raise KernelError("wrapper kernels may only wrap plain catalog kernels")
    if not isinstance(base, Kernel):
        raise KernelError(f"base must be a catalog kernel, got {type(base).__name__}")


@dataclass(frozen=True)
class DampedKernel(Kernel):
    """k(t) = exp(-beta t) * base(t); lift measure is the base measure shifted by beta."""

    base: Kernel
    beta: float

    def __post_init__(self):
        _check_base(self.base)
        if self.beta <= 0:
            raise KernelError(f"damping rate must be positive, got {self.beta}")

    def _eval(self, t):
        return np.exp(-self.beta * t) * np.asarray(self.base(t))


@dataclass(frozen=True)
class ShiftedKernel(Kernel):
    """k(t) = base(t + delta); lift measure is exp(-delta x) * base measure."""

    base: Kernel
    delta: float

    def __post_init__(self):
        _check_base(self.base)
        if self.delta <= 0:
            raise KernelError(f"shift must be positive, got {self.delta}")

    def _eval(self, t):
        return np.asarray(self.base(t + self.delta))


@dataclass(frozen=True)
class LiftMeasureSpec:
    """Lift measure of a catalog kernel.

    Either a finite atom system {(x_i, mass_i)} or a closed-form density on
    (support_lo, support_hi). theta is a decay exponent for which
    int (1+x)^(-theta) nu(dx) is finite.
    """

    theta: float
    atoms: Optional[Tuple[Tuple[float, float], ...]] = None  # (x_i, mass_i)
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    density_id: str = ""
    support: Tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if (self.atoms is None) == (self.density is None):
            raise KernelError("measure must have exactly one of atoms or density")
        if self.atoms is not None:
            for x, m in self.atoms:
                if x < 0 or m < 0:
                    raise KernelError("atom nodes and masses must be nonnegative")

    @property
    def is_atomic(self) -> bool:
        return self.atoms is not None


def eval_kernel(k: Kernel, t) -> float:
    return k(t)


def lift_measure(k: Kernel) -> LiftMeasureSpec:
    """Exact lift measure of a catalog kernel."""
    if isinstance(k, ExpSumKernel):
        atoms = tuple(sorted((y, c) for c, y in k.terms))
        return LiftMeasureSpec(theta=0.0, atoms=atoms)
    if isinstance(k, FractionalKernel):
        a = k.alpha
        norm = 1.0 / (gamma_fn(a) * gamma_fn(1.0 - a))
        return LiftMeasureSpec(
            theta=(1.0 - a) + THETA_MARGIN,
            density=lambda x, a=a, norm=norm: norm * np.asarray(x, dtype=float) ** (-a),
            density_id=f"fractional(alpha={a})",
            support=(0.0, math.inf),
        )
    if isinstance(k, GammaKernel):
        a, b = k.alpha, k.beta
        norm = 1.0 / (gamma_fn(a) * gamma_fn(1.0 - a))
        return LiftMeasureSpec(
            theta=(1.0 - a) + THETA_MARGIN,
            density=lambda x, a=a, b=b, norm=norm: norm * (np.asarray(x, dtype=float) - b) ** (-a),
            density_id=f"gamma(alpha={a},beta={b})",
            support=(b, math.inf),
        )
    if isinstance(k, DampedKernel):
        base = lift_measure(k.base)
        b = k.beta
        if base.is_atomic:
            return LiftMeasureSpec(theta=base.theta, atoms=tuple((x + b, m) for x, m in base.atoms))
        return LiftMeasureSpec(
            theta=base.theta,
            density=lambda x, f=base.density, b=b: f(np.asarray(x, dtype=float) - b),
            density_id=f"damped(beta={b},{base.density_id})",
            support=(base.support[0] + b, base.support[1] + b),
        )
    if isinstance(k, ShiftedKernel):
        base = lift_measure(k.base)
        d = k.delta
        if base.is_atomic:
            return LiftMeasureSpec(
                theta=0.0, atoms=tuple((x, m * math.exp(-d * x)) for x, m in base.atoms)
            )
        return LiftMeasureSpec(
            theta=0.0,
            density=lambda x, f=base.density, d=d: np.exp(-d * np.asarray(x, dtype=float)) * f(x),
            density_id=f"shifted(delta={d},{base.density_id})",
            support=base.support,
        )
    raise KernelError(f"no lift measure for {type(k).__name__}")


def _density_quad(m: LiftMeasureSpec, f: Callable[[np.ndarray], np.ndarray],
                  lo: float, hi: float, scale: float) -> float:
    """Adaptive quadrature of f * density over [lo, hi].

    Splits at multiples of `scale` and at decades so the adaptive rule sees
    where the integrand lives; QAGS handles the algebraic edge singularity
    at lo.
    """
    breaks = {lo, hi}
    for c in (0.1, 1.0, 10.0, 100.0):
        breaks.add(lo + c * scale)
    d = 10.0 * max(scale, 1.0)
    while d < hi:
        breaks.add(lo + d)
        d *= 10.0
    pts = sorted(b for b in breaks if lo <= b <= hi)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(
                lambda x: float(f(np.asarray(x)) * m.density(np.asarray(x))),
                a, b, limit=200, epsabs=1e-13, epsrel=1e-11,
            )
            total += val
    return total


def laplace_of_measure(m: LiftMeasureSpec, lam: float, truncation: Optional[float] = None,
                       tail_tol: float = 1e-9) -> float:
    """int exp(-lam x) nu(dx), exact for atoms, quadrature for densities.

    Raises TailError when the estimated mass beyond the truncation point
    exceeds tail_tol.
    """
    if m.is_atomic:
        if lam < 0:
            raise KernelError("lam must be nonnegative")
        return float(sum(c * math.exp(-lam * x) for x, c in m.atoms))
    if lam <= 0:
        raise KernelError("lam must be positive for density measures")
    lo = m.support[0]
    hi = min(m.support[1], truncation if truncation is not None else DEFAULT_X_MAX)
    if hi <= lo:
        raise KernelError("truncation below measure support")
    # density decreasing on the tail for every catalog form
    tail = float(m.density(np.asarray(hi))) * math.exp(-lam * hi) / lam if math.isfinite(hi) else 0.0
    if m.support[1] > hi and tail > tail_tol:
        raise TailError(
            f"tail beyond x={hi} estimated at {tail:.3e} > {tail_tol:.1e}", tail
        )
    return _density_quad(m, lambda x: np.exp(-lam * x), lo, hi, scale=1.0 / lam)


# the theta check needs a far larger window than density evaluation: with the
# 0.05 decay margin the tail of the check integral vanishes like X^(-0.05)
THETA_CHECK_X_MAX = 1e13


def theta_integral(m: LiftMeasureSpec, truncation: Optional[float] = None) -> float:
    """Truncated decay integral int (1+x)^(-theta) nu(dx)."""
    if m.is_atomic:
        return float(sum(c * (1.0 + x) ** (-m.theta) for x, c in m.atoms))
    lo = m.support[0]
    hi = min(m.support[1], truncation if truncation is not None else THETA_CHECK_X_MAX)
    return _density_quad(m, lambda x: (1.0 + x) ** (-m.theta), lo, hi, scale=max(1.0, lo))


@dataclass
class CMReport:
    """Outcome of a finite-difference complete-monotonicity check."""

    violations: list = field(default_factory=list)  # (order, t, value)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_complete_monotonicity(k: Kernel, max_order: int = 4,
                                grid: Optional[Sequence[float]] = None) -> CMReport:
    """Check (-1)^j D^j k >= 0 via forward differences up to max_order.

    Tolerance is 1e-9 * max|k| on the grid, absorbing rounding in the
    repeated differences.
    """
    if max_order > 6:
        raise KernelError("finite-difference check supported up to order 6")
    if grid is None:
        grid = np.linspace(0.1, 5.0, 120)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise KernelError("grid must be strictly positive and increasing")
    report = CMReport()
    step = float(np.max(np.diff(grid)))
    if step > grid[0]:
        report.warnings.append(
            f"grid step {step:.3g} exceeds smallest grid point {grid[0]:.3g}; "
            "differences may be unreliable near the singularity"
        )
    vals = np.asarray(k(grid), dtype=float)
    tol = 1e-9 * float(np.max(np.abs(vals)))
    diff = vals
    for order in range(1, max_order + 1):
        diff = np.diff(diff)
        signed = (-1.0) ** order * diff
        bad = np.nonzero(signed < -tol)[0]
        for i in bad:
            report.violations.append((order, float(grid[i]), float(signed[i])))
    return report


def kernel_from_config(spec: dict) -> Kernel:
    """Build a catalog kernel from a config table {variant = ..., params...}."""
    try:
        variant = spec["variant"].lower()
    except KeyError:
        raise KernelError("kernel config needs a 'variant' key") from None
    if variant == "expsum":
        return ExpSumKernel(terms=tuple(zip(spec["c"], spec["y"])))
    if variant == "fractional":
        return FractionalKernel(alpha=spec["alpha"])
    if variant == "gamma":
        return GammaKernel(alpha=spec["alpha"], beta=spec["beta"])
    if variant == "damped":
        return DampedKernel(base=kernel_from_config(spec["base"]), beta=spec["beta"])
    if variant == "shifted":
        return ShiftedKernel(base=kernel_from_config(spec["base"]), delta=spec["delta"])
    raise KernelError(f"unknown kernel variant {variant!r}")
