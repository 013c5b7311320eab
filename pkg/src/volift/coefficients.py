"""Drift/diffusion coefficient registry with growth and Lipschitz metadata.

Registry entries are numpy-vectorized callables of (t, x). Each carries a
declared linear-growth constant, an optional Lipschitz constant, and a numeric
code so that compiled simulation loops can dispatch without calling back into
Python. Custom callables (code -1) are supported on the array backend only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Coefficients",
    "CoefficientError",
    "registry_coefficients",
    "single_coefficient",
    "linear_growth_check",
    "COEF_CONST",
    "COEF_LINEAR",
    "COEF_MEAN_REVERT",
    "COEF_BOUNDED_SIN",
    "COEF_SQRT_GROWTH",
    "COEF_CUSTOM",
]


class CoefficientError(ValueError):
    pass


# dispatch codes shared with the compiled loops
COEF_CUSTOM = -1
COEF_CONST = 0
COEF_LINEAR = 1
COEF_MEAN_REVERT = 2
COEF_BOUNDED_SIN = 3
COEF_SQRT_GROWTH = 4


@dataclass(frozen=True)
class CoefFn:
    """One coefficient function with its dispatch code and parameters."""

    fn: Callable[[float, np.ndarray], np.ndarray]
    code: int
    p0: float = 0.0
    p1: float = 0.0
    lipschitz: Optional[float] = None

    def __call__(self, t, x):
        return self.fn(t, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Coefficients:
    """Drift/diffusion pair with a declared linear-growth constant."""

    b: CoefFn
    sigma: CoefFn
    c_lg: float

    @property
    def lipschitz(self) -> Optional[float]:
        """Joint Lipschitz constant, or None if either part lacks one."""
        if self.b.lipschitz is None or self.sigma.lipschitz is None:
            return None
        return max(self.b.lipschitz, self.sigma.lipschitz)

    @property
    def compiled_ok(self) -> bool:
        return self.b.code != COEF_CUSTOM and self.sigma.code != COEF_CUSTOM


def _entry(name: str, params: dict) -> CoefFn:
    if name == "const":
        c = float(params.get("c", 0.0))
        return CoefFn(lambda t, x: np.full_like(x, c), COEF_CONST, c, 0.0,
                      lipschitz=0.0)
    if name == "linear":
        a = float(params.get("a", 1.0))
        c = float(params.get("c", 0.0))
        return CoefFn(lambda t, x: a * x + c, COEF_LINEAR, a, c,
                      lipschitz=abs(a))
    if name == "mean_revert":
        kappa = float(params.get("kappa", 1.0))
        return CoefFn(lambda t, x: -kappa * x, COEF_MEAN_REVERT, kappa, 0.0,
                      lipschitz=abs(kappa))
    if name == "bounded_sin":
        a = float(params.get("a", 1.0))
        return CoefFn(lambda t, x: a * np.sin(x), COEF_BOUNDED_SIN, a, 0.0,
                      lipschitz=abs(a))
    if name == "sqrt_growth":
        a = float(params.get("a", 1.0))
        # continuous, vanishing at 0, linear growth, but not Lipschitz
        return CoefFn(
            lambda t, x: a * np.sign(x) * np.sqrt(1.0 + np.abs(x)) - a * np.sign(x),
            COEF_SQRT_GROWTH, a, 0.0, lipschitz=None)
    raise CoefficientError(f"unknown coefficient {name!r}")


def _growth_constant(name: str, params: dict) -> float:
    a = abs(float(params.get("a", 1.0)))
    if name == "const":
        return abs(float(params.get("c", 0.0)))
    if name == "linear":
        return max(abs(float(params.get("a", 1.0))), abs(float(params.get("c", 0.0)))) or 1.0
    if name == "mean_revert":
        return abs(float(params.get("kappa", 1.0)))
    # bounded_sin and sqrt_growth are dominated by a(1+|x|)
    return a


def single_coefficient(name: str, params: Optional[dict] = None) -> CoefFn:
    return _entry(name, params or {})


def registry_coefficients(b_name: str, b_params: Optional[dict] = None,
                          sigma_name: str = "const",
                          sigma_params: Optional[dict] = None) -> Coefficients:
    """Build a Coefficients pair from registry names and check linear growth."""
    b_params = b_params or {}
    sigma_params = sigma_params or {}
    b = _entry(b_name, b_params)
    s = _entry(sigma_name, sigma_params)
    c_lg = max(_growth_constant(b_name, b_params),
               _growth_constant(sigma_name, sigma_params), 1e-12)
    c = Coefficients(b=b, sigma=s, c_lg=c_lg)
    report = linear_growth_check(c)
    if not report["ok"]:
        raise CoefficientError(
            f"registry pair violates declared linear growth: {report}")
    return c


def linear_growth_check(c: Coefficients, x_max: float = 1e6,
                        n: int = 2001) -> dict:
    """Sampled check of |b|, |sigma| <= C_LG (1 + |x|) on a diagnostic grid."""
    x = np.concatenate([-np.geomspace(1e-6, x_max, n // 2)[::-1], [0.0],
                        np.geomspace(1e-6, x_max, n // 2)])
    bound = c.c_lg * (1.0 + np.abs(x)) * (1.0 + 1e-12)
    ratios = {}
    ok = True
    for label, fn in (("b", c.b), ("sigma", c.sigma)):
        vals = np.abs(fn(0.0, x))
        ratios[label] = float(np.max(vals / (1.0 + np.abs(x))))
        ok = ok and bool(np.all(vals <= bound))
    return {"ok": ok, "c_lg": c.c_lg, "max_ratio": ratios}
