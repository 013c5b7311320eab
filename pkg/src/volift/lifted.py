"""Factor-system simulation of the lifted equation in mild form.

The lift turns the convolution equation into a linear-drift system of
exponentially mean-reverting factors, one per atom of the discretized lift
measures, plus a frozen initial-condition channel at mean reversion 0. The
time stepper is an exponential (mild) Euler scheme: factor decay is exact,
the drift enters through the phi1-weighted cell integral and the noise enters
with the full-step decay weight, both with left-point coefficient evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from ._backend import USING_NUMBA
from ._loops import (
    _direct_loop_array,
    _direct_loop_compiled,
    _lift_loop_array,
    _lift_loop_compiled,
    phi1,
)
from .coefficients import Coefficients
from .quadrature import DiscreteLiftMeasure

__all__ = [
    "SimGrid",
    "BrownianPath",
    "LiftedState",
    "PathSample",
    "EnsembleSample",
    "ExplosionReport",
    "SimulationError",
    "path_seed",
    "brownian_increments",
    "initial_lift",
    "observable",
    "exp_euler_step",
    "simulate_path",
    "simulate_ensemble",
    "lipschitz_envelope",
    "picard_solve_deterministic",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SimulationError(RuntimeError):
    pass


def path_seed(master_seed: int, path_index: int) -> int:
    """Derive a per-path seed by splitmix64-style 64-bit mixing.

    state = master + (index+1) * 0x9E3779B97F4A7C15 (mod 2^64), followed by
    the two standard multiply-xorshift rounds. Documented so that ports can
    reproduce the stream family; cross-language bit equality of the normal
    variates is not promised.
    """
    z = (master_seed + (path_index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid on [0, T] with N steps."""

    T: float
    N: int

    def __post_init__(self):
        if self.T <= 0 or self.N < 1:
            raise SimulationError("need T > 0 and N >= 1")

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


@dataclass(frozen=True)
class BrownianPath:
    """Normal(0, h) increments reproducible from a seed."""

    seed: int
    grid: SimGrid
    increments: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        dw = rng.normal(0.0, math.sqrt(self.grid.h), self.grid.N)
        object.__setattr__(self, "increments", dw)


def brownian_increments(master_seed: int, paths: int, g: SimGrid) -> np.ndarray:
    """(paths, N) increment matrix, one derived seed per path."""
    out = np.empty((paths, g.N))
    sd = math.sqrt(g.h)
    for p in range(paths):
        rng = np.random.default_rng(path_seed(master_seed, p))
        out[p] = rng.normal(0.0, sd, g.N)
    return out


@dataclass(frozen=True)
class LiftedState:
    """Factor values aligned with the atoms, plus the initial channel y0."""

    atoms_b: DiscreteLiftMeasure
    atoms_sigma: DiscreteLiftMeasure
    y_b: np.ndarray
    y_sigma: np.ndarray
    y0: float

    def __post_init__(self):
        yb = np.asarray(self.y_b, dtype=float)
        ys = np.asarray(self.y_sigma, dtype=float)
        object.__setattr__(self, "y_b", yb)
        object.__setattr__(self, "y_sigma", ys)
        if yb.shape != self.atoms_b.nodes.shape:
            raise SimulationError("y_b length must match drift atoms")
        if ys.shape != self.atoms_sigma.nodes.shape:
            raise SimulationError("y_sigma length must match diffusion atoms")


@dataclass(frozen=True)
class ExplosionReport:
    step: int
    time: float


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray
    X: np.ndarray
    state: LiftedState
    explosion: Optional[ExplosionReport] = None


@dataclass(frozen=True)
class EnsembleSample:
    """Observable paths (rows) with the final factor matrices."""

    times: np.ndarray
    X: np.ndarray
    y_b: np.ndarray
    y_sigma: np.ndarray
    y0: float
    explosion: Optional[ExplosionReport] = None


def initial_lift(x0: float, atoms_b: DiscreteLiftMeasure,
                 atoms_sigma: DiscreteLiftMeasure) -> LiftedState:
    """State carrying x0 in the frozen channel and zero factors."""
    return LiftedState(atoms_b, atoms_sigma,
                       np.zeros(atoms_b.nodes.size),
                       np.zeros(atoms_sigma.nodes.size), float(x0))


def observable(s: LiftedState) -> float:
    """Pairing of the lifted state against the constant function 1."""
    x = s.y0 + float(np.sum(s.y_b)) + float(np.sum(s.y_sigma))
    if not math.isfinite(x):
        raise SimulationError("non-finite factor state")
    return x


def _step_weights(atoms_b, atoms_sigma, h, drift_rule="phi1"):
    decay_b = np.exp(-atoms_b.nodes * h)
    decay_s = np.exp(-atoms_sigma.nodes * h)
    if drift_rule == "phi1":
        drift_w = atoms_b.masses * phi1(atoms_b.nodes * h) * h
    elif drift_rule == "left":
        drift_w = atoms_b.masses * decay_b * h
    else:
        raise SimulationError(f"unknown drift rule {drift_rule!r}")
    diff_w = atoms_sigma.masses * decay_s
    return decay_b, drift_w, decay_s, diff_w


def exp_euler_step(s: LiftedState, t: float, h: float, dw: float,
                   c: Coefficients, drift_rule: str = "phi1") -> LiftedState:
    """One mild-Euler update of every factor; the y0 channel is untouched."""
    if h <= 0:
        raise SimulationError("step size must be positive")
    x = observable(s)
    bv = float(c.b(t, np.asarray([x]))[0])
    sv = float(c.sigma(t, np.asarray([x]))[0])
    decay_b, drift_w, decay_s, diff_w = _step_weights(
        s.atoms_b, s.atoms_sigma, h, drift_rule)
    return LiftedState(
        s.atoms_b, s.atoms_sigma,
        decay_b * s.y_b + drift_w * bv,
        decay_s * s.y_sigma + diff_w * sv * dw,
        s.y0,
    )


def simulate_ensemble(atoms_b: DiscreteLiftMeasure,
                      atoms_sigma: DiscreteLiftMeasure,
                      x0: float, c: Coefficients, g: SimGrid,
                      dW: np.ndarray, t0: float = 0.0,
                      yb0: Optional[np.ndarray] = None,
                      ys0: Optional[np.ndarray] = None,
                      drift_rule: str = "phi1") -> EnsembleSample:
    """Step a whole ensemble on shared atoms; rows of dW are paths."""
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    P, N = dW.shape
    if N != g.N:
        raise SimulationError("increment count must match the grid")
    h = g.h
    decay_b, drift_w, decay_s, diff_w = _step_weights(
        atoms_b, atoms_sigma, h, drift_rule)
    yb = np.zeros((P, atoms_b.nodes.size)) if yb0 is None else np.array(yb0, dtype=float)
    ys = np.zeros((P, atoms_sigma.nodes.size)) if ys0 is None else np.array(ys0, dtype=float)
    if USING_NUMBA and c.compiled_ok:
        X, explode = _lift_loop_compiled(
            atoms_b.nodes, decay_b, drift_w, atoms_sigma.nodes, decay_s,
            diff_w, float(x0), yb, ys, t0, h, dW,
            c.b.code, c.b.p0, c.b.p1, c.sigma.code, c.sigma.p0, c.sigma.p1)
    else:
        X, explode = _lift_loop_array(
            decay_b, drift_w, decay_s, diff_w, float(x0), yb, ys, t0, h, dW,
            c.b, c.sigma)
    report = None
    if explode >= 0:
        report = ExplosionReport(step=explode, time=t0 + explode * h)
    return EnsembleSample(times=t0 + g.times, X=X, y_b=yb, y_sigma=ys,
                          y0=float(x0), explosion=report)


def simulate_path(s0: LiftedState, c: Coefficients, g: SimGrid,
                  w: BrownianPath, t0: float = 0.0,
                  drift_rule: str = "phi1") -> PathSample:
    """Single-path wrapper around the ensemble stepper."""
    ens = simulate_ensemble(
        s0.atoms_b, s0.atoms_sigma, s0.y0, c, g, w.increments[None, :],
        t0=t0, yb0=s0.y_b[None, :], ys0=s0.y_sigma[None, :],
        drift_rule=drift_rule)
    state = LiftedState(s0.atoms_b, s0.atoms_sigma, ens.y_b[0], ens.y_sigma[0],
                        s0.y0)
    return PathSample(times=ens.times, X=ens.X[0], state=state,
                      explosion=ens.explosion)


def direct_euler_ensemble(wb: np.ndarray, ws: np.ndarray, x0: float,
                          c: Coefficients, g: SimGrid, dW: np.ndarray,
                          t0: float = 0.0):
    """Convolution Euler ensemble given lag-weight tables (index = lag)."""
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    if dW.shape[1] != g.N:
        raise SimulationError("increment count must match the grid")
    if USING_NUMBA and c.compiled_ok:
        X, explode = _direct_loop_compiled(
            wb, ws, float(x0), t0, g.h, dW,
            c.b.code, c.b.p0, c.b.p1, c.sigma.code, c.sigma.p0, c.sigma.p1)
    else:
        X, explode = _direct_loop_array(wb, ws, float(x0), t0, g.h, dW,
                                        c.b, c.sigma)
    report = None
    if explode >= 0:
        report = ExplosionReport(step=explode, time=t0 + explode * g.h)
    return X, report


def lipschitz_envelope(F: Callable[[np.ndarray], np.ndarray], k: float,
                       c_lg: float, n_grid: int = 4001,
                       max_widen: int = 6) -> Callable[[np.ndarray], np.ndarray]:
    """k-Lipschitz inf-convolution F_k(x) = inf_y { F(y) + k|x-y| }.

    The minimizer for a linear-growth F lies within radius
    2(|F(x)| + c_lg(1+|x|))/k of x; the infimum is searched on a grid over
    that window, widening and retrying if it lands on the boundary.
    """
    if k <= 0:
        raise ValueError("envelope parameter k must be positive")

    def single(x: float) -> float:
        r = 2.0 * (abs(float(F(np.asarray([x]))[0])) + c_lg * (1.0 + abs(x))) / k
        r = max(r, 1e-8)
        for _ in range(max_widen):
            y = np.linspace(x - r, x + r, n_grid)
            vals = np.asarray(F(y), dtype=float) + k * np.abs(x - y)
            i = int(np.argmin(vals))
            if 0 < i < n_grid - 1:
                # polish past the grid resolution inside the bracketing cell
                res = optimize.minimize_scalar(
                    lambda z: float(F(np.asarray([z]))[0]) + k * abs(x - z),
                    bounds=(y[i - 1], y[i + 1]), method="bounded",
                    options={"xatol": 1e-12})
                return min(float(vals[i]), float(res.fun))
            r *= 2.0
        raise SimulationError("envelope window search did not converge")

    def F_k(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([single(v) for v in xs])
        return out if np.ndim(x) else float(out[0])

    return F_k


def picard_solve_deterministic(c: Coefficients, x0: float,
                               atoms_b: DiscreteLiftMeasure, g: SimGrid,
                               tol: float = 1e-10, max_iter: int = 200
                               ) -> np.ndarray:
    """Fixed-point iteration for the noiseless equation on the grid.

    Iterates X(t) = x0 + sum_i c_i int_0^t e^{-x_i(t-s)} b(s, X(s)) ds with
    the same phi1 cell rule as the time stepper, so the fixed point coincides
    with the explicit scheme's trajectory.
    """
    if c.lipschitz is None:
        raise SimulationError(
            "picard solver needs a declared Lipschitz constant; "
            "regularize through the envelope first")
    h = g.h
    lags = np.arange(g.N)  # weight for lag d+1 uses decay over d full steps
    W = (np.exp(-np.outer(lags * h, atoms_b.nodes))
         @ (atoms_b.masses * phi1(atoms_b.nodes * h) * h))
    times = g.times[:-1]
    X = np.full(g.N + 1, float(x0))
    prev_change = math.inf
    growing = 0
    for _ in range(max_iter):
        bv = np.asarray(c.b(times, X[:-1]), dtype=float)
        if bv.ndim == 0:
            bv = np.full(g.N, float(bv))
        conv = np.convolve(bv, W)[: g.N]
        X_new = np.concatenate([[x0], x0 + conv])
        change = float(np.max(np.abs(X_new - X)))
        X = X_new
        if change < tol:
            return X
        growing = growing + 1 if change > prev_change else 0
        prev_change = change
        if growing >= 5:
            raise SimulationError(
                "picard iteration is not contracting; shorten the horizon")
    raise SimulationError("picard iteration did not converge")
