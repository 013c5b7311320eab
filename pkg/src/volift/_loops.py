"""Hot simulation loops: compiled per-path kernels and array fallbacks.

Two implementations of each ensemble stepper live here. The compiled one
dispatches coefficients by numeric code inside an njit loop over paths and
steps; the array one vectorizes across paths with plain numpy and accepts
arbitrary Python callables. Both produce identical update arithmetic per
factor so split/continued runs are bitwise reproducible on a fixed backend.
"""
from __future__ import annotations

import math

import numpy as np

from ._backend import njit

EXPLOSION_LIMIT = 1e12


def phi1(z: np.ndarray) -> np.ndarray:
    """(1 - exp(-z)) / z with the removable singularity filled at 0."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


@njit(cache=True)
def _ceval(code: int, p0: float, p1: float, t: float, x: float) -> float:
    if code == 0:
        return p0
    if code == 1:
        return p0 * x + p1
    if code == 2:
        return -p0 * x
    if code == 3:
        return p0 * math.sin(x)
    # sqrt growth: a*sign(x)*(sqrt(1+|x|) - 1)
    if x > 0.0:
        return p0 * (math.sqrt(1.0 + x) - 1.0)
    if x < 0.0:
        return -p0 * (math.sqrt(1.0 - x) - 1.0)
    return 0.0


@njit(cache=True)
def _lift_loop_compiled(nodes_b, decay_b, drift_w, nodes_s, decay_s, diff_w,
                        x0, yb, ys, t0, h, dW,
                        bcode, bp0, bp1, scode, sp0, sp1):
    P, N = dW.shape
    nb = nodes_b.size
    ns = nodes_s.size
    X = np.empty((P, N + 1))
    for p in range(P):
        acc = x0
        for i in range(nb):
            acc += yb[p, i]
        for i in range(ns):
            acc += ys[p, i]
        X[p, 0] = acc
    explode = -1
    for m in range(N):
        t = t0 + m * h
        for p in range(P):
            x = X[p, m]
            bv = _ceval(bcode, bp0, bp1, t, x)
            sv = _ceval(scode, sp0, sp1, t, x)
            dwv = dW[p, m]
            acc = x0
            big = 0.0
            for i in range(nb):
                v = decay_b[i] * yb[p, i] + drift_w[i] * bv
                yb[p, i] = v
                acc += v
                av = abs(v)
                if av > big:
                    big = av
            for i in range(ns):
                v = decay_s[i] * ys[p, i] + diff_w[i] * sv * dwv
                ys[p, i] = v
                acc += v
                av = abs(v)
                if av > big:
                    big = av
            X[p, m + 1] = acc
            if big > EXPLOSION_LIMIT or not math.isfinite(acc):
                explode = m + 1
        if explode >= 0:
            for mm in range(m + 2, N + 1):
                for p in range(P):
                    X[p, mm] = np.nan
            break
    return X, explode


def _lift_loop_array(decay_b, drift_w, decay_s, diff_w, x0, yb, ys,
                     t0, h, dW, b_fn, s_fn):
    P, N = dW.shape
    X = np.empty((P, N + 1))
    X[:, 0] = x0 + yb.sum(axis=1) + ys.sum(axis=1)
    explode = -1
    for m in range(N):
        t = t0 + m * h
        x = X[:, m]
        bv = b_fn(t, x)
        sv = s_fn(t, x)
        np.multiply(yb, decay_b, out=yb)
        yb += bv[:, None] * drift_w
        np.multiply(ys, decay_s, out=ys)
        ys += (sv * dW[:, m])[:, None] * diff_w
        X[:, m + 1] = x0 + yb.sum(axis=1) + ys.sum(axis=1)
        big = max(np.max(np.abs(yb), initial=0.0),
                  np.max(np.abs(ys), initial=0.0))
        if big > EXPLOSION_LIMIT or not np.all(np.isfinite(X[:, m + 1])):
            explode = m + 1
            X[:, m + 2:] = np.nan
            break
    return X, explode


@njit(cache=True)
def _direct_loop_compiled(wb, ws, x0, t0, h, dW,
                          bcode, bp0, bp1, scode, sp0, sp1):
    P, N = dW.shape
    X = np.empty((P, N + 1))
    bvals = np.empty((P, N))
    svals = np.empty((P, N))
    X[:, 0] = x0
    explode = -1
    for m in range(1, N + 1):
        t_prev = t0 + (m - 1) * h
        for p in range(P):
            xp = X[p, m - 1]
            bvals[p, m - 1] = _ceval(bcode, bp0, bp1, t_prev, xp)
            svals[p, m - 1] = _ceval(scode, sp0, sp1, t_prev, xp)
            acc = x0
            for j in range(m):
                lag = m - j
                acc += wb[lag] * bvals[p, j] + ws[lag] * svals[p, j] * dW[p, j]
            X[p, m] = acc
            if not math.isfinite(acc) or abs(acc) > EXPLOSION_LIMIT:
                explode = m
        if explode >= 0:
            for mm in range(m + 1, N + 1):
                for p in range(P):
                    X[p, mm] = np.nan
            break
    return X, explode


def _direct_loop_array(wb, ws, x0, t0, h, dW, b_fn, s_fn):
    P, N = dW.shape
    X = np.empty((P, N + 1))
    bvals = np.empty((P, N))
    sdw = np.empty((P, N))
    X[:, 0] = x0
    explode = -1
    for m in range(1, N + 1):
        t_prev = t0 + (m - 1) * h
        x = X[:, m - 1]
        bvals[:, m - 1] = b_fn(t_prev, x)
        sdw[:, m - 1] = s_fn(t_prev, x) * dW[:, m - 1]
        X[:, m] = x0 + bvals[:, :m] @ wb[m:0:-1] + sdw[:, :m] @ ws[m:0:-1]
        if not np.all(np.isfinite(X[:, m])) or np.max(np.abs(X[:, m])) > EXPLOSION_LIMIT:
            explode = m
            X[:, m + 1:] = np.nan
            break
    return X, explode
