"""Scan grids, sign-change root refinement and finite-difference derivatives."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

DU = 0.01  # grid step in u = sign(lam) sqrt|lam|


def u_grid(lo: float, hi: float, du: float = DU, extra=None) -> np.ndarray:
    """Points in [lo, hi] uniform in sign(lam)*sqrt(|lam|), so the oscillation
    scale of cos(sqrt(lam)) is resolved at every energy."""
    if hi <= lo:
        return np.array([lo, hi]) if hi == lo else np.array([])
    ulo = math.copysign(math.sqrt(abs(lo)), lo)
    uhi = math.copysign(math.sqrt(abs(hi)), hi)
    n = max(16, int(math.ceil((uhi - ulo) / du)) + 1)
    u = np.linspace(ulo, uhi, n)
    lam = np.sign(u) * u * u
    lam[0], lam[-1] = lo, hi
    if extra is not None:
        extra = np.asarray(extra, dtype=float)
        lam = np.union1d(lam, extra[(extra >= lo) & (extra <= hi)])
    return lam


def sign_change_roots(f, xs: np.ndarray, fs: np.ndarray) -> list[float]:
    """Roots of the scalar function ``f`` bracketed by sign changes of the
    sampled values ``fs`` on the increasing grid ``xs``."""
    roots = []
    fs = np.asarray(fs, dtype=float)
    for i in range(len(xs)):
        if fs[i] == 0.0:
            roots.append(float(xs[i]))
            continue
        if i + 1 < len(xs) and fs[i] * fs[i + 1] < 0.0:
            roots.append(brentq(f, xs[i], xs[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400))
    return roots


def fd_step(x) -> float:
    return 1e-5 * (1.0 + abs(x))


def derivative(f, x, h: float | None = None):
    """Centred difference with one Richardson step; ``f`` may be complex."""
    h = fd_step(x) if h is None else h
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def local_extrema(fs: np.ndarray) -> np.ndarray:
    """Interior indices where the sampled sequence turns around."""
    d = np.diff(fs)
    return np.nonzero(d[:-1] * d[1:] <= 0)[0] + 1
