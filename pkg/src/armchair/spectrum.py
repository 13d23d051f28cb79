"""Band spectrum of the fiber operators H_k and of the full tube operator.

A real lam lies in a band of branch nu when rho_k(lam) >= 0 and
F_{k,nu}(lam) is in [-1, 1].  Band ends are classified as periodic
(F = 1), antiperiodic (F = -1), resonance-edge (rho = 0) or
range-boundary (the scan window ends inside a band).

Edge indices n follow one convention: along each branch the F = +-1 edges
are numbered from the bottom of the scan window so that (-1)^n matches the
edge type, with a closed-up pair (hi edge then lo edge of the same type)
sharing one index.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._roots import u_grid
from .hill import dirichlet_eigenvalues, fundamental_solutions
from .lyapunov import is_degenerate, real_axis_branches, xi_rho
from .monodromy import TubeParams
from .potential import Potential

MEMBER_TOL = 1e-9
EDGE_XTOL = 1e-14
MIN_GRID = 16

PERIODIC = "periodic"
ANTIPERIODIC = "antiperiodic"
RESONANCE = "resonance-edge"
BOUNDARY = "range-boundary"


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float
    branch: int | str  # 1, 2 or "merged" in degenerate mode
    lo_type: str
    hi_type: str
    k: int
    lo_n: int | None = None
    hi_n: int | None = None

    def contains(self, lam: float) -> bool:
        return self.lo <= lam <= self.hi

    def to_dict(self) -> dict:
        return {
            "lo": self.lo, "hi": self.hi, "branch": self.branch,
            "lo_type": self.lo_type, "hi_type": self.hi_type,
            "lo_n": self.lo_n, "hi_n": self.hi_n,
        }


@dataclass(frozen=True)
class FlatBand:
    mu: float
    n: int

    def to_dict(self) -> dict:
        return {"mu": self.mu, "n": self.n}


# -- pointwise evaluation --------------------------------------------------

def _branch_value(q, p, lam, nu, degenerate):
    """(rho, f_nu) at real lam; f is real whenever rho >= 0."""
    h = fundamental_solutions(q, lam)
    xi, rho = xi_rho(h, p)
    if degenerate:
        return 0.0, xi
    if rho < 0:
        return rho, complex(xi, (1 if nu == 1 else -1) * math.sqrt(-rho))
    r = math.sqrt(rho)
    return rho, xi + r if nu == 1 else xi - r


def _member(rho, f, degenerate=False) -> bool:
    if not degenerate and rho < 0:
        return False
    return -1 - MEMBER_TOL <= f.real <= 1 + MEMBER_TOL


def _cause(rho, f, degenerate) -> str:
    """Why a point is outside the band set."""
    if not degenerate and rho < 0:
        return RESONANCE
    return PERIODIC if f.real > 1 else ANTIPERIODIC


class _Undefined(Exception):
    """The branch is complex somewhere inside the bracket."""


def _cause_function(q, p, nu, degenerate, cause):
    if cause == RESONANCE:
        return lambda x: float(xi_rho(fundamental_solutions(q, x), p)[1])
    level = 1.0 if cause == PERIODIC else -1.0

    def g(x):
        rho, f = _branch_value(q, p, x, nu, degenerate)
        if not degenerate and rho < 0:
            raise _Undefined
        return float(f) - level

    return g


def _refine_edge(q, p, nu, degenerate, a, b):
    """Locate the transition between a band point and a non-band point.

    Returns (lam, type).  The transition is bracketed by boolean bisection
    until a single cause has a sign change, then polished by brentq on that
    cause (rho, F - 1 or F + 1)."""
    val = lambda x: _branch_value(q, p, x, nu, degenerate)
    ra, fa = val(a)
    rb, fb = val(b)
    in_a = _member(ra, fa, degenerate)
    while True:
        out_rho, out_f = (rb, fb) if in_a else (ra, fa)
        cause = _cause(out_rho, out_f, degenerate)
        g = _cause_function(q, p, nu, degenerate, cause)
        try:
            ga, gb = g(a), g(b)
            if ga == 0:
                return a, cause
            if gb == 0:
                return b, cause
            if ga * gb < 0:
                x = brentq(g, a, b, xtol=EDGE_XTOL * (1 + abs(a)), rtol=4 * np.finfo(float).eps, maxiter=200)
                return x, cause
        except _Undefined:
            pass
        if b - a <= EDGE_XTOL * (1 + abs(a)):
            return (a if in_a else b), cause
        m = 0.5 * (a + b)
        rm, fm = val(m)
        if _member(rm, fm, degenerate) == in_a:
            a, ra, fa = m, rm, fm
        else:
            b, rb, fb = m, rm, fm


def _scan_grid(lo, hi, grid):
    return np.union1d(np.linspace(lo, hi, grid), u_grid(lo, hi))


def _label(edges_types):
    """Edge indices per the convention in the module docstring."""
    labels = []
    n = None
    prev_type = prev_side = None
    for side, typ in edges_types:
        if typ not in (PERIODIC, ANTIPERIODIC):
            labels.append(None)
            continue
        parity = 0 if typ == PERIODIC else 1
        if n is None:
            n = parity
        elif not (typ == prev_type and prev_side == "hi" and side == "lo"):
            n += 1
            if n % 2 != parity:
                n += 1
        labels.append(n)
        prev_type, prev_side = typ, side
    return labels


def _bands_one_branch(q, p, xs, f, rho, nu, degenerate, lo, hi):
    if degenerate:
        inside = (f.real >= -1 - MEMBER_TOL) & (f.real <= 1 + MEMBER_TOL)
    else:
        inside = (rho >= 0) & (f.real >= -1 - MEMBER_TOL) & (f.real <= 1 + MEMBER_TOL)
    intervals = []
    i = 0
    n = len(xs)
    while i < n:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and inside[j + 1]:
            j += 1
        if i == 0:
            a, ta = lo, BOUNDARY
        else:
            a, ta = _refine_edge(q, p, nu, degenerate, xs[i - 1], xs[i])
        if j == n - 1:
            b, tb = hi, BOUNDARY
        else:
            b, tb = _refine_edge(q, p, nu, degenerate, xs[j], xs[j + 1])
        if b > a:
            intervals.append((a, b, ta, tb))
        i = j + 1
    seq = []
    for a, b, ta, tb in intervals:
        seq += [("lo", ta), ("hi", tb)]
    labels = _label(seq)
    branch = "merged" if degenerate else nu
    return [
        Band(float(a), float(b), branch, ta, tb, p.k, labels[2 * i], labels[2 * i + 1])
        for i, (a, b, ta, tb) in enumerate(intervals)
    ]


def bands_for_k(q: Potential, p: TubeParams, lam_min: float, lam_max: float, grid: int = 512,
                mode: str = "auto") -> list[Band]:
    """Bands of H_k in [lam_min, lam_max], per branch (overlaps kept).

    ``mode``: "auto" detects the degenerate case rho_k = 0 identically,
    "two-branch" forces the two-branch scan, "degenerate" forces the
    single-function scan with F = xi_k."""
    if not lam_min < lam_max:
        raise ValueError(f"empty range [{lam_min}, {lam_max}]")
    if grid < MIN_GRID:
        raise ValueError(f"grid must be at least {MIN_GRID}, got {grid}")
    if mode not in ("auto", "two-branch", "degenerate"):
        raise ValueError(f"unknown mode {mode!r}")
    degenerate = mode == "degenerate" or (mode == "auto" and is_degenerate(q, p, lam_min, max(lam_max, lam_min + 1)))
    xs = _scan_grid(lam_min, lam_max, grid)
    br = real_axis_branches(q, p, xs, degenerate)
    rho = np.real(br.rho)
    bands = []
    for nu in ((1,) if degenerate else (1, 2)):
        f = br.f1 if nu == 1 else br.f2
        bands += _bands_one_branch(q, p, xs, f, rho, nu, degenerate, lam_min, lam_max)
    return sorted(bands, key=lambda b: (b.lo, b.hi, str(b.branch)))


def flat_bands(q: Potential, lam_min: float, lam_max: float) -> list[FlatBand]:
    """Dirichlet eigenvalues in [lam_min, lam_max]; n counts from 1 at the bottom."""
    if lam_max < lam_min:
        return []
    mus = dirichlet_eigenvalues(q, lam_max)
    return [FlatBand(float(m), i + 1) for i, m in enumerate(mus) if lam_min <= m <= lam_max]


def merge_intervals(intervals, tol: float = 0.0) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + tol * (1 + abs(lo)):
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


@dataclass
class Spectrum:
    N: int
    lam_min: float
    lam_max: float
    per_k: dict[int, list[Band]]
    degenerate: dict[int, bool]
    flat: list[FlatBand]
    union: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "range": [self.lam_min, self.lam_max],
            "per_k": [
                {"k": k, "degenerate": self.degenerate[k], "bands": [b.to_dict() for b in self.per_k[k]]}
                for k in sorted(self.per_k)
            ],
            "union": [[a, b] for a, b in self.union],
            "flat_bands": [f.to_dict() for f in self.flat],
        }


def thread_count() -> int:
    env = os.environ.get("ARMCHAIR_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


def full_spectrum(q: Potential, N: int, lam_min: float, lam_max: float, grid: int = 512,
                  ks=None, threads: int | None = None) -> Spectrum:
    """Bands for every k (or the given subset), their union and the flat bands."""
    ks = list(range(N)) if ks is None else sorted(set(ks))
    params = [TubeParams(N, k) for k in ks]
    threads = thread_count() if threads is None else threads

    def job(p):
        deg = is_degenerate(q, p, lam_min, max(lam_max, lam_min + 1))
        return p.k, deg, bands_for_k(q, p, lam_min, lam_max, grid, "degenerate" if deg else "two-branch")

    if threads > 1 and len(params) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(params))) as ex:
            results = list(ex.map(job, params))
    else:
        results = [job(p) for p in params]
    per_k = {k: bands for k, _, bands in results}
    degenerate = {k: deg for k, deg, _ in results}
    union = merge_intervals([(b.lo, b.hi) for bands in per_k.values() for b in bands])
    return Spectrum(N, lam_min, lam_max, per_k, degenerate, flat_bands(q, lam_min, lam_max), union)


def plot_data(q: Potential, p: TubeParams, lam_min: float, lam_max: float, grid: int = 512):
    """(lam, F_{k,1}, F_{k,2}) on a uniform grid, NaN where a branch is non-real."""
    xs = np.linspace(lam_min, lam_max, grid)
    br = real_axis_branches(q, p, xs)
    real = np.real(br.rho) >= 0
    f1 = np.where(real, np.real(br.f1), np.nan)
    f2 = np.where(real, np.real(br.f2), np.nan)
    return xs, f1, f2
