"""Fundamental solutions of -y'' + q y = lam y on [0, 1] and scalar Hill data.

theta and phi are the solutions with theta(0)=phi'(0)=1, theta'(0)=phi(0)=0.
The transfer matrix [[theta, phi], [theta', phi']] is propagated piecewise:
constant pieces use the exact cos/sin propagator, polynomial pieces a
fourth-order Magnus integrator with step doubling, and each delta term
g*delta(t-a) applies the exact jump y'(a+) = y'(a-) + g y(a).

All closed forms are even in z = sqrt(lam), so the principal branch of the
square root is used throughout without affecting any result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from ._roots import derivative, local_extrema, sign_change_roots, u_grid
from .errors import NumericalError
from .potential import Potential, Segment

MAGNUS_TOL = 1e-12
MAGNUS_MAX_STEPS = 1 << 14
CHUNK_CELLS = 1 << 18
TANGENT_TOL = 1e-10
SQRT3 = math.sqrt(3.0)


# -- propagators -----------------------------------------------------------

def _sin_over(w, L):
    """sin(w L) / w, regular at w = 0."""
    x = w * L
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    series = L * (1 - x * x / 6 + x**4 / 120)
    return np.where(small, series, np.sin(xs) / np.where(small, 1.0, w))


def _constant_transfer(c: float, lam: np.ndarray, L: float) -> np.ndarray:
    w = np.sqrt(lam - c)
    cos = np.cos(w * L)
    s = _sin_over(w, L)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = cos
    out[..., 0, 1] = s
    out[..., 1, 0] = -(lam - c) * s
    out[..., 1, 1] = cos
    return out


def _product(mats: np.ndarray) -> np.ndarray:
    """Ordered product mats[n-1] @ ... @ mats[0] along axis 0, by pairwise reduction."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            eye = np.broadcast_to(np.eye(2, dtype=complex), mats.shape[1:])[None]
            mats = np.concatenate([mats, eye])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _magnus_transfer(seg: Segment, lam: np.ndarray, x: float, y: float, n: int) -> np.ndarray:
    h = (y - x) / n
    mid = x + h * (np.arange(n) + 0.5)
    q1 = seg(mid - h * SQRT3 / 6)
    q2 = seg(mid + h * SQRT3 / 6)
    # Omega = [[d, h], [h*abar, -d]]; the commutator term only involves q1 - q2
    d = (SQRT3 / 12) * h * h * (q1 - q2)
    abar = 0.5 * (q1 + q2)[:, None] - lam.reshape(1, -1)
    d = d[:, None]
    r2 = d * d + h * h * abar
    r = np.sqrt(r2 + 0j)
    small = np.abs(r) < 1e-4
    rs = np.where(small, 1.0, r)
    ch = np.where(small, 1 + r2 / 2 + r2 * r2 / 24, np.cosh(rs))
    sh = np.where(small, 1 + r2 / 6 + r2 * r2 / 120, np.sinh(rs) / rs)
    mats = np.empty((n, lam.size, 2, 2), dtype=complex)
    mats[..., 0, 0] = ch + sh * d
    mats[..., 0, 1] = sh * h
    mats[..., 1, 0] = sh * h * abar
    mats[..., 1, 1] = ch - sh * d
    return _product(mats).reshape(lam.shape + (2, 2))


def _adaptive_magnus(seg: Segment, lam: np.ndarray, x: float, y: float) -> np.ndarray:
    """Step doubling on the Magnus-4 product.  The scheme is symmetric, so its
    error expands in even powers of h and one Richardson step is order six."""
    L = y - x
    qscale = max(abs(c) for c in seg.coeffs)
    freq = float(np.sqrt(np.max(np.abs(lam)) + qscale)) if lam.size else 1.0
    n = 1 << max(2, int(math.ceil(math.log2(max(4.0, 2 * freq * L)))))
    prev = _magnus_transfer(seg, lam, x, y, n)
    while True:
        n *= 2
        cur = _magnus_transfer(seg, lam, x, y, n)
        diff = (cur - prev) / 15.0
        scale = 1.0 + np.max(np.abs(cur), axis=(-2, -1))
        err = np.max(np.abs(diff), axis=(-2, -1))
        if np.all(err <= MAGNUS_TOL * scale):
            return cur + diff
        if n >= MAGNUS_MAX_STEPS:
            bad = np.asarray(lam).ravel()[int(np.argmax((err / scale).ravel()))]
            raise NumericalError("Magnus step doubling did not converge", complex(bad), "hill")
        prev = cur


def _chunked_magnus(seg: Segment, lam: np.ndarray, x: float, y: float) -> np.ndarray:
    # bound memory: steps * points per batch stays near CHUNK_CELLS
    flat = lam.ravel()
    out = np.empty(flat.shape + (2, 2), dtype=complex)
    order = np.argsort(np.abs(flat))
    size = max(1, CHUNK_CELLS // max(64, int(4 * math.sqrt(np.max(np.abs(flat)) + 1))))
    for i in range(0, flat.size, size):
        idx = order[i:i + size]
        out[idx] = _adaptive_magnus(seg, flat[idx], x, y)
    return out.reshape(lam.shape + (2, 2))


def _piece_transfer(seg: Segment, lam: np.ndarray, x: float, y: float) -> np.ndarray:
    if seg.is_constant:
        return _constant_transfer(seg.coeffs[0], lam, y - x)
    return _chunked_magnus(seg, lam, x, y)


def propagate(q: Potential, lam, t0: float = 0.0, t1: float = 1.0) -> np.ndarray:
    """Transfer matrix taking (y, y') at t0 to (y, y') at t1 (left limits at deltas).

    ``lam`` may be a scalar or an array; the result has shape ``lam.shape + (2, 2)``.
    """
    lam = np.asarray(lam, dtype=complex)
    out = np.broadcast_to(np.eye(2, dtype=complex), lam.shape + (2, 2)).copy()
    cuts = sorted({t0, t1, *(b for b in q.breakpoints if t0 < b < t1)})
    delta_at = {d.a: d.g for d in q.deltas}
    for x, y in zip(cuts, cuts[1:]):
        g = delta_at.get(x)
        if g is not None:
            out[..., 1, :] += g * out[..., 0, :]
        seg = q._segment_at(0.5 * (x + y))
        out = _piece_transfer(seg, lam, x, y) @ out
    return out


# -- Hill data -------------------------------------------------------------

@dataclass(frozen=True)
class HillData:
    """Values at t = 1 of the fundamental solutions, plus F and F_-."""

    lam: complex
    theta1: complex
    phi1: complex
    theta1p: complex
    phi1p: complex

    @property
    def F(self):
        return 0.5 * (self.phi1p + self.theta1)

    @property
    def Fm(self):
        return 0.5 * (self.phi1p - self.theta1)

    @property
    def matrix(self) -> np.ndarray:
        """The scalar 2x2 monodromy matrix [[theta1, phi1], [theta1', phi1']]."""
        return np.array([[self.theta1, self.phi1], [self.theta1p, self.phi1p]])

    @property
    def wronskian(self):
        return self.theta1 * self.phi1p - self.theta1p * self.phi1

    def wronskian_residual(self) -> float:
        """|W - 1| relative to the size of the products forming W."""
        scale = 1.0 + abs(self.theta1 * self.phi1p) + abs(self.theta1p * self.phi1)
        return abs(self.wronskian - 1.0) / scale

    def aux_residuals(self) -> tuple[float, float, float]:
        """Residuals of phi1'+theta1 = 2F, theta1'phi1 + phi1'^2 = 2 phi1' F - 1,
        theta1'phi1 + theta1^2 = 2 theta1 F - 1 (relative)."""
        th, ph, thp, php, F = self.theta1, self.phi1, self.theta1p, self.phi1p, self.F
        r1 = abs(php + th - 2 * F) / (1 + abs(php) + abs(th))
        s2 = 1 + abs(thp * ph) + abs(php) ** 2 + abs(2 * php * F)
        r2 = abs(thp * ph + php**2 - (2 * php * F - 1)) / s2
        s3 = 1 + abs(thp * ph) + abs(th) ** 2 + abs(2 * th * F)
        r3 = abs(thp * ph + th**2 - (2 * th * F - 1)) / s3
        return r1, r2, r3


def _realify(x, lam):
    return x.real if np.isrealobj(lam) or np.all(np.imag(lam) == 0) else x


@lru_cache(maxsize=1 << 14)
def _hill_cached(q: Potential, lam: complex) -> HillData:
    m = propagate(q, np.array(lam))
    vals = (m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    if lam.imag == 0:
        vals = tuple(float(v.real) for v in vals)
        return HillData(float(lam.real), *vals)
    return HillData(lam, *(complex(v) for v in vals))


def fundamental_solutions(q: Potential, lam) -> HillData:
    """HillData at one spectral parameter (real fields for real lam)."""
    return _hill_cached(q, complex(lam))


@dataclass(frozen=True)
class HillArrays:
    lam: np.ndarray
    theta1: np.ndarray
    phi1: np.ndarray
    theta1p: np.ndarray
    phi1p: np.ndarray

    @property
    def F(self):
        return 0.5 * (self.phi1p + self.theta1)

    @property
    def Fm(self):
        return 0.5 * (self.phi1p - self.theta1)


def hill_arrays(q: Potential, lams) -> HillArrays:
    """Vectorised fundamental solutions over an array of spectral parameters."""
    lams = np.asarray(lams)
    m = propagate(q, lams)
    real = not np.iscomplexobj(lams) or np.all(np.imag(lams) == 0)
    parts = [m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]]
    if real:
        parts = [p.real for p in parts]
        lams = np.real(lams)
    return HillArrays(lams, *parts)


def solution_at(q: Potential, lam, ts) -> np.ndarray:
    """Transfer matrices from 0 to each t in ``ts`` (sorted or not); shape (len(ts), 2, 2)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    order = np.argsort(ts)
    out = np.empty((len(ts), 2, 2), dtype=complex)
    cur = np.eye(2, dtype=complex)
    t_prev = 0.0
    for idx in order:
        t = float(ts[idx])
        if t > t_prev:
            cur = propagate(q, np.array(complex(lam)), t_prev, t) @ cur
            t_prev = t
        out[idx] = cur
    return out


# -- scalar spectra --------------------------------------------------------

def _scalar(q: Potential, attr: str):
    def f(lam):
        h = fundamental_solutions(q, lam)
        return getattr(h, attr)
    return f


def _dirichlet_zero_count(q: Potential, lam: float) -> int:
    """Zeros of phi(., lam) in (0, 1): the number of Dirichlet eigenvalues below lam."""
    z = math.sqrt(max(lam - q.density_bounds()[0], 1.0))
    ts = np.linspace(0.0, 1.0, int(64 + 16 * z))[1:-1]
    phi = solution_at(q, lam, ts)[:, 0, 1].real
    return int(np.sum(phi[:-1] * phi[1:] < 0) + np.sum(phi[1:-1] == 0))


def dirichlet_eigenvalues(q: Potential, lambda_max: float, lambda_min: float | None = None) -> list[float]:
    """Dirichlet eigenvalues mu_n <= lambda_max (zeros of phi(1, lam)), ascending.

    The count of eigenvalues below lambda_max is checked against the number of
    interior zeros of phi(., lambda_max); the scan is refined on mismatch.
    """
    lo = q.spectral_lower_bound() if lambda_min is None else lambda_min
    if lambda_max < lo:
        return []
    du = 0.01
    for _ in range(4):
        xs = u_grid(lo, lambda_max, du)
        roots = sign_change_roots(_scalar(q, "phi1"), xs, hill_arrays(q, xs).phi1)
        if lambda_min is not None:
            return roots
        expected = _dirichlet_zero_count(q, lambda_max)
        below = [r for r in roots if r < lambda_max]
        if len(below) == expected:
            return roots
        du /= 4
    raise NumericalError(
        f"Dirichlet count mismatch: found {len(below)}, oscillation count {expected}", lambda_max, "hill"
    )


def neumann_eigenvalues(q: Potential, lambda_max: float, lambda_min: float | None = None) -> list[float]:
    """Neumann eigenvalues nu_n <= lambda_max (zeros of theta'(1, lam)), ascending."""
    lo = q.spectral_lower_bound() if lambda_min is None else lambda_min
    if lambda_max < lo:
        return []
    xs = u_grid(lo, lambda_max)
    return sign_change_roots(_scalar(q, "theta1p"), xs, hill_arrays(q, xs).theta1p)


@dataclass(frozen=True)
class HillEdge:
    n: int
    side: str  # "+" or "-"
    lam: float
    kind: str  # "periodic" or "antiperiodic"


def _F_extrema(q: Potential, xs: np.ndarray, Fs: np.ndarray) -> list[float]:
    """Critical points of F located from turning points of the sampled F."""
    dF = lambda x: derivative(_scalar(q, "F"), x)
    out = []
    for i in local_extrema(Fs):
        a, b = xs[i - 1], xs[i + 1]
        da, db = dF(a), dF(b)
        if da == 0:
            out.append(float(a))
        elif da * db < 0:
            out.append(brentq(dF, a, b, xtol=1e-15 * (1 + abs(a))))
    return out


def _edges_for_level(q, xs, Fs, level, crit) -> list[float]:
    """Roots of F = level with multiplicity; tangential touches counted twice."""
    f = lambda x: fundamental_solutions(q, x).F - level
    roots = sign_change_roots(f, xs, Fs - level)
    for c in crit:
        val = fundamental_solutions(q, c).F - level
        if abs(val) <= TANGENT_TOL:
            if not any(abs(r - c) <= 1e-7 * (1 + abs(c)) for r in roots):
                roots += [c, c]
            else:
                # a grid point landed on the touch: keep multiplicity two
                roots = [r for r in roots if abs(r - c) > 1e-7 * (1 + abs(c))] + [c, c]
    return roots


def hill_band_edges(q: Potential, lambda_max: float) -> list[HillEdge]:
    """Periodic/antiperiodic eigenvalues up to lambda_max, labelled
    lam_0^+ < lam_1^- <= lam_1^+ < lam_2^- <= ... with F(lam_n^pm) = (-1)^n."""
    lo = q.spectral_lower_bound()
    xs = u_grid(lo, lambda_max)
    Fs = hill_arrays(q, xs).F
    crit = [c for c in _F_extrema(q, xs, Fs) if abs(abs(fundamental_solutions(q, c).F) - 1) <= 1e-3]
    roots = sorted(_edges_for_level(q, xs, Fs, 1.0, crit) + _edges_for_level(q, xs, Fs, -1.0, crit))
    edges = []
    for idx, lam in enumerate(roots):
        n = (idx + 1) // 2
        side = "+" if idx % 2 == 0 else "-"
        kind = "periodic" if n % 2 == 0 else "antiperiodic"
        F = fundamental_solutions(q, lam).F
        if abs(F - (-1) ** n) > 1e-6 * (1 + abs(F)):
            raise NumericalError(f"band edge labelling inconsistent at n={n}", lam, "hill")
        edges.append(HillEdge(n, side, float(lam), kind))
    return edges


def hill_bands(q: Potential, lambda_max: float, lambda_min: float = -math.inf) -> list[tuple[float, float]]:
    """Spectrum of the Hill operator clipped to [lambda_min, lambda_max];
    bands separated by closed gaps are merged."""
    edges = hill_band_edges(q, lambda_max)
    bands = []
    plus = [e for e in edges if e.side == "+"]
    minus = {e.n: e for e in edges if e.side == "-"}
    for e in plus:
        nxt = minus.get(e.n + 1)
        hi = nxt.lam if nxt is not None else lambda_max
        bands.append([e.lam, hi])
    merged = []
    for lo, hi in bands:
        if merged and lo - merged[-1][1] <= 1e-12 * (1 + abs(lo)):
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    out = []
    for lo, hi in merged:
        lo, hi = max(lo, lambda_min), min(hi, lambda_max)
        if hi > lo:
            out.append((lo, hi))
    return out
