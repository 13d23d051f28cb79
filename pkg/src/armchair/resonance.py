"""Resonances: zeros of rho_k, the branch points of the Lyapunov function.

rho_k is entire in lam, so a rectangle's zero count is the winding number of
rho_k along its boundary.  The boundary phase is tracked adaptively, cells
with zeros are subdivided, and each isolated zero is polished by Newton's
method with a finite-difference derivative.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._roots import derivative, u_grid
from .errors import DegenerateError, NumericalError
from .hill import fundamental_solutions, hill_arrays
from .lyapunov import is_degenerate, rho_scale, xi_rho
from .monodromy import TubeParams
from .potential import Potential

RESIDUAL_TOL = 1e-10
TANGENT_TOL = 1e-12
MAX_DEPTH = 40
MAX_RETRIES = 3
PERTURB = 1e-6
EDGE_POINTS = 64
MAX_PHASE_STEP = math.pi / 4


@dataclass(frozen=True)
class Resonance:
    lam: complex
    k: int
    kind: str  # "real" or "complex-pair"
    residual: float
    multiplicity: int = 1

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam, "k": self.k, "kind": self.kind,
            "residual": self.residual, "multiplicity": self.multiplicity,
        }


def rho(q: Potential, p: TubeParams, lam) -> complex:
    return complex(xi_rho(fundamental_solutions(q, lam), p)[1])


def rho_array(q: Potential, p: TubeParams, lams) -> np.ndarray:
    return np.asarray(xi_rho(hill_arrays(q, lams), p)[1])


def _scale(q, p, lam) -> float:
    return float(rho_scale(fundamental_solutions(q, lam), p))


def _relative_residual(q, p, lam) -> float:
    return abs(rho(q, p, lam)) / _scale(q, p, lam)


def _kind(lam: complex) -> str:
    return "real" if abs(lam.imag) <= 1e-10 * (1 + abs(lam)) else "complex-pair"


def _require_nondegenerate(q, p, lo, hi):
    if is_degenerate(q, p, lo, hi):
        raise DegenerateError("rho_k vanishes identically; resonances are not isolated", None, "resonance")


# -- real axis -------------------------------------------------------------

def real_resonances(q: Potential, p: TubeParams, lam_min: float, lam_max: float) -> list[Resonance]:
    """Real zeros of rho_k in [lam_min, lam_max].

    Simple zeros come from sign changes on a sqrt-uniform grid.  Turning
    points of the sampled rho are refined to critical points of rho: a
    critical value of opposite sign reveals a close pair of simple zeros
    between grid points, and |rho| <= 1e-12 scale there marks a double
    zero (multiplicity 2)."""
    _require_nondegenerate(q, p, lam_min, max(lam_max, lam_min + 1))
    xs = u_grid(lam_min, lam_max)
    rs = np.real(rho_array(q, p, xs))
    f = lambda x: rho(q, p, x).real
    fp = lambda x: derivative(f, x).real
    found: list[tuple[float, int]] = []
    xtol = lambda x: 1e-15 * (1 + abs(x))

    for i in range(len(xs) - 1):
        if rs[i] == 0.0:
            found.append((float(xs[i]), 1))
        elif rs[i] * rs[i + 1] < 0:
            found.append((brentq(f, xs[i], xs[i + 1], xtol=xtol(xs[i]), maxiter=200), 1))
    d = np.diff(rs)
    for i in np.nonzero(d[:-1] * d[1:] < 0)[0] + 1:
        a, b = xs[i - 1], xs[i + 1]
        if rs[i - 1] * rs[i] <= 0 or rs[i] * rs[i + 1] <= 0:
            continue  # zeros here are already bracketed
        da, db = fp(a), fp(b)
        if da * db > 0:
            continue
        c = brentq(fp, a, b, xtol=xtol(a), maxiter=200)
        rc = f(c)
        if abs(rc) <= TANGENT_TOL * _scale(q, p, c):
            found.append((c, 2))
        elif rc * rs[i] < 0:
            found.append((brentq(f, a, c, xtol=xtol(a), maxiter=200), 1))
            found.append((brentq(f, c, b, xtol=xtol(c), maxiter=200), 1))
    found.sort()
    out = []
    for lam, mult in found:
        if out and abs(out[-1].lam.real - lam) <= 1e-12 * (1 + abs(lam)):
            continue
        out.append(Resonance(complex(lam, 0.0), p.k, "real", _relative_residual(q, p, lam), mult))
    return out


# -- argument principle ----------------------------------------------------

class _NearZero(Exception):
    def __init__(self, z):
        self.z = z


def _edge_phase(q, p, z0: complex, z1: complex) -> float:
    """Continuous change of arg rho along the segment z0 -> z1."""
    ts = np.linspace(0.0, 1.0, EDGE_POINTS + 1)
    zs = z0 + (z1 - z0) * ts
    vs = rho_array(q, p, zs)
    length = abs(z1 - z0)
    while True:
        dphi = np.angle(vs[1:] / vs[:-1])
        bad = np.nonzero(np.abs(dphi) > MAX_PHASE_STEP)[0]
        if bad.size == 0:
            return float(np.sum(dphi))
        if np.min(np.abs(ts[bad + 1] - ts[bad])) * length < 1e-9 * (1 + abs(z0)):
            raise _NearZero(complex(zs[bad[0]]))
        mids_t = 0.5 * (ts[bad] + ts[bad + 1])
        mids_z = z0 + (z1 - z0) * mids_t
        mids_v = rho_array(q, p, mids_z)
        ts = np.insert(ts, bad + 1, mids_t)
        zs = np.insert(zs, bad + 1, mids_z)
        vs = np.insert(vs, bad + 1, mids_v)
        if np.any(vs == 0):
            raise _NearZero(complex(zs[np.argmin(np.abs(vs))]))


def winding_number(q: Potential, p: TubeParams, rect) -> int:
    """Number of zeros of rho_k (with multiplicity) inside the rectangle
    (re0, re1, im0, im1); raises _NearZero when a zero sits on the boundary."""
    re0, re1, im0, im1 = rect
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    total = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        total += _edge_phase(q, p, a, b)
    w = total / (2 * math.pi)
    n = int(round(w))
    if abs(w - n) > 0.1:
        raise NumericalError(f"winding number not an integer ({w})", corners[0], "resonance")
    return n


def _newton(q, p, z0: complex, mult: int = 1, maxiter: int = 60):
    f = lambda z: rho(q, p, z)
    z = complex(z0)
    for _ in range(maxiter):
        v = f(z)
        if v == 0:
            return z
        d = derivative(f, z)
        if d == 0:
            return None
        step = mult * v / d
        z -= step
        if not np.isfinite(z):
            return None
        if abs(step) <= 1e-15 * (1 + abs(z)):
            return z
    return z


def _inside(z, rect, pad=0.0):
    re0, re1, im0, im1 = rect
    return re0 - pad <= z.real <= re1 + pad and im0 - pad <= z.imag <= im1 + pad


_SPLIT = 0.5 + 1 / (4 * math.pi * math.e)  # off-centre split avoids symmetric zeros


def _split(rect, frac=_SPLIT):
    re0, re1, im0, im1 = rect
    if re1 - re0 >= im1 - im0:
        m = re0 + frac * (re1 - re0)
        return (re0, m, im0, im1), (m, re1, im0, im1)
    m = im0 + frac * (im1 - im0)
    return (re0, re1, im0, m), (re0, re1, m, im1)


def _search(q, p, rect, count, depth, out):
    if count == 0:
        return
    re0, re1, im0, im1 = rect
    size = max(re1 - re0, im1 - im0)
    centre = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
    if count == 1 or size <= 1e-7 * (1 + abs(centre)) or depth >= MAX_DEPTH:
        z = _newton(q, p, centre, count if count > 1 else 1)
        if z is not None and _inside(z, rect, 1e-9 * (1 + abs(z))):
            out.append((z, count))
            return
        if depth >= MAX_DEPTH:
            raise NumericalError("subdivision depth exhausted", centre, "resonance")
    for frac in (_SPLIT, 0.5 - 1 / (7 * math.pi), 0.5 + 1 / (5 * math.e)):
        halves = _split(rect, frac)
        try:
            counts = [winding_number(q, p, h) for h in halves]
        except _NearZero:
            continue
        if sum(counts) != count:
            continue
        for h, c in zip(halves, counts):
            _search(q, p, h, c, depth + 1, out)
        return
    raise NumericalError("could not split cell away from zeros", centre, "resonance")


def complex_resonances(q: Potential, p: TubeParams, rect) -> list[Resonance]:
    """All zeros of rho_k in the closed rectangle (re0, re1, im0, im1).

    A zero on the boundary triggers a 1e-6 outward perturbation of the
    rectangle, retried up to three times."""
    re0, re1, im0, im1 = map(float, rect)
    if not (re0 < re1 and im0 < im1):
        raise ValueError(f"degenerate rectangle {rect!r}")
    _require_nondegenerate(q, p, re0 - 1, re1 + 1)
    cur = (re0, re1, im0, im1)
    for attempt in range(MAX_RETRIES + 1):
        try:
            count = winding_number(q, p, cur)
            break
        except _NearZero as e:
            if attempt == MAX_RETRIES:
                raise NumericalError("zero on the rectangle boundary", e.z, "resonance") from None
            d = PERTURB * (1 + max(abs(v) for v in cur)) * (attempt + 1)
            cur = (cur[0] - d, cur[1] + d, cur[2] - d, cur[3] + d)
    found: list[tuple[complex, int]] = []
    _search(q, p, cur, count, 0, found)
    res = []
    for z, m in found:
        if _kind(z) == "real":
            z = complex(z.real, 0.0)
        res.append(Resonance(z, p.k, _kind(z), _relative_residual(q, p, z), m))
    res = [r for _, r in label_pairs(res)]
    if sum(r.multiplicity for r in res) != count:
        raise NumericalError("refined zeros do not match the winding count", complex(*cur[::2]), "resonance")
    return res


def label_pairs(resonances: list[Resonance]) -> list[tuple[str, Resonance]]:
    """Label zeros r^- / r^+ in order of real part; real parts equal to
    1e-9 relative (a conjugate pair) are ordered by imaginary part."""
    ordered = sorted(resonances, key=lambda r: (r.lam.real, r.lam.imag))
    i = 0
    while i < len(ordered):
        j = i + 1
        while j < len(ordered) and abs(ordered[j].lam.real - ordered[i].lam.real) <= 1e-9 * (1 + abs(ordered[i].lam)):
            j += 1
        ordered[i:j] = sorted(ordered[i:j], key=lambda r: r.lam.imag)
        i = j
    return [("-" if i % 2 == 0 else "+", r) for i, r in enumerate(ordered)]


# -- delta family asymptotics ----------------------------------------------

def delta_asymptotics(p: TubeParams, n: int, eps: float, form: str = "corrected") -> tuple[complex, complex]:
    """Two-term small-eps prediction (r^-, r^+) for the zeros of rho_k near
    (pi n)^2, potential (1/eps) delta(t - 1/2 - c_k eps - eps^2).

    ``form="corrected"`` uses the real shift -4 (pi n)^2 eps obtained from the
    expansion F = (-1)^n (1 + tau / (2 pi n eps) + ...) near z = pi n; the
    alternative ``form="printed"`` uses the shift -2 pi n eps.  Both share the
    branch term i A eps sqrt(eps), A = 4 sqrt(2) (pi n)^2 s_k / (3 sqrt(c_k)),
    with the principal root, which is real for eps < 0."""
    if p.is_self_conjugate:
        raise ValueError("asymptotics need k not in {0, N/2}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if form not in ("corrected", "printed"):
        raise ValueError(f"unknown form {form!r}")
    pn = math.pi * n
    base = pn * pn - (4 * pn * pn * eps if form == "corrected" else 2 * pn * eps)
    A = 4 * math.sqrt(2) * pn * pn * p.sk / (3 * cmath.sqrt(p.ck))
    off = 1j * A * eps * cmath.sqrt(eps)
    pair = sorted([base - off, base + off], key=lambda z: (z.real, z.imag))
    return pair[0], pair[1]
