"""The two Lyapunov branches F_{k,1}, F_{k,2} = xi_k +- sqrt(rho_k).

Labelling convention: on the real axis f1 = xi + sqrt(rho) with the principal
square root, so f1 is the larger branch where rho >= 0 and Im f1 > 0 where
rho < 0.  Along complex paths the sign of sqrt(rho) is carried by continuity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._roots import derivative
from .hill import HillData, fundamental_solutions, hill_arrays
from .monodromy import Monodromy4, TubeParams, _permanent_abs
from .potential import Potential

BRANCH_POINT_TOL = 1e-10
DEGENERATE_SAMPLES = 32


class BranchMode(str, Enum):
    PRINCIPAL = "principal"
    TRACKED = "tracked"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class LyapunovData:
    lam: complex
    xi: complex
    rho: complex
    f1: complex
    f2: complex
    branch_mode: BranchMode = BranchMode.PRINCIPAL
    at_branch_point: bool = False

    @property
    def sqrt_rho(self):
        return 0.5 * (self.f1 - self.f2)

    def vieta_residual(self) -> float:
        scale = 1 + abs(self.xi) ** 2 + abs(self.rho)
        r1 = abs(self.f1 + self.f2 - 2 * self.xi) / (1 + abs(self.xi))
        r2 = abs(self.f1 * self.f2 - (self.xi**2 - self.rho)) / scale
        return max(r1, r2)

    def multipliers(self) -> tuple[complex, complex, complex, complex]:
        """Eigenvalues tau of M_k: roots of tau^2 - 2 f tau + 1 for f = f1, f2."""
        out = []
        for f in (self.f1, self.f2):
            d = np.sqrt(complex(f * f - 1))
            out += [complex(f + d), complex(f - d)]
        return tuple(out)

    def branches_real(self) -> bool:
        return bool(np.isreal(self.rho) and np.real(self.rho) >= 0) or self.branch_mode is BranchMode.DEGENERATE


def xi_rho(h, p: TubeParams):
    """xi_k = (9F^2 - F_-^2 - 1)/2 - s_k^2 and rho_k = (9F^2 - s_k^2) c_k^2 + s_k^2 F_-^2.

    ``h`` may be HillData or HillArrays."""
    F, Fm = h.F, h.Fm
    sk2, ck2 = p.sk**2, p.ck**2
    xi = 0.5 * (9 * F * F - Fm * Fm - 1) - sk2
    rho = (9 * F * F - sk2) * ck2 + sk2 * Fm * Fm
    return xi, rho


def rho_scale(h, p: TubeParams):
    """Magnitude of the terms summed in rho_k; the rounding scale of rho."""
    F, Fm = np.abs(h.F), np.abs(h.Fm)
    return 1 + 9 * F * F * p.ck**2 + p.sk**2 * p.ck**2 + p.sk**2 * Fm * Fm


def _sqrt(rho):
    return np.sqrt(rho) if np.iscomplexobj(rho) else np.sqrt(rho + 0j)


def lyapunov_branches(xi, rho, prev_sqrt=None, degenerate: bool = False):
    """(f1, f2) from xi and rho.

    Without ``prev_sqrt`` the principal root is used; otherwise the sign of
    sqrt(rho) closest to ``prev_sqrt`` is chosen (continuation)."""
    if degenerate:
        return xi, xi
    r = _sqrt(rho)
    if prev_sqrt is not None and abs(r + prev_sqrt) < abs(r - prev_sqrt):
        r = -r
    f1, f2 = xi + r, xi - r
    if np.isreal(rho) and np.real(rho) >= 0 and np.isreal(xi):
        f1, f2 = np.real(f1), np.real(f2)
    return f1, f2


def _at_branch_point(xi, rho) -> bool:
    return abs(rho) < BRANCH_POINT_TOL * (1 + abs(xi) ** 2)


def lyapunov(h: HillData, p: TubeParams, prev_sqrt=None, degenerate: bool = False) -> LyapunovData:
    xi, rho = xi_rho(h, p)
    bp = _at_branch_point(xi, rho)
    if degenerate:
        mode = BranchMode.DEGENERATE
    elif prev_sqrt is None:
        mode = BranchMode.PRINCIPAL
    else:
        mode = BranchMode.TRACKED
    if bp and not degenerate:
        f1 = f2 = xi
    else:
        f1, f2 = lyapunov_branches(xi, rho, prev_sqrt, degenerate)
    return LyapunovData(h.lam, xi, rho, f1, f2, mode, bp)


def lyapunov_at(q: Potential, p: TubeParams, lam, degenerate: bool = False) -> LyapunovData:
    return lyapunov(fundamental_solutions(q, lam), p, degenerate=degenerate)


@dataclass(frozen=True)
class BranchArrays:
    lam: np.ndarray
    xi: np.ndarray
    rho: np.ndarray
    f1: np.ndarray
    f2: np.ndarray


def real_axis_branches(q: Potential, p: TubeParams, lams, degenerate: bool = False) -> BranchArrays:
    """Vectorised branches on real lam under the real-axis convention;
    f1, f2 are complex arrays (real-valued where rho >= 0)."""
    lams = np.asarray(lams, dtype=float)
    h = hill_arrays(q, lams)
    xi, rho = xi_rho(h, p)
    if degenerate:
        return BranchArrays(lams, xi, rho, xi + 0j, xi + 0j)
    r = np.sqrt(rho + 0j)
    return BranchArrays(lams, xi, rho, xi + r, xi - r)


def track_branches(q: Potential, p: TubeParams, path, degenerate: bool = False) -> list[LyapunovData]:
    """Branches along a polyline of spectral parameters, by continuity.

    Real points with rho >= 0 always follow the real-axis convention (f1 the
    larger branch), so the result does not depend on the scan direction.
    Elsewhere continuation is reseeded with the principal root whenever the
    path meets a branch point (rho ~ 0) or, on the real axis, a sign change
    of rho: the sheet is not determined by continuity through such points."""
    path = [complex(z) for z in path]
    out: list[LyapunovData] = []
    prev = prev2 = None
    prev_rho = None
    for z in path:
        h = fundamental_solutions(q, z.real if z.imag == 0 else z)
        xi, rho = xi_rho(h, p)
        reseed = prev is None or _at_branch_point(xi, rho)
        if not reseed and z.imag == 0 and np.isreal(rho):
            reseed = np.real(rho) >= 0 or (prev_rho is not None and np.sign(np.real(rho)) != np.sign(np.real(prev_rho)))
        if reseed:
            guess = None
        else:
            guess = prev if prev2 is None else 2 * prev - prev2
        data = lyapunov(h, p, guess, degenerate)
        if reseed and not degenerate:
            data = LyapunovData(data.lam, data.xi, data.rho, data.f1, data.f2,
                                BranchMode.PRINCIPAL if not out else BranchMode.TRACKED, data.at_branch_point)
        out.append(data)
        r = data.sqrt_rho
        prev2, prev = (None, r) if reseed else (prev, r)
        prev_rho = rho
    return out


def even_closed_forms(F, p: TubeParams):
    """Branches for even potentials (F_- = 0):
    1/2 (sqrt(9F^2 - s_k^2) +- |c_k|)^2 - 1, which at k = 0 reads (3F +- 1)^2/2 - 1."""
    if p.k == 0:
        return 0.5 * (3 * F + 1) ** 2 - 1, 0.5 * (3 * F - 1) ** 2 - 1
    w = np.sqrt(9 * F * F - p.sk**2 + 0j)
    return 0.5 * (w + abs(p.ck)) ** 2 - 1, 0.5 * (w - abs(p.ck)) ** 2 - 1


def is_degenerate(q: Potential, p: TubeParams, lo: float | None = None, hi: float | None = None) -> bool:
    """rho_k vanishes identically: sampled at 32 points, |rho| <= 1e-10 (1 + |xi|^2)."""
    lo = q.spectral_lower_bound() if lo is None else lo
    hi = lo + 400.0 if hi is None else hi
    lams = np.linspace(lo, hi, DEGENERATE_SAMPLES + 2)[1:-1]
    # irrational offsets keep the samples off accidental zeros
    lams = lams + (hi - lo) * 1e-3 * np.sqrt(2.0)
    h = hill_arrays(q, lams)
    xi, rho = xi_rho(h, p)
    return bool(np.all(np.abs(rho) <= BRANCH_POINT_TOL * (1 + np.abs(xi) ** 2)))


def char_poly_residual(m: Monodromy4, lyap: LyapunovData, tau: complex, relative: bool = True) -> float:
    """|det(M_k - tau I) - (tau^2 - 2 f1 tau + 1)(tau^2 - 2 f2 tau + 1)|.

    With ``relative`` the residual is divided by one plus the rounding scale of
    both sides: the permanent of |M_k - tau I| and the expanded product terms."""
    A = m.entries - tau * np.eye(4)
    lhs = np.linalg.det(A)
    p1 = tau * tau - 2 * lyap.f1 * tau + 1
    p2 = tau * tau - 2 * lyap.f2 * tau + 1
    res = abs(lhs - p1 * p2)
    if not relative:
        return float(res)
    t = abs(tau)
    q1 = t * t + 2 * abs(lyap.f1) * t + 1
    q2 = t * t + 2 * abs(lyap.f2) * t + 1
    return float(res / (1 + _permanent_abs(A) + q1 * q2))


def branch_derivative(q: Potential, p: TubeParams, lam: float, nu: int, h: float | None = None) -> float:
    """Finite-difference d F_{k,nu} / d lam on the real axis (rho > 0 assumed),
    centred with one Richardson step."""

    def f(x):
        d = lyapunov_at(q, p, x)
        return float(np.real(d.f1 if nu == 1 else d.f2))

    return float(derivative(f, lam, h))

