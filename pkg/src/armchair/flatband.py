"""Compactly supported eigenfunctions of H_k at Dirichlet eigenvalues.

At mu in the Dirichlet spectrum every eigenfunction restricted to an edge is
a multiple of phi(., mu), so a function on the periodic graph is stored as a
table (n, j) -> C_{n,j} of edge coefficients; cell n has edges j = 1..6.
With P = phi'(1, mu) the Kirchhoff conditions become linear relations
between the C_{n,j}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NumericalError
from .hill import fundamental_solutions, solution_at
from .monodromy import TubeParams
from .potential import Potential

DIRICHLET_TOL = 1e-8
CASE_B_TOL = 1e-10
EDGES = range(1, 7)


@dataclass
class EdgeTable:
    """Finitely supported edge coefficients; component (n, j) is C_{n,j} phi(., mu)."""

    coeffs: dict = field(default_factory=dict)

    def __getitem__(self, key) -> complex:
        return self.coeffs.get(key, 0.0)

    def __add__(self, other: EdgeTable) -> EdgeTable:
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0.0) + c
        return EdgeTable(out)

    def __sub__(self, other: EdgeTable) -> EdgeTable:
        return self + other.scaled(-1.0)

    def scaled(self, a: complex) -> EdgeTable:
        return EdgeTable({key: a * c for key, c in self.coeffs.items()})

    def shifted(self, n: int) -> EdgeTable:
        """Translation by n cells: (shifted)_{m,j} = C_{m-n,j}."""
        return EdgeTable({(m + n, j): c for (m, j), c in self.coeffs.items()})

    def support(self, tol: float = 0.0) -> set:
        return {key for key, c in self.coeffs.items() if abs(c) > tol}

    def cells(self) -> range:
        ns = [n for n, _ in self.support()]
        return range(min(ns), max(ns) + 1) if ns else range(0)

    def max_abs(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def to_list(self) -> list:
        return [[n, j, complex(c)] for (n, j), c in sorted(self.coeffs.items())]


@dataclass
class FlatBandEigenfunction:
    mu: float
    k: int
    case: str  # "a" or "b"
    nu: int
    table: EdgeTable

    @property
    def coeffs(self) -> dict:
        return self.table.coeffs

    def support(self) -> set:
        return self.table.support()


@dataclass(frozen=True)
class _Point:
    """Data at a Dirichlet eigenvalue."""

    mu: float
    phi1: float
    P: float  # phi'(1, mu)
    sk: complex  # s^k


def _point(q: Potential, mu: float, p: TubeParams) -> _Point:
    h = fundamental_solutions(q, mu)
    scale = 1 + abs(h.phi1p)
    if abs(h.phi1) > DIRICHLET_TOL * scale:
        raise ValueError(f"mu={mu!r} is not a Dirichlet eigenvalue (phi(1, mu) = {h.phi1:.3e})")
    return _Point(float(mu), float(h.phi1), float(h.phi1p), p.s)


def case_of(P: float, p: TubeParams) -> str:
    """(b) when phi_1'^2 = 1 and k = 0, otherwise (a)."""
    return "b" if p.k == 0 and abs(P * P - 1) <= CASE_B_TOL else "a"


def kappas(P: float, p: TubeParams) -> tuple[complex, complex]:
    return 1 - p.s * P**2, 1 - p.s * P**4


def _psi_tables(pt: _Point, p: TubeParams, case: str) -> tuple[EdgeTable, EdgeTable]:
    P, s = pt.P, pt.sk
    if case == "b":
        common = {(1, 4): 1.0, (0, 5): -1.0, (0, 6): P}
        t1 = {**common, (0, 1): -P, (0, 3): -P, (0, 2): 0.0, (0, 4): -1.0}
        t2 = {**common, (0, 1): 0.0, (0, 3): 0.0, (0, 4): 0.0, (0, 2): 1.0}
        return EdgeTable(t1), EdgeTable(t2)
    k1, k2 = kappas(P, p)
    X = s * P**2
    t1 = {
        (1, 1): X, (1, 2): P * X, (1, 3): P**2 * X, (1, 4): X / (s * P),
        (0, 4): -X / (s * P), (0, 1): -X, (0, 2): -P * X, (0, 3): -1.0,
        (0, 5): 0.0, (0, 6): k2,
    }
    Y = s * P
    t2 = {
        (-1, 2): Y, (-1, 5): -Y, (-1, 6): P * Y,
        (0, 4): Y / s, (0, 2): -Y, (0, 5): Y, (0, 6): -1.0, (0, 3): k1, (0, 1): 0.0,
        (1, 4): -Y / s,
    }
    return EdgeTable(t1), EdgeTable(t2)


def build_psi(q: Potential, mu: float, p: TubeParams) -> tuple[FlatBandEigenfunction, FlatBandEigenfunction]:
    """The two generating eigenfunctions psi^(0,1), psi^(0,2) at mu."""
    pt = _point(q, mu, p)
    case = case_of(pt.P, p)
    t1, t2 = _psi_tables(pt, p, case)
    return (FlatBandEigenfunction(pt.mu, p.k, case, 1, t1),
            FlatBandEigenfunction(pt.mu, p.k, case, 2, t2))


def kirchhoff_residual(f: EdgeTable, q: Potential, mu: float, p: TubeParams) -> float:
    """Max violation of the vertex conditions for the function sum C_{n,j} phi.

    Values at t = 0 vanish exactly and values at t = 1 equal C phi(1, mu), so
    the continuity part reduces to the mismatch of those end values; the
    derivative part uses phi'(0) = 1 and phi'(1) = P."""
    h = fundamental_solutions(q, mu)
    P, phi1, s = h.phi1p, h.phi1, p.s
    cells = f.cells()
    if not cells:
        return 0.0
    worst = 0.0
    for n in range(cells.start - 1, cells.stop + 1):
        C = lambda m, j: f[(m, j)]
        # continuity: end values C phi1 against start values 0
        groups = [
            (C(n, 1) * phi1, 0.0, 0.0),
            (C(n, 2) * phi1, 0.0, 0.0),
            (C(n, 3) * phi1, 0.0, C(n - 1, 6) * phi1),
            (s * C(n, 4) * phi1, 0.0, C(n - 1, 5) * phi1),
        ]
        for g in groups:
            worst = max(worst, max(abs(a - b) for a in g for b in g))
        derivs = [
            C(n, 1) * P - C(n, 2) - C(n, 5),
            C(n, 2) * P - C(n, 3) - C(n, 6),
            C(n, 3) * P - C(n, 4) + C(n - 1, 6) * P,
            s * C(n, 4) * P - C(n, 1) + C(n - 1, 5) * P,
        ]
        worst = max(worst, max(abs(d) for d in derivs))
    return float(worst)


def vertex_values(f: EdgeTable, q: Potential, mu: float) -> float:
    """Largest |value| of the function at any vertex."""
    phi1 = fundamental_solutions(q, mu).phi1
    return float(f.max_abs() * abs(phi1))


def translate(psi: FlatBandEigenfunction, n: int) -> EdgeTable:
    """psi^(n, nu): the generator moved to start at cell n."""
    return psi.table.shifted(n)


def reconstruct(coeffs: dict, psi1: FlatBandEigenfunction, psi2: FlatBandEigenfunction) -> EdgeTable:
    """sum_n c_{n,1} psi^(n,1) + c_{n,2} psi^(n,2) for coeffs {(n, nu): c}."""
    out = EdgeTable()
    for (n, nu), c in sorted(coeffs.items()):
        base = psi1 if nu == 1 else psi2
        out = out + translate(base, n).scaled(c)
    return out


def decompose(f: EdgeTable, q: Potential, mu: float, p: TubeParams, tol: float = 1e-8) -> dict:
    """Coefficients {(n, nu): c} with f = sum c psi^(n, nu).

    Case (b): c_{n,1} = -P C_{n,1}, c_{n,2} = C_{n,2}.
    Case (a): psi^(n,1) is the only generator touching edges (m, 1), and
    psi^(n,2) the only one touching edges (m, 5), which gives the recursions
        c_{m,1} = c_{m-1,1} - C_{m,1} / (s^k P^2),
        c_{m+1,2} = c_{m,2} - C_{m,5} / (s^k P),
    started from zero below the support.  The result is checked by
    reconstruction; a function outside the span raises ValueError."""
    psi1, psi2 = build_psi(q, mu, p)
    pt = _point(q, mu, p)
    P, s = pt.P, pt.sk
    cells = f.cells()
    if not cells:
        return {}
    out: dict = {}
    if psi1.case == "b":
        for n in cells:
            out[(n, 1)] = -P * f[(n, 1)]
            out[(n, 2)] = f[(n, 2)]
    else:
        X, Y = s * P**2, s * P
        x = 0.0
        y = 0.0
        for m in range(cells.start - 2, cells.stop + 2):
            x = x - f[(m, 1)] / X
            out[(m, 1)] = x
            y = y - f[(m, 5)] / Y
            out[(m + 1, 2)] = y
    out = {key: c for key, c in out.items() if c != 0}
    err = reconstruction_error(f, out, psi1, psi2)
    if err > tol:
        raise ValueError(f"function is not in the flat-band eigenspace (reconstruction error {err:.3e})")
    return out


def reconstruction_error(f: EdgeTable, coeffs: dict, psi1, psi2) -> float:
    diff = f - reconstruct(coeffs, psi1, psi2)
    return diff.max_abs() / max(1.0, f.max_abs())


def phi_l2_norm(q: Potential, mu: float, tol: float = 1e-10) -> float:
    """||phi(., mu)||_{L^2(0,1)} by piecewise Gauss-Legendre quadrature,
    nodes doubled until two successive values agree to ``tol``."""
    cuts = sorted({0.0, 1.0, *q.breakpoints})
    prev = None
    for npts in (16, 32, 64, 128, 256):
        x, w = leggauss(npts)
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            t = 0.5 * (b - a) * x + 0.5 * (a + b)
            vals = solution_at(q, mu, t)[:, 0, 1]
            total += 0.5 * (b - a) * float(np.sum(w * np.abs(vals) ** 2))
        if prev is not None and abs(total - prev) <= tol * total:
            return math.sqrt(total)
        prev = total
    raise NumericalError("phi norm quadrature did not converge", mu, "flatband")


def gram_matrix(q: Potential, mu: float, p: TubeParams, m: int = 8) -> np.ndarray:
    """Gram matrix of psi^(n,nu), |n| <= m, in L^2 of the periodic graph.
    Ordering: (n, nu) with n ascending, nu = 1, 2."""
    psi1, psi2 = build_psi(q, mu, p)
    norm2 = phi_l2_norm(q, mu) ** 2
    basis = [translate(ps, n) for n in range(-m, m + 1) for ps in (psi1, psi2)]
    keys = sorted(set().union(*(b.coeffs for b in basis)))
    A = np.array([[b[key] for key in keys] for b in basis], dtype=complex)
    return norm2 * (A.conj() @ A.T)
