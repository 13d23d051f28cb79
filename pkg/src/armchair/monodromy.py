"""4x4 monodromy matrices of the armchair tube fiber operators H_k.

Two independent assemblies are provided: the closed factorization
M_k = R^{-1} Y T_k R, and a four-factor product Y3 Y2 Y1 Y0 kept purely
as a cross-check oracle.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PoleError
from .hill import HillData

POLE_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
Z2 = np.zeros((2, 2), dtype=complex)
J1 = np.diag([1.0, -1.0]).astype(complex)
J2 = np.array([[0, 1], [1, 0]], dtype=complex)
J = np.block([[Z2, J2], [-J2, Z2]])


@dataclass(frozen=True)
class TubeParams:
    """Tube size N and quasi-momentum index k, with derived trigonometric constants.

    ``s`` is the phase exp(2 pi i k / N) that enters the fiber problem."""

    N: int
    k: int
    s: complex = field(init=False)
    sk: float = field(init=False)
    ck: float = field(init=False)
    s2k: float = field(init=False)

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0 <= self.k < self.N:
            raise ValueError(f"k must lie in [0, {self.N}), got {self.k!r}")
        N, k = int(self.N), int(self.k)
        # exact values where rounding would otherwise leak 1e-16 noise into rho
        if k == 0:
            s, sk, ck = 1.0 + 0j, 0.0, 1.0
        elif 2 * k == N:
            s, sk, ck = -1.0 + 0j, 1.0, 0.0
        else:
            s = cmath.exp(2j * math.pi * k / N)
            sk, ck = math.sin(math.pi * k / N), math.cos(math.pi * k / N)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "sk", sk)
        object.__setattr__(self, "ck", ck)
        object.__setattr__(self, "s2k", 2 * sk * ck)

    @property
    def is_self_conjugate(self) -> bool:
        """k = 0 or k = N/2: the phase is real."""
        return self.k == 0 or 2 * self.k == self.N

    @classmethod
    def all_k(cls, N: int) -> list[TubeParams]:
        return [cls(N, k) for k in range(N)]


@dataclass(frozen=True)
class Monodromy4:
    entries: np.ndarray
    regularized: bool = False

    def block(self, i: int, j: int) -> np.ndarray:
        return self.entries[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))


def _V(F, s) -> np.ndarray:
    return np.array([[2 * F, -s], [-1 / s, 2 * F]], dtype=complex)


def _R(phi1) -> np.ndarray:
    return np.block([[I2, Z2], [Z2, phi1 * I2]])


def factor_T(h: HillData, p: TubeParams) -> np.ndarray:
    Vk = _V(h.F, p.s)
    V0 = _V(h.F, 1.0)
    return np.block([[Vk, I2], [V0 @ Vk - I2, V0]])


def factor_Y(h: HillData) -> np.ndarray:
    return np.block([[h.theta1 * I2, I2], [h.phi1 * h.theta1p * I2, h.phi1p * I2]])


def _check_pole(h: HillData):
    if abs(h.phi1) < POLE_TOL:
        raise PoleError("lambda lies on the Dirichlet spectrum; use regularized=True", h.lam, "monodromy")


def build_monodromy(h: HillData, p: TubeParams, regularized: bool = False) -> Monodromy4:
    """M_k = R^{-1} Y T_k R, or the entire conjugate R M_k R^{-1} = Y T_k."""
    YT = factor_Y(h) @ factor_T(h, p)
    if regularized:
        return Monodromy4(YT, True)
    _check_pole(h)
    R = _R(h.phi1)
    Rinv = _R(1 / h.phi1)
    return Monodromy4(Rinv @ YT @ R, False)


def oracle_factors(h: HillData, p: TubeParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The factors (Y0, Y1, Y2, Y3) of the oracle product M_k = Y3 Y2 Y1 Y0."""
    _check_pole(h)
    th, ph, thp, php = h.theta1, h.phi1, h.theta1p, h.phi1p
    s = p.s
    A0 = np.array([[php, -s], [1 / s, -th]], dtype=complex)
    A1 = np.array([[0, th], [php, 0]], dtype=complex)
    A2 = np.array([[th, -1], [-1, php]], dtype=complex)
    Y0 = np.block([[I2, Z2], [A0 / ph, J1]])
    Y1 = np.block([[A1 @ J2, ph * J1], [thp * J1, J2 @ A1]])
    Y2 = np.block([[I2, Z2], [A2 / ph, J1]])
    Y3 = np.block([[th * I2, ph * I2], [thp * I2, php * I2]])
    return Y0, Y1, Y2, Y3


def build_monodromy_oracle(h: HillData, p: TubeParams) -> Monodromy4:
    Y0, Y1, Y2, Y3 = oracle_factors(h, p)
    return Monodromy4(Y3 @ Y2 @ Y1 @ Y0, False)


# -- identity checks -------------------------------------------------------

def _permanent_abs(m: np.ndarray) -> float:
    """Sum of |products| over all permutations: the natural rounding scale of det."""
    a = np.abs(m)
    n = a.shape[0]
    return float(sum(np.prod(a[range(n), perm]) for perm in itertools.permutations(range(n))))


def _trace_sq_scale(m: np.ndarray) -> float:
    return float(np.sum(np.abs(m) * np.abs(m).T))


@dataclass(frozen=True)
class IdentityReport:
    """Residuals of the monodromy identities.

    ``relative`` divides each residual by the magnitude of the terms entering
    it (plus one); ``absolute`` is the raw residual."""

    lam: complex
    N: int
    k: int
    absolute: dict
    relative: dict

    def max_relative(self) -> float:
        return max(self.relative.values())

    def to_dict(self) -> dict:
        return {"N": self.N, "k": self.k, "absolute": dict(self.absolute), "relative": dict(self.relative)}


def verify_identities(h: HillData, p: TubeParams) -> IdentityReport:
    """det M_k = 1, Tr M_k = Tr M_0 - 4 s_k^2, Tr M_0^2 = 72F^2 + (Tr M_0)^2/2 - 4,
    Tr M_k^2 = Tr M_0^2 - 8 s_k^2 Tr M_0 - 4 s_2k^2 and M_k^T J M_k = J."""
    Mk = build_monodromy(h, p).entries
    M0 = build_monodromy(h, TubeParams(1, 0)).entries
    F = h.F
    absolute, relative = {}, {}

    def put(name, res, scale):
        absolute[name] = float(abs(res))
        relative[name] = float(abs(res) / (1.0 + scale))

    put("det", np.linalg.det(Mk) - 1.0, _permanent_abs(Mk))
    tr0, trk = np.trace(M0), np.trace(Mk)
    put("trace_k", trk - (tr0 - 4 * p.sk**2),
        float(np.sum(np.abs(np.diag(Mk))) + np.sum(np.abs(np.diag(M0)))))
    tr0sq = np.trace(M0 @ M0)
    put("trace_sq_0", tr0sq - (72 * F**2 + 0.5 * tr0**2 - 4),
        _trace_sq_scale(M0) + 72 * abs(F) ** 2 + 0.5 * abs(tr0) ** 2)
    trksq = np.trace(Mk @ Mk)
    put("trace_sq_k", trksq - (tr0sq - 8 * p.sk**2 * tr0 - 4 * p.s2k**2),
        _trace_sq_scale(Mk) + _trace_sq_scale(M0) + 8 * abs(tr0))
    symp = Mk.T @ J @ Mk - J
    scale = np.abs(Mk).T @ np.abs(J) @ np.abs(Mk)
    absolute["symplectic"] = float(np.max(np.abs(symp)))
    relative["symplectic"] = float(np.max(np.abs(symp) / (1 + scale)))
    return IdentityReport(h.lam, p.N, p.k, absolute, relative)


def oracle_residual(h: HillData, p: TubeParams) -> float:
    """max |M - M_oracle| relative to the largest entry of M."""
    a = build_monodromy(h, p).entries
    b = build_monodromy_oracle(h, p).entries
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))))


FACTOR_DETS = (-1.0, 1.0, -1.0, 1.0)


def oracle_factor_determinants(h: HillData, p: TubeParams) -> tuple[complex, ...]:
    return tuple(complex(np.linalg.det(Y)) for Y in oracle_factors(h, p))


def oracle_factor_residuals(h: HillData, p: TubeParams) -> tuple[float, ...]:
    """|det Y_i - (-1, 1, -1, 1)_i| relative to the permanent of |Y_i|."""
    return tuple(
        float(abs(np.linalg.det(Y) - d) / (1.0 + _permanent_abs(Y)))
        for Y, d in zip(oracle_factors(h, p), FACTOR_DETS)
    )
