"""Edge potentials: piecewise-polynomial densities on [0, 1] plus point interactions.

Text grammar, one directive per line (``;`` also separates directives)::

    zero
    poly [t_lo,t_hi] c0 c1 ... cn      # density c0 + c1 t + ... + cn t^n on [t_lo, t_hi]
    delta g=<real> a=<real>            # g * delta(t - a), 0 < a < 1
    delta_family v=<real> eps=<real> k=<int> N=<int>

Polynomial coefficients are in ascending powers of the absolute coordinate t.
``#`` starts a comment.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

COVER_TOL = 1e-14
EVEN_TOL = 1e-12

GRAMMAR = """\
potential-spec grammar (one directive per line, or separated by ';'):
  zero
  poly [t_lo,t_hi] c0 c1 ... cn     density c0 + c1*t + ... on [t_lo,t_hi]
  delta g=<real> a=<real>           coupling g at position a in (0,1)
  delta_family v=<real> eps=<real> k=<int> N=<int>
segments must partition [0,1]; without poly lines the density is zero."""


class PotentialError(ValueError):
    """Raised for malformed potential text or invariant violations."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Segment:
    t_lo: float
    t_hi: float
    coeffs: tuple[float, ...]

    def __call__(self, t):
        return P.polyval(t, self.coeffs)

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])


@dataclass(frozen=True, order=True)
class Delta:
    a: float
    g: float


@dataclass(frozen=True)
class Potential:
    """Density segments covering [0, 1] plus delta terms ``g * delta(t - a)``.

    Immutable and hashable, so it can key the fundamental-solution cache.
    """

    segments: tuple[Segment, ...] = field(default_factory=lambda: (Segment(0.0, 1.0, (0.0,)),))
    deltas: tuple[Delta, ...] = ()

    def __post_init__(self):
        segs = tuple(
            Segment(float(s.t_lo), float(s.t_hi), _trim(tuple(float(c) for c in s.coeffs)))
            for s in self.segments
        )
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "deltas", tuple(Delta(float(d.a), float(d.g)) for d in self.deltas))
        self._validate()

    def _validate(self):
        if not self.segments:
            raise PotentialError("at least one density segment is required")
        for s in self.segments:
            if not s.t_lo < s.t_hi:
                raise PotentialError(f"segment [{s.t_lo}, {s.t_hi}] is empty or reversed")
            if not all(math.isfinite(c) for c in s.coeffs):
                raise PotentialError("non-finite polynomial coefficient")
        if abs(self.segments[0].t_lo) > COVER_TOL or abs(self.segments[-1].t_hi - 1.0) > COVER_TOL:
            raise PotentialError("segments must start at 0 and end at 1")
        for left, right in zip(self.segments, self.segments[1:]):
            if abs(left.t_hi - right.t_lo) > COVER_TOL:
                kind = "gap" if right.t_lo > left.t_hi else "overlap"
                raise PotentialError(f"{kind} between segments at t={left.t_hi} and t={right.t_lo}")
        prev = None
        for d in self.deltas:
            if not (0.0 < d.a < 1.0):
                raise PotentialError(f"delta position a={d.a!r} is outside (0,1)")
            if not math.isfinite(d.g):
                raise PotentialError("non-finite delta coupling")
            if prev is not None and not d.a > prev:
                raise PotentialError("delta positions must be strictly increasing")
            prev = d.a

    @classmethod
    def zero(cls) -> Potential:
        return cls()

    @classmethod
    def delta(cls, g: float, a: float) -> Potential:
        return cls(deltas=(Delta(a, g),))

    @classmethod
    def polynomial(cls, coeffs) -> Potential:
        return cls(segments=(Segment(0.0, 1.0, tuple(coeffs)),))

    def with_deltas(self, *deltas: tuple[float, float]) -> Potential:
        """Return a copy with extra ``(g, a)`` delta terms."""
        extra = [Delta(a, g) for g, a in deltas]
        return Potential(self.segments, tuple(sorted(self.deltas + tuple(extra))))

    # -- evaluation ---------------------------------------------------------

    def density(self, t):
        """Evaluate the regular part of q at t (deltas excluded)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, s in enumerate(self.segments):
            last = i == len(self.segments) - 1
            mask = (t >= s.t_lo) & ((t <= s.t_hi) if last else (t < s.t_hi))
            out = np.where(mask, s(t), out)
        return out

    def density_bounds(self) -> tuple[float, float]:
        """Exact min and max of the density over [0, 1]."""
        lo, hi = math.inf, -math.inf
        for s in self.segments:
            pts = [s.t_lo, s.t_hi]
            if len(s.coeffs) > 2:
                crit = P.polyroots(P.polyder(s.coeffs))
                pts += [r.real for r in crit if abs(r.imag) < 1e-12 and s.t_lo < r.real < s.t_hi]
            vals = s(np.array(pts))
            lo, hi = min(lo, vals.min()), max(hi, vals.max())
        return float(lo), float(hi)

    def spectral_lower_bound(self) -> float:
        """A value strictly below the periodic and Dirichlet ground states.

        Negative couplings are bounded through |y(a)|^2 <= (1+1/d)|y|^2 + d|y'|^2
        with d = 1/G, G the total negative coupling.
        """
        qmin, _ = self.density_bounds()
        G = sum(-d.g for d in self.deltas if d.g < 0)
        return qmin - G * (1.0 + G) - 1.0

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = {0.0, 1.0}
        pts.update(s.t_lo for s in self.segments)
        pts.update(d.a for d in self.deltas)
        return tuple(sorted(pts))

    @property
    def is_zero(self) -> bool:
        return not self.deltas and all(all(c == 0 for c in s.coeffs) for s in self.segments)

    def is_even(self, tol: float = EVEN_TOL) -> bool:
        """True when q(t) = q(1 - t), deltas included."""
        mirrored = sorted(Delta(1.0 - d.a, d.g) for d in self.deltas)
        if len(mirrored) != len(self.deltas):
            return False
        for d, m in zip(self.deltas, mirrored):
            if abs(d.a - m.a) > tol or abs(d.g - m.g) > tol * max(1.0, abs(d.g)):
                return False
        cuts = sorted({*(s.t_lo for s in self.segments), *(1.0 - s.t_hi for s in self.segments), 0.0, 1.0})
        for x, y in zip(cuts, cuts[1:]):
            if y - x <= COVER_TOL:
                continue
            mid = 0.5 * (x + y)
            here = self._segment_at(mid).coeffs
            there = self._segment_at(1.0 - mid).coeffs
            flipped = _compose_reflect(there)
            n = max(len(here), len(flipped))
            a = np.pad(np.asarray(here), (0, n - len(here)))
            b = np.pad(np.asarray(flipped), (0, n - len(flipped)))
            if np.max(np.abs(a - b)) > tol * max(1.0, np.max(np.abs(a))):
                return False
        return True

    def _segment_at(self, t: float) -> Segment:
        for s in self.segments:
            if s.t_lo <= t <= s.t_hi:
                return s
        return self.segments[-1]

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        lines = []
        if len(self.segments) == 1 and self.segments[0].coeffs == (0.0,):
            lines.append("zero")
        else:
            for s in self.segments:
                cs = " ".join(repr(c) for c in s.coeffs)
                lines.append(f"poly [{s.t_lo!r},{s.t_hi!r}] {cs}")
        for d in self.deltas:
            lines.append(f"delta g={d.g!r} a={d.a!r}")
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        return {
            "segments": [
                {"t_lo": s.t_lo, "t_hi": s.t_hi, "coeffs": list(s.coeffs)} for s in self.segments
            ],
            "deltas": [{"g": d.g, "a": d.a} for d in self.deltas],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, data: dict) -> Potential:
        try:
            segs = tuple(
                Segment(s["t_lo"], s["t_hi"], tuple(s["coeffs"])) for s in data.get("segments", [])
            ) or (Segment(0.0, 1.0, (0.0,)),)
            deltas = tuple(sorted(Delta(d["a"], d["g"]) for d in data.get("deltas", [])))
        except (KeyError, TypeError) as exc:
            raise PotentialError(f"malformed potential JSON: {exc}") from None
        return cls(segs, deltas)

    @classmethod
    def from_json(cls, text: str) -> Potential:
        return cls.from_json_dict(json.loads(text))

    def __str__(self) -> str:
        return self.to_text().replace("\n", "; ")


def _trim(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    coeffs = tuple(coeffs) or (0.0,)
    while len(coeffs) > 1 and coeffs[-1] == 0.0:
        coeffs = coeffs[:-1]
    return coeffs


def _compose_reflect(coeffs) -> np.ndarray:
    """Coefficients of p(1 - t) given those of p(t)."""
    out = np.zeros(len(coeffs))
    base = np.array([1.0])
    for c in coeffs:
        out[: len(base)] += c * base
        base = P.polymul(base, [1.0, -1.0])
    return out


# -- parsing ---------------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_POLY_RE = re.compile(rf"^poly\s*\[\s*({_NUM})\s*,\s*({_NUM})\s*\]\s*(.*)$")
_KV_RE = re.compile(r"(\w+)\s*=\s*(\S+)")


def _number(tok: str, line: int, col: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise PotentialError(f"expected a number, got {tok!r}", line, col) from None
    if not math.isfinite(val):
        raise PotentialError(f"non-finite number {tok!r}", line, col)
    return val


def _keyvals(body: str, required: dict[str, type], line: int, offset: int) -> dict:
    out = {}
    pos = 0
    for m in _KV_RE.finditer(body):
        if body[pos:m.start()].strip():
            raise PotentialError(f"unexpected text {body[pos:m.start()].strip()!r}", line, offset + pos + 1)
        key, val = m.group(1), m.group(2)
        col = offset + m.start(2) + 1
        if key not in required:
            raise PotentialError(f"unknown key {key!r}", line, offset + m.start() + 1)
        if key in out:
            raise PotentialError(f"duplicate key {key!r}", line, offset + m.start() + 1)
        if required[key] is int:
            try:
                out[key] = int(val)
            except ValueError:
                raise PotentialError(f"expected an integer for {key}, got {val!r}", line, col) from None
        else:
            out[key] = _number(val, line, col)
        pos = m.end()
    if body[pos:].strip():
        raise PotentialError(f"unexpected text {body[pos:].strip()!r}", line, offset + pos + 1)
    missing = [k for k in required if k not in out]
    if missing:
        raise PotentialError(f"missing key(s): {', '.join(missing)}", line)
    return out


def parse_potential(text: str) -> Potential:
    """Parse the potential-spec text form into a validated :class:`Potential`."""
    text = text.replace("−", "-")
    segments: list[Segment] = []
    deltas: list[Delta] = []
    saw_zero = False
    lineno = 0
    for raw_line in text.splitlines() or [""]:
        lineno += 1
        for piece in raw_line.split("#", 1)[0].split(";"):
            stmt = piece.strip()
            if not stmt:
                continue
            col0 = raw_line.find(stmt)
            head = stmt.split(None, 1)[0]
            if head == "zero":
                if stmt != "zero":
                    raise PotentialError("'zero' takes no arguments", lineno, col0 + 5)
                saw_zero = True
            elif head.startswith("poly"):
                m = _POLY_RE.match(stmt)
                if not m:
                    raise PotentialError("expected 'poly [t_lo,t_hi] c0 c1 ...'", lineno, col0 + 1)
                lo = _number(m.group(1), lineno, col0 + m.start(1) + 1)
                hi = _number(m.group(2), lineno, col0 + m.start(2) + 1)
                toks = m.group(3).split()
                if not toks:
                    raise PotentialError("polynomial needs at least one coefficient", lineno, col0 + len(stmt))
                base = col0 + m.start(3)
                coeffs = []
                for tok in toks:
                    coeffs.append(_number(tok, lineno, base + m.group(3).find(tok) + 1))
                segments.append(Segment(lo, hi, tuple(coeffs)))
            elif head == "delta":
                body = stmt[len("delta"):]
                kv = _keyvals(body, {"g": float, "a": float}, lineno, col0 + len("delta"))
                deltas.append(Delta(kv["a"], kv["g"]))
            elif head == "delta_family":
                body = stmt[len("delta_family"):]
                kv = _keyvals(body, {"v": float, "eps": float, "k": int, "N": int}, lineno, col0 + len("delta_family"))
                fam = make_delta_family(kv["v"], kv["eps"], kv["k"], kv["N"])
                deltas.extend(fam.deltas)
            else:
                raise PotentialError(f"unknown directive {head!r}", lineno, col0 + 1)
    if not segments:
        segments = [Segment(0.0, 1.0, (0.0,))]
    elif saw_zero:
        raise PotentialError("'zero' cannot be combined with poly segments")
    segments.sort(key=lambda s: s.t_lo)
    deltas.sort()
    for d0, d1 in zip(deltas, deltas[1:]):
        if d0.a == d1.a:
            raise PotentialError(f"two deltas at the same position a={d0.a!r}")
    return Potential(tuple(segments), tuple(deltas))


def make_delta_family(v: float, eps: float, k: int, N: int) -> Potential:
    """Single delta of coupling 1/v at a = 1/2 + cos(pi k/N) eps + eps^2."""
    if v == 0:
        raise PotentialError("v must be nonzero")
    if N < 1 or not 0 <= k < N:
        raise PotentialError(f"need N >= 1 and 0 <= k < N, got k={k}, N={N}")
    a = 0.5 + _cos_pi_frac(k, N) * eps + eps * eps
    if not 0.0 < a < 1.0:
        raise PotentialError(f"delta position {a!r} is outside (0,1)")
    return Potential(deltas=(Delta(a, 1.0 / v),))


def _cos_pi_frac(k: int, N: int) -> float:
    # exact zeros/ones at k = 0 and 2k = N
    if k == 0:
        return 1.0
    if 2 * k == N:
        return 0.0
    return math.cos(math.pi * k / N)
