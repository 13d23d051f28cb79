"""Command line front end: bands, resonances, flatbands, verify.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .hill import dirichlet_eigenvalues, fundamental_solutions
from .lyapunov import char_poly_residual, lyapunov
from .monodromy import TubeParams, build_monodromy, oracle_factor_residuals, oracle_residual, verify_identities
from .potential import GRAMMAR, Potential, PotentialError, make_delta_family, parse_potential
from .resonance import complex_resonances, delta_asymptotics, label_pairs, real_resonances
from .flatband import build_psi, kappas, kirchhoff_residual, vertex_values
from .spectrum import MIN_GRID, full_spectrum, plot_data, thread_count

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


# -- serialization ---------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = "%.17g" % x
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj):
    """Convert numpy scalars and complex numbers to JSON-ready values."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits (NaN as null)."""

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        if isinstance(o, float):
            return _fmt_float(o)
        return json.dumps(o)

    return enc(_plain(obj), 0) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else ("" if v is None else v) for v in r])
    return buf.getvalue()


# -- configuration ---------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    potential: Potential
    potential_text: str
    N: int = 1
    ks: list = field(default_factory=list)
    lam_range: tuple = (0.0, 100.0)
    grid: int = 512
    fmt: str = "json"
    out: str = "-"
    rect: tuple | None = None
    family: dict | None = None
    n_dirichlet: int = 5
    lambdas: list = field(default_factory=list)
    plot_data: bool = False
    mode: str = "auto"
    real_range: tuple | None = None


def _parse_range(text, name="range") -> tuple[float, float]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(":")
    if len(parts) != 2:
        raise UsageError(f"{name} must look like a:b, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"{name} must contain two numbers, got {text!r}") from None
    if not lo < hi:
        raise UsageError(f"{name} is empty: {text!r}")
    return lo, hi


def _parse_rect(text) -> tuple[float, float, float, float]:
    parts = list(text) if isinstance(text, (list, tuple)) else str(text).split(":")
    if len(parts) != 4:
        raise UsageError(f"rect must look like re0:re1:im0:im1, got {text!r}")
    try:
        r = tuple(float(x) for x in parts)
    except ValueError:
        raise UsageError(f"rect must contain four numbers, got {text!r}") from None
    if not (r[0] < r[1] and r[2] < r[3]):
        raise UsageError(f"rect is empty: {text!r}")
    return r


_FAMILY_KEYS = {"v": float, "eps": float, "k": int, "N": int, "n": int}


def _parse_family(tokens) -> dict:
    if isinstance(tokens, dict):
        items = dict(tokens)
    else:
        if isinstance(tokens, str):
            tokens = [tokens]
        items = {}
        for tok in tokens:
            for part in tok.replace(",", " ").split():
                if "=" not in part:
                    raise UsageError(f"delta-family entries must be key=value, got {part!r}")
                key, val = part.split("=", 1)
                items[key] = val
    out = {}
    for key, val in items.items():
        if key not in _FAMILY_KEYS:
            raise UsageError(f"unknown delta-family key {key!r} (expected {sorted(_FAMILY_KEYS)})")
        try:
            out[key] = _FAMILY_KEYS[key](val)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for delta-family key {key!r}: {val!r}") from None
    missing = {"v", "eps", "k", "N"} - set(out)
    if missing:
        raise UsageError(f"delta-family needs {sorted(missing)}")
    return out


def _parse_ks(value, N) -> list[int]:
    if value is None:
        return list(range(N))
    if isinstance(value, int):
        value = [value]
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split()]
    try:
        ks = sorted({int(v) for v in value})
    except ValueError:
        raise UsageError(f"k must be integers, got {value!r}") from None
    bad = [k for k in ks if not 0 <= k < N]
    if bad:
        raise UsageError(f"k values {bad} outside [0, {N})")
    return ks


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config file (if any) with flags; flags win."""
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
        if not isinstance(base, dict):
            raise UsageError("config file must hold a JSON object")

    def pick(flag, key, default=None):
        val = getattr(args, flag, None)
        return val if val is not None else base.get(key, default)

    family = pick("delta_family", "delta_family")
    family = _parse_family(family) if family is not None else None
    ptext = pick("potential", "potential")
    if family is not None:
        if ptext is not None:
            raise UsageError("give either a potential or a delta family, not both")
        try:
            pot = make_delta_family(family["v"], family["eps"], family["k"], family["N"])
        except (PotentialError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        ptext = str(pot)
    else:
        if ptext is None:
            ptext = "zero"
        pot = parse_potential(ptext)

    N = pick("N", "N", family["N"] if family else 1)
    try:
        N = int(N)
    except (TypeError, ValueError):
        raise UsageError(f"N must be an integer, got {N!r}") from None
    if N < 1:
        raise UsageError("N must be at least 1")
    kval = pick("k", "k", [family["k"]] if family else None)
    ks = _parse_ks(kval, N)

    grid = int(pick("grid", "grid", 512))
    if grid < MIN_GRID:
        raise UsageError(f"grid must be at least {MIN_GRID}")
    fmt = pick("format", "format", "json")
    if fmt not in ("json", "csv"):
        raise UsageError(f"format must be json or csv, got {fmt!r}")
    rng = pick("range", "range", None)
    rect = pick("rect", "rect", None)
    real_range = pick("real_range", "real_range", None)
    lambdas = pick("lam", "lambda", [])
    if not isinstance(lambdas, list):
        lambdas = [lambdas]
    try:
        lambdas = [float(x) for x in lambdas]
    except (TypeError, ValueError):
        raise UsageError(f"lambda values must be numbers, got {lambdas!r}") from None
    mode = pick("mode", "mode", "auto")
    if mode not in ("auto", "two-branch", "degenerate"):
        raise UsageError(f"unknown mode {mode!r}")
    n_dir = int(pick("n_dirichlet", "n_dirichlet", 5))
    if n_dir < 1:
        raise UsageError("n-dirichlet must be positive")
    return RunConfig(
        command=args.command,
        potential=pot,
        potential_text=ptext,
        N=N,
        ks=ks,
        lam_range=_parse_range(rng) if rng is not None else (0.0, 100.0),
        grid=grid,
        fmt=fmt,
        out=pick("out", "out", "-"),
        rect=_parse_rect(rect) if rect is not None else None,
        family=family,
        n_dirichlet=n_dir,
        lambdas=lambdas,
        plot_data=bool(pick("plot_data", "plot_data", False)),
        mode=mode,
        real_range=_parse_range(real_range, "real-range") if real_range is not None else None,
    )


# -- commands --------------------------------------------------------------

def _map(fn, items):
    """Ordered parallel map capped by ARMCHAIR_THREADS."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def run_bands(cfg: RunConfig) -> str:
    lo, hi = cfg.lam_range
    if cfg.mode == "auto":
        spec = full_spectrum(cfg.potential, cfg.N, lo, hi, cfg.grid, ks=cfg.ks)
        per_k = spec.per_k
        degenerate = spec.degenerate
        union = spec.union
        flat = spec.flat
    else:
        from .spectrum import bands_for_k, flat_bands, merge_intervals

        res = _map(lambda k: bands_for_k(cfg.potential, TubeParams(cfg.N, k), lo, hi, cfg.grid, cfg.mode), cfg.ks)
        per_k = dict(zip(cfg.ks, res))
        degenerate = {k: cfg.mode == "degenerate" for k in cfg.ks}
        union = merge_intervals([(b.lo, b.hi) for bs in per_k.values() for b in bs])
        flat = flat_bands(cfg.potential, lo, hi)
    plots = []
    if cfg.plot_data:
        for k in cfg.ks:
            xs, f1, f2 = plot_data(cfg.potential, TubeParams(cfg.N, k), lo, hi, cfg.grid)
            plots.append({"k": k, "lambda": list(xs), "F1": list(f1), "F2": list(f2)})
    if cfg.fmt == "csv":
        if cfg.plot_data:
            rows = [(p["k"], float(x), float(a), float(b)) for p in plots
                    for x, a, b in zip(p["lambda"], p["F1"], p["F2"])]
            return _csv_text(["k", "lambda", "F1", "F2"], rows)
        rows = [(k, str(b.branch), float(b.lo), float(b.hi), b.lo_type, b.hi_type, b.lo_n, b.hi_n)
                for k in sorted(per_k) for b in per_k[k]]
        return _csv_text(["k", "branch", "lo", "hi", "lo_type", "hi_type", "lo_n", "hi_n"], rows)
    doc = {
        "command": "bands",
        "potential": cfg.potential_text,
        "N": cfg.N,
        "range": [lo, hi],
        "grid": cfg.grid,
        "results": [
            {"k": k, "degenerate": degenerate[k], "bands": [b.to_dict() for b in per_k[k]]}
            for k in sorted(per_k)
        ],
        "union": [[a, b] for a, b in union],
        "flat_bands": [f.to_dict() for f in flat],
    }
    if cfg.plot_data:
        doc["plot_data"] = plots
    return dumps(doc)


def run_resonances(cfg: RunConfig) -> str:
    if cfg.rect is None and cfg.real_range is None:
        raise UsageError("resonances needs --rect and/or --real-range")

    def job(k):
        p = TubeParams(cfg.N, k)
        entry = {"k": k}
        if cfg.rect is not None:
            found = complex_resonances(cfg.potential, p, cfg.rect)
            entry["winding_number"] = sum(r.multiplicity for r in found)
            entry["resonances"] = [dict(r.to_dict(), label=lab) for lab, r in label_pairs(found)]
        if cfg.real_range is not None:
            real = real_resonances(cfg.potential, p, *cfg.real_range)
            entry["real_resonances"] = [r.to_dict() for r in real]
        return entry

    results = _map(job, cfg.ks)
    doc = {"command": "resonances", "potential": cfg.potential_text, "N": cfg.N}
    if cfg.rect is not None:
        doc["rect"] = list(cfg.rect)
    if cfg.real_range is not None:
        doc["real_range"] = list(cfg.real_range)
    doc["results"] = results
    fam = cfg.family
    if fam is not None:
        n = fam.get("n", 1)
        p = TubeParams(fam["N"], fam["k"])
        asym = {"n": n, "eps": fam["eps"], "v": fam["v"]}
        try:
            for form in ("corrected", "printed"):
                rm, rp = delta_asymptotics(p, n, fam["eps"], form)
                asym[form] = {"r_minus": rm, "r_plus": rp}
        except ValueError as exc:
            asym["error"] = str(exc)
        doc["asymptotic"] = asym
    if cfg.fmt == "csv":
        rows = []
        for e in results:
            for key in ("resonances", "real_resonances"):
                for r in e.get(key, []):
                    rows.append((e["k"], float(r["lambda"].real), float(r["lambda"].imag), r["kind"],
                                 r["multiplicity"], float(r["residual"]), r.get("label")))
        return _csv_text(["k", "re", "im", "kind", "multiplicity", "residual", "label"], rows)
    return dumps(doc)


def run_flatbands(cfg: RunConfig) -> str:
    q = cfg.potential
    mus: list[float] = []
    hi = max(50.0, q.density_bounds()[1] + 50.0)
    while len(mus) < cfg.n_dirichlet:
        mus = dirichlet_eigenvalues(q, hi)
        hi *= 2
    mus = mus[:cfg.n_dirichlet]

    def job(k):
        p = TubeParams(cfg.N, k)
        rows = []
        for n, mu in enumerate(mus, start=1):
            psi1, psi2 = build_psi(q, mu, p)
            P = fundamental_solutions(q, mu).phi1p
            k1, k2 = kappas(P, p)
            rows.append({
                "n": n, "mu": mu, "case": psi1.case, "phi1p": P,
                "kappa1": complex(k1), "kappa2": complex(k2),
                "psi1": psi1.table.to_list(), "psi2": psi2.table.to_list(),
                "kirchhoff_residual": max(kirchhoff_residual(psi1.table, q, mu, p),
                                          kirchhoff_residual(psi2.table, q, mu, p)),
                "vertex_residual": max(vertex_values(psi1.table, q, mu), vertex_values(psi2.table, q, mu)),
            })
        return {"k": k, "flat_bands": rows}

    results = _map(job, cfg.ks)
    if cfg.fmt == "csv":
        rows = [(e["k"], r["n"], float(r["mu"]), r["case"], float(r["kirchhoff_residual"]),
                 float(r["vertex_residual"])) for e in results for r in e["flat_bands"]]
        return _csv_text(["k", "n", "mu", "case", "kirchhoff_residual", "vertex_residual"], rows)
    return dumps({"command": "flatbands", "potential": cfg.potential_text, "N": cfg.N, "results": results})


VERIFY_TOL = 1e-8


def run_verify(cfg: RunConfig) -> str:
    if not cfg.lambdas:
        raise UsageError("verify needs at least one --lambda")
    q = cfg.potential
    rng = np.random.default_rng(20240101)
    taus = np.exp(2j * np.pi * rng.random(8)) * np.where(rng.random(8) < 0.5, 1.0, 2.0)

    def job(item):
        lam, k = item
        h = fundamental_solutions(q, lam)
        p = TubeParams(cfg.N, k)
        rep = verify_identities(h, p)
        m = build_monodromy(h, p)
        ly = lyapunov(h, p)
        out = {
            "lambda": lam, "k": k,
            "hill": {"wronskian": h.wronskian_residual(), "aux": max(h.aux_residuals())},
            "identities": rep.to_dict(),
            "oracle": oracle_residual(h, p),
            "factor_determinants": max(oracle_factor_residuals(h, p)),
            "char_poly": max(char_poly_residual(m, ly, t) for t in taus),
            "vieta": ly.vieta_residual(),
        }
        worst = max([out["hill"]["wronskian"], out["hill"]["aux"], rep.max_relative(), out["oracle"],
                     out["factor_determinants"], out["char_poly"], out["vieta"]])
        out["max_residual"] = worst
        out["ok"] = worst <= VERIFY_TOL
        return out

    items = [(lam, k) for lam in cfg.lambdas for k in cfg.ks]
    reports = _map(job, items)
    doc = {"command": "verify", "potential": cfg.potential_text, "N": cfg.N, "tolerance": VERIFY_TOL,
           "reports": reports, "ok": all(r["ok"] for r in reports)}
    if cfg.fmt == "csv":
        rows = [(r["lambda"], r["k"], float(r["max_residual"]), str(r["ok"]).lower()) for r in reports]
        return _csv_text(["lambda", "k", "max_residual", "ok"], rows)
    return dumps(doc)


COMMANDS = {"bands": run_bands, "resonances": run_resonances, "flatbands": run_flatbands, "verify": run_verify}


# -- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="armchair",
        description="Spectral data of Schrodinger operators on armchair nanotube graphs.",
        epilog="Potential grammar:\n" + GRAMMAR,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--potential", help="potential spec (see grammar)")
        sp.add_argument("--delta-family", nargs="+", metavar="KEY=VAL",
                        help="delta family v=.. eps=.. k=.. N=.. [n=..]")
        sp.add_argument("--N", type=int)
        sp.add_argument("--k", nargs="+", type=int, help="quasi-momentum indices (default: all)")
        sp.add_argument("--format", choices=["json", "csv"])
        sp.add_argument("--out", help="output path, - for stdout")

    sp = sub.add_parser("bands", help="band spectrum per k, union and flat bands")
    common(sp)
    sp.add_argument("--range", help="lambda window a:b")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--plot-data", action="store_true", default=None,
                    help="emit (lambda, F1, F2) samples instead of / besides bands")
    sp.add_argument("--mode", choices=["auto", "two-branch", "degenerate"])

    sp = sub.add_parser("resonances", help="zeros of rho_k in a rectangle and/or on a real interval")
    common(sp)
    sp.add_argument("--rect", help="re0:re1:im0:im1")
    sp.add_argument("--real-range", help="a:b")

    sp = sub.add_parser("flatbands", help="flat-band eigenfunctions at Dirichlet eigenvalues")
    common(sp)
    sp.add_argument("--n-dirichlet", type=int)

    sp = sub.add_parser("verify", help="residuals of the monodromy and Lyapunov identities")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, nargs="+")
    return parser


def _write(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def run(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = build_config(args)
        text = COMMANDS[cfg.command](cfg)
        _write(text, cfg.out)
        return EXIT_OK
    except (UsageError, PotentialError) as exc:
        sys.stderr.write(f"armchair: error: {exc}\n")
        sys.stderr.write(parser.format_usage())
        sys.stderr.write("potential grammar:\n" + GRAMMAR + "\n")
        return EXIT_USAGE
    except NumericalError as exc:
        where = exc.module or "?"
        sys.stderr.write(f"armchair: numerical failure in {where} at lambda={exc.lam!r}: {exc}\n")
        return EXIT_NUMERICAL
    except ValueError as exc:
        sys.stderr.write(f"armchair: error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
