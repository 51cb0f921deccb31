"""Command-line experiment runner.

Subcommands: quantize, kernel, action, series, slice, chernoff, report.
Configs are flat `key = value` text files with bracketed section headers
(configparser syntax); unknown keys are hard errors.  Every CSV artifact
starts with a comment line carrying the config hash, followed by a header
row.  Output files are written atomically (temp file + rename).

Exit codes: 0 success, 2 configuration error, 3 numeric non-convergence,
4 missing artifact.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import classical, exact, kernels, propagator, report as report_mod
from .catalog import parse_magnetic, parse_potential


class ConfigError(Exception):
    pass


class MissingArtifactError(Exception):
    pass


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def parse_measure(text: str) -> exact.TauMeasure:
    """uniform | tau:<rational> | mixture:w@tau,w@tau,..."""
    t = text.strip().lower()
    if t == "uniform":
        return exact.BORN_JORDAN
    if t in ("weyl", "midpoint"):
        return exact.WEYL
    if t.startswith("tau:"):
        try:
            return exact.TauMeasure.point(Fraction(t[4:]))
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"bad tau value in measure {text!r}: {e}") from e
    if t.startswith("mixture:"):
        atoms = []
        for part in t[len("mixture:"):].split(","):
            if "@" not in part:
                raise ConfigError(f"mixture atoms must be w@tau, got {part!r}")
            w, tau = part.split("@", 1)
            try:
                atoms.append((Fraction(w), Fraction(tau)))
            except (ValueError, ZeroDivisionError) as e:
                raise ConfigError(f"bad mixture atom {part!r}: {e}") from e
        try:
            return exact.TauMeasure.mixture(atoms)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    raise ConfigError(f"unknown measure spec {text!r}")


_TERM_RE = re.compile(
    r"^\s*(?P<coef>[+-]?\d+(?:/\d+)?)?\s*\*?\s*"
    r"(?:q(?:\^(?P<s>\d+))?)?\s*\*?\s*(?:p(?:\^(?P<r>\d+))?)?\s*$")


def parse_symbol(text: str) -> exact.PolySymbol:
    """Monomial or sum-of-monomials symbol, e.g. `q^2p^2` or `qp + 1/2`."""
    coeffs: dict = {}
    pos = 0
    text = text.replace(" ", "")
    for term in text.replace("-", "+-").split("+"):
        if term.strip() == "":
            pos += len(term) + 1
            continue
        mobj = _TERM_RE.match(term)
        if not mobj or _TERM_RE.match(term).group(0).strip() == "" or (
                mobj.group("coef") is None and "q" not in term and "p" not in term):
            raise ConfigError(
                f"cannot parse symbol near column {pos + 1}: {term.strip()!r}")
        c = Fraction(mobj.group("coef")) if mobj.group("coef") else Fraction(1)
        s = int(mobj.group("s")) if mobj.group("s") else (1 if "q" in term else 0)
        r = int(mobj.group("r")) if mobj.group("r") else (1 if "p" in term else 0)
        key = (s, r)
        cur = coeffs.get(key, exact.CR_ZERO) + exact.CRat.of(c)
        if cur.is_zero():
            coeffs.pop(key, None)
        else:
            coeffs[key] = cur
        pos += len(term) + 1
    if not coeffs:
        raise ConfigError(f"empty symbol {text!r}")
    return exact.PolySymbol(coeffs)


def parse_grid(text: str, hbar: float) -> kernels.Grid1D:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"grid must be qmin,qmax,n, got {text!r}")
    try:
        return kernels.Grid1D(float(parts[0]), float(parts[1]), int(parts[2]), hbar)
    except ValueError as e:
        raise ConfigError(f"bad grid {text!r}: {e}") from e


def parse_eps(text: str) -> np.ndarray:
    """Comma list of values, or lo:hi:count geometric range."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"eps range must be lo:hi:count, got {text!r}")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if not (0 < lo < hi) or count < 2:
            raise ConfigError(f"bad eps range {text!r}")
        return np.geomspace(lo, hi, count)
    try:
        vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as e:
        raise ConfigError(f"bad eps list {text!r}: {e}") from e
    if len(vals) == 0 or np.any(vals <= 0):
        raise ConfigError(f"eps values must be positive: {text!r}")
    return vals


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "hbar", "mass", "potential", "u0", "qa", "qb", "eps", "grid", "measure",
    "scheme", "out", "tol", "symbol", "dt", "time", "n_list", "e_cutoff",
}


@dataclass
class RunConfig:
    hbar: float = 1.0
    mass: float = 1.0
    potential: Optional[str] = None
    u0: Optional[str] = None
    qa: float = 0.0
    qb: float = 1.0
    eps: str = "1e-3:1e-1:12"
    grid: str = "-8,8,512"
    measure: str = "uniform"
    scheme: str = "left,midpoint,uniform"
    out: str = "."
    tol: float = 1e-12
    symbol: Optional[str] = None
    dt: str = "0.001:0.3:10"
    time: float = 0.5
    n_list: str = "8,32,128,512"
    e_cutoff: float = 0.0
    raw: dict = field(default_factory=dict)

    def hash(self) -> str:
        blob = ";".join(f"{k}={v}" for k, v in sorted(self.raw.items()))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    data: dict = {}
    if path is not None:
        if not os.path.exists(path):
            raise MissingArtifactError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        try:
            cp.read(path)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from e
        for section in cp.sections():
            for key, val in cp.items(section):
                data[key] = val
    data.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(data) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(raw=dict(data))
    for key, val in data.items():
        cur = getattr(cfg, key)
        if isinstance(cur, float) and not isinstance(val, float):
            try:
                val = float(val)
            except ValueError as e:
                raise ConfigError(f"bad numeric value for {key}: {val!r}") from e
        setattr(cfg, key, val)
    if cfg.hbar <= 0 or cfg.mass <= 0:
        raise ConfigError("hbar and mass must be positive")
    return cfg


def build_hamiltonian(cfg: RunConfig) -> classical.HamiltonianSpec:
    if cfg.potential is None:
        raise ConfigError("a potential spec is required (e.g. harmonic:omega=1)")
    try:
        V = parse_potential(cfg.potential, cfg.mass)
        u0 = parse_magnetic(cfg.u0) if cfg.u0 else None
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return classical.HamiltonianSpec(cfg.mass, V, u0)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{float(x):.17g}"


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: str, rows, cfg: RunConfig) -> None:
    lines = [f"# config_hash={cfg.hash()}", header]
    lines.extend(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                          else str(v) for v in row) for row in rows)
    atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_quantize(cfg: RunConfig) -> int:
    if cfg.symbol is None:
        raise ConfigError("quantize needs --symbol")
    sym = parse_symbol(cfg.symbol)
    P = parse_measure(cfg.measure)
    op = exact.quantize_poly(sym, P)
    print(exact.to_text(op))
    if cfg.raw.get("grid"):
        g = parse_grid(cfg.grid, cfg.hbar)
        degrees = {r for (_, r) in sym.coeffs}
        if max(degrees) > 2:
            raise ConfigError("grid kernels support p-degree <= 2 symbols")
        total = None
        for (s, r), c in sorted(sym.coeffs.items()):
            if c.im != 0:
                raise ConfigError("grid kernels need real symbols")
            K = kernels.kernel_matrix(kernels.SymbolFunction.monomial(s, r), g, P)
            term = float(c.re) * K.entries
            total = term if total is None else total + term
        out = os.path.join(cfg.out, "kernel.csv")
        kernels.save_matrix_csv(out, kernels.KernelMatrix(total, g),
                                comment=f"config_hash={cfg.hash()}")
        print(f"wrote {out}")
    return 0


def cmd_kernel(cfg: RunConfig) -> int:
    H = build_hamiltonian(cfg)
    g = parse_grid(cfg.grid, cfg.hbar)
    P = parse_measure(cfg.measure)
    K = kernels.kernel_matrix(kernels.SymbolFunction.from_hamiltonian(H), g, P)
    base = os.path.join(cfg.out, "kernel")
    os.makedirs(cfg.out, exist_ok=True)
    kernels.save_matrix_csv(base + ".csv", K, comment=f"config_hash={cfg.hash()}")
    kernels.save_matrix_bin(base + ".bin", K)
    print(f"hermiticity_defect={K.hermiticity_defect():.3e}")
    print(f"wrote {base}.csv, {base}.bin")
    return 0


def cmd_action(cfg: RunConfig) -> int:
    H = build_hamiltonian(cfg)
    if cfg.qa == cfg.qb:
        raise ConfigError("action sweep needs qa != qb")
    eps = parse_eps(cfg.eps)
    series = classical.action_series(H, cfg.qa, cfg.qb)
    rows = []
    for e in eps:
        path = classical.solve_bvp(H, cfg.qa, cfg.qb, float(e), tol=cfg.tol)
        s_num = classical.action_along(path, H)
        s_ser = (series.c_minus1 / e + series.c0 + series.c1 * e
                 + series.c2 * e ** 2 + series.c3 * e ** 3 + series.c5 * e ** 5)
        rows.append((e, s_num, s_ser, abs(s_num - s_ser),
                     abs(s_num - s_ser) / max(abs(s_num), 1e-300)))
    write_csv(os.path.join(cfg.out, "action_sweep.csv"),
              "eps,S_numeric,S_series,abs_err,rel_err", rows, cfg)
    # the CSV sweep follows cfg.eps; the fit uses the tuned default window,
    # which balances roundoff against basis-truncation bias
    fit = classical.fit_series_numeric(H, cfg.qa, cfg.qb, tol=cfg.tol)
    formula = {"c_minus1": series.c_minus1, "c0": series.c0, "c1": series.c1,
               "c2": series.c2, "c3": series.c3, "c5": series.c5}
    fitted = {f"c{k}".replace("c-1", "c_minus1"): v
              for k, v in fit.coefficients.items()}
    deviations = {}
    for name, val in formula.items():
        key = name
        fit_val = fitted.get(key, 0.0)
        deviations[name] = abs(val - fit_val) / max(abs(val), 1e-300)
    summary = {"config_hash": cfg.hash(), "formula": formula, "fitted": fitted,
               "fit_residual": fit.residual, "fit_cond": fit.cond,
               "relative_deviation": deviations,
               "provenance": series.provenance}
    atomic_write(os.path.join(cfg.out, "action_summary.json"),
                 json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_series(cfg: RunConfig) -> int:
    H = build_hamiltonian(cfg)
    if cfg.qa == cfg.qb:
        raise ConfigError("series needs qa != qb")
    series = classical.action_series(H, cfg.qa, cfg.qb)
    out = {"c_minus1": series.c_minus1, "c0": series.c0, "c1": series.c1,
           "c2": series.c2, "c3": series.c3, "c5": series.c5,
           "provenance": series.provenance}
    if H.u0 is None:
        out["c5_candidates"] = classical.c5_candidates(H, cfg.qa, cfg.qb)
    print(json.dumps(out, indent=2))
    atomic_write(os.path.join(cfg.out, "series.json"),
                 json.dumps(out, indent=2) + "\n")
    return 0


def cmd_slice(cfg: RunConfig) -> int:
    H = build_hamiltonian(cfg)
    g = parse_grid(cfg.grid, cfg.hbar)
    schemes = [propagator.parse_scheme(s) for s in cfg.scheme.split(",")]
    n_list = sorted(int(n) for n in cfg.n_list.split(","))
    conv = propagator.convergence_study(H, g, cfg.time, schemes, n_list)
    rows = [(name, N, conv.dist_to_reference[name][i])
            for name in conv.schemes for i, N in enumerate(conv.N_list)]
    write_csv(os.path.join(cfg.out, "convergence.csv"),
              "scheme,N,distance", rows, cfg)
    dts = parse_eps(cfg.dt)
    scal = propagator.short_time_phase_scaling(H, cfg.qa, cfg.qb, dts, schemes,
                                               hbar=cfg.hbar)
    rows = [(name, d, e) for name in scal.phase_error
            for d, e in zip(scal.dt_list, scal.phase_error[name])]
    write_csv(os.path.join(cfg.out, "scaling.csv"),
              "scheme,dt,phase_error", rows, cfg)
    slopes = {"config_hash": cfg.hash(), "slopes": scal.slopes,
              "coefficients": scal.coefficients,
              "pairwise_N": {f"{a}|{b}": v for (a, b), v in conv.pairwise.items()}}
    atomic_write(os.path.join(cfg.out, "slopes.json"),
                 json.dumps(slopes, indent=2) + "\n")
    print(json.dumps(slopes, indent=2))
    return 0


def cmd_chernoff(cfg: RunConfig) -> int:
    H = build_hamiltonian(cfg)
    g = parse_grid(cfg.grid, cfg.hbar)
    P = parse_measure(cfg.measure)
    psi = kernels.WaveFunction.gaussian(g, q0=0.0, sigma=1.0)
    n_list = sorted(int(n) for n in cfg.n_list.split(","))
    rows = [(cfg.measure, n,
             propagator.chernoff_error(H, g, cfg.time, n, P, psi))
            for n in n_list]
    write_csv(os.path.join(cfg.out, "chernoff.csv"),
              "measure,n,error", rows, cfg)
    for _, n, err in rows:
        print(f"n={n} error={err:.6e}")
    return 0


def cmd_report(cfg: RunConfig, run_all: bool) -> int:
    if not run_all:
        needed = [os.path.join(cfg.out, "action_summary.json")]
        missing = [p for p in needed if not os.path.exists(p)]
        if missing:
            raise MissingArtifactError(
                "missing artifacts (rerun with --run-all): " + ", ".join(missing))
    rep = report_mod.build_report(run_fit=True)
    atomic_write(os.path.join(cfg.out, "report.md"), rep.to_markdown())
    atomic_write(os.path.join(cfg.out, "report.json"), rep.to_json() + "\n")
    print(rep.to_markdown())
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--hbar", default=None)
    sp.add_argument("--mass", default=None)
    sp.add_argument("--potential", default=None)
    sp.add_argument("--u0", default=None)
    sp.add_argument("--qa", default=None)
    sp.add_argument("--qb", default=None)
    sp.add_argument("--eps", default=None)
    sp.add_argument("--grid", default=None)
    sp.add_argument("--measure", default=None)
    sp.add_argument("--scheme", default=None)
    sp.add_argument("--tol", default=None)
    sp.add_argument("--symbol", default=None)
    sp.add_argument("--dt", default=None)
    sp.add_argument("--time", default=None)
    sp.add_argument("--n-list", dest="n_list", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ordo",
        description="quantization-rule kernels, short-time actions, and "
                    "time-sliced propagator experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("quantize", "kernel", "action", "series", "slice", "chernoff",
                 "report"):
        sp = sub.add_parser(name)
        _add_common(sp)
        if name == "report":
            sp.add_argument("--run-all", action="store_true")
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("ORDO_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k in _KNOWN_KEYS and v is not None}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "quantize":
            return cmd_quantize(cfg)
        if args.command == "kernel":
            return cmd_kernel(cfg)
        if args.command == "action":
            return cmd_action(cfg)
        if args.command == "series":
            return cmd_series(cfg)
        if args.command == "slice":
            return cmd_slice(cfg)
        if args.command == "chernoff":
            return cmd_chernoff(cfg)
        if args.command == "report":
            return cmd_report(cfg, args.run_all)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (classical.NoConvergenceError, classical.ConjugatePointError,
            classical.TrajectoryOverflowError,
            classical.DegenerateEndpointsError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except MissingArtifactError as e:
        print(f"missing artifact: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
