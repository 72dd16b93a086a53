"""Command-line front end: verification suites, decompositions, L-value scans and exponent fits."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .amplifier import compute_decomposition, derive_params, predict_S_d1, predict_S_d2_main
from .characters import character_group
from .forms import load_form, rankin_selberg_probe
from .lfunc import ExponentTable, exponent_fit, smoothed_L, truncation_length
from .ntheory import divisors, is_prime
from .spectral import KappaParams, kappa, kappa_bound_probe, z_q_direct
from .verification import SUITES, run_suites

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MAX_SCAN_POINTS = 10**4
MAX_TERMS_PER_POINT = 10**8


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved run settings; every field has a default and the resolved values are echoed in output."""

    form: str = "delta"
    Q: tuple = (13,)
    Q_range: tuple | None = None
    t: tuple = (0.0,)
    x: float | None = None
    mode: str = "theorem"
    G: float | None = None
    L: float | None = None
    primes: tuple | None = None
    r: float = 0.0
    chi_index: int | None = None
    theta: str = "7/64"
    threads: int = 1
    seed: int = 0
    format: str = "auto"  # csv for scan, json otherwise
    out: str | None = None
    Q_max: int = 200
    timing: bool = True
    direct: bool = True

    @property
    def theta_value(self) -> Fraction:
        return Fraction(self.theta)

    def q_values(self) -> list[int]:
        if self.Q_range is not None:
            lo, hi = self.Q_range
            return [q for q in range(int(lo), int(hi) + 1) if is_prime(q)]
        return [int(q) for q in self.Q]

    def as_dict(self) -> dict:
        """Resolved settings echoed with results. The output path is left out so that the
        same computation written to two places yields identical bytes."""
        d = asdict(self)
        d.pop("out")
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    def fingerprint(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_SECTIONS = ("run", "form", "verify", "decompose", "scan")
_FIELDS = {f.name for f in fields(RunConfig)}


def _coerce(key: str, value):
    if key in ("Q", "t", "primes", "Q_range") and value is not None:
        return tuple(value) if isinstance(value, (list, tuple)) else (value,)
    if key == "theta":
        return str(value)
    return value


def load_config(path: str | None, section: str | None = None) -> RunConfig:
    """Read a TOML config. Top-level keys and keys under [run], [form] and the subcommand's section apply."""
    cfg = RunConfig()
    if not path:
        return cfg
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    merged = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in _SECTIONS:
                raise ConfigError(f"unknown config section [{key}]")
            if key in ("run", "form") or key == section:
                for k, v in value.items():
                    merged[("form" if (key == "form" and k == "name") else k)] = v
        else:
            merged[key] = value
    for k, v in merged.items():
        if k not in _FIELDS:
            raise ConfigError(f"unknown config key {k!r}")
        setattr(cfg, k, _coerce(k, v))
    return cfg


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    for name in ("threads", "format", "out", "theta", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, _coerce(name, v))
    return cfg


# ---------------------------------------------------------------- output

def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.complexfloating,)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _dump_csv(rows: list[dict], columns: list[str], cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# twistlab {__version__} config-sha256:{cfg.fingerprint()}\n")
    buf.write("# config: " + json.dumps(cfg.as_dict(), sort_keys=True, default=_json_default) + "\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: row[k] for k in columns})
    return buf.getvalue()


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- subcommands

VERIFY_COLUMNS = ["suite", "criterion", "name", "measured", "tolerance", "passed"]


def cmd_verify(args, cfg: RunConfig) -> int:
    if args.suite not in SUITES + ("all",):
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}")
    f = load_form(cfg.form)
    reports = run_suites(args.suite, seed=cfg.seed, threads=cfg.threads, form=f, Q_values=range(1, cfg.Q_max + 1))
    ok = all(r.passed for r in reports)
    for r in reports:
        for c in r.checks:
            status = "PASS" if c.passed else "FAIL"
            print(f"[{status}] {r.suite}: {c.name} (criterion {c.criterion}) "
                  f"measured={c.measured:.3e} tol={c.tolerance:.1e}", file=sys.stderr)
    if cfg.format == "csv":
        rows = [dict(suite=r.suite, **{k: getattr(c, k) for k in VERIFY_COLUMNS[1:]}) for r in reports for c in r.checks]
        _write(_dump_csv(rows, VERIFY_COLUMNS, cfg), cfg.out)
    else:
        _write(_dump_json({"config": cfg.as_dict(), "passed": ok, "suites": [r.as_dict() for r in reports]}), cfg.out)
    return 0 if ok else 1


def _params_from(cfg: RunConfig, Q: int, t: float):
    return derive_params(
        Q, t, cfg.theta_value, cfg.mode, x=cfg.x, L=cfg.L, G=cfg.G,
        primes=cfg.primes, r=cfg.r,
    )


def _character(Q: int, index: int | None):
    group = character_group(Q)
    return group.first_nonprincipal() if index is None else group[index]


def cmd_decompose(args, cfg: RunConfig) -> int:
    f = load_form(cfg.form)
    Q, t = cfg.q_values()[0], float(cfg.t[0])
    p = _params_from(cfg, Q, t)
    chi = _character(Q, cfg.chi_index)
    d = compute_decomposition(p, f, chi, include_direct=cfg.direct, threads=cfg.threads)
    c = rankin_selberg_probe(f).c
    pred1 = predict_S_d1(p, f, c)
    pred2 = predict_S_d2_main(p, f, chi, c)
    report = {
        "config": cfg.as_dict(),
        "params": p.as_dict(),
        "character": {"index": chi.index, "exponents": list(chi.exponents)},
        "decomposition": d.as_dict(),
        "predictions": {"rankin_selberg_c": c, "S_d1_main": pred1.main, "S_d1_envelope": pred1.error_envelope,
                        "S_d2_main": pred2},
    }
    if cfg.format == "csv":
        cols = ["piece", "re", "im"]
        rows = [{"piece": k, "re": v.real, "im": v.imag}
                for k, v in (("S_d1", d.S_d1), ("S_d2", d.S_d2), ("S_o1", d.S_o1), ("S_o2", d.S_o2), ("total", d.total))]
        _write(_dump_csv(rows, cols, cfg), cfg.out)
    else:
        _write(_dump_json(report), cfg.out)
    return 0


SCAN_COLUMNS = ["Q", "chi_index", "t", "x", "re_L", "im_L", "abs_L", "n_terms", "millis"]


def scan_rows(cfg: RunConfig) -> list[dict]:
    f = load_form(cfg.form)
    grid = [(Q, float(t)) for Q in cfg.q_values() for t in cfg.t]
    if len(grid) > MAX_SCAN_POINTS:
        raise ConfigError(f"scan grid has {len(grid)} points; limit is {MAX_SCAN_POINTS}")
    for Q, t in grid:
        x = 3.0 * Q * (1 + abs(t))
        if truncation_length(x) > MAX_TERMS_PER_POINT:
            raise ConfigError(f"point Q={Q}, t={t} needs {truncation_length(x)} terms (> {MAX_TERMS_PER_POINT})")
    f.materialize(max(truncation_length(3.0 * Q * (1 + abs(t))) for Q, t in grid))

    def one(point):
        Q, t = point
        x = 3.0 * Q * (1 + abs(t))
        chi = _character(Q, cfg.chi_index)
        t0 = time.perf_counter()
        L = smoothed_L(f, chi, t, x)
        ms = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
        return {"Q": Q, "chi_index": chi.index, "t": t, "x": x, "re_L": L.real, "im_L": L.imag,
                "abs_L": abs(L), "n_terms": truncation_length(x), "millis": round(ms, 3)}

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, grid))
    return [one(pt) for pt in grid]


def cmd_scan(args, cfg: RunConfig) -> int:
    if args.no_timing:
        cfg.timing = False
    rows = scan_rows(cfg)
    if cfg.format == "json":
        _write(_dump_json({"config": cfg.as_dict(), "rows": rows}), cfg.out)
    else:
        _write(_dump_csv(rows, SCAN_COLUMNS, cfg), cfg.out)
    return 0


def read_scan_csv(path: str) -> list[tuple[float, float, float]]:
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(lines)
    need = {"Q", "t", "abs_L"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ConfigError(f"malformed csv {path}: needs columns {sorted(need)}")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            out.append((float(row["Q"]), float(row["t"]), float(row["abs_L"])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed csv {path}, data row {i}: {exc}") from exc
    return out


def fit_report(samples, theta: Fraction) -> dict:
    fit = exponent_fit(samples)
    table = ExponentTable(theta)
    refs = [
        ("convexity", "Q", table.convexity),
        ("q_aspect", "Q", table.q_aspect),
        ("t_exponent", "t", table.t_exponent),
        ("blomer_harcos", "Q", table.blomer_harcos),
        ("munshi", "Q", table.munshi),
        ("wu", "Q", table.wu),
    ]
    rows = []
    for name, aspect, ref in refs:
        measured = fit.slope_Q if aspect == "Q" else fit.slope_t
        rows.append({"reference": name, "aspect": aspect, "exponent": str(ref), "value": float(ref),
                     "measured": measured, "difference": measured - float(ref)})
    return {"fit": asdict(fit), "comparison": rows}


def cmd_fit(args, cfg: RunConfig) -> int:
    report = fit_report(read_scan_csv(args.csv), cfg.theta_value)
    if cfg.format == "csv":
        cols = ["reference", "aspect", "exponent", "value", "measured", "difference"]
        _write(_dump_csv(report["comparison"], cols, cfg), cfg.out)
    else:
        report["config"] = cfg.as_dict()
        _write(_dump_json(report), cfg.out)
    return 0


def parse_number(text: str):
    """'1/2' or '3' -> Fraction, anything else -> complex ('0.5+2j')."""
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        return complex(text.replace(" ", ""))


def cmd_kappa(args, cfg: RunConfig) -> int:
    if args.probe:
        grid = [1j * float(y) for y in args.z_grid.split(",")]
        Qs = [int(q) for q in args.Q.split(",")]
        out = {"N": args.N, "z_grid": grid,
               "probe": [{"Q": Q, "max_abs_kappa_times_sqrtQ": kappa_bound_probe(args.N, Q, grid)} for Q in Qs]}
    else:
        Q = int(args.Q)
        ws = divisors(args.N) if args.w is None else [args.w]
        sp, z = parse_number(args.s_prime), parse_number(args.z)
        vals = []
        for w in ws:
            v = kappa(KappaParams(args.N, w, Q, sp, z))
            entry = {"w": w, "value": [complex(v).real, complex(v).imag]}
            if isinstance(v, Fraction):
                entry["exact"] = str(v)
            vals.append(entry)
        out = {"N": args.N, "Q": Q, "s_prime": str(sp), "z": str(z), "cusps": vals}
    _write(_dump_json(out), cfg.out)
    return 0


def cmd_zq(args, cfg: RunConfig) -> int:
    f = load_form(cfg.form)
    pt = z_q_direct(f, parse_number(args.s), parse_number(args.w), args.l1, args.l2, args.Q,
                    args.m_max, args.h_max, threads=cfg.threads)
    out = {k: getattr(pt, k) for k in ("s", "w", "l1", "l2", "Q", "m_max", "h_max", "value", "tail_bound",
                                       "terms", "note")}
    _write(_dump_json(out), cfg.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--theta", help="Ramanujan-Petersson exponent, e.g. 7/64")
    common.add_argument("--seed", type=int, help="seed for sampled checks")

    parser = argparse.ArgumentParser(prog="twistlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"twistlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("suite", help=f"one of {', '.join(SUITES + ('all',))}")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("decompose", parents=[common], help="exact decomposition of the amplified moment")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("scan", parents=[common], help="smoothed L-values over a (Q, t) grid")
    p.add_argument("--no-timing", action="store_true", help="write millis=0 so output is reproducible")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fit", parents=[common], help="fit growth exponents to scan output")
    p.add_argument("csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("kappa", parents=[common], help="evaluate the cusp Euler product")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--w", type=int, default=None, help="cusp denominator (default: every divisor of N)")
    p.add_argument("--Q", default="1", help="modulus (comma list with --probe)")
    p.add_argument("--s-prime", default="1/2")
    p.add_argument("--z", default="-1/2")
    p.add_argument("--probe", action="store_true", help="report max |kappa(1/2, -z)| sqrt(Q) over Re z = 0")
    p.add_argument("--z-grid", default="0.5,1,2,5,10", help="imaginary parts for --probe")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("zq", parents=[common], help="direct evaluation of the shifted convolution sum")
    p.add_argument("--s", default="3")
    p.add_argument("--w", default="3")
    p.add_argument("--l1", type=int, default=2)
    p.add_argument("--l2", type=int, default=3)
    p.add_argument("--Q", type=int, default=5)
    p.add_argument("--m-max", type=int, default=1000)
    p.add_argument("--h-max", type=int, default=1000)
    p.set_defaults(func=cmd_zq)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        cfg = _apply_overrides(cfg, args)
        if cfg.format == "auto":
            cfg.format = "csv" if args.command == "scan" else "json"
        return args.func(args, cfg)
    except (ConfigError, ValueError, ArithmeticError, LookupError) as exc:
        print(f"twistlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
