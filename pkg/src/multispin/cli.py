"""Command-line front-end: identity suites, classical solves and sweeps.

Every check becomes one record {index, check, params, residual, tol, pass,
ms} written as NDJSON (default) or CSV.  Exit status is 0 when every record
passes, 1 when any fails and 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable

import numpy as np

from . import classical as cl
from . import irf, lattice, series
from .report import CheckReport, jsonable
from .specfun import (Nomes, elliptic_gamma, kappa_functional_residuals, lambda4,
                      log_elliptic_gamma, theta_bar)
from .spin_space import constant_spin, random_spin
from .weights import (WeightParams, inversion_residual, verify_spiridonov_identity, weight_W,
                      weight_Wbar)

SUITES = ("specfun", "inversion", "spiridonov", "star-star", "series", "positivity",
          "classical", "lattice", "ybe-n2", "asymptotics")
SWEEP_PARAMETERS = ("p", "q", "alpha", "beta", "gamma", "resolution", "hbar")
SWEEP_CHECKS = ("star-star", "ybe-n2", "asymptotics", "spiridonov", "inversion")
THREADS_ENV = "MULTISPIN_THREADS"

DEFAULTS = {
    "n": 3, "p": 0.08, "q": 0.08, "sigma": None, "tau": None,
    "alpha": None, "beta": None, "gamma": None,
    "draws": 10, "resolution": None, "tol": None, "seed": 0,
    "out": None, "format": "ndjson", "slow": False, "printed": False,
}
# classical checks use this modular parameter unless --tau is given
CLASSICAL_TAU = 1j


class ConfigError(Exception):
    pass


Check = Callable[[np.random.Generator], CheckReport]


def rng_for(seed: int, stream: str, index: int) -> np.random.Generator:
    """Counter-based generator: one independent stream per (suite, draw)."""
    key = (int(seed) & (2**64 - 1)) | (zlib.crc32(stream.encode()) << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=[index, 0, 0, 0]))


# ---------------------------------------------------------------------------
# configuration


def _complex(v):
    if v is None or isinstance(v, complex):
        return v
    try:
        return complex(str(v).replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"cannot parse {v!r} as a number") from exc


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            cfg[k] = v
    for k in ("sigma", "tau"):
        cfg[k] = _complex(cfg[k])
    if cfg["format"] not in ("ndjson", "csv"):
        raise ConfigError("format must be ndjson or csv")
    if int(cfg["n"]) < 2:
        raise ConfigError("n must be at least 2")
    if int(cfg["draws"]) < 1:
        raise ConfigError("draws must be positive")
    cfg["n"], cfg["draws"], cfg["seed"] = int(cfg["n"]), int(cfg["draws"]), int(cfg["seed"])
    return cfg


def nomes_from(cfg: dict) -> Nomes:
    try:
        if cfg["sigma"] is not None:
            tau = cfg["tau"] if cfg["tau"] is not None else cfg["sigma"]
            return Nomes.from_modular(cfg["sigma"], tau)
        return Nomes.from_pq(cfg["p"], cfg["q"])
    except Exception as exc:
        raise ConfigError(f"invalid nomes: {exc}") from exc


def classical_tau(cfg: dict) -> complex:
    return cfg["tau"] if cfg["tau"] is not None else CLASSICAL_TAU


def _tol(cfg, default):
    return float(cfg["tol"]) if cfg["tol"] is not None else default


def _abg(cfg, rng, eta, scale=0.15):
    draw = rng.uniform(-scale, scale, 3) * np.array([eta, 1.0, 1.0])
    vals = [cfg[k] if cfg[k] is not None else d for k, d in zip(("alpha", "beta", "gamma"), draw)]
    return tuple(float(v) for v in vals)


# ---------------------------------------------------------------------------
# suites


def _report(name, residual, tol, params, extra=None, t0=None):
    return CheckReport.make(name, residual, tol, params, extra,
                            0.0 if t0 is None else time.perf_counter() - t0)


def suite_specfun(cfg) -> list:
    nomes = nomes_from(cfg)
    tol = _tol(cfg, 1e-12)

    def one(rng):
        t0 = time.perf_counter()
        eta = nomes.eta.real
        z = complex(rng.uniform(0, math.pi), rng.uniform(-0.7, 0.7) * eta)
        lg = lambda w, m="auto": complex(log_elliptic_gamma(w, nomes, method=m))
        res = {
            "reflection": abs(np.expm1(lg(z) + lg(-z))),
            "periodicity": abs(np.expm1(lg(z + math.pi) - lg(z))),
            "sum-vs-product": abs(np.expm1(lg(z, "sum") - lg(z, "product"))),
        }
        zr = complex(rng.uniform(0, math.pi), rng.uniform(-0.2, 0.2) * eta)
        hs, ht = math.pi * nomes.sigma / 2, math.pi * nomes.tau / 2
        res["difference-tau"] = abs(np.exp(lg(zr - hs, "product") - lg(zr + hs, "product"))
                                    / theta_bar(4, zr, nomes.tau) - 1)
        res["difference-sigma"] = abs(np.exp(lg(zr - ht, "product") - lg(zr + ht, "product"))
                                      / theta_bar(4, zr, nomes.sigma) - 1)
        if nomes.regime.value != "generic":
            res["conjugation"] = abs(np.conj(elliptic_gamma(z, nomes))
                                     / elliptic_gamma(-np.conj(z), nomes) - 1)
        n = cfg["n"]
        al = complex(rng.uniform(-0.5, 0.5) * eta / n, rng.uniform(-0.3, 0.3))
        res["kappa-feq-1"], res["kappa-feq-2"] = kappa_functional_residuals(n, al, nomes)
        worst = max(res.values())
        return _report("specfun", worst, tol, dict(nomes=nomes, z=z, zr=zr, n=n, alpha=al),
                       res, t0)

    return [one] * cfg["draws"]


def suite_inversion(cfg) -> list:
    nomes = nomes_from(cfg)
    tol = _tol(cfg, 1e-12)
    n = cfg["n"]

    def one(rng):
        t0 = time.perf_counter()
        eta = nomes.eta.real
        al = complex(rng.uniform(-0.5, 0.5) * eta, rng.uniform(-0.3, 0.3))
        x, y = random_spin(rng, n), random_spin(rng, n)
        r = inversion_residual(WeightParams(n, nomes, al), x, y)
        return _report("inversion", r, tol, dict(n=n, nomes=nomes, alpha=al, x=x, y=y), t0=t0)

    return [one] * cfg["draws"]


def suite_spiridonov(cfg) -> list:
    nomes = nomes_from(cfg)
    n = cfg["n"]
    tol = _tol(cfg, 1e-9 if n == 2 else 1e-8)

    def one(rng):
        eta = nomes.eta.real
        al, be = rng.uniform(0.1, 0.45, 2) * eta / n
        mu = rng.uniform(0, math.pi)
        x, z = random_spin(rng, n), random_spin(rng, n)
        return verify_spiridonov_identity(n, nomes, complex(al), complex(be), mu, x, z,
                                          cfg["resolution"], tol)

    return [one] * cfg["draws"]


def _star_cfg(cfg, rng, nomes, n):
    a, b, c, d = (random_spin(rng, n) for _ in range(4))
    al, be, ga = _abg(cfg, rng, nomes.eta.real)
    rap = irf.RapidityData.from_abg(nomes.eta.real, al, be, ga)
    return irf.StarConfiguration(a, b, c, d, rap, n, nomes)


def suite_star_star(cfg, n=None) -> list:
    nomes = nomes_from(cfg)
    n = n or cfg["n"]
    tol = _tol(cfg, {2: 1e-9, 3: 1e-8}.get(n, 1e-6))

    def one(rng):
        return irf.check_star_star(_star_cfg(cfg, rng, nomes, n), cfg["resolution"], tol)

    return [one] * cfg["draws"]


def suite_series(cfg) -> list:
    """Low-temperature expansions compared coefficient by coefficient.

    By default the engine is compared with the corrected closed forms and
    the deviation from the printed forms is recorded in ``extra``; with
    --printed the printed forms decide pass/fail.
    """
    tol = _tol(cfg, 1e-12)
    printed = bool(cfg["printed"])
    n = 3

    def one(rng):
        t0 = time.perf_counter()
        a, b, c, d = (random_spin(rng, n) for _ in range(4))
        al, be, ga = (float(v) for v in rng.uniform(-0.1, 0.1, 3))
        out = {}
        for kind, fn, deg in (("shifted", series.closed_form_shifted, 8),
                              ("plain", series.closed_form_plain, 8)):
            s = series.expand_weight_W(kind, n, al, a, b, D=deg)
            out[f"W-{kind}"] = {pr: max(series.compare_coefficients(
                s, fn(al, a, b, printed=pr), deg).values()) for pr in (True, False)}
        sS = series.expand_weight_S(n, a, D=8)
        r = max(series.compare_coefficients(sS, series.closed_form_S(a), 8).values())
        out["S"] = {True: r, False: r}
        sk = series.expand_kappa(n, al, "shifted", D=8)
        r = max(series.compare_coefficients(sk, series.closed_form_kappa(n, al), 6).values())
        out["kappa"] = {True: r, False: r}
        V = series.expand_irf_V(n, a, b, c, d, al, be, ga, D=8)
        t = series.pqrs_terms(a, b, c, d, al, be, ga)
        out["IRF"] = {pr: max(series.compare_coefficients(
            V, series.closed_form_irf(t, printed=pr), 8).values()) for pr in (True, False)}
        worst = max(v[printed] for v in out.values())
        extra = {k: {"printed": v[True], "corrected": v[False]} for k, v in out.items()}
        return _report("series", worst, tol,
                       dict(n=n, a=a, b=b, c=c, d=d, alpha=al, beta=be, gamma=ga,
                            printed=printed), extra, t0)

    def jtable(rng):
        t0 = time.perf_counter()
        errs = {name: abs(series.j_integral(nn or 3, mono) - want)
                for name, (mono, nn, want) in series.J_TABLE.items()}
        return _report("j-integrals", max(errs.values()), tol, {}, errs, t0)

    return [jtable] + [one] * cfg["draws"]


def suite_positivity(cfg) -> list:
    n = cfg["n"]
    p = cfg["p"] if cfg["p"] != DEFAULTS["p"] else 0.05
    q = cfg["q"] if cfg["q"] != DEFAULTS["q"] else 0.05
    nomes = Nomes.from_pq(p, q)
    tol = _tol(cfg, 1e-8)
    eta = nomes.eta.real
    # homogeneous line rapidities inside the physical strip
    rap = irf.RapidityData.homogeneous(0.55 * eta, 0.05 * eta)

    def one(rng):
        spins = [random_spin(rng, n) for _ in range(4)]
        return irf.positivity_scan(n, nomes, rap, spins, cfg["resolution"], tol)

    return [one] * cfg["draws"]


def _classical_draw(cfg, rng, n, tau):
    eta0 = math.pi * tau.imag / 2
    al, be, ga = _abg(cfg, rng, eta0)
    alphas = cl.AlphaSet.from_abg(tau, al, be, ga)
    spins = [random_spin(rng, n) for _ in range(4)]
    return alphas, spins


def classical_star_star_check(cfg, n=None) -> Check:
    tau = classical_tau(cfg)
    n = n or cfg["n"]
    tol = _tol(cfg, 1e-9 if n == 2 else 1e-8)

    def one(rng):
        t0 = time.perf_counter()
        alphas, spins = _classical_draw(cfg, rng, n, tau)
        w = cl.solve_saddle("white", *spins, alphas, tau)
        b = cl.solve_saddle("black", *spins, alphas, tau)
        rep = cl.check_classical_star_star(*spins, alphas, tau, X=w.X, Y=b.X, tol=tol)
        dual = cl.dual_constraint_residuals(w.X, b.X, *spins, alphas, tau)
        lag = cl.lagrangian_density(*spins, alphas, tau, X=w.X, Y=b.X, tol=None)
        rep.extra.update(
            saddle_residual_white=w.residual, saddle_residual_black=b.residual,
            conj_gap=float(np.max(np.abs(b.X.components - w.X.components.conj()))),
            dual_constraints=max(float(np.max(np.abs(v))) for v in dual.values()),
            lagrangian=lag.value, lagrangian_line_gap=lag.difference)
        rep.seconds = time.perf_counter() - t0
        return rep

    return one


def suite_classical(cfg) -> list:
    tau = classical_tau(cfg)
    checks = [classical_star_star_check(cfg)] * cfg["draws"]

    def qform(rng):
        reps = []
        eta0 = math.pi * tau.imag / 2
        for al in np.linspace(-0.4, 0.4, 5) * eta0:
            a1 = eta0 / 2 + al
            a2 = rng.uniform(0.1, 0.9) * eta0
            alphas = cl.AlphaSet.from_three(tau, a1, a2, eta0 - a2)
            reps.append(cl.check_n2_quadratic_form(alphas, tau))
        worst = max(reps, key=lambda r: r.residual)
        worst.extra["sweep_size"] = len(reps)
        return worst

    def constant_action(rng):
        t0 = time.perf_counter()
        n = cfg["n"]
        alphas, _ = _classical_draw(cfg, rng, n, tau)
        xc = constant_spin(n)
        lag = cl.lagrangian_density(xc, xc, xc, xc, alphas, tau)
        return _report("constant-solution-action", abs(lag.value), _tol(cfg, 1e-12),
                       dict(n=n, tau=tau, alphas=alphas.as_dict()), t0=t0)

    return checks + [qform, constant_action]


def suite_lattice(cfg) -> list:
    nomes = nomes_from(cfg)
    tau = classical_tau(cfg)

    def row(rng):
        t0 = time.perf_counter()
        eta = nomes.eta.real
        u = (0.8 * eta + 0.1j, 0.8 * eta - 0.1j)
        v = (0.45 * eta - 0.05j, 0.45 * eta + 0.05j)
        w = (0.1 * eta + 0.07j, 0.1 * eta - 0.07j)
        x, yb1, yt1, yb2, yt2, xr = (random_spin(rng, 2) for _ in range(6))
        b1, b2 = lattice.BoxKernel(u, v, 2, nomes), lattice.BoxKernel(u, w, 2, nomes)
        res = cfg["resolution"] or 64
        zl = lattice.partition_function_row([b1, b2], x, xr, [yb1, yb2], [yt1, yt2], res)
        zr = lattice.partition_function_row([b1, b2], x, xr, [yb1, yb2], [yt1, yt2], res,
                                            order="right")
        star = irf.StarConfiguration(yt1, yt2, yb1, yb2,
                                     irf.RapidityData(u[0], u[1], v[0], w[1]), 2, nomes)
        wp = lambda a: WeightParams(2, nomes, a)
        rest = (weight_Wbar(wp(u[1] - v[1]), yt1, x) * weight_W(wp(u[0] - v[1]), x, yb1)
                * weight_Wbar(wp(u[0] - w[0]), yb2, xr) * weight_W(wp(u[1] - w[0]), xr, yt2))
        zirf = irf.irf_V1(star, res) * rest
        r = abs(zl / zirf - 1)
        return _report("partition-vertex-vs-irf", r, _tol(cfg, 1e-10),
                       dict(nomes=nomes, resolution=res, u=list(u), v=list(v), w=list(w)),
                       dict(vertex=zl, irf=zirf, fubini_gap=abs(zl - zr)), t0)

    def decay(rng):
        t0 = time.perf_counter()
        n = 2
        alphas = cl.AlphaSet.from_abg(tau, float(rng.uniform(-0.1, 0.1)), 0.0, 0.0)
        field = cl.LatticeField.constant((8, 8), n).perturb_boundary(rng, 0.01)
        out = cl.solve_lattice(field, alphas, tau)
        prof = out.deviation_profile()
        vals = [prof[k] for k in sorted(prof)]
        ratio = max(b / a for a, b in zip(vals, vals[1:]))
        return _report("lattice-boundary-decay", ratio, 1.0,
                       dict(n=n, tau=tau, alphas=alphas.as_dict(), shape=[8, 8]),
                       dict(profile=prof, action=out.action, sweeps=out.sweeps), t0)

    return [row] * cfg["draws"] + [decay]


def _ybe_draw(rng, nomes):
    u, v, w = lattice.random_ybe_rapidities(rng, nomes.eta.real)
    spins = [random_spin(rng, 2) for _ in range(6)]
    return u, v, w, spins


def suite_ybe(cfg) -> list:
    nomes = nomes_from(cfg)
    tol = _tol(cfg, 1e-6)

    def one(rng):
        u, v, w, spins = _ybe_draw(rng, nomes)
        return lattice.check_ybe_n2(u, v, w, nomes, *spins, resolution=cfg["resolution"] or 48,
                                    tol=tol)

    return [one] * cfg["draws"]


def suite_asymptotics(cfg) -> list:
    tau = classical_tau(cfg)
    n = cfg["n"]

    def one(rng):
        eta0 = math.pi * tau.imag / 2
        z = complex(rng.uniform(0.1, 1.4), rng.uniform(-0.3, 0.3) * eta0)
        al = float(rng.uniform(0.05, 0.3)) * eta0 / n
        return cl.verify_quasiclassical_asymptotics(z, tau, (0.2, 0.1, 0.05), n, al,
                                                    tol=_tol(cfg, 0.9))

    return [one] * cfg["draws"]


SUITE_BUILDERS = {
    "specfun": suite_specfun, "inversion": suite_inversion, "spiridonov": suite_spiridonov,
    "star-star": suite_star_star, "series": suite_series, "positivity": suite_positivity,
    "classical": suite_classical, "lattice": suite_lattice, "ybe-n2": suite_ybe,
    "asymptotics": suite_asymptotics,
}


def build_suite(name: str, cfg: dict) -> list:
    """List of (stream name, check) pairs for a suite; 'all' concatenates them."""
    if name == "all":
        out = []
        for s in SUITES:
            if s == "ybe-n2" and not cfg["slow"]:
                continue
            out += build_suite(s, cfg)
        if cfg["slow"]:
            out += [("star-star-n4", c) for c in suite_star_star(cfg, n=4)[:3]]
        return out
    if name not in SUITE_BUILDERS:
        raise ConfigError(f"unknown suite {name!r}")
    return [(name, c) for c in SUITE_BUILDERS[name](cfg)]


# ---------------------------------------------------------------------------
# execution and output


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer") from exc


def run_checks(checks: list, seed: int) -> Iterable[dict]:
    """Run checks and yield records in submission order, also with threads.
    A check that raises becomes a failed record carrying the error message."""
    counters: dict = {}
    jobs = []
    for i, (stream, fn) in enumerate(checks):
        k = counters.get(stream, 0)
        counters[stream] = k + 1
        jobs.append((i, stream, k, fn))

    def execute(job):
        i, stream, k, fn = job
        t0 = time.perf_counter()
        try:
            rep = fn(rng_for(seed, stream, k))
        except Exception as exc:  # surfaced as a failed record
            rep = CheckReport.make(stream, math.nan, math.nan,
                                   dict(seed=seed, stream=stream, draw=k),
                                   dict(error=f"{type(exc).__name__}: {exc}"),
                                   time.perf_counter() - t0)
        rec = rep.record(i)
        rec["params"] = dict(rec["params"], seed=seed, draw=k)
        return rec

    workers = _threads()
    if workers == 1:
        for job in jobs:
            yield execute(job)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for rec in pool.map(execute, jobs):
            yield rec


class Writer:
    FIELDS = ("index", "check", "residual", "tol", "pass", "ms", "params", "extra")

    def __init__(self, stream, fmt: str):
        self.stream, self.fmt = stream, fmt
        self.csv = None
        if fmt == "csv":
            self.csv = csv.DictWriter(stream, fieldnames=self.FIELDS, extrasaction="ignore")
            self.csv.writeheader()

    def write(self, rec: dict):
        if self.csv is not None:
            row = dict(rec)
            for k in ("params", "extra"):
                row[k] = json.dumps(rec.get(k, {}), sort_keys=True)
            self.csv.writerow(row)
        else:
            self.stream.write(json.dumps(rec) + "\n")
        self.stream.flush()


def _open_out(cfg):
    if cfg["out"]:
        return open(cfg["out"], "w", newline="")
    return sys.stdout


def emit(records: Iterable[dict], cfg: dict) -> int:
    fh = _open_out(cfg)
    ok = True
    try:
        w = Writer(fh, cfg["format"])
        for rec in records:
            w.write(rec)
            ok &= bool(rec["pass"])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0 if ok else 1


def run_suite(suite: str, cfg: dict) -> int:
    return emit(run_checks(build_suite(suite, cfg), cfg["seed"]), cfg)


# ---------------------------------------------------------------------------
# sweeps


def sweep_rows(parameter: str, values, check: str, cfg: dict) -> list:
    """One row per grid value: the swept value, the residual and the scalar
    diagnostics of the inner check."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"cannot sweep {parameter!r}")
    if check not in SWEEP_CHECKS:
        raise ConfigError(f"unknown sweep check {check!r}")
    rows = []
    for i, val in enumerate(values):
        c = dict(cfg)
        if parameter == "p":
            c["p"] = val
            if cfg.get("_q_explicit") is None:
                c["q"] = val
        elif parameter == "resolution":
            val = int(round(val))
            c["resolution"] = val
        elif parameter != "hbar":
            c[parameter] = val
        rng = rng_for(cfg["seed"], f"sweep-{check}", 0)
        t0 = time.perf_counter()
        row = {"index": i, parameter: val}
        if check == "asymptotics":
            if parameter != "hbar":
                raise ConfigError("the asymptotics sweep runs over hbar")
            tau = classical_tau(c)
            errs = cl.quasiclassical_errors(val, tau, n=c["n"])
            row.update({f"err_{k}": v for k, v in errs.items()})
            row["residual"] = errs["phi"]
        else:
            fn = dict(SUITE_BUILDERS)[check](c)[0] if check != "star-star" else \
                suite_star_star(c)[0]
            rep = fn(rng)
            row["residual"] = rep.residual
            row["pass"] = rep.passed
            for k, v in rep.extra.items():
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    row[k] = v
        row["ms"] = round(1000 * (time.perf_counter() - t0), 3)
        rows.append(row)
    return rows


def emit_table(rows: list, cfg: dict) -> None:
    fh = _open_out(cfg)
    try:
        if cfg["format"] == "csv":
            keys = list(dict.fromkeys(k for r in rows for k in r))
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in rows:
                w.writerow({k: jsonable(v) for k, v in r.items()})
        else:
            for r in rows:
                fh.write(json.dumps(jsonable(r)) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("model and run options (defaults in brackets)")
    g.add_argument("--n", type=int, help="spin components [3]")
    g.add_argument("--p", type=float, help="nome p [0.08]")
    g.add_argument("--q", type=float, help="nome q [0.08]")
    g.add_argument("--sigma", help="modular parameter of p, e.g. 0.8j (overrides --p/--q)")
    g.add_argument("--tau", help="modular parameter of q; also the classical tau [1j]")
    g.add_argument("--alpha", type=float, help="rapidity parameter alpha [random per draw]")
    g.add_argument("--beta", type=float, help="rapidity parameter beta [random per draw]")
    g.add_argument("--gamma", type=float, help="rapidity parameter gamma [random per draw]")
    g.add_argument("--draws", type=int, help="random draws per check [10]")
    g.add_argument("--resolution", type=int, help="quadrature nodes per dimension [per n]")
    g.add_argument("--tol", type=float, help="pass tolerance [per check]")
    g.add_argument("--seed", type=int, help="64-bit seed of the counter-based RNG [0]")
    g.add_argument("--out", help="output file [stdout]")
    g.add_argument("--format", choices=("ndjson", "csv"), help="record format [ndjson]")
    g.add_argument("--slow", action="store_true", help="include YBE (n=2) and n=4 star-star")
    g.add_argument("--printed", action="store_true",
                   help="series suite: judge against the printed coefficients")
    g.add_argument("--config", help="JSON file with any of the options above")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="multispin",
        description="Verification harness for multi-spin elliptic lattice weights. "
                    f"Thread count comes from ${THREADS_ENV} (default 1). "
                    "Exit status: 0 all pass, 1 any failure, 2 configuration error.")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run an identity suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    _common(v)
    c = sub.add_parser("classical", help="classical solves")
    c.add_argument("task", choices=("star-star",))
    _common(c)
    s = sub.add_parser("sweep", help="tabulate a check over a parameter range")
    s.add_argument("parameter", choices=SWEEP_PARAMETERS)
    s.add_argument("--start", type=float, required=True)
    s.add_argument("--stop", type=float, required=True)
    s.add_argument("--steps", type=int, default=5)
    s.add_argument("--log", action="store_true", help="geometric spacing")
    s.add_argument("--check", choices=SWEEP_CHECKS, default="star-star")
    _common(s)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args)
        cfg["_q_explicit"] = getattr(args, "q", None)
        if args.command == "verify":
            return run_suite(args.suite, cfg)
        if args.command == "classical":
            checks = [("classical-star-star", classical_star_star_check(cfg))] * cfg["draws"]
            return emit(run_checks(checks, cfg["seed"]), cfg)
        if args.steps < 1:
            raise ConfigError("steps must be positive")
        if args.log:
            vals = np.geomspace(args.start, args.stop, args.steps)
        else:
            vals = np.linspace(args.start, args.stop, args.steps)
        emit_table(sweep_rows(args.parameter, [float(v) for v in vals], args.check, cfg), cfg)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    sys.exit(main())
