"""Star weights of the IRF formulation, the star-star relation and
positivity scans."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .report import CheckReport
from .specfun import Nomes
from .spin_space import QuadratureResult, Spin, canonicalize, power_sums, torus_integrate
from .weights import WeightParams, log_phi_product, log_weight_W, sqrt_S, weight_S, weight_W
from .specfun import log_kappa


@dataclass(frozen=True)
class RapidityData:
    """Rapidities u, u', v, v' of the two horizontal and two vertical lines."""

    u: complex
    u2: complex
    v: complex
    v2: complex

    @classmethod
    def from_abg(cls, eta: float, alpha: float, beta: float, gamma: float) -> "RapidityData":
        """Parametrisation by three real numbers that satisfies the
        conjugation conditions automatically."""
        half = eta / 2 + alpha
        return cls(half + 0.5j * (gamma - beta), half - 0.5j * (gamma - beta),
                   -0.5j * (gamma + beta), 0.5j * (gamma + beta))

    @classmethod
    def homogeneous(cls, u: float, v: float) -> "RapidityData":
        return cls(u, u, v, v)

    def differences(self) -> dict:
        return {"u-v": self.u - self.v, "u'-v'": self.u2 - self.v2,
                "u'-v": self.u2 - self.v, "u-v'": self.u - self.v2,
                "v'-v": self.v2 - self.v, "u'-u": self.u2 - self.u}

    def physical(self, eta: float, tol: float = 1e-12) -> bool:
        """Conjugation pairs and 0 < Re of the four crossing differences < eta."""
        d = self.differences()
        conj_ok = (abs(self.u.conjugate() - self.u2) < tol and
                   abs(self.v.conjugate() - self.v2) < tol)
        strip_ok = all(0 < d[k].real < eta for k in ("u-v", "u'-v'", "u'-v", "u-v'"))
        return conj_ok and strip_ok

    def as_dict(self):
        return {"u": self.u, "u'": self.u2, "v": self.v, "v'": self.v2}


@dataclass(frozen=True)
class StarConfiguration:
    a: Spin
    b: Spin
    c: Spin
    d: Spin
    rap: RapidityData
    n: int
    nomes: Nomes

    def __post_init__(self):
        for s in (self.a, self.b, self.c, self.d):
            if s.n != self.n:
                raise DomainError("outer spins must have n components")

    def params(self) -> dict:
        return {"n": self.n, "nomes": self.nomes, "rap": self.rap.as_dict(),
                "a": self.a, "b": self.b, "c": self.c, "d": self.d}


def _wp(cfg: StarConfiguration, alpha) -> WeightParams:
    return WeightParams(cfg.n, cfg.nomes, alpha)


def _star_integral(cfg: StarConfiguration, white: bool, resolution, tol) -> QuadratureResult:
    n, nomes = cfg.n, cfg.nomes
    d = cfg.rap.differences()
    eta = nomes.eta
    a, b, c, dd = cfg.a, cfg.b, cfg.c, cfg.d
    if white:
        outer = sqrt_S(n, nomes, c) * sqrt_S(n, nomes, b)
        # W-bar_{u-v}(c,x) W-bar_{u'-v'}(b,x) W_{u'-v}(x,a) W_{u-v'}(x,d)
        terms = [(c, None, eta - d["u-v"]), (b, None, eta - d["u'-v'"]),
                 (None, a, d["u'-v"]), (None, dd, d["u-v'"])]
    else:
        outer = sqrt_S(n, nomes, b) * sqrt_S(n, nomes, c)
        # W-bar_{u-v}(y,b) W-bar_{u'-v'}(y,c) W_{u'-v}(d,y) W_{u-v'}(a,y)
        terms = [(None, b, eta - d["u-v"]), (None, c, eta - d["u'-v'"]),
                 (dd, None, d["u'-v"]), (a, None, d["u-v'"])]
    if nomes.degenerate:
        logk = 0j
    else:
        logk = sum(log_kappa(n, al, nomes) for _, _, al in terms)

    def integrand(x):
        s = weight_S(n, nomes, x, check=False)
        if nomes.degenerate:
            return s
        acc = np.zeros(x.shape[0], dtype=complex)
        for left, right, al in terms:
            lhs = x if left is None else left.components
            rhs = x if right is None else right.components
            acc += log_phi_product(lhs, rhs, 1j * al, nomes)
        return s * np.exp(acc - logk)

    res = torus_integrate(integrand, n, resolution, tol=tol)
    return QuadratureResult(res.value * outer, None if res.coarse is None else res.coarse * outer,
                            res.resolution)


def irf_V1(cfg: StarConfiguration, resolution=None, tol=None, full: bool = False):
    """White-centred star weight: integral over the central spin."""
    r = _star_integral(cfg, True, resolution, tol)
    return r if full else r.value


def irf_V2(cfg: StarConfiguration, resolution=None, tol=None, full: bool = False):
    """Black-centred star weight."""
    r = _star_integral(cfg, False, resolution, tol)
    return r if full else r.value


def star_star_factors(cfg: StarConfiguration):
    """The W-factors multiplying V1 (left) and V2 (right) in the star-star relation."""
    d = cfg.rap.differences()
    w1 = _wp(cfg, d["v'-v"])
    w2 = _wp(cfg, d["u'-u"])
    left = np.exp(log_weight_W(w1, cfg.d, cfg.c) + log_weight_W(w2, cfg.d, cfg.b))
    right = np.exp(log_weight_W(w1, cfg.b, cfg.a) + log_weight_W(w2, cfg.c, cfg.a))
    return complex(left), complex(right)


def check_star_star(cfg: StarConfiguration, resolution=None, tol: float = 1e-8) -> CheckReport:
    t0 = time.perf_counter()
    v1 = irf_V1(cfg, resolution, full=True)
    v2 = irf_V2(cfg, resolution, full=True)
    left, right = star_star_factors(cfg)
    lhs, rhs = left * v1.value, right * v2.value
    resid = abs(lhs / rhs - 1) if rhs != 0 else abs(lhs - rhs)
    return CheckReport.make(
        "star-star", resid, tol, params=dict(cfg.params(), resolution=v1.resolution),
        extra=dict(lhs=lhs, rhs=rhs, quadrature_rel_error=max(v1.rel_error, v2.rel_error)),
        seconds=time.perf_counter() - t0)


@dataclass
class IRFValue:
    value: complex
    form1: complex
    form2: complex

    @property
    def form_difference(self) -> float:
        return abs(self.form1 - self.form2) / max(abs(self.value), 1e-300)


def irf_V(cfg: StarConfiguration, resolution=None, tol: float | None = None,
          full: bool = False):
    """Symmetric IRF weight: mean of its two equivalent forms.

    The forms coincide by the star-star relation; with ``tol`` set their
    relative difference must not exceed it.
    """
    left, right = star_star_factors(cfg)
    ratio = left / right
    v1 = irf_V1(cfg, resolution)
    v2 = irf_V2(cfg, resolution)
    f1 = np.sqrt(ratio) * v1
    f2 = np.sqrt(1 / ratio) * v2
    out = IRFValue(complex((f1 + f2) / 2), complex(f1), complex(f2))
    if tol is not None and out.form_difference > tol:
        from .errors import ConsistencyError
        raise ConsistencyError(f"IRF forms differ by {out.form_difference:.3g}")
    return out if full else out.value


def normalized_irf_V(cfg: StarConfiguration, resolution=None) -> complex:
    """|S(b) S(c)|^{-1/2} V, the quantity with expansion 1 + pq P/2 + ..."""
    s = abs(weight_S(cfg.n, cfg.nomes, cfg.b) * weight_S(cfg.n, cfg.nomes, cfg.c))
    return irf_V(cfg, resolution) / math.sqrt(s)


def P_term(a, b, c, d, beta: float, gamma: float) -> complex:
    """Leading coefficient of the normalised IRF weight expansion."""
    A, B, C, D = (power_sums(s, 1)[0] for s in (a, b, c, d))
    eb, eg = np.exp(2j * beta), np.exp(2j * gamma)
    return ((eb * A + D / eb) * (eg * np.conj(B) + np.conj(C) / eg)
            + (np.conj(A) / eb + eb * np.conj(D)) * (B / eg + eg * C))


def positivity_scan(n: int, nomes: Nomes, rap: RapidityData, spins, resolution=None,
                    tol: float = 1e-8) -> CheckReport:
    """Evaluate V on every assignment of the given spins to the four corners.

    The residual is max(-min Re V / max|V|, max |Im V|/|V|), so the check
    passes iff every value is real and non-negative to ``tol``.  Points
    where V vanishes through a degenerate outer spin count as exact zeros.
    """
    t0 = time.perf_counter()
    vals = []
    for a, b, c, d in itertools.product(spins, repeat=4):
        cfg = StarConfiguration(a, b, c, d, rap, n, nomes)
        vals.append(irf_V(cfg, resolution))
    vals = np.array(vals)
    mags = np.abs(vals)
    big = mags.max() if mags.size else 1.0
    nz = mags > 1e-14 * big
    imag_ratio = float(np.max(np.abs(vals.imag[nz]) / mags[nz])) if nz.any() else 0.0
    neg = float(max(0.0, -vals.real.min() / big))
    resid = max(imag_ratio, neg)
    return CheckReport.make(
        "positivity", resid, tol,
        params=dict(n=n, nomes=nomes, rap=rap.as_dict(), spins=list(spins),
                    resolution=resolution),
        extra=dict(count=int(vals.size), zeros=int((~nz).sum()), min_real=float(vals.real.min()),
                   max_imag_ratio=imag_ratio),
        seconds=time.perf_counter() - t0)


def random_physical_rapidities(rng: np.random.Generator, eta: float, scale: float = 0.15):
    """Draw (alpha, beta, gamma) with |alpha| well inside the strip."""
    alpha, beta, gamma = rng.uniform(-scale, scale, 3) * np.array([eta, 1.0, 1.0])
    return RapidityData.from_abg(eta, alpha, beta, gamma), (alpha, beta, gamma)
