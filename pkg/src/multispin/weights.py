"""Edge weights W and W-bar, the single-spin weight S, and an integral
identity of elliptic beta-integral type relating them.

All functions accept spins either as :class:`Spin` objects or as arrays with
the component axis last, so quadrature can evaluate them on whole node
batches at once.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError
from .report import CheckReport
from .specfun import G, Nomes, log_elliptic_gamma, log_kappa, theta_bar
from .spin_space import DEFAULT_RESOLUTION, as_components, torus_integrate

S_FORM_RTOL = 1e-12


@dataclass(frozen=True)
class WeightParams:
    n: int
    nomes: Nomes
    alpha: complex

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("n must be at least 2")


def _pair_differences(x, y):
    x = as_components(x)
    y = as_components(y)
    return x[..., :, None] - y[..., None, :]


def log_phi_product(x, y, shift, nomes: Nomes):
    """sum_{j,k} log Phi(x_j - y_k + shift) over the trailing spin axes."""
    d = _pair_differences(x, y) + shift
    return np.sum(log_elliptic_gamma(d, nomes), axis=(-2, -1))


def log_weight_W(params: WeightParams, x, y):
    out = log_phi_product(x, y, 1j * params.alpha, params.nomes)
    return out - log_kappa(params.n, params.alpha, params.nomes)


def weight_W(params: WeightParams, x, y):
    """kappa_n(alpha)^{-1} prod_{j,k} Phi(x_j - y_k + i alpha)."""
    return np.exp(log_weight_W(params, x, y))


def _log_kappa_s(n: int, nomes: Nomes) -> float:
    if nomes.degenerate:
        gg = 1.0
    else:
        gg = G(nomes.tau) * G(nomes.sigma)
    return math.lgamma(n + 1) + (n - 1) * np.log(math.pi / gg)


def _S_theta_form(n, nomes: Nomes, c):
    out = np.ones(c.shape[:-1], dtype=complex)
    if nomes.degenerate:
        for j, k in itertools.combinations(range(n), 2):
            d = c[..., j] - c[..., k]
            r = np.ones_like(d) * 4 * np.sin(d) ** 2
            for t in (nomes.tau, nomes.sigma):
                if math.isfinite(t.imag):
                    r = r * theta_bar(1, d, t) / (2 * np.exp(1j * math.pi * t / 4) * np.sin(d))
            out = out * r
    else:
        e = np.exp(nomes.eta / 2)
        for j, k in itertools.combinations(range(n), 2):
            d = c[..., j] - c[..., k]
            out = out * e * theta_bar(1, d, nomes.tau) * theta_bar(1, d, nomes.sigma)
    return out * np.exp(-_log_kappa_s(n, nomes))


def _S_gamma_form(n, nomes: Nomes, c):
    """The inverse gamma-function product form; zero at coincident components."""
    if nomes.degenerate:
        return _S_theta_form(n, nomes, c)
    d = c[..., :, None] - c[..., None, :]
    off = ~np.eye(n, dtype=bool)
    dd = d[..., off]
    coincide = np.any(np.abs(np.sin(dd)) < 1e-9, axis=-1)
    dd = np.where(coincide[..., None], 0.5, dd)
    val = np.exp(-np.sum(log_elliptic_gamma(dd + 1j * nomes.eta, nomes, method="product"),
                         axis=-1) - _log_kappa_s(n, nomes))
    return np.where(coincide, 0.0, val)


def weight_S(n: int, nomes: Nomes, x, check: bool = True):
    """Single-spin weight S(x) from the theta_1 product form.

    With ``check`` the inverse gamma-function product form is evaluated too,
    and a ConsistencyError is raised if the two disagree beyond 1e-12
    relative at points away from the zeros.  Quadrature integrands pass
    ``check=False`` after the forms have been cross-validated in tests.
    """
    c = as_components(x)
    if c.shape[-1] != n:
        raise DomainError(f"spin has {c.shape[-1]} components, expected {n}")
    val = _S_theta_form(n, nomes, c)
    if check:
        alt = _S_gamma_form(n, nomes, c)
        scale = np.abs(val)
        d = c[..., :, None] - c[..., None, :]
        off = ~np.eye(n, dtype=bool)
        away = np.min(np.abs(np.sin(d[..., off])), axis=-1) > 1e-3
        bad = away & (np.abs(val - alt) > S_FORM_RTOL * np.maximum(scale, 1e-300))
        if np.any(bad):
            worst = float(np.max(np.abs(val - alt)[bad] / scale[bad]))
            raise ConsistencyError(f"S forms disagree (relative {worst:.3g})")
    return val[()] if np.ndim(val) == 0 else val


def sqrt_S(n: int, nomes: Nomes, x):
    """Principal square root of S; the non-negative root for real spins in the
    physical regimes, where S is real and non-negative."""
    s = weight_S(n, nomes, x, check=False)
    if nomes.regime.value != "generic":
        s = np.where(np.abs(s.imag) <= 1e-12 * np.abs(s), np.maximum(s.real, 0.0), s)
    return np.sqrt(s)


def log_weight_Wbar_core(params: WeightParams, x, y):
    """log W_{eta - alpha}(x, y), i.e. W-bar without its sqrt(S S) factor."""
    p = WeightParams(params.n, params.nomes, params.nomes.eta - params.alpha)
    return log_weight_W(p, x, y)


def weight_Wbar(params: WeightParams, x, y):
    """sqrt(S(x) S(y)) W_{eta - alpha}(x, y) with the non-negative root."""
    n, nomes = params.n, params.nomes
    if nomes.degenerate:
        core = 1.0
    else:
        core = np.exp(log_weight_Wbar_core(params, x, y))
    return sqrt_S(n, nomes, x) * sqrt_S(n, nomes, y) * core


# ---------------------------------------------------------------------------
# integral identity


def spiridonov_rhs(n, nomes: Nomes, alpha, beta, mu, x, z):
    """Closed-form right-hand side of the integral identity."""
    eta = nomes.eta
    ab = alpha + beta
    wbar = weight_Wbar(WeightParams(n, nomes, ab), x, z)
    lg = lambda w: log_elliptic_gamma(w, nomes)
    logpref = (log_kappa(n, eta - ab, nomes) + lg(1j * eta - 1j * n * alpha)
               + lg(1j * eta - 1j * n * beta) - lg(1j * eta - 1j * n * ab)
               - log_kappa(n, eta - alpha, nomes) - log_kappa(n, eta - beta, nomes))
    xc, zc = as_components(x), as_components(z)
    logprod = np.sum(lg(mu - xc + 1j * alpha) + lg(zc - mu + 1j * beta)
                     + lg(xc - mu + 1j * (n * beta - alpha))
                     + lg(mu - zc + 1j * (n * alpha - beta)))
    return complex(wbar * np.exp(logpref + logprod))


def spiridonov_resolution(n, nomes: Nomes, alpha, beta, digits: float = 12.0,
                          cap: int = 256) -> int:
    """Nodes per dimension for the integral identity.

    The integrand is analytic in a strip whose half-width is set by the
    nearest pole, at distance min(Re alpha, Re beta, eta - n Re alpha,
    eta - n Re beta) from the real torus; the periodic trapezoid error decays
    like exp(-2 N d).
    """
    eta = nomes.eta.real
    a, b = complex(alpha).real, complex(beta).real
    d = min(a, b, eta - n * a, eta - n * b)
    N = math.ceil(digits * math.log(10) / (2 * d))
    N = max(DEFAULT_RESOLUTION.get(n, 32), min(N, cap))
    return N + N % 2


def spiridonov_lhs(n, nomes: Nomes, alpha, beta, mu, x, z, resolution=None, tol=None):
    pa = WeightParams(n, nomes, alpha)
    pb = WeightParams(n, nomes, beta)

    def integrand(y):
        lg = log_elliptic_gamma
        extra = np.sum(lg(mu - y + 1j * n * alpha, nomes) + lg(y - mu + 1j * n * beta, nomes),
                       axis=-1)
        return weight_Wbar(pa, x, y) * weight_Wbar(pb, y, z) * np.exp(extra)

    if resolution is None:
        resolution = spiridonov_resolution(n, nomes, alpha, beta)
    return torus_integrate(integrand, n, resolution, tol=tol)


def verify_spiridonov_identity(n, nomes: Nomes, alpha, beta, mu, x, z, resolution=None,
                               tol: float = 1e-9) -> CheckReport:
    """Integral identity for the y-integral of W-bar_alpha(x,y) W-bar_beta(y,z)
    times spectator factors in mu; needs 0 < Re alpha, Re beta and
    n Re(alpha + beta) < Re eta."""
    t0 = time.perf_counter()
    eta = nomes.eta.real
    if not (alpha.real > 0 and beta.real > 0 and n * (alpha + beta).real < eta):
        raise DomainError("need 0 < Re alpha, Re beta and n Re(alpha+beta) < Re eta")
    lhs = spiridonov_lhs(n, nomes, alpha, beta, mu, x, z, resolution)
    rhs = spiridonov_rhs(n, nomes, alpha, beta, mu, x, z)
    resid = abs(lhs.value / rhs - 1)
    return CheckReport.make(
        "spiridonov", resid, tol,
        params=dict(n=n, nomes=nomes.as_dict(), alpha=alpha, beta=beta, mu=mu,
                    x=x, z=z, resolution=lhs.resolution),
        extra=dict(quadrature_rel_error=lhs.rel_error),
        seconds=time.perf_counter() - t0)


def spiridonov_limit_prefactor(n, nomes: Nomes, alpha, eps):
    """The scalar prefactor of the closed form at beta = -alpha + eps.

    It reads kappa(eta - eps) Phi(i eta - i n alpha) Phi(i eta + i n alpha - i n eps)
    / (Phi(i eta - i n eps) kappa(eta - alpha) kappa(eta + alpha - eps)) and tends
    to one as eps -> 0 by the functional equations of kappa.
    """
    eta = nomes.eta
    beta = -alpha + eps
    lg = lambda w: complex(log_elliptic_gamma(w, nomes))
    val = (log_kappa(n, eta - eps, nomes) + lg(1j * eta - 1j * n * alpha)
           + lg(1j * eta - 1j * n * beta) - lg(1j * eta - 1j * n * eps)
           - log_kappa(n, eta - alpha, nomes) - log_kappa(n, eta - beta, nomes))
    return complex(np.exp(val))


def inversion_residual(params: WeightParams, x, y) -> float:
    """|W_alpha(x, y) W_{-alpha}(y, x) - 1|."""
    back = WeightParams(params.n, params.nomes, -params.alpha)
    return float(np.max(np.abs(np.expm1(log_weight_W(params, x, y) + log_weight_W(back, y, x)))))
