"""Theta functions, the elliptic gamma-function and related special functions.

Conventions
-----------
Nomes are ``p = exp(i*pi*sigma)`` and ``q = exp(i*pi*tau)``.  Theta functions
follow the Whittaker-Watson normalisation with periods ``pi`` and ``pi*tau``.
The crossing parameter is ``eta = -i*pi*(sigma + tau)/2`` and its classical
remnant is ``eta0 = -i*pi*tau/2``.

Every truncated series or product accepts a ``tol`` argument (absolute target
for the neglected tail, relative to the size of the result where that makes
sense).  Everything is double precision.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PoleError, ZeroProximityError

TOL = 1e-18
POLE_THRESHOLD = 1e-10
MAX_TERMS = 1_000_000
AUTO_SUM_FRACTION = 0.8


class Regime(str, enum.Enum):
    BOTH_REAL = "both-real"
    CONJUGATE_PAIR = "conjugate-pair"
    GENERIC = "generic"


def _classify(p: complex, q: complex) -> Regime:
    tiny = 1e-14
    if abs(p.imag) <= tiny and abs(q.imag) <= tiny and p.real >= 0 and q.real >= 0:
        return Regime.BOTH_REAL
    if abs(p - q.conjugate()) <= tiny * max(1.0, abs(q)):
        return Regime.CONJUGATE_PAIR
    return Regime.GENERIC


@dataclass(frozen=True)
class Nomes:
    """The pair of elliptic nomes together with their modular parameters.

    Build with :meth:`from_pq` or :meth:`from_modular`.  A vanishing nome is
    allowed and marks the degenerate point where every gamma-function factor
    collapses to one; ``sigma``/``tau`` are then ``inf*1j``.
    """

    p: complex
    q: complex
    sigma: complex
    tau: complex
    regime: Regime = field(compare=False)

    @classmethod
    def from_pq(cls, p, q) -> "Nomes":
        p, q = complex(p), complex(q)
        if not (abs(p) < 1 and abs(q) < 1):
            raise DomainError(f"nomes must satisfy |p|,|q| < 1, got {p}, {q}")
        # Real inputs are stored with an exactly zero imaginary part.
        sigma = complex(0, math.inf) if p == 0 else -1j * np.log(p) / math.pi
        tau = complex(0, math.inf) if q == 0 else -1j * np.log(q) / math.pi
        return cls(p, q, complex(sigma), complex(tau), _classify(p, q))

    @classmethod
    def from_modular(cls, sigma, tau) -> "Nomes":
        sigma, tau = complex(sigma), complex(tau)
        if not (sigma.imag > 0 and tau.imag > 0):
            raise DomainError("need Im sigma > 0 and Im tau > 0")
        p = complex(np.exp(1j * math.pi * sigma))
        q = complex(np.exp(1j * math.pi * tau))
        return cls(p, q, sigma, tau, _classify(p, q))

    @property
    def degenerate(self) -> bool:
        return self.p == 0 or self.q == 0

    @property
    def eta(self) -> complex:
        if self.degenerate:
            return complex(math.inf)
        return -1j * math.pi * (self.sigma + self.tau) / 2

    @property
    def eta0(self) -> complex:
        if self.q == 0:
            return complex(math.inf)
        return -1j * math.pi * self.tau / 2

    def swapped(self) -> "Nomes":
        return Nomes(self.q, self.p, self.tau, self.sigma, self.regime)

    def as_dict(self) -> dict:
        return {"p": [self.p.real, self.p.imag], "q": [self.q.real, self.q.imag],
                "regime": self.regime.value}


# ---------------------------------------------------------------------------
# theta functions


def _check_tau(tau) -> complex:
    tau = complex(tau)
    if not tau.imag > 0:
        raise DomainError(f"Im tau must be positive, got {tau}")
    return tau


def _theta_terms(imz_max: float, a: float, tol: float) -> int:
    # Term n of the q-series has modulus exp(-a n^2 + 2 b n); stop once it is
    # below tol times the largest term.
    L = math.log(1.0 / tol)
    return int(math.ceil((imz_max + math.sqrt(a * L)) / a)) + 2


def theta(j: int, z, tau, tol: float = TOL):
    """Jacobi theta function by its q-series.

    Valid for ``|Im z| <= pi*Im(tau)`` (one quasi-period); beyond that the
    terms grow so large that cancellation spoils double precision and a
    DomainError is raised.
    """
    tau = _check_tau(tau)
    z = np.asarray(z, dtype=complex)
    a = math.pi * tau.imag
    b = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if b > a:
        raise DomainError(f"|Im z| = {b} exceeds pi*Im(tau) = {a}")
    N = _theta_terms(b, a, tol)
    out = np.zeros_like(z)
    if j in (1, 2):
        for m in range(N):
            h = m + 0.5
            w = np.exp(1j * math.pi * tau * h * h)
            if j == 1:
                out += 2 * (-1) ** m * w * np.sin((2 * m + 1) * z)
            else:
                out += 2 * w * np.cos((2 * m + 1) * z)
    elif j in (3, 4):
        sgn = -1 if j == 4 else 1
        out += 1
        for m in range(1, N):
            w = np.exp(1j * math.pi * tau * m * m)
            out += 2 * sgn**m * w * np.cos(2 * m * z)
    else:
        raise ValueError("theta index must be 1..4")
    return out[()] if out.ndim == 0 else out


def theta_prime(j: int, z, tau, tol: float = TOL):
    """z-derivative of :func:`theta`, same domain."""
    tau = _check_tau(tau)
    z = np.asarray(z, dtype=complex)
    a = math.pi * tau.imag
    b = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if b > a:
        raise DomainError(f"|Im z| = {b} exceeds pi*Im(tau) = {a}")
    N = _theta_terms(b, a, tol) + 2
    out = np.zeros_like(z)
    for m in range(N):
        if j in (1, 2):
            h = m + 0.5
            w = np.exp(1j * math.pi * tau * h * h) * (2 * m + 1)
            if j == 1:
                out += 2 * (-1) ** m * w * np.cos((2 * m + 1) * z)
            else:
                out -= 2 * w * np.sin((2 * m + 1) * z)
        elif j in (3, 4):
            if m == 0:
                continue
            sgn = -1 if j == 4 else 1
            out -= 4 * m * sgn**m * np.exp(1j * math.pi * tau * m * m) * np.sin(2 * m * z)
        else:
            raise ValueError("theta index must be 1..4")
    return out[()] if out.ndim == 0 else out


def _product_terms(imz_max: float, a: float, tol: float) -> int:
    return int(math.ceil((math.log(1.0 / tol) + 2 * imz_max) / (2 * a))) + 2


def G(tau, tol: float = TOL) -> complex:
    """Euler-type product prod_{k>=1} (1 - q^{2k})."""
    tau = _check_tau(tau)
    a = math.pi * tau.imag
    M = _product_terms(0.0, a, tol)
    k = np.arange(1, M + 1)
    return complex(np.exp(np.sum(np.log1p(-np.exp(2j * math.pi * tau * k)))))


def theta_bar(j: int, z, tau, tol: float = TOL):
    """theta_j(z|tau)/G(tau), evaluated from the triple-product form.

    The product form needs no division by G and stays accurate for nomes
    close to one.  Same domain as :func:`theta`.
    """
    tau = _check_tau(tau)
    z = np.asarray(z, dtype=complex)
    a = math.pi * tau.imag
    b = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if b > a:
        raise DomainError(f"|Im z| = {b} exceeds pi*Im(tau) = {a}")
    M = _product_terms(b, a, tol)
    e2 = np.exp(2j * z)
    e2m = np.exp(-2j * z)
    if j in (1, 2):
        shift, sgn = 0.0, (-1.0 if j == 1 else 1.0)
        pref = 2 * np.exp(1j * math.pi * tau / 4) * (np.sin(z) if j == 1 else np.cos(z))
    elif j in (3, 4):
        shift, sgn = -1.0, (-1.0 if j == 4 else 1.0)
        pref = np.ones_like(z)
    else:
        raise ValueError("theta index must be 1..4")
    out = pref.astype(complex)
    for m in range(1, M + 1):
        w = np.exp(1j * math.pi * tau * (2 * m + shift))
        out = out * (1 + sgn * w * e2) * (1 + sgn * w * e2m)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# elliptic gamma-function


def _nome_powers_2k(s: complex, k: int) -> complex:
    """1 - r^{2k} for r = exp(i pi s), computed without cancellation."""
    return -np.expm1(2j * math.pi * k * s)


def _log_gamma_sum(z: np.ndarray, nomes: Nomes, tol: float) -> np.ndarray:
    eta = nomes.eta
    b = float(np.max(np.abs(z.imag))) if z.size else 0.0
    gap = eta.real - b
    if gap <= 0:
        raise DomainError(f"sum form needs |Im z| < Re eta = {eta.real}, got {b}")
    scale = (1 - abs(nomes.p) ** 2) * (1 - abs(nomes.q) ** 2) * (-math.expm1(-2 * gap))
    K = int(math.ceil(math.log(1.0 / (tol * scale)) / (2 * gap))) + 1
    if K > MAX_TERMS:
        raise DomainError("sum form would need too many terms")
    out = np.zeros_like(z)
    for k in range(1, K + 1):
        den = k * _nome_powers_2k(nomes.sigma, k) * _nome_powers_2k(nomes.tau, k)
        num = np.exp(2j * k * z - 2 * k * eta) - np.exp(-2j * k * z - 2 * k * eta)
        out -= num / den
    return out


def _product_range(r: float, other: float, b: float, tol: float) -> int:
    # Smallest J with e^{2b} r^{2J+3} other / ((1-r^2)(1-other^2)) <= tol.
    if r == 0:
        return 0
    rhs = tol * (1 - r * r) * (1 - other * other) / (math.exp(2 * b) * max(other, 1e-300))
    J = (math.log(rhs) / math.log(r) - 3) / 2
    return max(0, int(math.ceil(J)))


def _log_gamma_product(z: np.ndarray, nomes: Nomes, tol: float) -> np.ndarray:
    ap, aq = abs(nomes.p), abs(nomes.q)
    b = float(np.max(np.abs(z.imag))) if z.size else 0.0
    J = _product_range(aq, ap, b, tol / 4)
    K = _product_range(ap, aq, b, tol / 4)
    if (J + 1) * (K + 1) > MAX_TERMS:
        raise DomainError("product form would need too many factors")
    jj = np.arange(J + 1)[:, None]
    kk = np.arange(K + 1)[None, :]
    logw = (1j * math.pi * ((2 * jj + 1) * nomes.tau + (2 * kk + 1) * nomes.sigma)).ravel()
    out = np.zeros_like(z)
    flat = z.ravel()
    res = out.ravel()
    # chunk over z to bound memory
    chunk = max(1, 200_000 // max(1, logw.size))
    for s in range(0, flat.size, chunk):
        zz = flat[s:s + chunk, None]
        up = np.exp(logw[None, :] + 2j * zz)
        dn = np.exp(logw[None, :] - 2j * zz)
        if np.any(np.abs(1 - dn) < POLE_THRESHOLD):
            raise PoleError("elliptic gamma-function evaluated at a pole")
        res[s:s + chunk] = np.sum(np.log1p(-up), axis=1) - np.sum(np.log1p(-dn), axis=1)
    return res.reshape(z.shape)


def log_elliptic_gamma(z, nomes: Nomes, method: str = "auto", tol: float = 1e-17):
    """Logarithm of the elliptic gamma-function.

    ``method`` is ``"product"`` (sum of log1p over the double product; the
    branch is the sum of principal branches per factor), ``"sum"`` (the
    exponential series, valid only for ``|Im z| < Re eta``) or ``"auto"``
    (series when ``|Im z| < 0.8 Re eta``).  Both branches agree inside the
    strip, so the result is an analytic function there.
    """
    z = np.asarray(z, dtype=complex)
    if nomes.degenerate:
        out = np.zeros_like(z)
        return out[()] if out.ndim == 0 else out
    if method == "auto":
        b = float(np.max(np.abs(z.imag))) if z.size else 0.0
        method = "sum" if b < AUTO_SUM_FRACTION * nomes.eta.real else "product"
    if method == "sum":
        out = _log_gamma_sum(z, nomes, tol)
    elif method == "product":
        out = _log_gamma_product(z, nomes, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[()] if out.ndim == 0 else out


def elliptic_gamma(z, nomes: Nomes, method: str = "auto", tol: float = 1e-17):
    """The elliptic gamma-function as a (possibly array-valued) complex number."""
    return np.exp(log_elliptic_gamma(z, nomes, method=method, tol=tol))


# ---------------------------------------------------------------------------
# partition function per edge


def _log_kappa_sum(n, alpha, nomes, tol):
    eta = nomes.eta
    gap = eta.real - abs(alpha.real)
    if gap <= 0:
        raise DomainError(f"kappa series needs |Re alpha| < Re eta, got {alpha}")
    scale = (1 - abs(nomes.p) ** 2) * (1 - abs(nomes.q) ** 2) * (-math.expm1(-2 * n * gap))
    K = int(math.ceil(math.log(1.0 / (tol * scale)) / (2 * n * gap))) + 1
    if K > MAX_TERMS:
        raise DomainError("kappa series would need too many terms")
    k = np.arange(1, K + 1)
    num = np.exp(2 * n * k * (alpha - eta)) - np.exp(-2 * n * k * (alpha + eta))
    den = (k * _nome_powers_2k(nomes.sigma, k) * _nome_powers_2k(nomes.tau, k)
           * -np.expm1(-4 * n * k * eta))
    return complex(np.sum(num * -np.expm1(-4 * k * eta) / den))


def _log_kappa_product(n, alpha, nomes, tol):
    # Expanding the denominators of the series as geometric sums turns the
    # k-sum into logarithms, giving a triple product that continues kappa
    # meromorphically to every alpha.
    eta = nomes.eta
    ap, aq = abs(nomes.p), abs(nomes.q)
    logx = np.array([2 * n * (alpha - eta), -2 * n * (alpha + eta)])
    xmax = math.exp(max(logx.real.max(), 0.0))
    r = abs(np.exp(-2 * n * 2 * eta))
    budget = math.log(tol * (1 - ap * ap) * (1 - aq * aq) * (1 - r) / (8 * xmax))
    A = max(0, int(math.ceil(budget / (2 * math.log(ap))))) if ap > 0 else 0
    B = max(0, int(math.ceil(budget / (2 * math.log(aq))))) if aq > 0 else 0
    C = max(0, int(math.ceil(budget / math.log(r))))
    if (A + 1) * (B + 1) * (C + 1) > MAX_TERMS:
        raise DomainError("kappa product would need too many factors")
    a = np.arange(A + 1)[:, None, None]
    b = np.arange(B + 1)[None, :, None]
    c = np.arange(C + 1)[None, None, :]
    logw = (2j * math.pi * (a * nomes.sigma + b * nomes.tau) - 4 * n * c * eta).ravel()
    shift = -4 * eta
    total = 0j
    for lx, sgn in zip(logx, (-1, 1)):
        f0 = np.exp(lx + logw)
        f1 = np.exp(lx + logw + shift)
        if np.any(np.abs(1 - f0) < POLE_THRESHOLD):
            raise PoleError("kappa evaluated at a pole or zero")
        total += sgn * (np.sum(np.log1p(-f0)) - np.sum(np.log1p(-f1)))
    return complex(total)


def log_kappa(n: int, alpha, nomes: Nomes, method: str = "auto", tol: float = 1e-17) -> complex:
    """Logarithm of the edge normalisation kappa_n(alpha).

    The exponential series (``method="sum"``) converges for
    ``|Re alpha| < Re eta``; its term count grows like
    ``1/(Re eta - |Re alpha|)``.  ``method="product"`` resums it into a
    triple product valid for every alpha away from zeros and poles; the
    imaginary part of the logarithm is then only defined modulo 2*pi.
    ``"auto"`` takes the series when ``|Re alpha| < 0.8 Re eta``.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    alpha = complex(alpha)
    if nomes.degenerate:
        return 0j
    if method == "auto":
        method = "sum" if abs(alpha.real) < AUTO_SUM_FRACTION * nomes.eta.real else "product"
    if method == "sum":
        return _log_kappa_sum(n, alpha, nomes, tol)
    if method == "product":
        return _log_kappa_product(n, alpha, nomes, tol)
    raise ValueError(f"unknown method {method!r}")


def kappa(n: int, alpha, nomes: Nomes, method: str = "auto", tol: float = 1e-17) -> complex:
    return complex(np.exp(log_kappa(n, alpha, nomes, method, tol)))


# ---------------------------------------------------------------------------
# quasi-classical functions


def _fourier_terms(z: np.ndarray, tau: complex, tol: float, power: int) -> int:
    eta0 = math.pi * tau.imag / 2
    b = float(np.max(np.abs(z.imag))) if z.size else 0.0
    gap = eta0 - b
    if gap <= 0:
        raise DomainError(f"need |Im z| < Re eta0 = {eta0}, got {b}")
    K = int(math.ceil(math.log(1.0 / (tol * (-math.expm1(-2 * gap)))) / (2 * gap))) + 1
    if K > MAX_TERMS:
        raise DomainError("Fourier series would need too many terms")
    return K


def _fourier_modes(z: np.ndarray, tau: complex, m: int):
    """(cos 2mz, sin 2mz) * q^m with the exponents combined before exponentiating."""
    lq = 1j * math.pi * tau * m
    ep = np.exp(2j * m * z + lq)
    em = np.exp(-2j * m * z + lq)
    return (ep + em) / 2, (ep - em) / 2j


def log_theta4_bar(z, tau, tol: float = TOL):
    """log(theta_4(z|tau)/G(tau)) from its Fourier series, |Im z| < Re eta0."""
    tau = _check_tau(tau)
    z = np.asarray(z, dtype=complex)
    K = _fourier_terms(z, tau, tol, 1)
    out = np.zeros_like(z)
    for m in range(1, K + 1):
        cq, _ = _fourier_modes(z, tau, m)
        out -= 2 * cq / (m * _nome_powers_2k(tau, m))
    return out[()] if out.ndim == 0 else out


def dlog_theta4_bar(z, tau, tol: float = TOL):
    """z-derivative of :func:`log_theta4_bar`."""
    tau = _check_tau(tau)
    z = np.asarray(z, dtype=complex)
    K = _fourier_terms(z, tau, tol, 0)
    out = np.zeros_like(z)
    for m in range(1, K + 1):
        _, sq = _fourier_modes(z, tau, m)
        out += 4 * sq / _nome_powers_2k(tau, m)
    return out[()] if out.ndim == 0 else out


def lambda4(z, tau, tol: float = TOL):
    """lambda_4(z|tau) = -i * integral_0^z log theta4_bar, by termwise integration."""
    tau = _check_tau(tau)
    z = np.asarray(z, dtype=complex)
    K = _fourier_terms(z, tau, tol, 2)
    out = np.zeros_like(z)
    for m in range(1, K + 1):
        _, sq = _fourier_modes(z, tau, m)
        out += sq / (m * m * _nome_powers_2k(tau, m))
    out = 1j * out
    return out[()] if out.ndim == 0 else out


def zeta_log_deriv(k: int, z, tau, tol: float = TOL):
    """(1/i) d/dz log theta_k(z|tau) for k = 3, 4."""
    if k not in (3, 4):
        raise ValueError("zeta_log_deriv is defined for k = 3, 4")
    th = np.asarray(theta(k, z, tau, tol))
    thp = np.asarray(theta_prime(k, z, tau, tol))
    if np.any(np.abs(th) < 1e-12 * np.maximum(1.0, np.abs(thp))):
        raise ZeroProximityError("theta function vanishes at the requested point")
    out = -1j * thp / th
    return out[()] if out.ndim == 0 else out


def kappa_functional_residuals(n: int, alpha, nomes: Nomes) -> tuple:
    """Residuals of kappa(a) kappa(-a) = 1 and
    kappa(eta - a) kappa(eta + a) = Phi(i eta - i n a) Phi(i eta + i n a)."""
    eta = nomes.eta
    r1 = abs(np.expm1(log_kappa(n, alpha, nomes) + log_kappa(n, -alpha, nomes)))
    lhs = log_kappa(n, eta - alpha, nomes) + log_kappa(n, eta + alpha, nomes)
    rhs = (log_elliptic_gamma(1j * eta - 1j * n * alpha, nomes)
           + log_elliptic_gamma(1j * eta + 1j * n * alpha, nomes))
    r2 = abs(np.expm1(lhs - rhs))
    return float(r1), float(r2)
