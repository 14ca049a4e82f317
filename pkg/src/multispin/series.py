"""Truncated bivariate power series in s = sqrt(p) and t = sqrt(q).

Coefficients are numeric (complex arrays over an optional grid of spin
values), not symbolic.  A series stores ``coeffs[a, b, ...]`` for the
monomial ``s^a t^b`` with ``a + b <= D``.  Weights are expanded from the
product form of the elliptic gamma-function: every factor has the shape
``1 - c s^a t^b`` and its logarithm is summed directly; products of factors
become sums of logarithms and a single exponential at the end.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spin_space import as_components, power_sums, torus_nodes, vandermonde


class TruncatedSeries:
    def __init__(self, coeffs, D: int):
        c = np.asarray(coeffs, dtype=complex)
        if c.shape[0] != D + 1 or c.shape[1] != D + 1:
            raise ValueError("coefficient array must start with two axes of length D+1")
        self.D = D
        self.coeffs = c * self._mask(D, c.ndim - 2)

    @staticmethod
    def _mask(D, extra_ndim):
        a = np.arange(D + 1)
        m = (a[:, None] + a[None, :]) <= D
        return m.reshape(m.shape + (1,) * extra_ndim)

    @property
    def extra_shape(self):
        return self.coeffs.shape[2:]

    @classmethod
    def zeros(cls, D, extra_shape=()):
        return cls(np.zeros((D + 1, D + 1) + tuple(extra_shape), dtype=complex), D)

    @classmethod
    def constant(cls, value, D, extra_shape=()):
        out = cls.zeros(D, extra_shape)
        out.coeffs[0, 0] = value
        return out

    def copy(self):
        return TruncatedSeries(self.coeffs.copy(), self.D)

    def __getitem__(self, ab):
        return self.coeffs[ab[0], ab[1]]

    def add_monomial(self, a, b, value):
        if a + b <= self.D:
            self.coeffs[a, b] = self.coeffs[a, b] + value

    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            if other.D != self.D:
                raise DomainError("cannot combine series truncated at different degrees")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            out = self.copy()
            out.coeffs[0, 0] = out.coeffs[0, 0] + other
            return out
        x, y = _align(self.coeffs, o.coeffs)
        return TruncatedSeries(x + y, self.D)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.coeffs, self.D)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return TruncatedSeries(self.coeffs * other, self.D)
        D = self.D
        shape = np.broadcast_shapes(self.extra_shape, o.extra_shape)
        out = np.zeros((D + 1, D + 1) + shape, dtype=complex)
        for a, b in zip(*np.nonzero(self._mask(D, 0))):
            c = self.coeffs[a, b]
            if not np.any(c):
                continue
            c, oc = _align(c[None, None], o.coeffs[: D + 1 - a, : D + 1 - b])
            out[a:, b:] += c * oc
        return TruncatedSeries(out, D)

    __rmul__ = __mul__

    def min_degree(self) -> int:
        D = self.D
        for d in range(D + 1):
            for a in range(d + 1):
                if np.any(self.coeffs[a, d - a]):
                    return d
        return D + 1

    def exp(self):
        """exp of the series; the constant term is exponentiated exactly."""
        c0 = self.coeffs[0, 0].copy()
        f = self.copy()
        f.coeffs[0, 0] = 0
        term = TruncatedSeries.constant(1.0, self.D, self.extra_shape)
        total = term.copy()
        for k in range(1, self.D + 1):
            term = term * f * (1.0 / k)
            total = total + term
        return total * np.exp(c0)

    def log(self):
        """log of a series with non-vanishing constant term (principal branch)."""
        c0 = self.coeffs[0, 0]
        g = self * (1.0 / c0)
        g.coeffs[0, 0] = 0
        term = TruncatedSeries.constant(1.0, self.D, self.extra_shape)
        total = TruncatedSeries.constant(np.log(c0), self.D, self.extra_shape)
        for k in range(1, self.D + 1):
            term = term * g
            total = total + term * ((-1) ** (k + 1) / k)
        return total

    def sqrt(self):
        if np.any(self.coeffs[0, 0] == 0):
            raise DomainError("square root needs a non-vanishing constant term")
        return (self.log() * 0.5).exp()

    def reciprocal(self):
        if np.any(self.coeffs[0, 0] == 0):
            raise DomainError("reciprocal needs a non-vanishing constant term")
        return (-self.log()).exp()

    def evaluate(self, p, q):
        """Sum the series at numeric nomes, using s = sqrt(p), t = sqrt(q)."""
        s, t = np.sqrt(complex(p)), np.sqrt(complex(q))
        a = np.arange(self.D + 1)
        w = (s ** a)[:, None] * (t ** a)[None, :]
        w = w.reshape(w.shape + (1,) * len(self.extra_shape))
        return np.sum(self.coeffs * w, axis=(0, 1))

    def map_extra(self, fn):
        """Apply ``fn`` to every coefficient's grid of values (e.g. integration)."""
        D = self.D
        first = fn(self.coeffs[0, 0])
        out = np.zeros((D + 1, D + 1) + np.shape(first), dtype=complex)
        for a in range(D + 1):
            for b in range(D + 1 - a):
                out[a, b] = fn(self.coeffs[a, b])
        return TruncatedSeries(out, D)

    def nonzero_terms(self, atol=0.0):
        D = self.D
        return [(a, b) for a in range(D + 1) for b in range(D + 1 - a)
                if np.max(np.abs(self.coeffs[a, b])) > atol]


def _align(x, y):
    """Pad extra axes so arrays with fewer grid axes broadcast from the left."""
    nx, ny = x.ndim, y.ndim
    if nx < ny:
        x = x.reshape(x.shape + (1,) * (ny - nx))
    elif ny < nx:
        y = y.reshape(y.shape + (1,) * (nx - ny))
    return x, y


# ---------------------------------------------------------------------------
# building blocks


def log1m(c, a: int, b: int, D: int, extra_shape=()):
    """log(1 - c s^a t^b) for a + b >= 1."""
    if a + b < 1:
        raise DomainError("log1m needs a monomial of positive degree")
    out = TruncatedSeries.zeros(D, extra_shape)
    m = 1
    while m * (a + b) <= D:
        out.coeffs[m * a, m * b] -= np.asarray(c) ** m / m
        m += 1
    return out


def log_phi_series(e2iw, alpha, h: int, D: int):
    """log Phi(w + i(h eta/2 + alpha)) for h in {0, 1}, given exp(2iw).

    With exp(-eta) = s t the numerator factors are
    1 - e^{2iw} e^{-2 alpha} s^{h+4k+2} t^{h+4j+2} and the denominator factors
    1 - e^{-2iw} e^{2 alpha} s^{4k+2-h} t^{4j+2-h}.
    """
    if h not in (0, 1):
        raise DomainError("only the plain (h=0) and shifted (h=1) kinds are supported")
    e2iw = np.asarray(e2iw, dtype=complex)
    shape = e2iw.shape
    up = e2iw * np.exp(-2 * alpha)
    dn = np.exp(2 * alpha) / e2iw
    out = TruncatedSeries.zeros(D, shape)
    for j in range((D + 4) // 4 + 1):
        for k in range((D + 4) // 4 + 1):
            a, b = 4 * k + 2 - h, 4 * j + 2 - h
            if a + b <= D:
                out = out - log1m(dn, a, b, D, shape)
            a, b = h + 4 * k + 2, h + 4 * j + 2
            if a + b <= D:
                out = out + log1m(up, a, b, D, shape)
    return out


def _geometric(a: int, b: int, D: int):
    """1/(1 - s^a t^b) as a scalar series."""
    out = TruncatedSeries.zeros(D)
    m = 0
    while m * (a + b) <= D:
        out.coeffs[m * a, m * b] += 1
        m += 1
    return out


def log_kappa_series(n: int, alpha, h: int, D: int):
    """log kappa_n(h eta/2 + alpha) from its exponential series."""
    out = TruncatedSeries.zeros(D)
    k = 1
    while True:
        lo = min(n * k * (2 - h), n * k * (2 + h))
        if 2 * lo > D:
            break
        ck = (TruncatedSeries.constant(1.0, D) - _mono(4 * k, 4 * k, D)) * (1.0 / k)
        ck = ck * _geometric(4 * k, 0, D) * _geometric(0, 4 * k, D) * _geometric(4 * n * k, 4 * n * k, D)
        x1 = _mono(n * k * (2 - h), n * k * (2 - h), D) * np.exp(2 * n * k * alpha)
        x2 = _mono(n * k * (2 + h), n * k * (2 + h), D) * np.exp(-2 * n * k * alpha)
        out = out + (x1 - x2) * ck
        k += 1
    return out


def _mono(a, b, D):
    out = TruncatedSeries.zeros(D)
    out.add_monomial(a, b, 1.0)
    return out


KIND_SHIFT = {"shifted": 1, "plain": 0}


def log_weight_series(kind: str, n: int, alpha, x, y, D: int):
    """log of kappa(A) W_A(x, y) = sum_{j,k} log Phi(x_j - y_k + iA).

    ``kind`` selects A = eta/2 + alpha ("shifted") or A = alpha ("plain").
    """
    h = KIND_SHIFT[kind]
    xc, yc = as_components(x), as_components(y)
    e2 = np.exp(2j * (xc[..., :, None] - yc[..., None, :]))
    out = None
    for j in range(n):
        for k in range(n):
            term = log_phi_series(e2[..., j, k], alpha, h, D)
            out = term if out is None else out + term
    return out


def expand_weight_W(kind: str, n: int, alpha, x, y, D: int = 9):
    """Series of kappa W (the normalisation is left out, so the constant term is 1)."""
    return log_weight_series(kind, n, alpha, x, y, D).exp()


def log_weight_S_series(n: int, x, D: int):
    xc = as_components(x)
    shape = xc.shape[:-1]
    out = TruncatedSeries.zeros(D, shape)
    for m in range(1, D // 4 + 1):
        for a, b in ((4 * m, 0), (0, 4 * m)):
            out = out + log1m(np.ones(shape), a, b, D, shape) * (n - 1)
            for j, k in itertools.combinations(range(n), 2):
                e = np.exp(2j * (xc[..., j] - xc[..., k]))
                out = out + log1m(e, a, b, D, shape) + log1m(1 / e, a, b, D, shape)
    return out


def expand_weight_S(n: int, x, D: int = 9):
    """Series of pi^{n-1} n! S(x) prod_{j<k} (2 sin(x_j - x_k))^{-2}."""
    return log_weight_S_series(n, x, D).exp()


def expand_kappa(n: int, alpha, kind: str, D: int = 9):
    return log_kappa_series(n, alpha, KIND_SHIFT[kind], D).exp()


# ---------------------------------------------------------------------------
# J-integrals


def _monomial_degree(monomial: dict) -> int:
    return sum(abs(k) * p for k, p in monomial.items())


def monomial_values(x, monomial: dict):
    """prod X_k^p over the monomial; negative k stands for the conjugate
    (analytically continued) power sum sum_j exp(-2i|k| x_j)."""
    xc = as_components(x)
    out = np.ones(xc.shape[:-1], dtype=complex)
    for k, p in monomial.items():
        if k == 0:
            raise DomainError("power-sum index must be non-zero")
        v = np.sum(np.exp(2j * k * xc), axis=-1)
        out = out * v ** p
    return out


def required_resolution(n: int, degree: int) -> int:
    """Nodes per axis that integrate exactly a trig polynomial of the given
    power-sum degree against the Vandermonde density."""
    return 2 * (degree + n) + 2


def j_integral(n: int, monomial: dict, resolution: int | None = None) -> complex:
    """Vandermonde-weighted average of a power-sum monomial.

    ``monomial`` maps k to its power; ``{1: 1, -1: 1}`` is X_1 X_1^*.
    """
    need = required_resolution(n, _monomial_degree(monomial))
    N = resolution or need
    if N < need:
        raise DomainError(f"resolution {N} is below the exactness bound {need}")
    nodes = torus_nodes(n, N)
    vals = vandermonde(nodes) * monomial_values(nodes, monomial)
    return complex(np.sum(vals) * (math.pi / N) ** (n - 1) / (math.pi ** (n - 1) * math.factorial(n)))


J_TABLE = {
    "J[1]": ({}, None, 1),
    "J[X1 X1*]": ({1: 1, -1: 1}, None, 1),
    "J[X1^2 X1*^2]": ({1: 2, -1: 2}, None, 2),
    "J[X2 X2*]": ({2: 1, -2: 1}, None, 2),
    "J[X1^3]": ({1: 3}, 3, 1),
    "J[X1*^3]": ({-1: 3}, 3, 1),
    "J[X1 X2]": ({1: 1, 2: 1}, 3, -1),
    "J[X1* X2*]": ({-1: 1, -2: 1}, 3, -1),
}


# ---------------------------------------------------------------------------
# IRF expansion for n = 3


@dataclass(frozen=True)
class PQRS:
    P: complex
    Q: complex
    R: complex
    S: complex


def pqrs_terms(a, b, c, d, alpha: float, beta: float, gamma: float) -> PQRS:
    A1, B1, C1, D1 = (power_sums(s, 1)[0] for s in (a, b, c, d))
    A2, B2, C2, D2 = (power_sums(s, 2)[1] for s in (a, b, c, d))
    cj = np.conj
    eb, eg = np.exp(2j * beta), np.exp(2j * gamma)
    P = ((eb * A1 + D1 / eb) * (eg * cj(B1) + cj(C1) / eg)
         + (cj(A1) / eb + eb * cj(D1)) * (B1 / eg + eg * C1))
    Q = (np.exp(6 * alpha) * (A1 * cj(D1) / eb + eb * cj(A1) * D1)
         + np.exp(-6 * alpha) * (eg * B1 * cj(C1) + cj(B1) * C1 / eg))
    eb2, eg2 = eb ** 2, eg ** 2
    R = ((eb2 * A2 + D2 / eb2) * (eg2 * cj(B2) + cj(C2) / eg2)
         + (cj(A2) / eb2 + eb2 * cj(D2)) * (B2 / eg2 + eg2 * C2))
    S = ((eb * A1 + D1 / eb) * (cj(A1) / eb + eb * cj(D1))
         + (B1 / eg + eg * C1) * (eg * cj(B1) + cj(C1) / eg))
    return PQRS(complex(P), complex(Q), complex(R), complex(S))


def irf_rapidity_shifts(alpha, beta, gamma):
    """Effective shifted-kind parameters of the four star edges and the
    plain-kind parameters of the star-star W-factors under the
    (alpha, beta, gamma) parametrisation."""
    edges = {"cx": -alpha - 1j * gamma, "bx": -alpha + 1j * gamma,
             "xa": alpha + 1j * beta, "xd": alpha - 1j * beta}
    plain = {"v'-v": 1j * (gamma + beta), "u'-u": -1j * (gamma - beta)}
    return edges, plain


def expand_irf_V(n, a, b, c, d, alpha, beta, gamma, D: int = 9, resolution: int | None = None):
    """Series of |S(b) S(c)|^{-1/2} V for the symmetric IRF weight.

    The central-spin integral is taken coefficient by coefficient with an
    equal-weight rule that is exact for the trig polynomials involved.
    """
    edges, plain = irf_rapidity_shifts(alpha, beta, gamma)
    N = resolution or required_resolution(n, D + 2)
    nodes = torus_nodes(n, N)
    logint = (log_weight_series("shifted", n, edges["cx"], c, nodes, D)
              + log_weight_series("shifted", n, edges["bx"], b, nodes, D)
              + log_weight_series("shifted", n, edges["xa"], nodes, a, D)
              + log_weight_series("shifted", n, edges["xd"], nodes, d, D)
              + log_weight_S_series(n, nodes, D))
    lk = sum((log_kappa_series(n, e, 1, D) for e in edges.values()), TruncatedSeries.zeros(D))
    integrand = (logint - lk).exp()
    dens = vandermonde(nodes) / (math.pi ** (n - 1) * math.factorial(n)) * (math.pi / N) ** (n - 1)
    integral = integrand.map_extra(lambda v: np.sum(v * dens))
    # |S(b) S(c)|^{-1/2} sqrt(S(b) S(c)) = 1 in the physical regime
    logratio = (log_weight_series("plain", n, plain["v'-v"], d, c, D)
                + log_weight_series("plain", n, plain["u'-u"], d, b, D)
                - log_weight_series("plain", n, plain["v'-v"], b, a, D)
                - log_weight_series("plain", n, plain["u'-u"], c, a, D))
    # the kappa factors of the ratio cancel pairwise
    return (logratio * 0.5).exp() * integral


# ---------------------------------------------------------------------------
# closed forms printed for the expansions (coefficients keyed by (a, b))


def _ps(x, m):
    xc = as_components(x)
    return {k: np.sum(np.exp(2j * k * xc), axis=-1) for k in range(-m, m + 1) if k}


def closed_form_shifted(alpha, a, b, printed: bool = True):
    """Closed-form coefficients of kappa W at the shifted parameter.

    ``printed=False`` replaces the two coefficients whose printed values are
    inconsistent with the definition: the (pq)^{1/2} coefficient is
    e^{2 alpha} A1* B1 and the pq coefficient carries a factor 1/2.
    """
    A, B = _ps(a, 4), _ps(b, 4)
    e = np.exp(2 * alpha)
    X1 = A[-1] * B[1]
    X2 = A[-2] * B[2]
    X3 = A[-3] * B[3]
    X4 = A[-4] * B[4]
    Y1 = A[1] * B[-1]
    out = {
        (1, 1): 0.5 * e * X1,
        (2, 2): e**2 * (X1**2 + X2),
        (3, 3): e**3 / 6 * (X1**3 + 2 * X3 + 3 * X1 * X2) - Y1 / e,
        (5, 1): e * X1, (1, 5): e * X1,
        (4, 4): e**4 / 24 * (X1**4 + 6 * X1**2 * X2 + 3 * X2**2 + 8 * X1 * X3 + 6 * X4) - X1 * Y1,
        (6, 2): e**2 * X1**2, (2, 6): e**2 * X1**2,
    }
    if not printed:
        out[(1, 1)] = e * X1
        out[(2, 2)] = 0.5 * e**2 * (X1**2 + X2)
    return out


def closed_form_plain(alpha, a, b, printed: bool = True):
    """Closed-form coefficients of kappa W at the plain parameter.

    With ``printed=False`` the p^2 q^2 coefficient is
    -X1 Y1 + (e^{4a}(X1^2 + A2* B2) + e^{-4a}(Y1^2 - A2 B2*))/2.
    """
    A, B = _ps(a, 2), _ps(b, 2)
    e = np.exp(2 * alpha)
    X1 = A[-1] * B[1]
    Y1 = A[1] * B[-1]
    lead = e * X1 - Y1 / e
    if printed:
        pq2 = -X1 * Y1 + math.cosh(4 * alpha) * X1**2 + math.sinh(4 * alpha) * A[2] * B[-2]
    else:
        pq2 = -X1 * Y1 + 0.5 * (e**2 * (X1**2 + A[-2] * B[2]) + (Y1**2 - A[2] * B[-2]) / e**2)
    return {(2, 2): lead, (6, 2): lead, (2, 6): lead, (4, 4): pq2}


def closed_form_S(x):
    X = _ps(x, 2)
    m = X[1] * X[-1] - 1
    half = 0.5 * (4 - 4 * X[1] * X[-1] + (X[1] * X[-1]) ** 2 - X[2] * X[-2])
    return {(4, 0): -m, (0, 4): -m, (4, 4): m**2, (8, 0): half, (0, 8): half}


def closed_form_kappa(n, alpha):
    return {(n, n): np.exp(2 * n * alpha)}


def closed_form_irf(t: PQRS, printed: bool = True):
    """Closed-form coefficients of the normalised IRF weight; with
    ``printed=False`` the pq coefficient is P/2."""
    return {(2, 2): t.P if printed else 0.5 * t.P, (3, 3): t.Q, (4, 4): 1 + t.P**2 / 8 + t.R / 4 - t.S,
            (6, 2): 0.5 * t.P, (2, 6): 0.5 * t.P}


def compare_coefficients(series: TruncatedSeries, closed: dict, max_degree: int | None = None):
    """Per-monomial absolute differences between a series and a closed form.

    Monomials absent from ``closed`` are compared against zero, up to total
    degree ``max_degree`` (default: the series' truncation degree).
    """
    D = series.D if max_degree is None else max_degree
    out = {}
    for a in range(D + 1):
        for b in range(D + 1 - a):
            if a == 0 and b == 0:
                continue
            want = closed.get((a, b), 0.0)
            out[(a, b)] = float(np.max(np.abs(series[a, b] - want)))
    return out
