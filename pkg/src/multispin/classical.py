"""Quasi-classical layer.

The elliptic weights exponentiate as hbar -> 0 into the classical densities
Lambda, Lambda-bar and C.  This module evaluates them, solves the saddle
point equations for the central spin of white and black stars, checks the
classical star-star relation and its dual forms, relaxes small lattices
with fixed boundary, and treats the two-component case in scalar form.

Logarithms of theta_4 are taken from the Fourier series of
log(theta_4/G), which is analytic in the strip |Im z| < eta0.  This is the
continuously tracked branch; the principal-branch evaluation of psi is
available too and differs from it by multiples of 2 pi.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, ZeroProximityError
from .report import CheckReport
from .specfun import (G, Nomes, dlog_theta4_bar, lambda4, log_elliptic_gamma, log_kappa,
                      log_theta4_bar, theta, zeta_log_deriv)
from .spin_space import Spin, as_components, canonicalize, constant_spin

CONSTRAINT_TOL = 1e-12
NEWTON_TOL = 1e-12
MAX_HALVINGS = 20
# minimal distance kept from the edge |Im z| = eta0 of the Fourier strip
STRIP_MARGIN = 0.02


def _eta0(tau) -> complex:
    return -1j * math.pi * complex(tau) / 2


def _strip(z, tau):
    z = np.asarray(z, dtype=complex)
    limit = math.pi * complex(tau).imag / 2 - STRIP_MARGIN
    if z.size and float(np.max(np.abs(z.imag))) > limit:
        raise DomainError(f"argument leaves the strip |Im z| < {limit:.4g}")
    return z


# ---------------------------------------------------------------------------
# alpha geometry

# The twelve Lambda terms of the expanded classical star-star sum as
# (sign of the alpha variable, alpha name, left spin, right spin).
STAR_TERMS = (
    (+1, "a1", "X", "a"), (+1, "a2", "b", "X"), (+1, "a3", "c", "X"), (+1, "a4", "X", "d"),
    (+1, "a6", "d", "c"), (+1, "a5", "d", "b"),
    (-1, "a4", "Y", "a"), (-1, "a3", "b", "Y"), (-1, "a2", "c", "Y"), (-1, "a1", "Y", "d"),
    (-1, "a6", "a", "b"), (-1, "a5", "a", "c"),
)


@dataclass(frozen=True)
class AlphaSet:
    """The six edge variables of the star-star octahedron.

    Built from the rapidities as a1 = u'-v, a2 = eta0-u'+v', a3 = eta0-u+v,
    a4 = u-v', a5 = u'-u, a6 = v'-v.  The three linear relations between them
    and the vertex sums of the octahedron are checked on construction.
    """

    a1: complex
    a2: complex
    a3: complex
    a4: complex
    a5: complex
    a6: complex
    eta0: complex

    def __post_init__(self):
        for k in ("a1", "a2", "a3", "a4", "a5", "a6", "eta0"):
            object.__setattr__(self, k, complex(getattr(self, k)))
        e = self.eta0
        scale = CONSTRAINT_TOL * max(1.0, abs(e))
        gaps = (self.a1 + self.a2 + self.a3 + self.a4 - 2 * e,
                self.a5 - (self.a1 + self.a3 - e),
                self.a6 - (self.a1 + self.a2 - e))
        if max(abs(g) for g in gaps) > scale:
            raise DomainError("alpha variables violate the linear constraints")
        sums = self.vertex_sums()
        want = {"X": 2 * e, "Y": -2 * e, "a": 0, "b": 0, "c": 0, "d": 0}
        if any(abs(sums[k] - want[k]) > scale for k in want):
            raise DomainError("octahedron vertex sums are inconsistent")

    @classmethod
    def from_rapidities(cls, rap, eta0) -> "AlphaSet":
        e = complex(eta0)
        return cls(rap.u2 - rap.v, e - rap.u2 + rap.v2, e - rap.u + rap.v, rap.u - rap.v2,
                   rap.u2 - rap.u, rap.v2 - rap.v, e)

    @classmethod
    def from_abg(cls, tau, alpha: float, beta: float, gamma: float) -> "AlphaSet":
        """Real parametrisation: a1 = eta0/2 + alpha + i beta = conj(a4) and
        a2 = eta0/2 - alpha + i gamma = conj(a3) for purely imaginary tau."""
        e = _eta0(tau)
        return cls(e / 2 + alpha + 1j * beta, e / 2 - alpha + 1j * gamma,
                   e / 2 - alpha - 1j * gamma, e / 2 + alpha - 1j * beta,
                   -1j * (gamma - beta), 1j * (gamma + beta), e)

    @classmethod
    def from_three(cls, tau, a1, a2, a3) -> "AlphaSet":
        """Complete a1, a2, a3 using the constraints."""
        e = _eta0(tau)
        return cls(a1, a2, a3, 2 * e - a1 - a2 - a3, a1 + a3 - e, a1 + a2 - e, e)

    def __getitem__(self, name: str) -> complex:
        return getattr(self, name)

    @property
    def white(self) -> tuple:
        return (self.a1, self.a2, self.a3, self.a4)

    @property
    def black(self) -> tuple:
        return (-self.a4, -self.a3, -self.a2, -self.a1)

    def vertex_sums(self) -> dict:
        """Signed sum of the edge variables meeting at each octahedron vertex."""
        out = dict.fromkeys("XYabcd", 0j)
        for sign, name, left, right in STAR_TERMS:
            out[left] += sign * self[name]
            out[right] += sign * self[name]
        return out

    def n2_admissible(self) -> bool:
        e = self.eta0.real
        return all(abs(a.imag) < 1e-14 and 0 < a.real < e for a in self.white)

    def as_dict(self):
        d = {f"alpha{k}": getattr(self, f"a{k}") for k in range(1, 7)}
        d["eta0"] = self.eta0
        return d


# ---------------------------------------------------------------------------
# classical densities


def Lambda(n: int, alpha, x, y, tau):
    """-lambda4(i n alpha | n tau) + sum_{j,k} lambda4(x_j - y_k + i alpha | tau).

    Spins may carry leading batch axes.  A DomainError is raised when an
    argument leaves the strip where the Fourier series of lambda4 converges.
    """
    xc, yc = as_components(x), as_components(y)
    d = _strip(xc[..., :, None] - yc[..., None, :] + 1j * alpha, tau)
    return np.sum(lambda4(d, tau), axis=(-2, -1)) - lambda4(1j * n * alpha, n * tau)


def Lambda_bar(n: int, alpha, x, y, tau):
    return Lambda(n, _eta0(tau) - alpha, x, y, tau) + 0.5 * C_term(n, x) + 0.5 * C_term(n, y)


def _check_canonical(x, tol: float = 1e-12):
    re = x.real
    if np.any(np.diff(re, axis=-1) < -tol) or np.any(re < -math.pi / 2 - tol) \
            or np.any(re >= math.pi / 2 + tol):
        raise DomainError("C_term needs a canonical spin (ascending real parts in [-pi/2, pi/2))")


def C_term(n: int, x, check: bool = True):
    """Leading quasi-classical exponent of the single-spin weight.

    Evaluated as (n^2-1) pi^2/12 + sum_{j<k} [(x_k-x_j)^2 - pi (x_k-x_j)],
    which is the form produced by the theta_1 asymptotics for any canonical
    representative.  When sum(x) = 0 it equals
    (n^2-1) pi^2/12 + n sum x_j^2 - 2 pi sum j x_j (see :func:`C_term_closed`).
    """
    xc = as_components(x)
    if xc.shape[-1] != n:
        raise DomainError(f"spin has {xc.shape[-1]} components, expected {n}")
    if check:
        _check_canonical(xc)
    d = xc[..., None, :] - xc[..., :, None]            # d[j, k] = x_k - x_j
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    du = d[..., upper]
    return (n * n - 1) * math.pi ** 2 / 12 + np.sum(du * du - math.pi * du, axis=-1)


def C_term_closed(n: int, x):
    """The closed form valid for representatives with vanishing component sum."""
    xc = as_components(x)
    j = np.arange(1, n + 1)
    return ((n * n - 1) * math.pi ** 2 / 12 + n * np.sum(xc * xc, axis=-1)
            - 2 * math.pi * np.sum(j * xc, axis=-1))


def _principal_log_theta4(z, tau):
    th = np.asarray(theta(4, z, tau))
    if np.any(np.abs(th) < 1e-12):
        raise ZeroProximityError("theta_4 factor too close to a zero")
    return np.log(th)


def psi(X, a, b, c, d, alphas, tau, branch: str = "analytic"):
    """-i sum_k log[th4(X-a_k+i al1) th4(X-d_k+i al4) / (th4(c_k-X+i al3) th4(b_k-X+i al2))].

    ``X`` may be an array of scalar angles.  ``branch="analytic"`` uses the
    Fourier series of log(theta_4/G), the continuous branch along which the
    saddle equations hold (the G factors cancel between numerator and
    denominator); ``branch="principal"`` takes np.log factor by factor.
    """
    X = np.asarray(X, dtype=complex)[..., None]
    al1, al2, al3, al4 = alphas
    a, b, c, d = (as_components(s) for s in (a, b, c, d))
    if branch == "analytic":
        lg = log_theta4_bar
    elif branch == "principal":
        lg = _principal_log_theta4
    else:
        raise ValueError(f"unknown branch {branch!r}")
    args = [_strip(z, tau) for z in (X - a + 1j * al1, X - d + 1j * al4,
                                     c - X + 1j * al3, b - X + 1j * al2)]
    tot = lg(args[0], tau) + lg(args[1], tau) - lg(args[2], tau) - lg(args[3], tau)
    return -1j * np.sum(tot, axis=-1)


def psi_prime(X, a, b, c, d, alphas, tau):
    """Derivative of :func:`psi` in X."""
    X = np.asarray(X, dtype=complex)[..., None]
    al1, al2, al3, al4 = alphas
    a, b, c, d = (as_components(s) for s in (a, b, c, d))
    dl = dlog_theta4_bar
    args = [_strip(z, tau) for z in (X - a + 1j * al1, X - d + 1j * al4,
                                     c - X + 1j * al3, b - X + 1j * al2)]
    tot = sum(dl(z, tau) for z in args)
    return -1j * np.sum(tot, axis=-1)


# ---------------------------------------------------------------------------
# saddle points


@dataclass
class SaddleResult:
    X: Spin
    residual: float
    iterations: int
    converged: bool
    center: str = "white"
    crossing: bool = False
    homotopy_steps: int = 0


def _sum_basis(n: int) -> np.ndarray:
    B = np.zeros((n, n - 1))
    for k in range(n - 1):
        B[k, k], B[k + 1, k] = -1.0, 1.0
    return B


def _center_data(center: str, alphas: AlphaSet):
    if center == "white":
        return alphas.white, 1.0
    if center == "black":
        return alphas.black, -1.0
    raise ValueError(f"center must be 'white' or 'black', got {center!r}")


def saddle_equations(xs, outer, angles, sign: float, tau):
    """Residuals F_k = psi(x_{k+1}) - psi(x_k) - sign (2 pi - 2n (x_{k+1} - x_k))
    and their Jacobian with respect to all n components."""
    xs = np.asarray(xs, dtype=complex)
    n = xs.size
    ps = psi(xs, *outer, angles, tau)
    dp = psi_prime(xs, *outer, angles, tau)
    F = np.diff(ps) - sign * (2 * math.pi - 2 * n * np.diff(xs))
    J = np.zeros((n - 1, n), dtype=complex)
    g = dp + sign * 2 * n
    for k in range(n - 1):
        J[k, k] = -g[k]
        J[k, k + 1] = g[k + 1]
    return F, J


def _newton(xs, outer, angles, sign, tau, tol, max_iter):
    n = xs.size
    B = _sum_basis(n)

    def resid(v):
        try:
            F, J = saddle_equations(v, outer, angles, sign, tau)
        except DomainError:
            return math.inf, None, None
        return float(np.max(np.abs(F))), F, J

    r, F, J = resid(xs)
    if F is None:
        raise DomainError("initial point outside the convergence strip")
    it = 0
    while r > tol and it < max_iter:
        it += 1
        Jt = J @ B
        try:
            step = B @ np.linalg.solve(Jt, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular saddle-point Jacobian") from exc
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = xs + lam * step
            rc, Fc, Jc = resid(cand)
            if rc < r:
                break
            lam /= 2
        else:
            break
        xs, r, F, J = cand, rc, Fc, Jc
    return xs, r, it


def solve_saddle(center: str, a, b, c, d, alphas: AlphaSet, tau, initial=None,
                 tol: float = NEWTON_TOL, max_iter: int = 50, homotopy_steps: int = 4,
                 raise_on_failure: bool = True) -> SaddleResult:
    """Damped Newton solve of the white (X) or black (Y) saddle equations.

    The n-1 unknowns are moved along sum-preserving directions.  Without an
    initial guess the outer spins are deformed linearly from the constant
    configuration, where the answer is known exactly, and the root is
    followed along that path; the step is halved when Newton fails.
    """
    outer = [as_components(s) for s in (a, b, c, d)]
    n = outer[0].size
    angles, sign = _center_data(center, alphas)
    xc = constant_spin(n).components
    steps = 0
    if initial is not None:
        xs, r, it = _newton(as_components(initial).copy(), outer, angles, sign, tau, tol, max_iter)
    else:
        xs, t, dt, it, r = xc.copy(), 0.0, 1.0 / max(homotopy_steps, 1), 0, 0.0
        while t < 1.0:
            t1 = min(1.0, t + dt)
            path = [xc + t1 * (o - xc) for o in outer]
            cand, r1, it1 = _newton(xs, path, angles, sign, tau, tol, max_iter)
            it += it1
            if r1 <= tol:
                xs, t, r = cand, t1, r1
                steps += 1
                dt = min(2 * dt, 1.0 - t) if t < 1.0 else dt
            else:
                dt /= 2
                if dt < 1e-4:
                    r = r1
                    break
    converged = r <= tol
    if not converged and raise_on_failure:
        raise ConvergenceError(f"{center} saddle did not converge (residual {r:.3g})")
    crossing = bool(np.any(np.diff(xs.real) <= 0) or xs.real[0] < -math.pi / 2
                    or xs.real[-1] >= math.pi / 2)
    X = canonicalize(xs) if crossing else Spin(xs)
    return SaddleResult(X, r, it, converged, center, crossing, steps)


def saddle_residual(center: str, X, a, b, c, d, alphas: AlphaSet, tau) -> float:
    angles, sign = _center_data(center, alphas)
    outer = [as_components(s) for s in (a, b, c, d)]
    F, _ = saddle_equations(as_components(X), outer, angles, sign, tau)
    return float(np.max(np.abs(F)))


# ---------------------------------------------------------------------------
# classical star-star relation


def _spins(a, b, c, d):
    return {k: as_components(s) for k, s in zip("abcd", (a, b, c, d))}


def _both_saddles(a, b, c, d, alphas, tau, X=None, Y=None):
    if X is None:
        X = solve_saddle("white", a, b, c, d, alphas, tau).X
    if Y is None:
        Y = solve_saddle("black", a, b, c, d, alphas, tau).X
    return as_components(X), as_components(Y)


def star_star_sum(spins: dict, alphas: AlphaSet, tau):
    """Twelve Lambda terms plus C(X) - C(Y); vanishes at the saddle points."""
    n = spins["X"].size
    tot = sum(Lambda(n, sign * alphas[name], spins[l], spins[r], tau)
              for sign, name, l, r in STAR_TERMS)
    return complex(tot + C_term(n, spins["X"]) - C_term(n, spins["Y"]))


def delta_term(a, b, c, d, alphas: AlphaSet, tau):
    """Half of Lambda_{v'-v}(b,a) + Lambda_{u'-u}(c,a) - Lambda_{v'-v}(d,c) - Lambda_{u'-u}(d,b)."""
    s = _spins(a, b, c, d)
    n = s["a"].size
    return complex(0.5 * (Lambda(n, alphas.a6, s["b"], s["a"], tau)
                          + Lambda(n, alphas.a5, s["c"], s["a"], tau)
                          - Lambda(n, alphas.a6, s["d"], s["c"], tau)
                          - Lambda(n, alphas.a5, s["d"], s["b"], tau)))


def star_action_white(x, a, b, c, d, alphas: AlphaSet, tau):
    """Lambda-bar_{u-v}(c,x) + Lambda-bar_{u'-v'}(b,x) + Lambda_{u'-v}(x,a) + Lambda_{u-v'}(x,d)."""
    s = _spins(a, b, c, d)
    x = as_components(x)
    n, e = x.size, alphas.eta0
    return complex(Lambda_bar(n, e - alphas.a3, s["c"], x, tau)
                   + Lambda_bar(n, e - alphas.a2, s["b"], x, tau)
                   + Lambda(n, alphas.a1, x, s["a"], tau) + Lambda(n, alphas.a4, x, s["d"], tau))


def star_action_black(y, a, b, c, d, alphas: AlphaSet, tau):
    """Lambda-bar_{u-v}(y,b) + Lambda-bar_{u'-v'}(y,c) + Lambda_{u'-v}(d,y) + Lambda_{u-v'}(a,y)."""
    s = _spins(a, b, c, d)
    y = as_components(y)
    n, e = y.size, alphas.eta0
    return complex(Lambda_bar(n, e - alphas.a3, y, s["b"], tau)
                   + Lambda_bar(n, e - alphas.a2, y, s["c"], tau)
                   + Lambda(n, alphas.a1, s["d"], y, tau) + Lambda(n, alphas.a4, s["a"], y, tau))


def check_classical_star_star(a, b, c, d, alphas: AlphaSet, tau, X=None, Y=None,
                              tol: float = 1e-8) -> CheckReport:
    """|twelve-term sum| at the two saddle points, cross-checked against the
    difference of the two star actions corrected by Delta."""
    t0 = time.perf_counter()
    X, Y = _both_saddles(a, b, c, d, alphas, tau, X, Y)
    spins = dict(_spins(a, b, c, d), X=X, Y=Y)
    total = star_star_sum(spins, alphas, tau)
    dl = delta_term(a, b, c, d, alphas, tau)
    two_line = (star_action_white(X, a, b, c, d, alphas, tau) - dl
                - star_action_black(Y, a, b, c, d, alphas, tau) - dl)
    return CheckReport.make(
        "classical-star-star", abs(total), tol,
        params=dict(n=X.size, tau=complex(tau), alphas=alphas.as_dict(),
                    a=a, b=b, c=c, d=d),
        extra=dict(sum=total, two_line_difference=two_line,
                   forms_agree=abs(two_line - total), X=X, Y=Y),
        seconds=time.perf_counter() - t0)


def dual_constraint_residuals(X, Y, a, b, c, d, alphas: AlphaSet, tau) -> dict:
    """Differences psi(s_{k+1}) - psi(s_k) of the equations obtained by varying
    the outer spins; each should vanish at the saddle points."""
    s = _spins(a, b, c, d)
    X, Y = as_components(X), as_components(Y)
    a1, a2, a3, a4, a5, a6 = (alphas[f"a{k}"] for k in range(1, 7))
    plan = {
        "a": ((s["b"], X, Y, s["c"]), (-a6, a1, -a4, -a5)),
        "d": ((s["b"], X, Y, s["c"]), (a5, a4, -a1, a6)),
        "b": ((X, s["a"], s["d"], Y), (a2, -a6, a5, -a3)),
        "c": ((X, s["a"], s["d"], Y), (a3, -a5, a6, -a2)),
    }
    return {k: np.diff(psi(s[k], *outer, angles, tau)) for k, (outer, angles) in plan.items()}


def check_dual_constraints(X, Y, a, b, c, d, alphas: AlphaSet, tau,
                           tol: float = 1e-8) -> CheckReport:
    t0 = time.perf_counter()
    res = dual_constraint_residuals(X, Y, a, b, c, d, alphas, tau)
    worst = max(float(np.max(np.abs(v))) for v in res.values())
    return CheckReport.make(
        "dual-constraints", worst, tol,
        params=dict(n=as_components(X).size, tau=complex(tau), alphas=alphas.as_dict(),
                    a=a, b=b, c=c, d=d, X=X, Y=Y),
        extra={f"max_{k}": float(np.max(np.abs(v))) for k, v in res.items()},
        seconds=time.perf_counter() - t0)


@dataclass
class LagrangianValue:
    value: complex
    line1: complex
    line2: complex

    @property
    def difference(self) -> float:
        return abs(self.line1 - self.line2)

    @property
    def imag(self) -> float:
        return abs(self.value.imag)


def lagrangian_density(a, b, c, d, alphas: AlphaSet, tau, X=None, Y=None,
                       tol: float | None = 1e-8) -> LagrangianValue:
    """Both expressions of the star Lagrangian (white saddle minus Delta, black
    saddle plus Delta) and their mean.  With ``tol`` set, a ConsistencyError
    is raised if the two expressions differ by more than ``tol``."""
    X, Y = _both_saddles(a, b, c, d, alphas, tau, X, Y)
    dl = delta_term(a, b, c, d, alphas, tau)
    l1 = star_action_white(X, a, b, c, d, alphas, tau) - dl
    l2 = star_action_black(Y, a, b, c, d, alphas, tau) + dl
    out = LagrangianValue((l1 + l2) / 2, l1, l2)
    if tol is not None and out.difference > tol:
        from .errors import ConsistencyError
        raise ConsistencyError(f"Lagrangian expressions differ by {out.difference:.3g}")
    return out


# ---------------------------------------------------------------------------
# lattice relaxation

# offsets of the outer spins a, b, c, d of the star centred at a site; the
# same offsets serve white and black centres
NEIGHBOURS = (("a", (0, 1)), ("b", (1, 0)), ("c", (-1, 0)), ("d", (0, -1)))


@dataclass
class LatticeField:
    """Spins on an L1 x L2 patch of the square lattice; site (i, j) is white
    when i + j is even.  The outer ring is a fixed Dirichlet boundary."""

    spins: np.ndarray
    residuals: np.ndarray = None
    action: complex = complex("nan")
    star_action: complex = complex("nan")
    sweeps: int = 0
    converged: bool = False
    worst_site: tuple | None = None

    def __post_init__(self):
        self.spins = np.array(self.spins, dtype=complex)
        if self.residuals is None:
            self.residuals = np.zeros(self.shape)

    @classmethod
    def constant(cls, shape, n: int) -> "LatticeField":
        return cls(np.broadcast_to(constant_spin(n).components, (*shape, n)).copy())

    @property
    def shape(self):
        return self.spins.shape[:2]

    @property
    def n(self) -> int:
        return self.spins.shape[2]

    @property
    def fixed(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def distance(self) -> np.ndarray:
        """Lattice distance of every site from the boundary ring."""
        i, j = np.indices(self.shape)
        L1, L2 = self.shape
        return np.minimum.reduce([i, j, L1 - 1 - i, L2 - 1 - j])

    def perturb_boundary(self, rng: np.random.Generator, amplitude: float) -> "LatticeField":
        """Add independent zero-sum real noise of the given size to boundary spins."""
        out = LatticeField(self.spins.copy())
        for i, j in zip(*np.nonzero(self.fixed)):
            e = rng.uniform(-amplitude, amplitude, self.n)
            out.spins[i, j] += e - e.mean()
        return out

    def deviation_profile(self) -> dict:
        """Mean distance from the constant solution on each interior ring."""
        dev = np.max(np.abs(self.spins - constant_spin(self.n).components), axis=2)
        dist = self.distance()
        return {int(k): float(dev[dist == k].mean()) for k in range(1, int(dist.max()) + 1)}

    def site_spins(self, i, j):
        return [self.spins[i + di, j + dj] for _, (di, dj) in NEIGHBOURS]


def _site_residual(field: LatticeField, i, j, alphas, tau) -> float:
    center = "white" if (i + j) % 2 == 0 else "black"
    return saddle_residual(center, field.spins[i, j], *field.site_spins(i, j), alphas, tau)


def lattice_energy(field: LatticeField, alphas: AlphaSet, tau) -> complex:
    """Sum of Lambda over all edges of the patch plus C over all sites.

    Every edge joins a white and a black site; the edge towards the
    neighbour in direction a, b, c, d carries Lambda_{al1}(x, a),
    Lambda_{al2}(b, x), Lambda_{al3}(c, x), Lambda_{al4}(x, d) respectively.
    """
    n = field.n
    L1, L2 = field.shape
    alpha = dict(zip("abcd", alphas.white))
    tot = 0j
    for i in range(L1):
        for j in range(L2):
            x = field.spins[i, j]
            tot += C_term(n, x, check=False)
            if (i + j) % 2:
                continue
            for name, (di, dj) in NEIGHBOURS:
                k, m = i + di, j + dj
                if not (0 <= k < L1 and 0 <= m < L2):
                    continue
                y = field.spins[k, m]
                pair = (x, y) if name in "ad" else (y, x)
                tot += Lambda(n, alpha[name], *pair, tau)
    return complex(tot)


def lattice_star_action(field: LatticeField, alphas: AlphaSet, tau) -> complex:
    """Sum of the white-star Lagrangian densities over interior white sites."""
    L1, L2 = field.shape
    tot = 0j
    for i in range(1, L1 - 1):
        for j in range(1, L2 - 1):
            if (i + j) % 2 == 0:
                out = field.site_spins(i, j)
                tot += (star_action_white(field.spins[i, j], *out, alphas, tau)
                        - delta_term(*out, alphas, tau))
    return complex(tot)


def solve_lattice(field: LatticeField, alphas: AlphaSet, tau, tol: float = 1e-10,
                  max_sweeps: int = 500) -> LatticeField:
    """Red-black relaxation: each sweep re-solves every interior white site,
    then every interior black site, for its current neighbours."""
    out = LatticeField(field.spins.copy())
    L1, L2 = out.shape
    interior = [(i, j) for i in range(1, L1 - 1) for j in range(1, L2 - 1)]
    colours = ([s for s in interior if sum(s) % 2 == 0], [s for s in interior if sum(s) % 2])
    for sweep in range(1, max_sweeps + 1):
        for center, sites in zip(("white", "black"), colours):
            for i, j in sites:
                r = solve_saddle(center, *out.site_spins(i, j), alphas, tau,
                                 initial=out.spins[i, j], raise_on_failure=False)
                out.spins[i, j] = r.X.components
        res = np.zeros(out.shape)
        for i, j in interior:
            res[i, j] = _site_residual(out, i, j, alphas, tau)
        out.residuals, out.sweeps = res, sweep
        if res.max() < tol:
            out.converged = True
            break
    if not out.converged:
        out.worst_site = tuple(int(v) for v in np.unravel_index(np.argmax(out.residuals),
                                                                out.shape))
        raise ConvergenceError(f"lattice relaxation stalled at residual {out.residuals.max():.3g}"
                               f" (worst site {out.worst_site})")
    out.action = lattice_energy(out, alphas, tau)
    out.star_action = lattice_star_action(out, alphas, tau)
    return out


# ---------------------------------------------------------------------------
# two-component case: spins (-x, x)


def n2_spin(x) -> Spin:
    return Spin([-x, x])


def n2_C(x):
    """C of the spin (-x, x); continued analytically off the real axis."""
    x = np.asarray(x, dtype=complex)
    return math.pi ** 2 / 4 + 4 * x * x - 2 * math.pi * x * np.sign(x.real)


def phi(alpha, x, y, tau):
    """-i log[th4(x-y+ia) th4(x+y+ia) / (th4(x-y-ia) th4(x+y-ia))] on the analytic branch."""
    lg = lambda z: log_theta4_bar(_strip(z, tau), tau)
    return -1j * (lg(x - y + 1j * alpha) + lg(x + y + 1j * alpha)
                  - lg(x - y - 1j * alpha) - lg(x + y - 1j * alpha))


def _dphi(alpha, x, y, tau):
    dl = lambda z: dlog_theta4_bar(z, tau)
    return -1j * (dl(x - y + 1j * alpha) + dl(x + y + 1j * alpha)
                  - dl(x - y - 1j * alpha) - dl(x + y - 1j * alpha))


def n2_equation(center: str, x, a, b, c, d, alphas: AlphaSet, tau):
    """Scalar saddle equation; returns (value, derivative).

    White: phi_a1(x,a) + phi_a2(x,b) + phi_a3(x,c) + phi_a4(x,d) - 2 pi + 8x.
    Black: phi_a4(y,a) + phi_a3(y,b) + phi_a2(y,c) + phi_a1(y,d) - 2 pi + 8y.
    """
    al = alphas.white if center == "white" else alphas.white[::-1]
    f = sum(phi(A, x, o, tau) for A, o in zip(al, (a, b, c, d))) - 2 * math.pi + 8 * x
    df = sum(_dphi(A, x, o, tau) for A, o in zip(al, (a, b, c, d))) + 8
    return f, df


def n2_solve(center: str, a, b, c, d, alphas: AlphaSet, tau, tol: float = NEWTON_TOL,
             max_iter: int = 50, homotopy_steps: int = 4) -> complex:
    """Scalar Newton solve for the positive component, continued from pi/4."""
    x = complex(math.pi / 4)
    outer = np.array([a, b, c, d], dtype=complex)
    for t in np.linspace(0, 1, homotopy_steps + 1)[1:]:
        o = math.pi / 4 + t * (outer - math.pi / 4)
        for _ in range(max_iter):
            f, df = n2_equation(center, x, *o, alphas, tau)
            if abs(f) < tol:
                break
            x = x - f / df
        else:
            raise ConvergenceError(f"scalar {center} saddle did not converge")
    return complex(x)


def n2_action(xfield, alphas: AlphaSet, tau, periodic: bool = False) -> complex:
    """Sum over edges of Lambda between (-x, x) spins plus sum over sites of C."""
    x = np.asarray(xfield, dtype=complex)
    L1, L2 = x.shape
    alpha = dict(zip("abcd", alphas.white))
    tot = complex(np.sum(n2_C(x)))
    for i in range(L1):
        for j in range(L2):
            if (i + j) % 2:
                continue
            for name, (di, dj) in NEIGHBOURS:
                k, m = i + di, j + dj
                if periodic:
                    k, m = k % L1, m % L2
                elif not (0 <= k < L1 and 0 <= m < L2):
                    continue
                u, v = n2_spin(x[i, j]), n2_spin(x[k, m])
                pair = (u, v) if name in "ad" else (v, u)
                tot += complex(Lambda(2, alpha[name], *pair, tau))
    return tot


def zeta_pair(alpha, tau):
    """(zeta_4(i alpha), zeta_3(i alpha)); both real for real alpha and imaginary tau."""
    return (complex(zeta_log_deriv(4, 1j * alpha, tau)).real,
            complex(zeta_log_deriv(3, 1j * alpha, tau)).real)


def n2_quadratic_form(alphas: AlphaSet, tau, grid: int = 4):
    """Matrix of the second-order part of the two-component action around
    x = pi/4 on a periodic grid x grid patch.

    Returns (M, edge_coefficients, c) where the form is
    sum_edges (zeta4 - zeta3)(e_r - e_s)^2 + 2c sum e_s^2.
    """
    if not alphas.n2_admissible():
        raise DomainError("need real 0 < alpha_k < eta0 for k = 1..4")
    if abs(complex(tau).real) > 1e-14:
        raise DomainError("tau must be purely imaginary")
    if grid % 2:
        raise DomainError("periodic grid needs an even side")
    z = [zeta_pair(a.real, tau) for a in alphas.white]
    edge = dict(zip("abcd", (z4 - z3 for z4, z3 in z)))
    c = 2 + sum(z3 for _, z3 in z)
    N = grid * grid
    M = 2 * c * np.eye(N)
    idx = lambda i, j: (i % grid) * grid + (j % grid)
    for i in range(grid):
        for j in range(grid):
            if (i + j) % 2:
                continue
            for name, (di, dj) in NEIGHBOURS:
                r, s = idx(i, j), idx(i + di, j + dj)
                w = edge[name]
                M[r, r] += w
                M[s, s] += w
                M[r, s] -= w
                M[s, r] -= w
    return M, edge, c


def check_n2_quadratic_form(alphas: AlphaSet, tau, grid: int = 4) -> CheckReport:
    """Positivity of the form: the residual is -min(lambda_min, c, edge
    coefficients), so the check passes iff all of them are positive."""
    t0 = time.perf_counter()
    M, edge, c = n2_quadratic_form(alphas, tau, grid)
    lam = float(np.linalg.eigvalsh(M)[0])
    worst = min(lam, c, min(edge.values()))
    return CheckReport.make(
        "n2-quadratic-form", -worst, 0.0,
        params=dict(tau=complex(tau), alphas=alphas.as_dict(), grid=grid),
        extra=dict(min_eigenvalue=lam, c=c, edge=edge),
        seconds=time.perf_counter() - t0)


def zeta_inequality_gaps(alpha: float, tau):
    """Gaps of zeta4(ia) > 0 > zeta3(ia) > -2a/(pi |tau|); all positive when it holds."""
    z4, z3 = zeta_pair(alpha, tau)
    return z4, -z3, z3 + 2 * alpha / (math.pi * abs(complex(tau)))


# ---------------------------------------------------------------------------
# quasi-classical asymptotics


def quasiclassical_errors(hbar: float, tau, z=0.3, n: int = 3, alpha: float = 0.1,
                          x=None, y=None) -> dict:
    """Deviations from the leading hbar -> 0 behaviour at p = exp(-hbar).

    phi:    |hbar log Phi(z) + lambda4(z|tau)|
    kappa:  |hbar log kappa_n(alpha) + lambda4(i n alpha|n tau)|
    W:      |hbar log W_alpha(x, y) + Lambda_alpha(x, y)|
    S:      |hbar log S(x) + C(x) + hbar (n-1)/2 log hbar|
    G:      |log G(sigma) + pi^2/(12 hbar) + log(hbar)/2 - log(pi)/2|, the
            constant coming from the modular transformation of G
    """
    from .weights import WeightParams, log_weight_W, weight_S
    nomes = Nomes.from_modular(1j * hbar / math.pi, tau)
    if x is None:
        bump = 0.1 * np.sin(np.arange(1, n + 1))
        x = constant_spin(n).components + bump - bump.mean()
    if y is None:
        y = constant_spin(n).components
    x = canonicalize(as_components(x)).components
    y = canonicalize(as_components(y)).components
    out = {}
    out["phi"] = abs(hbar * complex(log_elliptic_gamma(z, nomes)) + complex(lambda4(z, tau)))
    out["kappa"] = abs(hbar * log_kappa(n, alpha, nomes) + complex(lambda4(1j * n * alpha, n * tau)))
    lw = complex(log_weight_W(WeightParams(n, nomes, alpha), x, y))
    out["W"] = abs(hbar * lw + complex(Lambda(n, alpha, x, y, tau)))
    s = complex(weight_S(n, nomes, x))
    out["S"] = abs(hbar * np.log(s) + C_term(n, x) + hbar * (n - 1) / 2 * math.log(hbar))
    g = complex(G(nomes.sigma))
    out["G"] = abs(np.log(g) + math.pi ** 2 / (12 * hbar) + 0.5 * math.log(hbar)
                   - 0.5 * math.log(math.pi))
    return out


def verify_quasiclassical_asymptotics(z=0.3, tau=1j, hbars=(0.2, 0.1, 0.05), n: int = 3,
                                      alpha: float = 0.1, x=None, y=None,
                                      tol: float = 0.9) -> CheckReport:
    """Errors of every asymptotic form must shrink along the decreasing hbar
    sequence; the residual is the largest ratio of consecutive errors."""
    t0 = time.perf_counter()
    hbars = list(hbars)
    if any(h2 >= h1 for h1, h2 in zip(hbars, hbars[1:])):
        raise DomainError("hbar sequence must decrease")
    rows = [quasiclassical_errors(h, tau, z, n, alpha, x, y) for h in hbars]
    keys = list(rows[0])
    ratios = {k: [r2[k] / r1[k] for r1, r2 in zip(rows, rows[1:])] for k in keys}
    orders = {k: [math.log(r) / math.log(h2 / h1)
                  for r, h1, h2 in zip(ratios[k], hbars, hbars[1:])] for k in keys}
    worst = max(max(v) for v in ratios.values())
    return CheckReport.make(
        "quasiclassical-asymptotics", worst, tol,
        params=dict(z=z, tau=complex(tau), hbars=hbars, n=n, alpha=alpha),
        extra=dict(errors=rows, ratios=ratios, orders=orders),
        seconds=time.perf_counter() - t0)
