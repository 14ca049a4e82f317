"""The multi-component spin domain: canonical representatives, torus
quadrature over the measure dx_1...dx_{n-1}, and power sums."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError

SUM_TOL = 1e-12
DEFAULT_RESOLUTION = {2: 64, 3: 64, 4: 48}


@dataclass(frozen=True)
class Spin:
    """An n-vector of angles whose sum vanishes modulo pi.

    Components may be complex (classical continuation).  ``tie`` records
    that two real parts coincided when the spin was canonicalised.
    """

    components: np.ndarray
    tie: bool = field(default=False, compare=False)

    def __post_init__(self):
        c = np.array(self.components, dtype=complex).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def n(self) -> int:
        return self.components.size

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return self.n

    def conj(self) -> "Spin":
        return Spin(self.components.conj(), self.tie)

    def __neg__(self) -> "Spin":
        return Spin(-self.components, self.tie)

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.components.imag) < 1e-14))

    def tolist(self):
        return [[v.real, v.imag] if v.imag else v.real for v in self.components]


def constant_spin(n: int) -> Spin:
    """The uniformly spaced vector x_j = (pi/n)(j - (n+1)/2)."""
    j = np.arange(1, n + 1)
    return Spin(math.pi / n * (j - (n + 1) / 2))


def sum_defect(x) -> float:
    """Distance of sum(x) from the lattice pi*Z (imaginary part counted fully)."""
    s = complex(np.sum(np.asarray(x, dtype=complex)))
    r = s.real / math.pi
    return math.hypot(math.pi * (r - round(r)), s.imag)


def canonicalize(raw, tol: float = SUM_TOL) -> Spin:
    """Shift components by multiples of pi into [-pi/2, pi/2) and sort by real part."""
    x = np.array(raw, dtype=complex).reshape(-1)
    if x.size < 2:
        raise DomainError("a spin needs at least two components")
    if sum_defect(x) > tol:
        raise DomainError(f"component sum is not 0 mod pi (defect {sum_defect(x):.3g})")
    shift = np.floor((x.real + math.pi / 2) / math.pi)
    x = x - math.pi * shift
    # guard the right end against round-off
    x = np.where(x.real >= math.pi / 2, x - math.pi, x)
    order = np.argsort(x.real, kind="stable")
    x = x[order]
    tie = bool(np.any(np.diff(x.real) == 0))
    if sum_defect(x) > tol:
        raise DomainError("sum constraint lost after reduction")
    return Spin(x, tie)


def as_components(x) -> np.ndarray:
    if isinstance(x, Spin):
        return x.components
    return np.asarray(x, dtype=complex)


def power_sums(x, m: int) -> np.ndarray:
    """Power sums X_k = sum_j exp(2ik x_j) for k = 1..m.

    ``x`` may be a Spin or an array with the component axis last; the result
    has shape ``(..., m)``.
    """
    c = as_components(x)
    k = np.arange(1, m + 1)
    return np.sum(np.exp(2j * c[..., None, :] * k[:, None]), axis=-1)


def vandermonde(x) -> np.ndarray:
    """prod_{j<k} (2 sin(x_j - x_k))^2, with the component axis last."""
    c = as_components(x)
    n = c.shape[-1]
    out = np.ones(c.shape[:-1], dtype=complex)
    for j, k in itertools.combinations(range(n), 2):
        out = out * (2 * np.sin(c[..., j] - c[..., k])) ** 2
    return out


def vandermonde_density(x) -> np.ndarray:
    """The Vandermonde density normalised to unit mass over the torus."""
    c = as_components(x)
    n = c.shape[-1]
    return vandermonde(c) / (math.pi ** (n - 1) * math.factorial(n))


@dataclass
class QuadratureResult:
    value: complex
    coarse: complex | None
    resolution: int

    @property
    def error(self) -> float:
        """|fine - coarse|, where coarse uses every other node (resolution/2)."""
        if self.coarse is None:
            return math.nan
        return abs(self.value - self.coarse)

    @property
    def rel_error(self) -> float:
        return self.error / max(abs(self.value), 1e-300)


def torus_nodes(n: int, resolution: int, offset: float = 0.0) -> np.ndarray:
    """All quadrature nodes as an array of shape (resolution^(n-1), n)."""
    h = math.pi / resolution
    grid = (np.arange(resolution) + offset) * h
    free = np.stack(np.meshgrid(*([grid] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    return np.concatenate([free, -free.sum(axis=1, keepdims=True)], axis=1)


def torus_integrate(f, n: int, resolution: int | None = None, tol: float | None = None,
                    chunk: int = 4096) -> QuadratureResult:
    """Equal-weight product rule over [0, pi)^(n-1) with x_n = -sum of the others.

    ``f`` maps an array of nodes of shape (m, n) to m values.  When the
    resolution is even the same pass also sums the half-resolution subgrid,
    giving a free doubling-based error indicator.  With ``tol`` set, a
    ConvergenceError is raised when that indicator exceeds ``tol`` relative
    to the result.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    N = resolution or DEFAULT_RESOLUTION.get(n, 32)
    nodes = torus_nodes(n, N)
    even = np.all(np.round(nodes[:, :-1] * N / math.pi).astype(int) % 2 == 0, axis=1)
    fine, coarse = [], []
    for s in range(0, nodes.shape[0], chunk):
        vals = np.asarray(f(nodes[s:s + chunk]), dtype=complex).reshape(-1)
        fine.append(np.sum(vals))
        coarse.append(np.sum(vals[even[s:s + chunk]]))
    w = (math.pi / N) ** (n - 1)
    value = complex(np.sum(fine)) * w
    sub = complex(np.sum(coarse)) * w * 2 ** (n - 1) if N % 2 == 0 else None
    res = QuadratureResult(value, sub, N)
    if tol is not None and sub is not None and res.rel_error > tol:
        raise ConvergenceError(
            f"quadrature indicator {res.rel_error:.3g} exceeds {tol:.3g} at resolution {N}")
    return res


def random_spin(rng: np.random.Generator, n: int) -> Spin:
    """Uniform draw of n-1 free angles, closed by the sum rule, canonicalised."""
    free = rng.uniform(0, math.pi, n - 1)
    return canonicalize(np.append(free, -free.sum()))
