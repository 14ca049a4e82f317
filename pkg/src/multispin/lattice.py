"""Box R-matrix kernel, small-lattice partition functions and a direct
Yang-Baxter check for two-component spins."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .report import CheckReport
from .specfun import Nomes
from .spin_space import DEFAULT_RESOLUTION, as_components, torus_nodes
from .weights import WeightParams, weight_W, weight_Wbar


@dataclass(frozen=True)
class BoxKernel:
    """Rapidity pairs u = (u, u') and v = (v, v') of one box."""

    u: tuple
    v: tuple
    n: int
    nomes: Nomes

    def differences(self) -> dict:
        (u, u2), (v, v2) = self.u, self.v
        return {"u-v": u - v, "u'-v'": u2 - v2, "u'-v": u2 - v, "u-v'": u - v2}

    def check_margins(self):
        eta = self.nomes.eta.real
        for k, d in self.differences().items():
            if not 0 < complex(d).real < eta:
                raise DomainError(f"Re({k}) = {complex(d).real:.4g} outside (0, {eta:.4g})")

    def as_dict(self):
        return {"u": list(self.u), "v": list(self.v), "n": self.n}


def r_matrix(box: BoxKernel, x, y, x2, y2):
    """<x, y | R | x', y'> = Wbar_{u-v}(y, x') Wbar_{u'-v'}(y', x) W_{u'-v}(x', y') W_{u-v'}(x, y).

    Spins may carry leading batch axes, which broadcast.
    """
    n, nomes = box.n, box.nomes
    d = box.differences()
    wp = lambda a: WeightParams(n, nomes, a)
    return (weight_Wbar(wp(d["u-v"]), y, x2) * weight_Wbar(wp(d["u'-v'"]), y2, x)
            * weight_W(wp(d["u'-v"]), x2, y2) * weight_W(wp(d["u-v'"]), x, y))


def _grid(n: int, resolution: int):
    nodes = torus_nodes(n, resolution)
    return nodes, (math.pi / resolution) ** (n - 1)


def partition_function_row(boxes, left, right, bottoms, tops, resolution: int | None = None,
                           order: str = "left") -> complex:
    """Partition function of a horizontal row of boxes with fixed boundary.

    Box k has corners (x_k, bottoms[k], x_{k+1}, tops[k]); x_0 = left and
    x_m = right are fixed, the m-1 shared corners are integrated over.  The
    row is contracted as a product of transfer matrices, from the left or
    from the right end.
    """
    m = len(boxes)
    if not (len(bottoms) == len(tops) == m) or m < 1:
        raise DomainError("need one bottom and one top spin per box")
    n = boxes[0].n
    if m == 1:
        return complex(r_matrix(boxes[0], left, bottoms[0], right, tops[0]))
    N = resolution or DEFAULT_RESOLUTION.get(n, 32)
    nodes, w = _grid(n, N)
    left, right = as_components(left), as_components(right)
    first = r_matrix(boxes[0], left, bottoms[0], nodes, tops[0]) * w
    last = r_matrix(boxes[-1], nodes, bottoms[-1], right, tops[-1])
    mids = [r_matrix(bx, nodes[:, None, :], bt, nodes[None, :, :], tp) * w
            for bx, bt, tp in zip(boxes[1:-1], bottoms[1:-1], tops[1:-1])]
    if order == "left":
        vec = first
        for T in mids:
            vec = vec @ T
        return complex(vec @ last)
    if order == "right":
        vec = last
        for T in reversed(mids):
            vec = T @ vec
        return complex(first @ vec)
    raise ValueError("order must be 'left' or 'right'")


def random_ybe_rapidities(rng: np.random.Generator, eta: float, margin: float = 0.15):
    """Rapidity pairs u, v, w = (r + i s, r - i s) for the Yang-Baxter check.

    The real parts decrease with gaps of at least ``margin * eta`` so all
    three box kernels stay inside their margins and no pole of the integrand
    approaches the real torus.
    """
    g1, g2 = rng.uniform(margin, 0.5 - margin / 2, 2) * eta
    lo = margin / 2 * eta
    r3 = rng.uniform(lo, eta - lo - g1 - g2)
    re = (r3 + g1 + g2, r3 + g2, r3)
    im = rng.uniform(-0.1, 0.1, 3)
    return tuple((complex(r, i), complex(r, -i)) for r, i in zip(re, im))


def _ybe_sides(u, v, w, n, nomes, x, y, z, x2, y2, z2, resolution):
    nodes, wt = _grid(n, resolution)
    P, Q = nodes[:, None, :], nodes[None, :, :]
    Ruv, Ruw, Rvw = (BoxKernel(a, b, n, nomes) for a, b in ((u, v), (u, w), (v, w)))
    # left: R_uv(x,y|x',y') R_uw(x',z|x'',z') R_vw(y',z'|y'',z'')
    A = r_matrix(Ruv, x, y, P, Q)          # [x', y']
    B = r_matrix(Ruw, P, z, x2, Q)         # [x', z']
    C = r_matrix(Rvw, P, Q, y2, z2)        # [y', z']
    lhs = np.einsum("ab,ac,bc->", A, B, C) * wt ** 3
    # right: R_vw(y,z|y',z') R_uw(x,z'|x',z'') R_uv(x',y'|x'',y'')
    D = r_matrix(Rvw, y, z, P, Q)          # [y', z']
    E = r_matrix(Ruw, x, Q, P, z2)         # [x', z']
    F = r_matrix(Ruv, P, Q, x2, y2)        # [x', y']
    rhs = np.einsum("bc,ac,ab->", D, E, F) * wt ** 3
    return complex(lhs), complex(rhs)


def check_ybe_n2(u, v, w, nomes: Nomes, x, y, z, x2, y2, z2, resolution: int = 48,
                 tol: float = 1e-6) -> CheckReport:
    """Both sides of the integral Yang-Baxter equation for n = 2.

    Each kernel depends on only two of the three integration spins, so the
    triple sum is a contraction of three resolution x resolution tables.
    The same pass at half resolution is recorded to show convergence.
    """
    t0 = time.perf_counter()
    n = 2
    for a, b in ((u, v), (u, w), (v, w)):
        BoxKernel(a, b, n, nomes).check_margins()
    spins = [as_components(s) for s in (x, y, z, x2, y2, z2)]
    if any(s.shape[-1] != 2 for s in spins):
        raise DomainError("the direct Yang-Baxter check is for n = 2 only")
    lhs, rhs = _ybe_sides(u, v, w, n, nomes, *spins, resolution)
    resid = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    coarse = None
    if resolution % 2 == 0 and resolution >= 4:
        cl, cr = _ybe_sides(u, v, w, n, nomes, *spins, resolution // 2)
        coarse = abs(cl - cr) / max(abs(cl), abs(cr), 1e-300)
    return CheckReport.make(
        "ybe-n2", resid, tol,
        params=dict(u=list(u), v=list(v), w=list(w), nomes=nomes,
                    spins=[s.tolist() for s in spins], resolution=resolution),
        extra=dict(lhs=lhs, rhs=rhs, half_resolution_residual=coarse),
        seconds=time.perf_counter() - t0)
