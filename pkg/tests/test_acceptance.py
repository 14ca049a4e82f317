"""Acceptance criteria 1-10.

Each test records its parts through the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion followed by the parts.
Runtime budgets are part of the criteria and are asserted alongside the
numerical tolerances.
"""
import math
import time

import numpy as np
import pytest

from multispin import classical as cl
from multispin import irf, lattice
from multispin import series as se
from multispin.specfun import (Nomes, kappa_functional_residuals, log_elliptic_gamma,
                               theta_bar)
from multispin.spin_space import constant_spin, random_spin
from multispin.weights import (WeightParams, inversion_residual, verify_spiridonov_identity,
                               weight_S)

from test_series import j_oracle, monomials

BOTH_REAL = Nomes.from_pq(0.08, 0.12)
CONJ = Nomes.from_pq(0.1 + 0.05j, 0.1 - 0.05j)
GENERIC = Nomes.from_pq(0.12 + 0.04j, 0.09 - 0.03j)
REGIMES = {"both-real": BOTH_REAL, "conjugate-pair": CONJ, "generic": GENERIC}
PHYSICAL = {k: REGIMES[k] for k in ("both-real", "conjugate-pair")}


def seeded(k):
    return np.random.default_rng(1000 + k)


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def strip_points(rng, m, nomes, frac):
    """m points with |Im z| below frac times the narrower half-strip."""
    h = frac * min(math.pi * nomes.sigma.imag, math.pi * nomes.tau.imag) / 2
    return rng.uniform(-math.pi, math.pi, m) + 1j * rng.uniform(-h, h, m)


# ---------------------------------------------------------------------------
# 1. special-function identities


def test_c1_special_function_identities(criterion):
    rng = seeded(1)
    m, tol = 200, 1e-12
    worst = dict(reflection=0.0, periodicity=0.0, difference=0.0, conjugation=0.0,
                 product_vs_sum=0.0)
    with Clock() as clk:
        for name, nm in REGIMES.items():
            lg = lambda z, method="product": log_elliptic_gamma(z, nm, method=method)
            z = strip_points(rng, m, nm, 1.4)
            worst["reflection"] = max(worst["reflection"],
                                      np.max(np.abs(np.expm1(lg(z) + lg(-z)))))
            worst["periodicity"] = max(worst["periodicity"],
                                       np.max(np.abs(np.expm1(lg(z + math.pi) - lg(z)))))
            z = strip_points(rng, m, nm, 0.5)
            for s, t in ((nm.sigma, nm.tau), (nm.tau, nm.sigma)):
                h = math.pi * s / 2
                r = np.exp(lg(z - h) - lg(z + h)) / theta_bar(4, z, t) - 1
                worst["difference"] = max(worst["difference"], np.max(np.abs(r)))
            z = strip_points(rng, m, nm, 1.4)
            d = np.expm1(lg(z, "sum") - lg(z, "product"))
            worst["product_vs_sum"] = max(worst["product_vs_sum"], np.max(np.abs(d)))
            if name in PHYSICAL:
                z = strip_points(rng, m, nm, 1.4)
                r = np.expm1(np.conj(lg(z)) - lg(-np.conj(z)))
                worst["conjugation"] = max(worst["conjugation"], np.max(np.abs(r)))
    ok = True
    for k, v in worst.items():
        ok &= criterion(1, k, v < tol, f"max {v:.2e} (tol {tol:g}, {m} draws per regime)")
    ok &= criterion(1, "runtime", clk.seconds < 10, f"{clk.seconds:.2f} s (budget 10 s)")
    assert ok, worst


# ---------------------------------------------------------------------------
# 2. edge-normalization functional equations


def test_c2_kappa_functional_equations(criterion):
    rng = seeded(2)
    tol, worst = 1e-11, {}
    with Clock() as clk:
        for n in (2, 3, 4):
            w = 0.0
            names = list(REGIMES)
            for i in range(50):
                nm = REGIMES[names[i % 3]]
                # the equations have poles on Im alpha = 0; stay off that line
                im = rng.choice([-1, 1]) * rng.uniform(0.05, 0.3)
                alpha = complex(rng.uniform(-0.5, 0.5) * nm.eta.real, im)
                w = max(w, *kappa_functional_residuals(n, alpha, nm))
            worst[n] = w
    ok = True
    for n, v in worst.items():
        ok &= criterion(2, f"n={n}", v < tol, f"max {v:.2e} (tol {tol:g}, 50 draws)")
    ok &= criterion(2, "runtime", clk.seconds < 5, f"{clk.seconds:.2f} s (budget 5 s)")
    assert ok, worst


# ---------------------------------------------------------------------------
# 3. inversion relation


def test_c3_inversion(criterion):
    rng = seeded(3)
    tol, worst = 1e-12, {}
    names = list(REGIMES)
    with Clock() as clk:
        for n in (2, 3, 4):
            w = 0.0
            for i in range(100):
                nm = REGIMES[names[i % 3]]
                alpha = complex(rng.uniform(-0.5, 0.5) * nm.eta.real, rng.uniform(-0.3, 0.3))
                x, y = random_spin(rng, n), random_spin(rng, n)
                w = max(w, inversion_residual(WeightParams(n, nm, alpha), x, y))
            worst[n] = w
    ok = True
    for n, v in worst.items():
        ok &= criterion(3, f"n={n}", v < tol, f"max {v:.2e} (tol {tol:g}, 100 draws)")
    ok &= criterion(3, "runtime", clk.seconds < 5, f"{clk.seconds:.2f} s (budget 5 s)")
    assert ok, worst


# ---------------------------------------------------------------------------
# 4. integral identity


def _spiridonov_draws(rng, n, count, tol):
    names = list(PHYSICAL)
    worst = 0.0
    for i in range(count):
        nm = PHYSICAL[names[i % 2]]
        eta = nm.eta.real
        # 0 < alpha, beta and n (alpha + beta) < eta
        al, be = rng.uniform(0.1, 0.45, 2) * eta / n
        mu = rng.uniform(0, math.pi)
        rep = verify_spiridonov_identity(n, nm, complex(al), complex(be), mu,
                                         random_spin(rng, n), random_spin(rng, n), tol=tol)
        worst = max(worst, rep.residual)
    return worst


@pytest.mark.parametrize("n, count, tol, budget", [(2, 20, 1e-9, 10), (3, 10, 1e-8, 120)])
def test_c4_integral_identity(n, count, tol, budget, criterion):
    with Clock() as clk:
        worst = _spiridonov_draws(seeded(40 + n), n, count, tol)
    ok = criterion(4, f"n={n}", worst < tol, f"max {worst:.2e} (tol {tol:g}, {count} draws)")
    ok &= criterion(4, f"n={n} runtime", clk.seconds < budget,
                    f"{clk.seconds:.1f} s (budget {budget} s)")
    assert ok


# ---------------------------------------------------------------------------
# 5. star-star relation


@pytest.mark.parametrize("n, count, tol, budget, resolution", [
    (2, 20, 1e-9, 30, None),
    (3, 20, 1e-8, 300, None),
    (4, 3, 1e-6, 1800, 48),
])
def test_c5_star_star(n, count, tol, budget, resolution, criterion):
    rng = seeded(50 + n)
    names = list(PHYSICAL)
    worst = 0.0
    with Clock() as clk:
        for i in range(count):
            nm = PHYSICAL[names[i % 2]]
            rap, _ = irf.random_physical_rapidities(rng, nm.eta.real, 0.15)
            cfg = irf.StarConfiguration(*(random_spin(rng, n) for _ in range(4)), rap, n, nm)
            worst = max(worst, irf.check_star_star(cfg, resolution, tol=tol).residual)
    res = f", resolution {resolution}" if resolution else ""
    ok = criterion(5, f"n={n}", worst < tol, f"max {worst:.2e} (tol {tol:g}, {count} draws{res})")
    ok &= criterion(5, f"n={n} runtime", clk.seconds < budget,
                    f"{clk.seconds:.1f} s (budget {budget} s)")
    assert ok


# ---------------------------------------------------------------------------
# 6. low-temperature expansions


def _closed_form_worst(rng, printed):
    worst = {}
    for _ in range(10):
        a, b, c, d = (random_spin(rng, 3) for _ in range(4))
        alpha = rng.uniform(-0.1, 0.1)
        al, be, ga = rng.uniform(-0.1, 0.1), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)
        pairs = {
            "shifted W": (se.expand_weight_W("shifted", 3, alpha, a, b, D=8),
                          se.closed_form_shifted(alpha, a, b, printed=printed)),
            "plain W": (se.expand_weight_W("plain", 3, alpha, a, b, D=8),
                        se.closed_form_plain(alpha, a, b, printed=printed)),
            "S": (se.expand_weight_S(3, a, D=8), se.closed_form_S(a)),
            "IRF V": (se.expand_irf_V(3, a, b, c, d, al, be, ga, D=8),
                      se.closed_form_irf(se.pqrs_terms(a, b, c, d, al, be, ga), printed=printed)),
        }
        for k, (ser, closed) in pairs.items():
            r = max(se.compare_coefficients(ser, closed, 8).values())
            worst[k] = max(worst.get(k, 0.0), r)
    s = se.expand_kappa(3, alpha, "shifted", D=8)
    worst["kappa"] = max(se.compare_coefficients(s, se.closed_form_kappa(3, alpha), 6).values())
    return worst


def test_c6_series_corrected(criterion):
    tol = 1e-12
    with Clock() as clk:
        worst = _closed_form_worst(seeded(6), printed=False)
        jt = max(abs(se.j_integral(nn or 3, mono) - want)
                 for mono, nn, want in se.J_TABLE.values())
        jt_oracle = all(j_oracle(nn or 3, mono) == want for mono, nn, want in se.J_TABLE.values())
        vanish, vmax = 0, 0.0
        for mono in monomials(4):
            if j_oracle(3, mono) == 0:
                vanish += 1
                vmax = max(vmax, abs(se.j_integral(3, mono)))
    ok = True
    for k, v in worst.items():
        ok &= criterion(6, f"{k} (corrected)", v < tol, f"max {v:.2e}")
    ok &= criterion(6, "J table", jt < 1e-13 and jt_oracle, f"max {jt:.2e}")
    ok &= criterion(6, "vanishing J", vmax < 1e-12, f"{vanish} integrals, max |J| {vmax:.2e}")
    ok &= criterion(6, "runtime", clk.seconds < 120, f"{clk.seconds:.1f} s (budget 120 s)")
    assert ok, worst


@pytest.mark.xfail(strict=True, reason="three printed coefficients disagree with the expansion "
                                       "(see notes/decisions.md)")
def test_c6_series_printed(criterion):
    worst = _closed_form_worst(seeded(6), printed=True)
    bad = sorted(k for k, v in worst.items() if v >= 1e-12)
    ok = criterion(6, "printed coefficients", not bad,
                   "mismatch in " + ", ".join(f"{k} ({worst[k]:.2e})" for k in bad) if bad else "")
    assert ok, worst


# ---------------------------------------------------------------------------
# 7. positivity and leading correction of the IRF weight

POS_NOMES = Nomes.from_pq(0.05, 0.05)
POS_RESOLUTION = 32


@pytest.fixture(scope="module")
def positivity_grid():
    """Normalized IRF weights on the 4^4 grid of four n = 3 spins, with
    homogeneous rapidities u - v = eta/2 (all crossing angles zero)."""
    rng = seeded(7)
    nm = POS_NOMES
    eta = nm.eta.real
    rap = irf.RapidityData.homogeneous(0.55 * eta, 0.05 * eta)
    spins = [random_spin(rng, 3) for _ in range(4)]
    t0 = time.perf_counter()
    rows = []
    for a in spins:
        for b in spins:
            for c in spins:
                for d in spins:
                    cfg = irf.StarConfiguration(a, b, c, d, rap, 3, nm)
                    v = irf.irf_V(cfg, POS_RESOLUTION)
                    vn = v / math.sqrt(abs(weight_S(3, nm, b) * weight_S(3, nm, c)))
                    rows.append((cfg, complex(v), complex(vn), se.pqrs_terms(a, b, c, d, 0, 0, 0)))
    spot = [abs(irf.normalized_irf_V(r[0], 64) - r[2]) for r in rows[::85]]
    return dict(rows=rows, seconds=time.perf_counter() - t0, spot=max(spot))


def _leading_worst(grid, coefficient):
    pq = (POS_NOMES.p * POS_NOMES.q).real
    worst = 0.0
    for _, _, vn, t in grid["rows"]:
        # size of the next orders: Q at (pq)^{3/2}, then P and the (pq)^2 terms
        t4 = 1 + t.P**2 / 8 + t.R / 4 - t.S
        bound = 2 * (1 + abs(t.Q) + math.sqrt(pq) * (abs(t.P) + abs(t4))) * pq**1.5
        worst = max(worst, abs(vn - 1 - coefficient * pq * t.P) / bound)
    return worst


def test_c7_positivity(positivity_grid, criterion):
    rows = positivity_grid["rows"]
    imag = max(abs(v.imag) / abs(v) for _, v, _, _ in rows)
    low = min(v.real for _, v, _, _ in rows)
    ok = criterion(7, "real", imag < 1e-8, f"max |Im V|/|V| {imag:.2e} over {len(rows)} configs")
    ok &= criterion(7, "non-negative", low >= 0, f"min Re V {low:.4g}")
    pmin = min(t.P.real for _, _, _, t in rows)
    # the sign of P is recorded, not asserted
    criterion(7, "P over the grid (recorded)", True, f"min P {pmin:.4g}")
    ok &= criterion(7, "resolution spot check", positivity_grid["spot"] < 1e-12,
                    f"|V({POS_RESOLUTION}) - V(64)| {positivity_grid['spot']:.1e}")
    ok &= criterion(7, "runtime", positivity_grid["seconds"] < 300,
                    f"{positivity_grid['seconds']:.1f} s (budget 300 s)")
    assert ok


def test_c7_leading_correction(positivity_grid, criterion):
    w = _leading_worst(positivity_grid, 0.5)
    ok = criterion(7, "1 + pq P/2 (corrected)", w <= 1,
                   f"max remainder / bound {w:.3f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the pq coefficient is P/2, not P (see notes/decisions.md)")
def test_c7_leading_correction_printed(positivity_grid, criterion):
    w = _leading_worst(positivity_grid, 1.0)
    ok = criterion(7, "1 + pq P (printed)", w <= 1, f"max remainder / bound {w:.3f}")
    assert ok


# ---------------------------------------------------------------------------
# 8. classical limit

TAU = 1j
ETA0 = math.pi / 2


def test_c8_classical(criterion):
    rng = seeded(8)
    worst = dict(saddle=0.0, conj=0.0, cstar=0.0, dual=0.0, constant=0.0)
    with Clock() as clk:
        for n in (2, 3):
            for _ in range(20):
                al, be, ga = rng.uniform(-0.15, 0.15, 3) * np.array([ETA0, 1, 1])
                alphas = cl.AlphaSet.from_abg(TAU, al, be, ga)
                spins = [random_spin(rng, n) for _ in range(4)]
                w = cl.solve_saddle("white", *spins, alphas, TAU)
                b = cl.solve_saddle("black", *spins, alphas, TAU)
                worst["saddle"] = max(worst["saddle"], w.residual, b.residual)
                worst["conj"] = max(worst["conj"],
                                    np.max(np.abs(b.X.components - np.conj(w.X.components))))
                rep = cl.check_classical_star_star(*spins, alphas, TAU, tol=1e-8)
                worst["cstar"] = max(worst["cstar"], rep.residual)
                dual = cl.check_dual_constraints(rep.extra["X"], rep.extra["Y"], *spins, alphas, TAU)
                worst["dual"] = max(worst["dual"], dual.residual)
        for n in (2, 3, 4):
            alphas = cl.AlphaSet.from_abg(TAU, *rng.uniform(-0.15, 0.15, 3))
            xc = constant_spin(n)
            worst["constant"] = max(worst["constant"],
                                    abs(cl.lagrangian_density(xc, xc, xc, xc, alphas, TAU).value))
        qform = []
        for a1 in np.linspace(0.1, 0.9, 5) * ETA0:
            for a2 in np.linspace(0.1, 0.9, 5) * ETA0:
                qform.append(cl.check_n2_quadratic_form(
                    cl.AlphaSet.from_three(TAU, a1, a2, ETA0 - a2), TAU).passed)
        asym = cl.verify_quasiclassical_asymptotics(hbars=(0.2, 0.1, 0.05))
        errs = {k: [row[k] for row in asym.extra["errors"]] for k in ("phi", "kappa", "S")}
    ok = criterion(8, "saddle residual", worst["saddle"] < 1e-11, f"max {worst['saddle']:.2e}")
    ok &= criterion(8, "Y = conj(X)", worst["conj"] < 1e-10, f"max {worst['conj']:.2e}")
    ok &= criterion(8, "classical star-star", worst["cstar"] < 1e-8,
                    f"max {worst['cstar']:.2e} (20 draws each for n=2,3)")
    ok &= criterion(8, "dual constraints", worst["dual"] < 1e-8, f"max {worst['dual']:.2e}")
    ok &= criterion(8, "constant-solution action", worst["constant"] <= 1e-13,
                    f"max {worst['constant']:.1e}")
    ok &= criterion(8, "n=2 quadratic form positive", all(qform), f"{sum(qform)}/{len(qform)} angles")
    mono = {k: all(a > b for a, b in zip(errs[k], errs[k][1:])) for k in ("phi", "kappa", "S")}
    ok &= criterion(8, "asymptotics monotone (phi, kappa, S)", all(mono.values()),
                    ", ".join(f"{k}: {', '.join(f'{e:.1e}' for e in errs[k])}" for k in mono))
    ok &= criterion(8, "runtime", clk.seconds < 300, f"{clk.seconds:.1f} s (budget 300 s)")
    assert ok, worst


# ---------------------------------------------------------------------------
# 9. Yang-Baxter equation at n = 2

YBE_NOMES = Nomes.from_pq(0.08, 0.08)


def test_c9_ybe(criterion):
    rng = seeded(9)
    eta = YBE_NOMES.eta.real
    ok = True
    with Clock() as clk:
        for k in range(3):
            u, v, w = lattice.random_ybe_rapidities(rng, eta)
            sp = [random_spin(rng, 2) for _ in range(6)]
            res = [lattice.check_ybe_n2(u, v, w, YBE_NOMES, *sp, resolution=N).residual
                   for N in (6, 12, 24, 48)]
            dec = res[0] > res[1] > res[2]
            ok &= criterion(9, f"draw {k}", dec and res[3] < 1e-12,
                            "residuals at 6/12/24/48: " + ", ".join(f"{r:.1e}" for r in res))
        exact = lattice.check_ybe_n2(u, v, w, Nomes.from_pq(0, 0), *sp, resolution=8).residual
        ok &= criterion(9, "p = q = 0", exact < 1e-14, f"{exact:.1e}")
    ok &= criterion(9, "runtime", clk.seconds < 600, f"{clk.seconds:.1f} s")
    assert ok


# ---------------------------------------------------------------------------
# 10. boundary decay on the 8 x 8 lattice


def test_c10_boundary_decay(criterion):
    rng = seeded(10)
    with Clock() as clk:
        alphas = cl.AlphaSet.from_abg(TAU, float(rng.uniform(-0.1, 0.1)), 0.0, 0.0)
        field = cl.LatticeField.constant((8, 8), 2).perturb_boundary(rng, 0.01)
        out = cl.solve_lattice(field, alphas, TAU)
        prof = out.deviation_profile()
    vals = [prof[k] for k in sorted(prof)]
    mono = all(b < a for a, b in zip(vals, vals[1:]))
    ok = criterion(10, "converged", out.converged, f"{out.sweeps} sweeps")
    ok &= criterion(10, "monotone decay", mono,
                    "profile " + ", ".join(f"{k}: {prof[k]:.2e}" for k in sorted(prof)))
    ok &= criterion(10, "runtime", clk.seconds < 300, f"{clk.seconds:.1f} s")
    assert ok, prof
