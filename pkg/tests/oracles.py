"""Independent reference implementations used by the tests."""
import mpmath as mp

mp.mp.dps = 30


def mp_gamma(z, p, q, terms=60):
    """Direct double product, independent of the library's truncation logic."""
    z, p, q = mp.mpc(z), mp.mpc(p), mp.mpc(q)
    out = mp.mpf(1)
    e, ei = mp.exp(2j * z), mp.exp(-2j * z)
    for j in range(terms):
        for k in range(terms):
            w = q ** (2 * j + 1) * p ** (2 * k + 1)
            if abs(w) < mp.mpf(10) ** -32:
                break
            out *= (1 - e * w) / (1 - ei * w)
    return complex(out)


def mp_kappa(n, alpha, p, q, K=400):
    p, q, alpha = mp.mpc(p), mp.mpc(q), mp.mpc(alpha)
    s = mp.mpf(0)
    for k in list(range(1, K)) + list(range(-K + 1, 0)):
        t = (mp.exp(2 * n * k * alpha) / (k * (p**k - p**-k) * (q**k - q**-k))
             * (p**k * q**k - p**-k * q**-k) / (p**(n * k) * q**(n * k) - p**(-n * k) * q**(-n * k)))
        s += t
    return complex(mp.exp(s))
