"""Seeded random streams and the variate generators used by the samplers.

All gamma-type families use the shape/rate parameterization.  The Polya-gamma
sampler combines Devroye's exact alternating-series method for unit shape
with a truncated gamma-series representation for the fractional remainder of
a real shape, so that kernel-weighted exponents ``b in (0, 1)`` are handled.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr

from .exceptions import DomainError

__all__ = [
    "rng_stream",
    "spawn",
    "normal",
    "gamma",
    "inverse_gamma",
    "beta",
    "bernoulli",
    "sample_standard",
    "polya_gamma",
    "pg_mean",
    "pg_var",
]


def rng_stream(seed: int, stream: int = 0, *substreams: int) -> np.random.Generator:
    """Return a generator for the stream ``(seed, stream, *substreams)``.

    Identical keys give identical sequences regardless of how many other
    streams exist or which worker consumes them.
    """
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    key = (int(stream),) + tuple(int(s) for s in substreams)
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def spawn(rng: np.random.Generator, n: int) -> list:
    """Split ``rng`` into ``n`` independent child generators."""
    return list(rng.spawn(n))


def _check_positive(name, value):
    value = np.asarray(value, dtype=float)
    if np.any(~(value > 0)):
        raise DomainError(f"{name} must be positive")
    return value


def normal(rng, mean=0.0, var=1.0, size=None):
    """Draw from N(mean, var); ``var`` is a variance and may be 0."""
    var = np.asarray(var, dtype=float)
    if np.any(~(var >= 0)):
        raise DomainError("normal variance must be nonnegative")
    return rng.normal(mean, np.sqrt(var), size)


def gamma(rng, shape, rate, size=None):
    """Draw from Ga(shape, rate) with mean ``shape / rate``."""
    shape = _check_positive("gamma shape", shape)
    rate = _check_positive("gamma rate", rate)
    return rng.standard_gamma(shape, size) / rate


def inverse_gamma(rng, shape, rate, size=None):
    """Draw from IG(shape, rate), the law of ``1 / Ga(shape, rate)``."""
    shape = _check_positive("inverse-gamma shape", shape)
    rate = _check_positive("inverse-gamma rate", rate)
    return rate / rng.standard_gamma(shape, size)


def beta(rng, a, b, size=None):
    a = _check_positive("beta a", a)
    b = _check_positive("beta b", b)
    return rng.beta(a, b, size)


def bernoulli(rng, p, size=None):
    p = np.asarray(p, dtype=float)
    if np.any(~((p >= 0) & (p <= 1))):
        raise DomainError("bernoulli probability must lie in [0, 1]")
    if size is None:
        size = p.shape
    return (rng.random(size) < p).astype(np.int8)


_FAMILIES = {
    "normal": normal,
    "gamma": gamma,
    "inverse_gamma": inverse_gamma,
    "beta": beta,
    "bernoulli": bernoulli,
}


def sample_standard(family: str, rng, *params, size=None):
    """Dispatch to one of the standard families by name."""
    try:
        fn = _FAMILIES[family]
    except KeyError:
        raise DomainError(f"unknown family {family!r}") from None
    return fn(rng, *params, size=size)


# --------------------------------------------------------------------------
# Polya-gamma
# --------------------------------------------------------------------------

_TRUNC = 0.64
_PI2 = np.pi ** 2


def pg_mean(b, c):
    """E[PG(b, c)] = b / (2c) * tanh(c / 2), with limit b / 4 at c = 0."""
    b = np.asarray(b, dtype=float)
    half = np.abs(np.asarray(c, dtype=float)) / 2.0
    small = half < 1e-8
    safe = np.where(small, 1.0, half)
    return b / 4.0 * np.where(small, 1.0, np.tanh(safe) / safe)


def _var_factor(c):
    # (sinh c - c) / (c^3 cosh^2(c/2)), written to avoid overflow and cancellation
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 0.05
    cs = np.where(small, 1.0, c)
    sech = 2.0 * np.exp(-cs / 2.0) / (1.0 + np.exp(-cs))
    big = (2.0 * np.tanh(cs / 2.0) - cs * sech ** 2) / cs ** 3
    c2 = c * c
    taylor = 1.0 / 6.0 - c2 / 30.0 + 17.0 * c2 * c2 / 3360.0
    return np.where(small, taylor, big)


def pg_var(b, c):
    """Var[PG(b, c)] = b / (4c^3) (sinh c - c) / cosh^2(c/2); b / 24 at c = 0."""
    return np.asarray(b, dtype=float) / 4.0 * _var_factor(c)


def _series_terms(rel_tol=1e-9, cap=200):
    # smallest K whose omitted terms carry <= rel_tol of the third cumulant
    k = np.arange(1, 100001) - 0.5
    w = k ** -6.0
    tail = np.cumsum(w[::-1])[::-1]
    total = tail[0]
    rel = np.append(tail[1:], 0.0) / total
    return int(min(cap, np.argmax(rel <= rel_tol) + 1))


SERIES_TERMS = _series_terms()


def _pg_series(rng, b, c, n_terms=SERIES_TERMS):
    """PG(b, c) through its gamma-series representation.

    The first ``n_terms`` summands are drawn exactly; the remainder is replaced
    by one gamma variate matching its mean and variance, so the first two
    moments are exact and the omitted higher cumulants are negligible.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    kh = np.arange(1, n_terms + 1) - 0.5
    a2 = (c / (2.0 * np.pi)) ** 2
    denom = kh[None, :] ** 2 + a2[:, None]
    g = rng.standard_gamma(np.broadcast_to(b[:, None], denom.shape))
    head = (g / denom).sum(axis=1) / (2.0 * _PI2)

    s1_head = (1.0 / denom).sum(axis=1)
    s2_head = (1.0 / denom ** 2).sum(axis=1)
    # closed forms of sum 1/d_k and sum 1/d_k^2 over all k
    s1_all = 2.0 * _PI2 * pg_mean(1.0, c)
    s2_all = 4.0 * _PI2 * _PI2 * pg_var(1.0, c)
    mean_tail = b * np.maximum(s1_all - s1_head, 0.0) / (2.0 * _PI2)
    var_tail = b * np.maximum(s2_all - s2_head, 1e-300) / (4.0 * _PI2 * _PI2)
    shape = mean_tail ** 2 / var_tail
    rate = mean_tail / var_tail
    tail = rng.standard_gamma(shape) / rate
    return head + tail


def _a_coef(n, x):
    # n-th term of the alternating series for the J*(1) density
    k = (n + 0.5) * np.pi
    out = np.zeros_like(x)
    right = x > _TRUNC
    out[right] = k * np.exp(-0.5 * k * k * x[right])
    left = (~right) & (x > 0)
    xl = x[left]
    out[left] = np.exp(
        -1.5 * (np.log(0.5 * np.pi) + np.log(xl)) + np.log(k)
        - 2.0 * (n + 0.5) ** 2 / xl
    )
    return out


def _mass_texpon(z):
    t = _TRUNC
    fz = _PI2 / 8.0 + 0.5 * z * z
    b = np.sqrt(1.0 / t) * (t * z - 1.0)
    a = -np.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = np.log(fz) + fz * t
    xb = x0 - z + log_ndtr(b)
    xa = x0 + z + log_ndtr(a)
    qdivp = 4.0 / np.pi * (np.exp(xb) + np.exp(xa))
    return 1.0 / (1.0 + qdivp)


def _rtigauss(rng, z):
    """Inverse-Gaussian(1/z, 1) truncated to (0, 0.64), vectorized over z."""
    t = _TRUNC
    out = np.empty_like(z)
    big_mu = z < 1.0 / t
    idx = np.flatnonzero(big_mu)
    while idx.size:
        e1 = rng.standard_exponential(idx.size)
        e2 = rng.standard_exponential(idx.size)
        bad = e1 * e1 > 2.0 * e2 / t
        while np.any(bad):
            nb = int(bad.sum())
            e1[bad] = rng.standard_exponential(nb)
            e2[bad] = rng.standard_exponential(nb)
            bad = e1 * e1 > 2.0 * e2 / t
        x = t / (1.0 + e1 * t) ** 2
        alpha = np.exp(-0.5 * z[idx] ** 2 * x)
        ok = rng.random(idx.size) <= alpha
        out[idx[ok]] = x[ok]
        idx = idx[~ok]
    idx = np.flatnonzero(~big_mu)
    while idx.size:
        mu = 1.0 / z[idx]
        y = rng.standard_normal(idx.size) ** 2
        mu_y = mu * y
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * np.sqrt(4.0 * mu_y + mu_y * mu_y)
        flip = rng.random(idx.size) > mu / (mu + x)
        x[flip] = mu[flip] ** 2 / x[flip]
        ok = x < t
        out[idx[ok]] = x[ok]
        idx = idx[~ok]
    return out


def _pg_devroye(rng, c):
    """Exact PG(1, c) draws by Devroye's alternating-series rejection."""
    z = 0.5 * np.abs(np.asarray(c, dtype=float))
    out = np.empty_like(z)
    pending = np.arange(z.size)
    while pending.size:
        zp = z[pending]
        fz = _PI2 / 8.0 + 0.5 * zp * zp
        use_exp = rng.random(pending.size) < _mass_texpon(zp)
        x = np.empty_like(zp)
        ne = int(use_exp.sum())
        x[use_exp] = _TRUNC + rng.standard_exponential(ne) / fz[use_exp]
        if ne < pending.size:
            x[~use_exp] = _rtigauss(rng, zp[~use_exp])
        s = _a_coef(0, x)
        y = rng.random(pending.size) * s
        undecided = np.ones(pending.size, dtype=bool)
        accepted = np.zeros(pending.size, dtype=bool)
        n = 0
        while np.any(undecided):
            n += 1
            u = np.flatnonzero(undecided)
            if n % 2 == 1:
                s[u] -= _a_coef(n, x[u])
                hit = y[u] <= s[u]
                accepted[u[hit]] = True
                undecided[u[hit]] = False
            else:
                s[u] += _a_coef(n, x[u])
                miss = y[u] > s[u]
                undecided[u[miss]] = False
        out[pending[accepted]] = 0.25 * x[accepted]
        pending = pending[~accepted]
    return out


def polya_gamma(rng, b, c=0.0, size=None):
    """Draw PG(b, c) variates for real ``b > 0``.

    ``b`` and ``c`` broadcast against each other (and ``size`` if given).
    The integer part of ``b`` is covered by exact unit-shape draws and the
    fractional part by the moment-corrected gamma series.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(~(b > 0)):
        raise DomainError("Polya-gamma shape b must be positive")
    shape = np.broadcast_shapes(b.shape, c.shape) if size is None else size
    bb = np.broadcast_to(b, shape).ravel()
    cc = np.broadcast_to(c, shape).ravel()
    whole = np.floor(bb + 1e-12)
    frac = bb - whole
    frac[frac < 1e-12] = 0.0
    out = np.zeros(bb.shape)
    for j in range(1, int(whole.max(initial=0)) + 1):
        idx = np.flatnonzero(whole >= j)
        out[idx] += _pg_devroye(rng, cc[idx])
    idx = np.flatnonzero(frac > 0)
    if idx.size:
        out[idx] += _pg_series(rng, frac[idx], cc[idx])
    if size is None and np.ndim(out.reshape(shape)) == 0:
        return float(out[0])
    return out.reshape(shape)
