"""Independent reference computations for the test suite.

Nothing here imports the sampler code: the log joint densities are written
from the model definition and conditionals are recovered by brute-force
quadrature on a 2001-point grid.
"""

import numpy as np
from scipy.special import gammaln

GRID = 2001


# -- model pieces -------------------------------------------------------------------

def kernel(x, c, h, kind="triangular"):
    t = np.abs(x - c) / h
    return np.clip(1 - t, 0, None) if kind == "triangular" else (t <= 1).astype(float)


def design(x, c, q=1):
    d = x - c
    cols = [np.ones_like(d)]
    for j in range(1, q + 1):
        cols += [np.minimum(d, 0) ** j, np.maximum(d, 0) ** j]
    return np.column_stack(cols)


def _ig_logpdf(x, a, b):
    return a * np.log(b) - gammaln(a) - (a + 1) * np.log(x) - b / x


def _gamma_logpdf(x, a, b):
    return a * np.log(b) - gammaln(a) + (a - 1) * np.log(x) - b * x


def _beta_logpdf(x, a, b):
    return (gammaln(a + b) - gammaln(a) - gammaln(b)
            + (a - 1) * np.log(x) + (b - 1) * np.log1p(-x))


def _norm_logpdf(x, m, v):
    return -0.5 * np.log(2 * np.pi * v) - 0.5 * (x - m) ** 2 / v


class Toy:
    """A frozen state of the hierarchical model on a tiny grouped data set.

    Attributes are plain arrays so that any single coordinate can be set to
    a grid value and the log joint re-evaluated.
    """

    def __init__(self, y, x, g, c, h, hp, state, kind="triangular", q=1):
        self.y, self.x, self.g = np.asarray(y, float), np.asarray(x, float), np.asarray(g)
        self.c, self.h, self.hp = c, np.asarray(h, float), hp
        self.w = (self.x >= c).astype(float)
        self.k = kernel(self.x, c, self.h[self.g], kind)
        self.z = design(self.x, c, q)
        self.s = {key: np.array(val, dtype=float) for key, val in state.items()}

    def mu(self, s):
        return s["tau"][self.g] * self.w + np.einsum("ij,ij->i", self.z, s["beta"][self.g])

    def log_prior(self, s):
        hp = self.hp
        sp = s["s"]
        lp = np.sum(_norm_logpdf(s["tau"], (1 - sp) * s["m_tau"], hp["epsilon"] ** sp * s["psi_tau"]))
        lp += np.sum(_norm_logpdf(s["beta"], s["m_beta"][None, :], s["psi_beta"][None, :]))
        lp += _ig_logpdf(s["psi_tau"], hp["a_psi"], hp["b_psi"])
        lp += np.sum(_ig_logpdf(s["psi_beta"], hp["a_psi"], hp["b_psi"]))
        lp += _norm_logpdf(s["m_tau"], hp["a_m"], hp["b_m"])
        lp += np.sum(_norm_logpdf(s["m_beta"], hp["a_m"], hp["b_m"]))
        lp += np.sum(sp * np.log(s["pi"]) + (1 - sp) * np.log1p(-s["pi"]))
        lp += _beta_logpdf(s["pi"], hp["a_pi"], hp["b_pi"])
        return lp

    def log_joint_continuous(self, s):
        """Log joint of the robust normal pseudo-model (u and r included)."""
        hp = self.hp
        e = self.y - self.mu(s)
        prec = s["omega"] * s["u"]
        ll = np.sum(self.k * (0.5 * np.log(prec) - 0.5 * prec * e * e))
        lp = self.log_prior(s) + _gamma_logpdf(s["omega"], hp["a_omega"], hp["b_omega"])
        act = self.k > 0
        r = s["r"]
        lp += np.sum((r * np.log(s["w"]) + (1 - r) * np.log1p(-s["w"]))[act])
        lp += np.sum(np.where(r > 0, _gamma_logpdf(s["u"], hp["nu"], hp["nu"]), 0.0)[act])
        lp += _beta_logpdf(s["w"], hp["a_w"], hp["b_w"])
        return ll + lp

    def log_joint_binary(self, s):
        """Log joint of the PG-augmented logistic pseudo-model, omega fixed.

        Zero-weight observations carry PG(0, .), a point mass at zero.
        """
        mu = self.mu(s)
        kappa = self.k * (self.y - 0.5)
        om = np.where(self.k > 0, s["omega_pg"], 0.0)
        ll = np.sum(kappa * mu - 0.5 * om * mu * mu)
        return ll + self.log_prior(s)


# -- quadrature ---------------------------------------------------------------------

def _moments(t, logf, transform, fn):
    logf = logf - logf.max()
    f = np.exp(logf)
    theta = fn(transform(t))
    z = np.trapezoid(f, t)
    m = np.trapezoid(f * theta, t) / z
    v = np.trapezoid(f * (theta - m) ** 2, t) / z
    return m, v


def grid_moments(logdens, lo, hi, scale="linear", n=GRID, refine=True, fn=None):
    """Mean and variance of the density ``exp(logdens(theta))`` by quadrature.

    ``scale`` picks the integration variable: ``"linear"`` (theta itself),
    ``"log"`` (theta > 0) or ``"logit"`` (theta in (0, 1)); the Jacobian is
    included.  With ``refine`` the grid is re-centred on +-12 sd of a first
    pass so the 2001 points resolve the bulk.  ``fn`` (optional) returns the
    moments of ``fn(theta)`` instead of ``theta``.
    """
    fn = (lambda v: v) if fn is None else fn
    if scale == "linear":
        fwd, inv, logjac = (lambda v: v), (lambda t: t), (lambda t: 0.0 * t)
    elif scale == "log":
        fwd, inv, logjac = np.log, np.exp, (lambda t: t)
    elif scale == "logit":
        fwd = lambda v: np.log(v) - np.log1p(-v)  # noqa: E731
        inv = lambda t: 1 / (1 + np.exp(-t))  # noqa: E731
        logjac = lambda t: -np.logaddexp(0, -t) - np.logaddexp(0, t)  # noqa: E731
    else:
        raise ValueError(scale)

    def run(a, b):
        t = np.linspace(a, b, n)
        logf = np.array([logdens(inv(ti)) for ti in t], dtype=float).reshape(-1) + logjac(t)
        return t, logf

    t, logf = run(fwd(lo), fwd(hi))
    if refine:
        f = np.exp(logf - logf.max())
        z = np.trapezoid(f, t)
        mt = np.trapezoid(f * t, t) / z
        st = np.sqrt(np.trapezoid(f * (t - mt) ** 2, t) / z)
        a, b = max(t[0], mt - 12 * st), min(t[-1], mt + 12 * st)
        t, logf = run(a, b)
    return _moments(t, logf, inv, fn)


def log_integral(logdens, lo, hi, n=GRID):
    """log of the integral of ``exp(logdens(u))`` over u > 0 (log-scale grid)."""
    t = np.linspace(np.log(lo), np.log(hi), n)
    logf = np.array([logdens(np.exp(ti)) for ti in t], dtype=float).reshape(-1) + t
    top = logf.max()
    return top + np.log(np.trapezoid(np.exp(logf - top), t))


def coordinate(state, key, index=None):
    """Return a function setting one coordinate of a copied state."""
    def setter(value):
        s = {k: np.array(v, dtype=float, copy=True) for k, v in state.items()}
        if index is None:
            s[key] = np.array(value, dtype=float)
        else:
            s[key][index] = value
        return s
    return setter


# -- Polya-gamma density --------------------------------------------------------------

def pg_density(x, b, c=0.0, n_terms=200):
    """Density of PG(b, c) from its alternating series (x > 0)."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.reshape(-1)
    n = np.arange(n_terms)[:, None]
    logcoef = (b - 1) * np.log(2) - gammaln(b) + gammaln(n + b) - gammaln(n + 1)
    terms = np.exp(logcoef) * (2 * n + b) / np.sqrt(2 * np.pi * x ** 3) \
        * np.exp(-((2 * n + b) ** 2) / (8 * x))
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    # deep in the right tail the alternating sum is pure rounding noise
    f0 = np.sum(sign * terms, axis=0)
    f0 = np.where(f0 > 1e-13 * terms.max(axis=0, initial=0.0), f0, 0.0)
    return (np.cosh(c / 2) ** b * np.exp(-c * c * x / 2) * f0).reshape(shape)


# -- baseline ----------------------------------------------------------------------

def normal_equation_wls(y, x, c, h, kind="triangular", q=1):
    """Treatment coefficient from the weighted normal equations."""
    k = kernel(x, c, h, kind)
    on = k > 0
    X = np.column_stack([(x[on] >= c).astype(float), design(x[on], c, q)])
    W = np.diag(k[on])
    return np.linalg.solve(X.T @ W @ X, X.T @ W @ y[on])[0]


# -- score ---------------------------------------------------------------------------

def gaussian_hscore(y, mean, var):
    """Hyvarinen score of a N(mean, var) predictive at y."""
    return 2 * (-1 / var) + ((y - mean) / var) ** 2
