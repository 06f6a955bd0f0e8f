"""Machinery shared by the continuous and binary Gibbs samplers.

A sampler owns the flat (group-concatenated) data, the current bandwidths and
the chain state.  Only observations with positive kernel weight enter the
likelihood; they form the *active set*, rebuilt whenever a bandwidth changes.
Every update block draws from its own random stream so that switching one
block on or off never shifts the variates consumed by the others.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import ChainState, Dataset, Hyperparams, PosteriorDraws, validate
from .design import design_row, kernel_weight
from .distributions import rng_stream
from .exceptions import NumericalError

BLOCKS = ("omega", "tau", "spike", "beta", "hyper", "outlier", "pg")


@dataclass
class ModelSpec:
    """Everything needed to run one chain.

    ``bandwidths`` has one entry per group.  ``n_iter`` counts all sweeps,
    the first ``n_burn`` of which are discarded.
    """

    dataset: Dataset
    hyperparams: Hyperparams
    bandwidths: np.ndarray
    n_iter: int = 1500
    n_burn: int = 500
    seed: int = 0

    def __post_init__(self):
        validate(self.dataset)
        h = np.broadcast_to(np.asarray(self.bandwidths, dtype=float),
                            (self.dataset.G,)).copy()
        if np.any(~(h > 0)):
            raise ValueError("all bandwidths must be positive")
        self.bandwidths = h
        if not (self.n_iter > self.n_burn >= 0):
            raise ValueError("need n_iter > n_burn >= 0")


@dataclass
class ActiveSet:
    """Positive-weight observations under the current bandwidths."""

    idx: np.ndarray
    gidx: np.ndarray
    y: np.ndarray
    w: np.ndarray
    z: np.ndarray
    k: np.ndarray
    agg: sp.csr_matrix
    G: int

    @classmethod
    def build(cls, y, x, w, gidx, c, h, q, kernel, G):
        k_all = kernel_weight(x, c, h[gidx], kernel)
        idx = np.flatnonzero(k_all > 0)
        g = gidx[idx]
        agg = sp.csr_matrix(
            (np.ones(idx.size), (g, np.arange(idx.size))), shape=(G, idx.size)
        )
        return cls(idx, g, y[idx], w[idx], design_row(x[idx], c, q),
                   k_all[idx], agg, G)

    def group_sum(self, values):
        """Sum ``values`` (leading axis over active obs) within each group."""
        values = np.asarray(values)
        if values.ndim == 1:
            return np.bincount(self.gidx, values, minlength=self.G)
        if values.shape[0] == 0:
            return np.zeros((self.G,) + values.shape[1:])
        flat = values.reshape(values.shape[0], -1)
        return np.asarray(self.agg @ flat).reshape((self.G,) + values.shape[1:])

    @property
    def n(self):
        return self.idx.size

    def side_counts(self):
        treated = np.bincount(self.gidx, self.w, minlength=self.G)
        total = np.bincount(self.gidx, minlength=self.G)
        return total - treated, treated


def sample_mvn_precision(rng, precision, linear, iteration=None):
    """Draw from N(P^-1 b, P^-1) for stacked precisions ``P`` (G, p, p)."""
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("precision matrix is not positive definite",
                             iteration) from exc
    mean = np.linalg.solve(precision, linear[..., None])[..., 0]
    xi = rng.standard_normal(linear.shape)
    noise = np.linalg.solve(np.swapaxes(chol, -1, -2), xi[..., None])[..., 0]
    return mean + noise


def normal_from_precision(rng, precision, linear, iteration=None):
    """Scalar version of :func:`sample_mvn_precision`, vectorized over groups."""
    precision = np.asarray(precision, dtype=float)
    if np.any(~(precision > 0)):
        raise NumericalError("nonpositive conditional precision", iteration)
    return linear / precision + rng.standard_normal(precision.shape) / np.sqrt(precision)


class GibbsSampler:
    """Base class: data layout, bandwidth switching, draw recording."""

    outcome_kind = "continuous"

    def __init__(self, dataset: Dataset, hyper: Hyperparams, bandwidths, seed, stream=0):
        self.dataset = dataset
        self.hyper = hyper
        self.c = dataset.threshold
        self.G = dataset.G
        self.p = hyper.p
        self.y, self.x, self.w, self.gidx = dataset.concatenated()
        self.N = self.y.size
        self.rngs = {name: rng_stream(seed, stream, i) for i, name in enumerate(BLOCKS)}
        self.iteration = 0
        self.warnings = []
        self.set_bandwidths(bandwidths)
        self.state = self.initial_state()

    # -- bandwidths --------------------------------------------------------
    def set_bandwidths(self, bandwidths):
        h = np.broadcast_to(np.asarray(bandwidths, dtype=float), (self.G,)).copy()
        self.h = h
        self.act = ActiveSet.build(self.y, self.x, self.w, self.gidx, self.c, h,
                                   self.hyper.poly_order, self.hyper.kernel, self.G)
        controls, treated = self.act.side_counts()
        self.degenerate = (controls == 0) | (treated == 0)
        for g in np.flatnonzero(self.degenerate):
            msg = (f"group {self.dataset.labels[g]}: no positive-weight "
                   f"{'treated' if treated[g] == 0 else 'control'} observations "
                   f"at h={h[g]:.4g}; effect is identified by the prior only")
            if msg not in self.warnings:
                self.warnings.append(msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
        state = getattr(self, "state", None)
        if state is not None and state.u is not None:
            inactive = np.ones(self.N, dtype=bool)
            inactive[self.act.idx] = False
            state.u[inactive] = 1.0
            state.r[inactive] = 0

    # -- initialization ----------------------------------------------------
    def _group_wls(self, target, weights):
        """Ridge-stabilized per-group weighted regression on (W, Z)."""
        act = self.act
        design = np.column_stack([act.w, act.z])
        gram = act.group_sum(weights[:, None, None] * design[:, :, None] * design[:, None, :])
        rhs = act.group_sum(weights[:, None] * design * target[:, None])
        gram = gram + 1e-6 * np.eye(design.shape[1])
        coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
        return coef[:, 0], coef[:, 1:]

    def _hyper_init(self, tau, beta):
        tau_spread = np.var(tau) if self.G > 1 else 1.0
        beta_spread = np.var(beta, axis=0) if self.G > 1 else np.ones(self.p)
        return dict(
            m_tau=float(np.mean(tau)),
            m_beta=beta.mean(axis=0),
            psi_tau=float(max(tau_spread, 1e-4)),
            psi_beta=np.maximum(beta_spread, 1e-4),
        )

    def initial_state(self) -> ChainState:
        raise NotImplementedError

    # -- running -----------------------------------------------------------
    def sweep(self):
        raise NotImplementedError

    def step(self):
        self.iteration += 1
        self.sweep()

    def effect(self, state=None):
        state = self.state if state is None else state
        return state.tau

    def run(self, n_iter, n_burn=0, callback=None) -> PosteriorDraws:
        """Advance ``n_iter`` sweeps and keep the last ``n_iter - n_burn``."""
        keep = n_iter - n_burn
        rec = _Recorder(keep, self.G, self.p)
        for it in range(n_iter):
            self.step()
            if it >= n_burn:
                rec.add(self.state, self.effect())
                if callback is not None:
                    callback(self)
        draws = rec.finish(self.outcome_kind)
        draws.bandwidths = self.h.copy()
        draws.warnings = list(self.warnings)
        return draws


class _Recorder:
    def __init__(self, n, G, p):
        self.i = 0
        self.tau = np.empty((n, G))
        self.effect = np.empty((n, G))
        self.beta = np.empty((n, G, p))
        self.s = np.empty((n, G), dtype=np.int8)
        self.pi = np.empty(n)
        self.psi_tau = np.empty(n)
        self.psi_beta = np.empty((n, p))
        self.m_tau = np.empty(n)
        self.m_beta = np.empty((n, p))
        self.omega = np.empty(n)
        self.w_mix = np.empty(n)

    def add(self, st: ChainState, effect):
        i = self.i
        self.tau[i] = st.tau
        self.effect[i] = effect
        self.beta[i] = st.beta
        self.s[i] = st.s
        self.pi[i] = st.pi
        self.psi_tau[i] = st.psi_tau
        self.psi_beta[i] = st.psi_beta
        self.m_tau[i] = st.m_tau
        self.m_beta[i] = st.m_beta
        self.omega[i] = st.omega
        self.w_mix[i] = st.w_mix
        self.i += 1

    def finish(self, kind):
        continuous = kind == "continuous"
        return PosteriorDraws(
            tau=self.tau, beta=self.beta, effect=self.effect, s=self.s, pi=self.pi,
            psi_tau=self.psi_tau, psi_beta=self.psi_beta, m_tau=self.m_tau,
            m_beta=self.m_beta,
            omega=self.omega if continuous else None,
            w_mix=self.w_mix if continuous else None,
        )
