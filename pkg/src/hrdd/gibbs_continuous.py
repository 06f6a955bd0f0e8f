"""Gibbs sampler for the continuous-outcome hierarchical pseudo-model.

Each observation contributes a normal likelihood raised to its kernel weight,
with a robust two-component scale mixture on the per-observation precision.
Group effects and local regression coefficients get hierarchical normal
priors (optionally spike-and-slab on the effects).

The conditional helpers return distribution parameters so they can be checked
directly; the ``sample_*`` functions draw from them.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, gammaln

from .chain import ActiveSet, GibbsSampler, ModelSpec, normal_from_precision, sample_mvn_precision
from .data import ChainState, PosteriorDraws
from .design import design_row, kernel_weight
from .distributions import beta as beta_draw
from .distributions import gamma as gamma_draw
from .distributions import inverse_gamma
from .exceptions import NumericalError


def _rowdot(z, b):
    return np.einsum("ij,ij->i", z, b)


def residuals(state: ChainState, act: ActiveSet) -> np.ndarray:
    """``y - tau_g w - z' beta_g`` on the active set."""
    return act.y - state.tau[act.gidx] * act.w - _rowdot(act.z, state.beta[act.gidx])


def _u(state, act):
    if state.u is None:
        return np.ones(act.n)
    return state.u[act.idx]


# -- global precision -------------------------------------------------------

def omega_conditional(state, act, hyper):
    """Shape and rate of the gamma conditional of the pseudo-likelihood scale."""
    e = residuals(state, act)
    shape = hyper.a_omega + act.k.sum() / 2.0
    rate = hyper.b_omega + np.sum(_u(state, act) * act.k * e * e) / 2.0
    return shape, rate


def sample_precision_omega(state, act, hyper, rng, iteration=None) -> float:
    shape, rate = omega_conditional(state, act, hyper)
    if not rate > 0:
        raise NumericalError("nonpositive rate in omega conditional", iteration)
    return float(gamma_draw(rng, shape, rate))


# -- treatment effects ------------------------------------------------------

def _prior_tau(state, hyper):
    s = state.s.astype(float)
    prec = 1.0 / (hyper.epsilon ** s * state.psi_tau)
    lin = (1.0 - s) * state.m_tau / state.psi_tau
    return prec, lin


def tau_precision(state, act, hyper):
    """Conditional precision and linear term of every ``tau_g``."""
    a = state.omega * _u(state, act) * act.k * act.w
    zb = _rowdot(act.z, state.beta[act.gidx])
    p0, l0 = _prior_tau(state, hyper)
    return act.group_sum(a) + p0, act.group_sum(a * (act.y - zb)) + l0


def tau_conditional(state, act, hyper):
    """Mean and variance of the normal conditional of each ``tau_g``."""
    prec, lin = tau_precision(state, act, hyper)
    return lin / prec, 1.0 / prec


def sample_treatment_effect(state, act, hyper, rng, iteration=None) -> np.ndarray:
    prec, lin = tau_precision(state, act, hyper)
    return normal_from_precision(rng, prec, lin, iteration)


# -- spike and slab ---------------------------------------------------------

def _norm_logpdf(x, mean, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def spike_probability(state, hyper) -> np.ndarray:
    """P(s_g = 1 | rest): posterior weight of the zero-centred spike."""
    log_spike = _norm_logpdf(state.tau, 0.0, hyper.epsilon * state.psi_tau)
    log_slab = _norm_logpdf(state.tau, state.m_tau, state.psi_tau)
    pi = min(max(state.pi, 1e-300), 1.0 - 1e-16)
    return expit(np.log(pi) - np.log1p(-pi) + log_spike - log_slab)


def pi_conditional(s, hyper):
    n1 = float(np.sum(s))
    return hyper.a_pi + n1, hyper.b_pi + len(s) - n1


def sample_spike_indicators(state, hyper, rng):
    """Draw the spike indicators, then their mixing proportion."""
    prob = spike_probability(state, hyper)
    s = (rng.random(prob.shape) < prob).astype(np.int8)
    a, b = pi_conditional(s, hyper)
    return s, float(beta_draw(rng, a, b))


# -- local regression coefficients -------------------------------------------

def beta_precision(state, act, hyper):
    """Stacked conditional precisions (G, p, p) and linear terms (G, p)."""
    a = state.omega * _u(state, act) * act.k
    z = act.z
    gram = act.group_sum(a[:, None, None] * z[:, :, None] * z[:, None, :])
    rhs = act.group_sum((a * (act.y - state.tau[act.gidx] * act.w))[:, None] * z)
    prior = 1.0 / state.psi_beta
    prec = gram + np.diag(prior)[None, :, :]
    lin = rhs + (prior * state.m_beta)[None, :]
    return prec, lin


def beta_conditional(state, act, hyper):
    """Mean (G, p) and covariance (G, p, p) of each ``beta_g``."""
    prec, lin = beta_precision(state, act, hyper)
    cov = np.linalg.inv(prec)
    return np.einsum("gij,gj->gi", cov, lin), cov


def sample_coefficients(state, act, hyper, rng, iteration=None) -> np.ndarray:
    prec, lin = beta_precision(state, act, hyper)
    return sample_mvn_precision(rng, prec, lin, iteration)


# -- hyperparameters ----------------------------------------------------------

def psi_conditional(state, hyper):
    """Inverse-gamma (shape, rate) pairs for ``psi_tau`` and each ``psi_beta_k``.

    Spike members are measured from zero and scaled by ``1/epsilon``; slab
    members from ``m_tau``.
    """
    G = state.tau.shape[0]
    s = state.s.astype(float)
    dev = state.tau - (1.0 - s) * state.m_tau
    shape = hyper.a_psi + G / 2.0
    rate_tau = hyper.b_psi + np.sum(hyper.epsilon ** (-s) * dev * dev) / 2.0
    rate_beta = hyper.b_psi + np.sum((state.beta - state.m_beta) ** 2, axis=0) / 2.0
    return (shape, rate_tau), (shape, rate_beta)


def sample_hyper_variances(state, hyper, rng):
    (a, b), (ab, bb) = psi_conditional(state, hyper)
    return float(inverse_gamma(rng, a, b)), inverse_gamma(rng, ab, bb)


def m_conditional(state, hyper):
    """Normal (mean, var) for ``m_tau`` (slab members only) and each ``m_beta_k``."""
    G = state.tau.shape[0]
    slab = 1.0 - state.s.astype(float)
    var_tau = 1.0 / (slab.sum() / state.psi_tau + 1.0 / hyper.b_m)
    mean_tau = var_tau * (np.sum(slab * state.tau) / state.psi_tau + hyper.a_m / hyper.b_m)
    var_beta = 1.0 / (G / state.psi_beta + 1.0 / hyper.b_m)
    mean_beta = var_beta * (state.beta.sum(axis=0) / state.psi_beta + hyper.a_m / hyper.b_m)
    return (mean_tau, var_tau), (mean_beta, var_beta)


def sample_hyper_means(state, hyper, rng):
    (mt, vt), (mb, vb) = m_conditional(state, hyper)
    return float(mt + np.sqrt(vt) * rng.standard_normal()), mb + np.sqrt(vb) * rng.standard_normal(mb.shape)


# -- robust mixture -----------------------------------------------------------

def outlier_log_ratio(k, q, nu):
    """log of (outlier marginal / inlier likelihood) with ``u`` integrated out.

    ``q`` is ``omega k e^2 / 2``.  Shared normalizing constants cancel.
    """
    return (nu * np.log(nu) + gammaln(nu + k / 2.0) - gammaln(nu)
            - (nu + k / 2.0) * np.log(nu + q) + q)


def outlier_probability(state, act, hyper):
    """P(r_ig = 1 | rest, u marginalized) on the active set, plus ``q``."""
    e = residuals(state, act)
    q = state.omega * act.k * e * e / 2.0
    w = min(max(state.w_mix, 1e-300), 1.0 - 1e-16)
    logit = np.log(w) - np.log1p(-w) + outlier_log_ratio(act.k, q, hyper.nu)
    return expit(logit), q


def sample_outlier_latents(state, act, hyper, rng, n_total=None):
    """Collapsed draw of ``r``, then ``u | r``, then the mixture weight ``w``.

    Inactive observations keep ``(r, u) = (0, 1)``.
    """
    n_total = state.u.shape[0] if n_total is None else n_total
    prob, q = outlier_probability(state, act, hyper)
    r_act = rng.random(act.n) < prob
    u_act = np.ones(act.n)
    hit = np.flatnonzero(r_act)
    if hit.size:
        u_act[hit] = gamma_draw(rng, hyper.nu + act.k[hit] / 2.0, hyper.nu + q[hit])
    r = np.zeros(n_total, dtype=np.int8)
    u = np.ones(n_total)
    r[act.idx] = r_act
    u[act.idx] = u_act
    n_out = int(r_act.sum())
    w = float(beta_draw(rng, hyper.a_w + n_out, hyper.b_w + act.n - n_out))
    return r, u, w


# -- sampler ------------------------------------------------------------------

class ContinuousGibbs(GibbsSampler):
    """Sweep: omega, tau, (s, pi), beta, psi, m, (r, u, w)."""

    outcome_kind = "continuous"

    def initial_state(self) -> ChainState:
        act = self.act
        tau, beta = self._group_wls(act.y, act.k)
        e = act.y - tau[act.gidx] * act.w - _rowdot(act.z, beta[act.gidx])
        sse = np.sum(act.k * e * e)
        omega = act.k.sum() / sse if sse > 0 else 1.0
        return ChainState(
            tau=tau, beta=beta, s=np.zeros(self.G, dtype=np.int8), pi=0.5,
            omega=float(min(max(omega, 1e-6), 1e6)),
            u=np.ones(self.N), r=np.zeros(self.N, dtype=np.int8), w_mix=0.5,
            **self._hyper_init(tau, beta),
        )

    def sweep(self):
        st, act, hp, rng, it = self.state, self.act, self.hyper, self.rngs, self.iteration
        st.omega = sample_precision_omega(st, act, hp, rng["omega"], it)
        st.tau = sample_treatment_effect(st, act, hp, rng["tau"], it)
        if hp.use_spike_slab:
            st.s, st.pi = sample_spike_indicators(st, hp, rng["spike"])
        st.beta = sample_coefficients(st, act, hp, rng["beta"], it)
        st.psi_tau, st.psi_beta = sample_hyper_variances(st, hp, rng["hyper"])
        st.m_tau, st.m_beta = sample_hyper_means(st, hp, rng["hyper"])
        if hp.use_robust_mixture:
            st.r, st.u, st.w_mix = sample_outlier_latents(st, act, hp, rng["outlier"], self.N)

    def score_terms(self, idx, g):
        """First and second ``y``-derivatives of the log pseudo-likelihood.

        Evaluated at flat observation indices ``idx`` (groups ``g``) for the
        current state and bandwidths.
        """
        st = self.state
        k = kernel_weight(self.x[idx], self.c, self.h[g], self.hyper.kernel)
        z = design_row(self.x[idx], self.c, self.hyper.poly_order)
        e = self.y[idx] - st.tau[g] * self.w[idx] - _rowdot(z, st.beta[g])
        prec = st.omega * st.u[idx] * k
        return -prec * e, -prec


def run_chain_continuous(spec: ModelSpec) -> PosteriorDraws:
    """Run one seeded chain and return the post burn-in draws."""
    sampler = ContinuousGibbs(spec.dataset, spec.hyperparams, spec.bandwidths, spec.seed)
    return sampler.run(spec.n_iter, spec.n_burn)
