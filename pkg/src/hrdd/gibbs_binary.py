"""Gibbs sampler for binary outcomes via Polya-gamma augmentation.

The pseudo-likelihood is the logistic likelihood raised to the kernel weight.
Conditionally on ``omega_ig ~ PG(k_ig, mu_ig)`` it becomes Gaussian in the
linear predictor, so ``tau_g`` and ``beta_g`` have normal conditionals.  The
hyperparameter updates are shared with the continuous sampler.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

from .chain import GibbsSampler, ModelSpec, normal_from_precision, sample_mvn_precision
from .data import ChainState, PosteriorDraws, validate
from .design import design_row, kernel_weight
from .distributions import polya_gamma
from .gibbs_continuous import (
    _prior_tau,
    _rowdot,
    sample_hyper_means,
    sample_hyper_variances,
    sample_spike_indicators,
)


def tau_star_transform(tau, beta1):
    """Jump in success probability at the threshold on the probability scale."""
    return expit(np.asarray(tau) + beta1) - expit(beta1)


def linear_predictor(state, act):
    return state.tau[act.gidx] * act.w + _rowdot(act.z, state.beta[act.gidx])


def kappa(act):
    return act.k * (act.y - 0.5)


def sample_pg_latent(state, act, rng) -> np.ndarray:
    """``omega_ig ~ PG(k_ig, mu_ig)`` for every active observation."""
    if act.n == 0:
        return np.empty(0)
    return polya_gamma(rng, act.k, linear_predictor(state, act))


def _omega_pg(state, act):
    return state.omega_pg[act.idx]


def binary_tau_precision(state, act, hyper):
    om = _omega_pg(state, act)
    zb = _rowdot(act.z, state.beta[act.gidx])
    p0, l0 = _prior_tau(state, hyper)
    prec = act.group_sum(om * act.w) + p0
    lin = act.group_sum(act.w * (kappa(act) - om * zb)) + l0
    return prec, lin


def binary_tau_conditional(state, act, hyper):
    prec, lin = binary_tau_precision(state, act, hyper)
    return lin / prec, 1.0 / prec


def binary_beta_precision(state, act, hyper):
    om = _omega_pg(state, act)
    z = act.z
    gram = act.group_sum(om[:, None, None] * z[:, :, None] * z[:, None, :])
    resid = kappa(act) - om * state.tau[act.gidx] * act.w
    rhs = act.group_sum(resid[:, None] * z)
    prior = 1.0 / state.psi_beta
    return gram + np.diag(prior)[None], rhs + (prior * state.m_beta)[None]


def binary_beta_conditional(state, act, hyper):
    prec, lin = binary_beta_precision(state, act, hyper)
    cov = np.linalg.inv(prec)
    return np.einsum("gij,gj->gi", cov, lin), cov


def sample_group_params_binary(state, act, hyper, rng_tau, rng_beta, iteration=None):
    """Draw every ``tau_g`` and then every ``beta_g`` from their conditionals."""
    prec, lin = binary_tau_precision(state, act, hyper)
    state.tau = normal_from_precision(rng_tau, prec, lin, iteration)
    prec, lin = binary_beta_precision(state, act, hyper)
    state.beta = sample_mvn_precision(rng_beta, prec, lin, iteration)
    return state.tau, state.beta


class BinaryGibbs(GibbsSampler):
    """Sweep: omega_ig, tau, (s, pi), beta, psi, m."""

    outcome_kind = "binary"

    def initial_state(self) -> ChainState:
        act = self.act
        kw = act.k
        ctrl = act.group_sum(kw * (1 - act.w))
        trt = act.group_sum(kw * act.w)
        p0 = np.where(ctrl > 0, act.group_sum(kw * (1 - act.w) * act.y) / np.maximum(ctrl, 1e-300), 0.5)
        p1 = np.where(trt > 0, act.group_sum(kw * act.w * act.y) / np.maximum(trt, 1e-300), 0.5)
        p0 = np.clip(p0, 0.02, 0.98)
        p1 = np.clip(p1, 0.02, 0.98)
        beta = np.zeros((self.G, self.p))
        beta[:, 0] = logit(p0)
        tau = logit(p1) - logit(p0)
        omega_pg = np.full(self.N, 0.25)
        return ChainState(
            tau=tau, beta=beta, s=np.zeros(self.G, dtype=np.int8), pi=0.5,
            omega_pg=omega_pg, **self._hyper_init(tau, beta),
        )

    def sweep(self):
        st, act, hp, rng, it = self.state, self.act, self.hyper, self.rngs, self.iteration
        st.omega_pg[act.idx] = sample_pg_latent(st, act, rng["pg"])
        prec, lin = binary_tau_precision(st, act, hp)
        st.tau = normal_from_precision(rng["tau"], prec, lin, it)
        if hp.use_spike_slab:
            st.s, st.pi = sample_spike_indicators(st, hp, rng["spike"])
        prec, lin = binary_beta_precision(st, act, hp)
        st.beta = sample_mvn_precision(rng["beta"], prec, lin, it)
        st.psi_tau, st.psi_beta = sample_hyper_variances(st, hp, rng["hyper"])
        st.m_tau, st.m_beta = sample_hyper_means(st, hp, rng["hyper"])

    def effect(self, state=None):
        state = self.state if state is None else state
        return tau_star_transform(state.tau, state.beta[:, 0])

    def score_terms(self, idx, g):
        """Probability ratio ``p(1 - y) / p(y)`` under the pseudo-model."""
        st = self.state
        k = kernel_weight(self.x[idx], self.c, self.h[g], self.hyper.kernel)
        z = design_row(self.x[idx], self.c, self.hyper.poly_order)
        mu = st.tau[g] * self.w[idx] + _rowdot(z, st.beta[g])
        return np.exp(mu * k * (1.0 - 2.0 * self.y[idx]))


def run_chain_binary(spec: ModelSpec) -> PosteriorDraws:
    if spec.dataset.outcome_kind != "binary":
        raise ValueError("run_chain_binary needs a binary dataset")
    validate(spec.dataset)
    sampler = BinaryGibbs(spec.dataset, spec.hyperparams, spec.bandwidths, spec.seed)
    return sampler.run(spec.n_iter, spec.n_burn)
