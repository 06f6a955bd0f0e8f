import numpy as np
import pytest
from scipy.special import gammaln

import hrdd.gibbs_continuous as gc
from conftest import make_dataset
from hrdd.chain import ActiveSet, ModelSpec
from hrdd.data import ChainState, Hyperparams
from hrdd.exceptions import NumericalError
from hrdd.gibbs_continuous import (
    ContinuousGibbs,
    beta_conditional,
    m_conditional,
    omega_conditional,
    outlier_log_ratio,
    outlier_probability,
    pi_conditional,
    psi_conditional,
    run_chain_continuous,
    sample_outlier_latents,
    spike_probability,
    tau_conditional,
)


def _act(y, x, h=10.0, kernel="window", G=1, gidx=None):
    y, x = np.asarray(y, float), np.asarray(x, float)
    gidx = np.zeros(y.size, int) if gidx is None else np.asarray(gidx)
    return ActiveSet.build(y, x, (x >= 0).astype(float), gidx, 0.0, np.full(G, h), 1, kernel, G)


def _state(G=1, **kw):
    base = dict(tau=np.zeros(G), beta=np.zeros((G, 3)), s=np.zeros(G, np.int8), pi=0.5,
                psi_tau=1.0, psi_beta=np.ones(3), m_tau=0.0, m_beta=np.zeros(3), omega=1.0,
                u=None, r=None, w_mix=0.5)
    base.update(kw)
    return ChainState(**base)


HP = Hyperparams()


def test_omega_prior_when_no_weight():
    act = _act([1.0], [0.5], h=0.1, kernel="triangular")
    assert act.n == 0
    assert omega_conditional(_state(), act, HP) == (HP.a_omega, HP.b_omega)


def test_omega_single_observation():
    act = _act([2.0], [-0.5])
    shape, rate = omega_conditional(_state(), act, HP)
    assert (shape, rate) == (HP.a_omega + 0.5, HP.b_omega + 2.0)


def test_omega_perfect_fit():
    x = np.array([-0.5, 0.5])
    st = _state(beta=np.array([[1.0, 0.0, 0.0]]))
    shape, rate = omega_conditional(st, _act([1.0, 1.0], x), HP)
    assert (shape, rate) == (HP.a_omega + 1.0, HP.b_omega)


def test_omega_nonpositive_rate_raises():
    st = _state(u=np.array([np.nan]))
    with pytest.raises(NumericalError, match="iteration 7"):
        gc.sample_precision_omega(st, _act([2.0], [-0.5]), HP, np.random.default_rng(0), 7)


def test_tau_prior_when_no_treated():
    act = _act([1.0, 2.0], [-0.5, -0.2])
    st = _state(m_tau=0.7, psi_tau=2.0)
    mean, var = tau_conditional(st, act, HP)
    assert mean[0] == pytest.approx(0.7) and var[0] == pytest.approx(2.0)
    st.s = np.ones(1, np.int8)
    mean, var = tau_conditional(st, act, HP)
    assert mean[0] == 0.0 and var[0] == pytest.approx(HP.epsilon * 2.0)


def test_tau_one_treated_obs():
    mean, var = tau_conditional(_state(), _act([3.0], [0.5]), HP)
    assert mean[0] == pytest.approx(1.5) and var[0] == pytest.approx(0.5)


def test_spike_probability_limits():
    hp = HP.replace(epsilon=1.0)
    st = _state(G=3, pi=0.3, m_tau=0.0)
    st.tau = np.array([0.0, 1.3, -2.0])
    assert np.allclose(spike_probability(st, hp), 0.3)
    st = _state(G=1, pi=0.5, m_tau=5.0, psi_tau=1.0)
    st.tau = np.array([5.0])
    assert spike_probability(st, HP)[0] < 1e-100


def test_pi_counts():
    assert pi_conditional(np.ones(4), HP) == (HP.a_pi + 4, HP.b_pi)
    assert pi_conditional(np.zeros(4), HP) == (HP.a_pi, HP.b_pi + 4)


def test_beta_prior_when_no_weight():
    act = _act([1.0], [0.5], h=0.1, kernel="triangular")
    st = _state(m_beta=np.array([1.0, 2.0, 3.0]), psi_beta=np.array([0.5, 1.0, 2.0]))
    mean, cov = beta_conditional(st, act, HP)
    assert np.allclose(mean[0], [1, 2, 3]) and np.allclose(cov[0], np.diag([0.5, 1, 2]))


def test_psi_examples():
    st = _state(G=2, m_tau=1.0)
    st.tau = np.array([2.0, 0.0])
    (a, b), (ab, bb) = psi_conditional(st, HP)
    assert (a, b) == (HP.a_psi + 1, HP.b_psi + 1)
    st.tau = np.array([1.0, 1.0])
    assert psi_conditional(st, HP)[0] == (HP.a_psi + 1, HP.b_psi)
    # spike member measured from zero and scaled by 1/epsilon
    st.s = np.array([1, 0], np.int8)
    st.tau = np.array([0.1, 1.0])
    assert psi_conditional(st, HP)[0][1] == pytest.approx(HP.b_psi + 0.01 / HP.epsilon / 2)


def test_m_examples():
    st = _state(G=2, s=np.ones(2, np.int8))
    (mt, vt), _ = m_conditional(st, HP)
    assert (mt, vt) == pytest.approx((HP.a_m, HP.b_m))
    st = _state(G=2)
    st.tau = np.array([1.0, 3.0])
    (mt, vt), _ = m_conditional(st, HP)
    assert mt == pytest.approx(2.0, rel=1e-3) and vt == pytest.approx(0.5, rel=1e-3)
    st.beta = np.array([[1.0, 0.0, 2.0], [3.0, 0.0, 2.0]])
    _, (mb, vb) = m_conditional(st, HP)
    assert mb == pytest.approx([2.0, 0.0, 2.0], rel=1e-3)


def test_outlier_ratio_closed_form():
    assert np.exp(outlier_log_ratio(1.0, 0.0, 0.5)) == pytest.approx(np.sqrt(2 / np.pi), rel=1e-12)
    nu, k = 2.0, 1.0
    ref = np.exp(gammaln(nu + 0.5) - gammaln(nu) - 0.5 * np.log(nu))
    assert np.exp(outlier_log_ratio(k, 0.0, nu)) == pytest.approx(ref)


def test_outlier_probability_limits():
    act = _act([0.0, 1e4], [-0.5, -0.3])
    st = _state(u=np.ones(2), r=np.zeros(2, np.int8))
    prob, _ = outlier_probability(st, act, HP)
    assert prob[0] == pytest.approx(np.sqrt(2 / np.pi) / (1 + np.sqrt(2 / np.pi)))
    assert prob[1] == pytest.approx(1.0)


def test_inactive_observations_fixed():
    x = np.array([-0.5, -0.05, 0.05, 0.5, 0.9])
    act = _act(np.zeros(5), x, h=0.3, kernel="triangular")
    st = _state(u=np.full(5, 3.0), r=np.ones(5, np.int8))
    r, u, w = sample_outlier_latents(st, act, HP, np.random.default_rng(0), 5)
    inactive = np.setdiff1d(np.arange(5), act.idx)
    assert np.all(r[inactive] == 0) and np.all(u[inactive] == 1)
    assert np.all(u[r == 0] == 1.0)
    assert 0 < w < 1


def _spec(ds, **kw):
    hp = kw.pop("hyper", Hyperparams())
    return ModelSpec(ds, hp, kw.pop("h", 0.8), kw.pop("n_iter", 300), kw.pop("n_burn", 100), kw.pop("seed", 3))


def test_chain_deterministic():
    ds = make_dataset()
    a = run_chain_continuous(_spec(ds))
    b = run_chain_continuous(_spec(ds))
    assert np.array_equal(a.tau, b.tau) and np.array_equal(a.omega, b.omega)
    c = run_chain_continuous(_spec(ds, seed=4))
    assert not np.array_equal(a.tau, c.tau)
    assert a.n_draws == 200


def test_robust_off_equals_forced_inliers(monkeypatch):
    ds = make_dataset()
    off = run_chain_continuous(_spec(ds, hyper=Hyperparams(use_robust_mixture=False)))

    def forced(state, act, hyper, rng, n_total=None):
        return np.zeros(n_total, np.int8), np.ones(n_total), state.w_mix

    monkeypatch.setattr(gc, "sample_outlier_latents", forced)
    on = run_chain_continuous(_spec(ds, hyper=Hyperparams(use_robust_mixture=True)))
    assert np.array_equal(off.tau, on.tau)
    assert np.array_equal(off.beta, on.beta)
    assert np.array_equal(off.omega, on.omega)


def test_spike_slab_blocks_do_not_shift_other_streams(monkeypatch):
    ds = make_dataset()
    smp = ContinuousGibbs(ds, Hyperparams(use_spike_slab=True), 0.8, seed=1)
    smp.run(20)
    assert smp.state.s.dtype == np.int8
    assert 0 < smp.state.pi < 1


def test_conjugate_oracle(monkeypatch):
    """Fixed omega and flat hyper-level: Gaussian posterior of (tau, beta)."""
    ds = make_dataset(sizes=(120,), tau=(1.0,), sigma=0.4, seed=2)
    omega, psi = 1 / 0.16, 1e6
    monkeypatch.setattr(gc, "sample_precision_omega", lambda *a, **k: omega)
    monkeypatch.setattr(gc, "sample_hyper_variances", lambda st, hp, rng: (psi, np.full(3, psi)))
    monkeypatch.setattr(gc, "sample_hyper_means", lambda st, hp, rng: (0.0, np.zeros(3)))
    hyper = Hyperparams(use_robust_mixture=False)
    smp = ContinuousGibbs(ds, hyper, 0.7, seed=8)
    smp.state.omega = omega
    smp.state.psi_tau, smp.state.psi_beta = psi, np.full(3, psi)
    smp.state.m_tau, smp.state.m_beta = 0.0, np.zeros(3)
    draws = smp.run(6000, 200).tau[:, 0]

    g = ds.groups[0]
    k = np.maximum(1 - np.abs(g.x) / 0.7, 0)
    X = np.column_stack([g.w, np.ones(g.n), np.minimum(g.x, 0), np.maximum(g.x, 0)])
    P = omega * X.T @ (k[:, None] * X) + np.eye(4) / psi
    cov = np.linalg.inv(P)
    mean = cov @ (omega * X.T @ (k * g.y))
    # batch-means standard error
    batches = draws[: 5800 - 5800 % 50].reshape(50, -1).mean(axis=1)
    se = batches.std(ddof=1) / np.sqrt(50)
    assert abs(draws.mean() - mean[0]) <= 3 * se
    assert draws.var() == pytest.approx(cov[0, 0], rel=0.1)


def test_null_effect_coverage():
    ds = make_dataset(sizes=(150,) * 8, tau=(0.0,) * 8, seed=9)
    d = run_chain_continuous(_spec(ds, h=0.6, n_iter=800, n_burn=200))
    lo, hi = d.interval(0.95)
    assert np.mean((lo <= 0) & (0 <= hi)) >= 0.9


def test_degenerate_group_warns():
    ds = make_dataset(sizes=(60, 60))
    with pytest.warns(RuntimeWarning, match="prior only"):
        smp = ContinuousGibbs(ds, Hyperparams(), np.array([0.8, 1e-3]), seed=0)
    d = smp.run(50, 10)
    assert any("prior only" in w for w in d.warnings)
