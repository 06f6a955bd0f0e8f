"""scikit-learn style estimators for grouped sharp RDD.

``X`` is the running variable (shape ``(n,)`` or ``(n, 1)``), ``y`` the
outcome and ``groups`` the subgroup label of each row.  Fitted estimators
expose per-group effects in ``effects_`` ordered as ``groups_``.
"""

from __future__ import annotations

import numbers

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .bandwidth import fit_adaptive, fit_at_bandwidths
from .baseline import baseline_bandwidth, fit_pooled, fit_separate_wls
from .data import Dataset, Hyperparams, validate
from .design import design_row
from .exceptions import HRDDError


def _check_inputs(X, y, groups):
    x = check_array(X, ensure_2d=False, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ValueError(f"X must hold a single running variable, got {x.shape[1]} columns")
        x = x[:, 0]
    y = column_or_1d(check_array(y, ensure_2d=False, dtype=float), warn=True)
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"X has {x.shape[0]} rows but y has {y.shape[0]}")
    if groups is None:
        groups = np.zeros(x.shape[0], dtype=int)
    groups = np.asarray(groups)
    if groups.shape != (x.shape[0],):
        raise ValueError("groups must be one label per row")
    return x, y, groups


def _running(X):
    x = check_array(X, ensure_2d=False, dtype=float)
    return x[:, 0] if x.ndim == 2 else x


class HierarchicalRDD(BaseEstimator):
    """Hierarchical Bayesian RDD with Hyvarinen-score bandwidth adaptation.

    Parameters
    ----------
    threshold : float
        Cutoff ``c``; treatment is ``x >= c``.
    outcome : {"continuous", "binary"}
    bandwidth : {"global", "local"} or float or array-like
        Adaptive selection mode, or fixed bandwidth(s) (scalar or one per group).
    n_candidates : int
        Size of the candidate grid for adaptive selection.
    poly_order : int
        Local polynomial order on each side of the threshold.
    kernel : {"triangular", "window"}
    spike_slab : bool
        Spike-and-slab prior on the group effects.
    robust : bool
        Two-component scale mixture on the error precision (continuous only).
    n_iter, n_burn : int
        Total sweeps of the final chain and how many to discard.
    batch_len, n_warmup : int
        Scoring batch length and warm-up sweeps per candidate.
    seed : int
    level : float
        Credible level of ``intervals_``.

    Attributes
    ----------
    groups_ : ndarray of str
        Group labels (as strings) in order of first appearance.
    effects_ : ndarray
        Posterior mean effect per group (probability jump for binary outcomes).
    intervals_ : ndarray of shape (G, 2)
        Equal-tailed credible intervals.
    bandwidths_ : ndarray
        Bandwidth used per group in the final chain.
    draws_ : PosteriorDraws
    plan_ : BandwidthPlan or None
        Search record; ``None`` for fixed bandwidths.
    """

    def __init__(self, threshold=0.0, outcome="continuous", bandwidth="global",
                 n_candidates=8, poly_order=1, kernel="triangular", spike_slab=False,
                 robust=True, n_iter=1500, n_burn=500, batch_len=100, n_warmup=50,
                 seed=0, level=0.95):
        self.threshold = threshold
        self.outcome = outcome
        self.bandwidth = bandwidth
        self.n_candidates = n_candidates
        self.poly_order = poly_order
        self.kernel = kernel
        self.spike_slab = spike_slab
        self.robust = robust
        self.n_iter = n_iter
        self.n_burn = n_burn
        self.batch_len = batch_len
        self.n_warmup = n_warmup
        self.seed = seed
        self.level = level

    def _hyperparams(self) -> Hyperparams:
        return Hyperparams(poly_order=self.poly_order, kernel=self.kernel,
                           use_spike_slab=self.spike_slab,
                           use_robust_mixture=self.robust)

    def fit(self, X, y, groups=None):
        x, y, groups = _check_inputs(X, y, groups)
        ds = Dataset.from_arrays(y, x, groups, float(self.threshold), self.outcome)
        validate(ds)
        hyper = self._hyperparams()
        if isinstance(self.bandwidth, str):
            draws, plan = fit_adaptive(ds, hyper, mode=self.bandwidth, L=self.n_candidates,
                                       batch_len=self.batch_len, n_warmup=self.n_warmup,
                                       n_iter=self.n_iter, n_burn=self.n_burn, seed=self.seed)
        else:
            h = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (ds.G,)).copy()
            draws, plan = fit_at_bandwidths(ds, hyper, h, self.n_iter, self.n_burn, self.seed), None
        self.dataset_ = ds
        self.groups_ = np.asarray(ds.labels)
        self.draws_ = draws
        self.plan_ = plan
        self.bandwidths_ = np.asarray(draws.bandwidths)
        self.effects_ = draws.mean
        self.intervals_ = np.column_stack(draws.interval(self.level))
        return self

    def _group_index(self, groups, n):
        lookup = {lab: i for i, lab in enumerate(self.groups_.tolist())}
        if groups is None:
            if len(lookup) != 1:
                raise ValueError("groups is required when more than one group was fitted")
            return np.zeros(n, dtype=int)
        out = np.empty(n, dtype=int)
        for i, lab in enumerate(np.asarray(groups).tolist()):
            lab = str(lab)
            if lab not in lookup:
                raise ValueError(f"unknown group label {lab!r}")
            out[i] = lookup[lab]
        return out

    def predict(self, X, groups=None):
        """Posterior mean of the local regression function at ``X``.

        On the probability scale for binary outcomes.  Away from the
        threshold this extrapolates the local polynomial fit.
        """
        check_is_fitted(self, "draws_")
        x = _running(X)
        gi = self._group_index(groups, x.shape[0])
        c = float(self.threshold)
        z = design_row(x, c, self.poly_order)
        w = (x >= c).astype(float)
        d = self.draws_
        mu = d.tau[:, gi] * w[None, :] + np.einsum("dnp,np->dn", d.beta[:, gi, :], z)
        if self.outcome == "binary":
            mu = expit(mu)
        return mu.mean(axis=0)

    def effect_draws(self, group=None):
        """Retained effect draws, all groups ``(n_draws, G)`` or one group."""
        check_is_fitted(self, "draws_")
        if group is None:
            return self.draws_.effect
        return self.draws_.effect[:, self._group_index([group], 1)[0]]


class SeparateRDD(BaseEstimator):
    """Per-group kernel-weighted local polynomial RDD with sandwich intervals.

    Parameters
    ----------
    threshold : float
    bandwidth : None, float or array-like
        ``None`` applies the rule-of-thumb bandwidth within each group.
    poly_order : int
    kernel : {"triangular", "window"}

    Attributes
    ----------
    groups_, effects_, se_, intervals_, bandwidths_
        One entry per group; failed groups hold NaN.
    errors_ : dict
        Group label to error message for groups that could not be fitted.
    """

    def __init__(self, threshold=0.0, bandwidth=None, poly_order=1, kernel="triangular"):
        self.threshold = threshold
        self.bandwidth = bandwidth
        self.poly_order = poly_order
        self.kernel = kernel

    def fit(self, X, y, groups=None):
        x, y, groups = _check_inputs(X, y, groups)
        ds = Dataset.from_arrays(y, x, groups, float(self.threshold), "continuous")
        c = ds.threshold
        G = ds.G
        if self.bandwidth is None:
            hs = [None] * G
        else:
            hs = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (G,)).tolist()
        est = np.full((G, 5), np.nan)
        errors = {}
        for g, grp in enumerate(ds.groups):
            try:
                h = hs[g] if hs[g] is not None else baseline_bandwidth(
                    grp, c, self.poly_order, self.kernel)
                e = fit_separate_wls(grp, c, h, self.kernel, self.poly_order)
            except HRDDError as exc:
                errors[ds.labels[g]] = str(exc)
                continue
            est[g] = (e.tau_hat, e.se, e.ci_low, e.ci_high, e.h_used)
        self.groups_ = np.asarray(ds.labels)
        self.effects_ = est[:, 0]
        self.se_ = est[:, 1]
        self.intervals_ = est[:, 2:4]
        self.bandwidths_ = est[:, 4]
        self.errors_ = errors
        return self


class PooledRDD(BaseEstimator):
    """Homogeneous-effect RDD fitted on all groups pooled.

    Attributes
    ----------
    effect_, se_, interval_, bandwidth_ : scalars of the pooled fit
    estimate_ : FreqEstimate
    """

    def __init__(self, threshold=0.0, bandwidth=None, poly_order=1, kernel="triangular"):
        self.threshold = threshold
        self.bandwidth = bandwidth
        self.poly_order = poly_order
        self.kernel = kernel

    def fit(self, X, y, groups=None):
        x, y, groups = _check_inputs(X, y, groups)
        if self.bandwidth is not None and not isinstance(self.bandwidth, numbers.Real):
            raise ValueError("bandwidth must be a single positive number or None")
        ds = Dataset.from_arrays(y, x, groups, float(self.threshold), "continuous")
        e = fit_pooled(ds, ds.threshold, self.bandwidth, self.kernel, self.poly_order)
        self.estimate_ = e
        self.effect_ = e.tau_hat
        self.se_ = e.se
        self.interval_ = (e.ci_low, e.ci_high)
        self.bandwidth_ = e.h_used
        return self


__all__ = ["HierarchicalRDD", "SeparateRDD", "PooledRDD"]
