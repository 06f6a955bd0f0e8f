"""Hyvarinen-score bandwidth adaptation inside the MCMC run.

Candidates are tried in increasing order in batches of sweeps.  A group (or,
in global mode, all groups jointly) moves to the next candidate while the
score keeps decreasing and freezes at the previous one as soon as it rises.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, GroupData, Hyperparams, PosteriorDraws
from .design import min_bandwidth
from .exceptions import DegenerateSupport, InsufficientDraws

MODES = ("local", "global")


def evaluation_size(n):
    return min(int(n), int(math.ceil(max(0.02 * n, 5))))


def evaluation_set(group: GroupData, c: float) -> np.ndarray:
    """Indices of the observations closest to the threshold (ties by position)."""
    m = evaluation_size(group.n)
    return np.sort(np.argsort(np.abs(group.x - c), kind="stable")[:m])


def hyvarinen_score_continuous(l1, l2) -> float:
    """Sum over evaluation points of ``2 E[l2 + l1^2] - E[l1]^2``.

    ``l1`` and ``l2`` are arrays of shape ``(n_draws, m)`` holding the first
    and second ``y``-derivatives of the log pseudo-likelihood per draw.
    """
    l1 = np.asarray(l1, dtype=float)
    l2 = np.asarray(l2, dtype=float)
    if l1.ndim == 1:
        l1, l2 = l1[:, None], l2[:, None]
    if l1.shape[0] < 2:
        raise InsufficientDraws("need at least two posterior draws")
    return float(np.sum(2.0 * np.mean(l2 + l1 * l1, axis=0) - np.mean(l1, axis=0) ** 2))


def hyvarinen_score_binary(ratio) -> float:
    """Sum over evaluation points of ``E[r]^2 - 2 / E[r]``.

    ``ratio`` holds draws of ``p(1 - y) / p(y)``, shape ``(n_draws, m)``.
    """
    ratio = np.asarray(ratio, dtype=float)
    if ratio.ndim == 1:
        ratio = ratio[:, None]
    if ratio.shape[0] < 2:
        raise InsufficientDraws("need at least two posterior draws")
    e = ratio.mean(axis=0)
    return float(np.sum(e * e - 2.0 / e))


def continuous_score_terms(y, w, z, k, tau, beta, omega, u=None):
    """Per-draw derivative terms from parameter draws at fixed observations.

    ``tau`` and ``omega`` have shape ``(n_draws,)``, ``beta`` ``(n_draws, p)``
    and ``u`` (optional) ``(n_draws, m)``.
    """
    tau = np.asarray(tau, dtype=float)[:, None]
    e = np.asarray(y)[None, :] - tau * np.asarray(w)[None, :] - np.asarray(beta) @ np.asarray(z).T
    prec = np.asarray(omega, dtype=float)[:, None] * np.asarray(k)[None, :]
    if u is not None:
        prec = prec * np.asarray(u)
    return -prec * e, -prec * np.ones_like(e)


# -- candidate grid -------------------------------------------------------------

@dataclass
class BandwidthPlan:
    """Candidate grid, selected bandwidths and the score trace of a search.

    ``candidates`` has one row per group (rows differ only when local
    clipping applied).  ``score_trace`` rows are ``(group, h, score, batch)``.
    """

    candidates: np.ndarray
    mode: str = "global"
    batch_len: int = 100
    n_warmup: int = 50
    selected: np.ndarray = None
    selected_index: np.ndarray = None
    score_trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def L(self):
        return self.candidates.shape[1]


def build_candidate_grid(dataset: Dataset, L: int = 8, p: int = 3,
                         kernel: str = "triangular", mode: str = "local") -> np.ndarray:
    """Geometric grid between the 10th and 100th percentile of pooled ``|x - c|``.

    A group's row starts instead at the smallest bandwidth leaving at least
    ``p + 1`` positive-weight observations on each side of the threshold (at
    least one per side when the group is too small for that) whenever that
    floor exceeds the first grid point; the row is then re-spaced
    geometrically from the floor so it stays strictly increasing.  In global
    mode every row uses the largest floor.  Returns an array of shape
    ``(G, L)``.
    """
    if L < 1:
        raise ValueError("need at least one candidate")
    c = dataset.threshold
    dist = np.abs(np.concatenate([g.x for g in dataset.groups]) - c)
    lo, hi = np.percentile(dist, [10, 100])
    if lo <= 0:
        positive = dist[dist > 0]
        lo = positive.min() if positive.size else 0.0
    if L == 1:
        grid = np.array([hi])
    else:
        if not (hi > lo > 0):
            raise DegenerateSupport("running variable has no spread around the threshold")
        grid = np.geomspace(lo, hi, L)
    floors = []
    for g, grp in enumerate(dataset.groups):
        f = min_bandwidth(grp.x, c, p + 1, kernel)
        if not np.isfinite(f):
            f = min_bandwidth(grp.x, c, 1, kernel)
        if not np.isfinite(f):
            raise DegenerateSupport(f"group {dataset.labels[g]} has observations on one side only")
        floors.append(f)
    floors = np.asarray(floors)
    if mode == "global":
        floors = np.full_like(floors, floors.max())
    rows = np.empty((dataset.G, L))
    for g, f in enumerate(floors):
        if f <= grid[0]:
            rows[g] = grid
        elif L == 1:
            rows[g] = max(f, hi)
        else:
            # re-space from the floor so the row stays strictly increasing
            top = hi if f < hi else f * hi / lo
            rows[g] = np.geomspace(f, top, L)
    return rows


# -- hill climb -------------------------------------------------------------------

def _evaluation_index(dataset):
    offsets = np.concatenate([[0], np.cumsum(dataset.sizes)[:-1]])
    idx, grp = [], []
    for g, group in enumerate(dataset.groups):
        local = evaluation_set(group, dataset.threshold)
        idx.append(offsets[g] + local)
        grp.append(np.full(local.size, g))
    return np.concatenate(idx), np.concatenate(grp)


def _batch_scores(sampler, eval_idx, eval_g, batch_len):
    terms = []
    for _ in range(batch_len):
        sampler.step()
        terms.append(sampler.score_terms(eval_idx, eval_g))
    scores = np.empty(sampler.G)
    if sampler.outcome_kind == "binary":
        ratio = np.array(terms)
        for g in range(sampler.G):
            scores[g] = hyvarinen_score_binary(ratio[:, eval_g == g])
    else:
        l1 = np.array([t[0] for t in terms])
        l2 = np.array([t[1] for t in terms])
        for g in range(sampler.G):
            sel = eval_g == g
            scores[g] = hyvarinen_score_continuous(l1[:, sel], l2[:, sel])
    return scores


def hill_climb(sampler, plan: BandwidthPlan) -> BandwidthPlan:
    """Run the batch search on an initialized sampler and fill in ``plan``."""
    cand = plan.candidates
    G, L = cand.shape
    rows = np.arange(G)
    idx = np.zeros(G, dtype=int)
    frozen = np.zeros(G, dtype=bool)
    prev = np.full(G, np.nan)
    eval_idx, eval_g = _evaluation_index(sampler.dataset)
    batch = 0
    if L == 1:
        frozen[:] = True
    while not frozen.all():
        sampler.set_bandwidths(cand[rows, idx])
        for _ in range(plan.n_warmup):
            sampler.step()
        scores = _batch_scores(sampler, eval_idx, eval_g, plan.batch_len)
        live = np.flatnonzero(~frozen)
        for g in live:
            plan.score_trace.append((int(g), float(cand[g, idx[g]]), float(scores[g]), batch))
        if plan.mode == "global":
            decide = np.full(G, scores.mean())
        else:
            decide = scores
        for g in live:
            if np.isnan(prev[g]) or decide[g] <= prev[g]:
                prev[g] = decide[g]
                if idx[g] == L - 1:
                    frozen[g] = True
                    msg = (f"group {sampler.dataset.labels[g]}: score still decreasing "
                           f"at the largest candidate h={cand[g, idx[g]]:.4g}")
                    if plan.mode == "global":
                        msg = (f"global score still decreasing at the largest "
                               f"candidate h={cand[g, idx[g]]:.4g}")
                    if msg not in plan.warnings:
                        plan.warnings.append(msg)
                else:
                    idx[g] += 1
            else:
                idx[g] -= 1
                frozen[g] = True
        batch += 1
    plan.selected_index = idx
    plan.selected = cand[rows, idx].copy()
    for msg in plan.warnings:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return plan


def _sampler_class(dataset):
    from .gibbs_binary import BinaryGibbs
    from .gibbs_continuous import ContinuousGibbs

    return BinaryGibbs if dataset.outcome_kind == "binary" else ContinuousGibbs


SELECT_STREAM = 1
FINAL_STREAM = 2


def select_bandwidths(dataset: Dataset, hyper: Hyperparams, mode="global", L=8,
                      batch_len=100, n_warmup=50, seed=0, candidates=None) -> BandwidthPlan:
    """Search the candidate grid with a dedicated chain and return the plan."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if candidates is None:
        candidates = build_candidate_grid(dataset, L, hyper.p, hyper.kernel, mode)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 1 and dataset.G > 1:
        candidates = np.repeat(candidates, dataset.G, axis=0)
    plan = BandwidthPlan(candidates, mode, batch_len, n_warmup)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sampler = _sampler_class(dataset)(dataset, hyper, candidates[:, 0], seed, SELECT_STREAM)
    return hill_climb(sampler, plan)


def select_local_bandwidths(dataset, hyper, **kw) -> BandwidthPlan:
    return select_bandwidths(dataset, hyper, mode="local", **kw)


def select_global_bandwidth(dataset, hyper, **kw) -> BandwidthPlan:
    return select_bandwidths(dataset, hyper, mode="global", **kw)


def fit_at_bandwidths(dataset, hyper, bandwidths, n_iter=1500, n_burn=500, seed=0) -> PosteriorDraws:
    """Final chain at fixed bandwidths (the stream used after a search)."""
    sampler = _sampler_class(dataset)(dataset, hyper, bandwidths, seed, FINAL_STREAM)
    return sampler.run(n_iter, n_burn)


def fit_adaptive(dataset, hyper, mode="global", L=8, batch_len=100, n_warmup=50,
                 n_iter=1500, n_burn=500, seed=0):
    """Select bandwidths, then rerun the full schedule at the selection."""
    plan = select_bandwidths(dataset, hyper, mode, L, batch_len, n_warmup, seed)
    draws = fit_at_bandwidths(dataset, hyper, plan.selected, n_iter, n_burn, seed)
    draws.warnings = plan.warnings + draws.warnings
    return draws, plan
