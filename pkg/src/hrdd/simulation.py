"""Simulation data-generating processes, replication driver and metrics."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Dataset, GroupData
from .distributions import rng_stream
from .exceptions import HRDDError, LengthMismatch

logger = logging.getLogger(__name__)

TAU_SCENARIOS = ("I", "II", "III")
ERROR_SCENARIOS = ("A", "B", "C")
DEFAULT_CLUSTER_SIZES = (100, 200, 300, 400)


@dataclass(frozen=True)
class DGPConfig:
    G: int = 100
    cluster_sizes: tuple = DEFAULT_CLUSTER_SIZES
    tau_scenario: str = "I"
    error_scenario: str = "A"
    outcome: str = "continuous"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cluster_sizes", tuple(int(n) for n in self.cluster_sizes))
        if self.G < 1 or self.G % len(self.cluster_sizes):
            raise ValueError(f"G={self.G} must be a positive multiple of "
                             f"{len(self.cluster_sizes)} clusters")
        if self.tau_scenario not in TAU_SCENARIOS:
            raise ValueError(f"tau scenario must be one of {TAU_SCENARIOS}")
        if self.error_scenario not in ERROR_SCENARIOS:
            raise ValueError(f"error scenario must be one of {ERROR_SCENARIOS}")
        if self.outcome not in ("continuous", "binary"):
            raise ValueError("outcome must be 'continuous' or 'binary'")

    @classmethod
    def from_code(cls, code: str, **kw):
        """Parse a scenario code such as ``"A-II"`` (error, then effect)."""
        err, _, tau = code.strip().upper().partition("-")
        return cls(error_scenario=err, tau_scenario=tau, **kw)

    @property
    def code(self) -> str:
        return f"{self.error_scenario}-{self.tau_scenario}"

    def group_sizes(self) -> np.ndarray:
        return np.repeat(self.cluster_sizes, self.G // len(self.cluster_sizes))


def draw_effects(rng, scenario, G):
    """Group effects under scenario I (shifted gamma), II (atoms) or III."""
    if scenario == "I":
        return rng.gamma(3.0, 1.0, G) - 3.0
    comp = rng.choice(3, size=G, p=[0.4, 0.2, 0.4])
    if scenario == "II":
        return np.array([-2.0, 0.0, 2.0])[comp]
    lo = rng.uniform(-3.0, -1.0, G)
    hi = rng.uniform(1.0, 3.0, G)
    return np.select([comp == 0, comp == 1], [lo, 0.0], hi)


def draw_errors(rng, scenario, n):
    if scenario == "A":
        return rng.standard_normal(n)
    if scenario == "B":
        return rng.standard_t(3, n)
    return rng.gamma(4.0, 0.5, n) - 2.0


def error_survival(scenario, t):
    """P(eps >= t) for the error law of each scenario."""
    if scenario == "A":
        return stats.norm.sf(t)
    if scenario == "B":
        return stats.t.sf(t, 3)
    return stats.gamma.sf(t + 2.0, 4.0, scale=0.5)


def binary_effect(tau, sigma, scenario):
    """True jump in P(Y = 1) at the threshold for the thresholded latent DGP."""
    return error_survival(scenario, -np.asarray(tau) / sigma) - error_survival(scenario, 0.0)


def generate_dataset(cfg: DGPConfig):
    """Draw one dataset and its true group effects.

    Returns ``(dataset, true_effect, true_tau)``; for continuous outcomes the
    first two coincide, for binary outcomes ``true_effect`` is the jump in
    success probability.
    """
    rng = rng_stream(cfg.seed, 0)
    G = cfg.G
    sizes = cfg.group_sizes()
    tau = draw_effects(rng, cfg.tau_scenario, G)
    sigma = np.sqrt(rng.uniform(0.5, 1.2, G))
    b1 = rng.uniform(0.4, 1.4, (G, 2))
    b2 = np.column_stack([rng.uniform(3, 7, G), rng.uniform(5, 9, G)])
    b3 = np.column_stack([rng.uniform(9, 11, G), rng.uniform(3, 5, G)])
    groups = []
    for g in range(G):
        n = int(sizes[g])
        x = 2.0 * rng.beta(2.0, 4.0, n) - 1.0
        eps = draw_errors(rng, cfg.error_scenario, n)
        below = x <= 0.0
        mu = np.where(
            below,
            b1[g, 0] * x + b2[g, 0] * x ** 2 + b3[g, 0] * x ** 3,
            tau[g] + b1[g, 1] * x + b2[g, 1] * x ** 2 + b3[g, 1] * x ** 3,
        )
        y = mu + sigma[g] * eps
        if cfg.outcome == "binary":
            y = (y >= 0.0).astype(float)
        groups.append(GroupData.from_running(y, x, 0.0))
    ds = Dataset(groups, 0.0, cfg.outcome)
    if cfg.outcome == "binary":
        return ds, binary_effect(tau, sigma, cfg.error_scenario), tau
    return ds, tau.copy(), tau


# -- metrics --------------------------------------------------------------------

@dataclass
class MetricsReport:
    """RMSE / coverage / average interval length per (scenario, method)."""

    rows: list = field(default_factory=list)

    def add(self, scenario, method, rmse, cp, al, n_cells, n_excluded=0, **extra):
        self.rows.append(dict(scenario=scenario, method=method, rmse=rmse, cp=cp,
                              al=al, n_cells=n_cells, n_excluded=n_excluded, **extra))

    def get(self, method, scenario=None, **match):
        for row in self.rows:
            if row["method"] != method:
                continue
            if scenario is not None and row["scenario"] != scenario:
                continue
            if all(row.get(k) == v for k, v in match.items()):
                return row
        raise KeyError(method)

    def __getitem__(self, method):
        return self.get(method)


def compute_metrics(estimates, truths, lower, upper):
    """Return ``(rmse, coverage, average_length)`` over aligned cells."""
    est = np.asarray(estimates, dtype=float).ravel()
    tru = np.asarray(truths, dtype=float).ravel()
    lo = np.asarray(lower, dtype=float).ravel()
    hi = np.asarray(upper, dtype=float).ravel()
    if not (est.size == tru.size == lo.size == hi.size):
        raise LengthMismatch("estimates, truths and intervals must align")
    if est.size == 0:
        raise LengthMismatch("no cells to evaluate")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("interval endpoints must be finite")
    if np.any(hi < lo):
        raise ValueError("interval upper bound below lower bound")
    rmse = float(np.sqrt(np.mean((est - tru) ** 2)))
    cp = float(np.mean((lo <= tru) & (tru <= hi)))
    al = float(np.mean(hi - lo))
    return rmse, cp, al


# -- replication driver -----------------------------------------------------------

METHODS = ("hrdd-g", "hrdd-l", "srdd", "rdd")


def replication_seed(seed: int, r: int) -> int:
    """Seed of replication ``r``; depends only on ``(seed, r)``."""
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class RunSettings:
    """Sampler settings shared by the Bayesian methods of a simulation."""

    n_iter: int = 1500
    n_burn: int = 500
    L: int = 8
    batch_len: int = 100
    n_warmup: int = 50
    level: float = 0.95
    hyper: object = None


def _hrdd_cells(ds, mode, seed, st: RunSettings):
    import warnings

    from .bandwidth import fit_adaptive
    from .data import Hyperparams

    hyper = st.hyper if st.hyper is not None else Hyperparams()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        draws, _ = fit_adaptive(ds, hyper, mode=mode, L=st.L, batch_len=st.batch_len,
                                n_warmup=st.n_warmup, n_iter=st.n_iter,
                                n_burn=st.n_burn, seed=seed)
    lo, hi = draws.interval(st.level)
    return draws.mean, lo, hi


def _srdd_cells(ds):
    from .baseline import baseline_bandwidth, fit_separate_wls

    G = ds.G
    est, lo, hi = (np.full(G, np.nan) for _ in range(3))
    for g, grp in enumerate(ds.groups):
        try:
            h = baseline_bandwidth(grp, ds.threshold)
            e = fit_separate_wls(grp, ds.threshold, h)
        except HRDDError as exc:
            logger.debug("srdd failed on group %d: %s", g, exc)
            continue
        if np.isfinite(e.se):
            est[g], lo[g], hi[g] = e.tau_hat, e.ci_low, e.ci_high
    return est, lo, hi


def _rdd_cells(ds):
    from .baseline import fit_pooled

    e = fit_pooled(ds)
    G = ds.G
    return np.full(G, e.tau_hat), np.full(G, e.ci_low), np.full(G, e.ci_high)


def run_one_replication(cfg: DGPConfig, methods, r: int, settings: RunSettings):
    """Generate replication ``r`` and fit each method.

    Returns ``(truth, {method: (est, lo, hi)})``; cells of failed fits are NaN.
    """
    seed = replication_seed(cfg.seed, r)
    ds, truth, _ = generate_dataset(_replace_seed(cfg, seed))
    out = {}
    for m in methods:
        try:
            if m == "hrdd-g":
                cells = _hrdd_cells(ds, "global", seed, settings)
            elif m == "hrdd-l":
                cells = _hrdd_cells(ds, "local", seed, settings)
            elif m == "srdd":
                cells = _srdd_cells(ds)
            elif m == "rdd":
                cells = _rdd_cells(ds)
            else:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
        except HRDDError as exc:
            logger.warning("replication %d, method %s failed: %s", r, m, exc)
            cells = tuple(np.full(ds.G, np.nan) for _ in range(3))
        out[m] = tuple(np.asarray(c, dtype=float) for c in cells)
    return truth, out


def _replace_seed(cfg, seed):
    return DGPConfig(cfg.G, cfg.cluster_sizes, cfg.tau_scenario, cfg.error_scenario,
                     cfg.outcome, seed)


def _job(args):
    return run_one_replication(*args)


def default_threads() -> int:
    """Worker count from ``HRDD_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HRDD_THREADS", "1")))
    except ValueError:
        return 1


def run_replications(cfg: DGPConfig, methods=("hrdd-g", "srdd"), R: int = 200,
                     settings: RunSettings = None, threads: int = None,
                     report: MetricsReport = None, return_cells: bool = False):
    """Monte Carlo study of ``methods`` on ``R`` seeded replications of ``cfg``.

    Replications are independent jobs; results are reduced in replication
    order so the report does not depend on ``threads``.  Cells where a method
    failed are dropped from its metrics and counted in ``n_excluded``.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    settings = RunSettings() if settings is None else settings
    threads = default_threads() if threads is None else max(1, int(threads))
    jobs = [(cfg, tuple(methods), r, settings) for r in range(R)]
    if threads == 1:
        results = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_job, jobs))
    report = MetricsReport() if report is None else report
    cells = {}
    truth = np.concatenate([t for t, _ in results])
    for m in methods:
        est, lo, hi = (np.concatenate([res[m][j] for _, res in results]) for j in range(3))
        ok = np.isfinite(est) & np.isfinite(lo) & np.isfinite(hi)
        n_bad = int((~ok).sum())
        if ok.any():
            rmse, cp, al = compute_metrics(est[ok], truth[ok], lo[ok], hi[ok])
        else:
            rmse = cp = al = float("nan")
        report.add(cfg.code, m, rmse, cp, al, int(ok.sum()), n_bad,
                   outcome=cfg.outcome, G=cfg.G, R=R,
                   n_g=",".join(str(n) for n in cfg.cluster_sizes))
        cells[m] = (est, lo, hi)
    if return_cells:
        return report, truth, cells
    return report


def write_metrics_csv(report: MetricsReport, path) -> None:
    """Write the metrics table with reals at 17 significant digits."""
    import csv

    cols = ["scenario", "outcome", "n_g", "G", "R", "method", "rmse", "cp", "al",
            "n_cells", "n_excluded"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for row in report.rows:
            wr.writerow([f"{row.get(c):.17g}" if isinstance(row.get(c), float) else row.get(c, "")
                         for c in cols])
