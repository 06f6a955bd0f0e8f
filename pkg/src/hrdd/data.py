"""Domain data model: grouped RDD data, prior constants, chain state, draws."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    DomainError,
    EmptyGroup,
    NonBinaryOutcome,
    SharpDesignViolation,
    ValidationError,
)

OUTCOME_KINDS = ("continuous", "binary")
KERNELS = ("triangular", "window")


@dataclass(frozen=True)
class GroupData:
    """Observations of one subgroup: outcome, running variable, treatment."""

    y: np.ndarray
    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("y", "x", "w"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr = arr.reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_running(cls, y, x, c: float) -> "GroupData":
        """Build a group deriving the treatment indicator as ``x >= c``."""
        x = np.asarray(x, dtype=float)
        return cls(y=y, x=x, w=(x >= c).astype(float))

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of subgroups sharing one threshold ``c``."""

    groups: tuple
    threshold: float
    outcome_kind: str = "continuous"
    labels: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "threshold", float(self.threshold))
        if self.labels is None:
            labels = tuple(str(g + 1) for g in range(len(self.groups)))
        else:
            labels = tuple(str(lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_arrays(cls, y, x, groups, threshold, outcome_kind="continuous"):
        """Split flat arrays into groups, ordered by first appearance."""
        y = np.asarray(y, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float).reshape(-1)
        groups = np.asarray(groups).reshape(-1)
        if not (y.shape == x.shape == groups.shape):
            raise ValidationError("y, x and groups must have equal length")
        _, first, inverse = np.unique(groups, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        codes = rank[inverse]
        labels = tuple(groups[first[order]].tolist())
        data = tuple(
            GroupData.from_running(y[codes == g], x[codes == g], threshold)
            for g in range(order.size)
        )
        return cls(data, threshold, outcome_kind, labels)

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.n for g in self.groups], dtype=int)

    @property
    def N(self) -> int:
        return int(self.sizes.sum())

    def concatenated(self):
        """Return flat ``(y, x, w, group_index)`` arrays in group order."""
        y = np.concatenate([g.y for g in self.groups])
        x = np.concatenate([g.x for g in self.groups])
        w = np.concatenate([g.w for g in self.groups])
        gidx = np.repeat(np.arange(self.G), self.sizes)
        return y, x, w, gidx


def validate(dataset: Dataset) -> None:
    """Check every invariant of ``dataset``; raise on the first violation.

    Group and row positions in the raised error are 1-based.
    """
    if dataset.outcome_kind not in OUTCOME_KINDS:
        raise ValidationError(f"unknown outcome kind {dataset.outcome_kind!r}")
    if dataset.G < 1:
        raise EmptyGroup("dataset has no groups")
    c = dataset.threshold
    for g, grp in enumerate(dataset.groups, start=1):
        if grp.n == 0:
            raise EmptyGroup(f"group {g} is empty", group=g)
        if not (grp.y.shape == grp.x.shape == grp.w.shape):
            raise ValidationError(f"group {g}: y, x, w lengths differ", group=g)
        bad = np.flatnonzero((grp.w != 0) & (grp.w != 1))
        if bad.size:
            raise SharpDesignViolation(
                f"group {g}, row {bad[0] + 1}: treatment must be 0/1", g, bad[0] + 1
            )
        bad = np.flatnonzero((grp.w == 1) != (grp.x >= c))
        if bad.size:
            i = bad[0] + 1
            raise SharpDesignViolation(
                f"group {g}, row {i}: w={grp.w[i - 1]:g} inconsistent with "
                f"x={grp.x[i - 1]:g} and threshold {c:g}",
                g,
                i,
            )
        if dataset.outcome_kind == "binary":
            bad = np.flatnonzero((grp.y != 0) & (grp.y != 1))
            if bad.size:
                i = bad[0] + 1
                raise NonBinaryOutcome(
                    f"group {g}, row {i}: outcome {grp.y[i - 1]:g} is not 0/1", g, i
                )
        if not (np.all(np.isfinite(grp.x)) and np.all(np.isfinite(grp.y))):
            raise ValidationError(f"group {g}: non-finite values", group=g)


@dataclass(frozen=True)
class Hyperparams:
    """Fixed prior constants and model switches.

    Gamma and inverse-gamma priors use the shape/rate parameterization.
    ``nu`` is the tail index of the outlier component of the robust mixture
    and ``epsilon`` scales the spike variance relative to the slab.
    """

    a_m: float = 0.0
    b_m: float = 1e3
    a_psi: float = 1.0
    b_psi: float = 1.0
    a_omega: float = 1.0
    b_omega: float = 1.0
    a_w: float = 0.5
    b_w: float = 0.5
    a_pi: float = 0.5
    b_pi: float = 0.5
    nu: float = 0.5
    epsilon: float = 0.01
    poly_order: int = 1
    kernel: str = "triangular"
    use_spike_slab: bool = False
    use_robust_mixture: bool = True

    def __post_init__(self):
        positive = ("b_m", "a_psi", "b_psi", "a_omega", "b_omega",
                    "a_w", "b_w", "a_pi", "b_pi", "nu", "epsilon")
        for name in positive:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        if not np.isfinite(self.a_m):
            raise DomainError("a_m must be finite")
        if self.epsilon > 1:
            raise DomainError("epsilon must not exceed 1")
        if int(self.poly_order) != self.poly_order or self.poly_order < 1:
            raise DomainError("poly_order must be a positive integer")
        if self.kernel not in KERNELS:
            raise DomainError(f"kernel must be one of {KERNELS}")

    @property
    def p(self) -> int:
        return 2 * int(self.poly_order) + 1

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes)


@dataclass
class ChainState:
    """Latent state of one Gibbs iteration.

    Per-observation latents (``u``, ``r``, ``omega_pg``) are flat arrays in
    dataset order; use :meth:`ragged` to split them by group.
    """

    tau: np.ndarray
    beta: np.ndarray
    s: np.ndarray
    pi: float
    psi_tau: float
    psi_beta: np.ndarray
    m_tau: float
    m_beta: np.ndarray
    omega: float = 1.0
    u: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    w_mix: float = 0.5
    omega_pg: Optional[np.ndarray] = None

    def copy(self) -> "ChainState":
        return ChainState(**{
            f.name: (v.copy() if isinstance(v, np.ndarray) else v)
            for f in dataclasses.fields(self)
            for v in [getattr(self, f.name)]
        })

    @staticmethod
    def ragged(values: np.ndarray, sizes: Sequence[int]) -> list:
        return np.split(values, np.cumsum(sizes)[:-1])


@dataclass
class PosteriorDraws:
    """Retained post burn-in draws and per-group effect summaries.

    ``effect`` holds the quantity summarized per group: the jump ``tau`` for
    continuous outcomes, the probability jump for binary outcomes.
    """

    tau: np.ndarray
    beta: np.ndarray
    effect: np.ndarray
    s: np.ndarray
    pi: np.ndarray
    psi_tau: np.ndarray
    psi_beta: np.ndarray
    m_tau: np.ndarray
    m_beta: np.ndarray
    omega: Optional[np.ndarray] = None
    w_mix: Optional[np.ndarray] = None
    bandwidths: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return self.tau.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.effect.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.effect.std(axis=0, ddof=1)

    def quantile(self, q) -> np.ndarray:
        # numpy's default "linear" rule interpolates between order statistics
        return np.quantile(self.effect, q, axis=0)

    def interval(self, level: float = 0.95):
        # rounded so that level=0.95 gives exactly the 0.025 / 0.975 quantiles
        alpha = round((1.0 - level) / 2.0, 12)
        return self.quantile(alpha), self.quantile(1.0 - alpha)

    def summary(self) -> dict:
        lo, hi = self.interval(0.95)
        return {"mean": self.mean, "sd": self.sd, "q025": lo, "q975": hi}
