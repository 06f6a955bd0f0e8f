"""Kernel weights and local polynomial design rows around the threshold."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


def kernel_weight(x, c, h, kernel="triangular"):
    """Weight ``K(|x - c| / h)`` for the triangular or window kernel.

    Works elementwise on arrays.  Both kernels vanish outside ``|x - c| > h``;
    the triangular kernel also vanishes on the boundary itself.
    """
    h = np.asarray(h, dtype=float)
    if np.any(~(h > 0)):
        raise DomainError("bandwidth must be positive")
    t = np.abs(np.asarray(x, dtype=float) - c) / h
    if kernel == "triangular":
        return np.maximum(1.0 - t, 0.0)
    if kernel == "window":
        return (t <= 1.0).astype(float)
    raise DomainError(f"unknown kernel {kernel!r}")


def design_row(x, c, q=1):
    """Local polynomial regressors ``(1, d-, d+, ..., d-^q, d+^q)`` with d = x - c.

    ``d-`` is ``min(d, 0)`` (signed, so control-side slopes keep their natural
    sign) and ``d+`` is ``max(d, 0)``.  Accepts a scalar or a 1-d array and
    returns shape ``(2q + 1,)`` or ``(n, 2q + 1)`` respectively.
    """
    if q < 1:
        raise DomainError("polynomial order must be >= 1")
    d = np.asarray(x, dtype=float) - c
    neg = np.minimum(d, 0.0)
    pos = np.maximum(d, 0.0)
    cols = [np.ones_like(d)]
    for j in range(1, q + 1):
        cols.append(neg ** j)
        cols.append(pos ** j)
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class DesignMatrix:
    """Design rows and kernel weights of one group at bandwidth ``h``."""

    z: np.ndarray
    k: np.ndarray
    h: float

    @classmethod
    def build(cls, x, c, h, q=1, kernel="triangular"):
        return cls(design_row(x, c, q), kernel_weight(x, c, h, kernel), float(h))

    @property
    def p(self) -> int:
        return self.z.shape[1]


def active_counts(x, c, h, kernel="triangular"):
    """Number of observations with positive weight below and at/above ``c``."""
    k = kernel_weight(x, c, h, kernel)
    x = np.asarray(x)
    return int(np.sum((k > 0) & (x < c))), int(np.sum((k > 0) & (x >= c)))


def min_bandwidth(x, c, n_side, kernel="triangular"):
    """Smallest bandwidth leaving ``n_side`` positive-weight points on each side.

    Returns ``inf`` when either side has fewer than ``n_side`` points.  For
    the triangular kernel the weight is zero at distance exactly ``h``, so the
    bound is nudged just past the ``n_side``-th distance.
    """
    x = np.asarray(x, dtype=float)
    out = 0.0
    for side in (x < c, x >= c):
        d = np.sort(np.abs(x[side] - c))
        if d.size < n_side:
            return np.inf
        out = max(out, d[n_side - 1])
    if kernel == "triangular":
        out = np.nextafter(out, np.inf) * (1 + 1e-9) + 1e-12
    return out if out > 0 else 1e-12
