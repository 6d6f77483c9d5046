"""Uniform symmetric grids and finite-difference operators."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import GridError


def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for derivatives 0..m at ``z`` from nodes ``x``.

    Returns an array of shape ``(len(x), m + 1)``; column ``k`` holds the
    weights of the k-th derivative.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def diff_matrix(n: int, h: float, deriv: int, order: int = 4) -> sparse.csr_matrix:
    """Sparse derivative matrix on ``n`` uniform points.

    Interior rows use centered stencils of the requested accuracy; rows too
    close to either end use one-sided stencils with the same node count.
    """
    width = order + deriv - 1
    width += 1 - width % 2
    half = width // 2
    if n < width + 1:
        raise GridError(f"grid of {n} points too coarse for a {width}-point stencil")
    rows, cols, vals = [], [], []
    offsets = np.arange(-half, half + 1)
    centered = fd_weights(0.0, offsets.astype(float), deriv)[:, deriv] / h**deriv
    # one-sided closures: one extra node keeps the accuracy of the centered rule
    edge_width = width + 1
    for i in range(n):
        if half <= i < n - half:
            idx = i + offsets
            w = centered
        else:
            start = 0 if i < half else n - edge_width
            idx = np.arange(start, start + edge_width)
            w = fd_weights(float(i), idx.astype(float), deriv)[:, deriv] / h**deriv
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class GridSpec:
    """Symmetric grid ``x_j = -L + j h`` with ``x = 0`` on a node."""

    half_width: float
    spacing: float

    def __post_init__(self):
        if self.half_width <= 0 or self.spacing <= 0:
            raise GridError("half_width and spacing must be positive")
        ratio = self.half_width / self.spacing
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise GridError("half_width must be an integer multiple of spacing")

    @classmethod
    def from_points(cls, half_width: float, n: int) -> "GridSpec":
        if n % 2 == 0:
            raise GridError("use an odd point count so that x = 0 is a node")
        return cls(half_width, 2.0 * half_width / (n - 1))

    @property
    def n(self) -> int:
        return 2 * int(round(self.half_width / self.spacing)) + 1

    @property
    def center(self) -> int:
        return self.n // 2

    @cached_property
    def x(self) -> np.ndarray:
        m = self.n // 2
        return self.spacing * np.arange(-m, m + 1, dtype=float)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.half_width, self.spacing / factor)

    def d1(self, order: int = 4) -> sparse.csr_matrix:
        return diff_matrix(self.n, self.spacing, 1, order)

    def d2(self, order: int = 4) -> sparse.csr_matrix:
        return diff_matrix(self.n, self.spacing, 2, order)


def derivative(f: np.ndarray, h: float, deriv: int = 1, order: int = 4) -> np.ndarray:
    """Apply :func:`diff_matrix` to a (real or complex) sampled field."""
    return diff_matrix(len(f), h, deriv, order) @ f


def interior_mask(n: int, band: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[band:n - band] = True
    return mask
