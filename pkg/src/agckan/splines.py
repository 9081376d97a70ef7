"""Uniform B-spline grids with Cox-de Boor evaluation.

A grid spans [lo, hi] with G intervals and order (degree) k, extended by
k uniform knots past each end, giving G + k basis functions.  Inside
[lo, hi] the basis is the standard one; outside, each basis function is
continued linearly from the boundary using its one-sided derivative, so
any spline built on the grid extrapolates linearly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass
class SplineGrid:
    lo: float = -3.0
    hi: float = 3.0
    num_intervals: int = 5   # G
    order: int = 3           # k (polynomial degree)
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidArgumentError("grid needs lo < hi")
        if self.num_intervals < 1 or self.order < 0:
            raise InvalidArgumentError("grid needs G >= 1 and order >= 0")
        g, k = self.num_intervals, self.order
        h = (self.hi - self.lo) / g
        self.knots = self.lo + h * np.arange(-k, g + k + 1)

    @property
    def n_basis(self):
        return self.num_intervals + self.order

    def _basis_inside(self, x):
        """Cox-de Boor recursion; x must lie within [lo, hi]. Shape (n, G+k)."""
        t = self.knots
        x = np.asarray(x, dtype=np.float64)
        # Degree-0 indicators over all knot spans.
        b = ((x[:, None] >= t[None, :-1]) & (x[:, None] < t[None, 1:])).astype(np.float64)
        # Right-closed top span so x == hi is covered (and does not leak
        # into the extension spans past hi).
        top = self.num_intervals + self.order - 1
        b[:, top] = np.where(x == t[top + 1], 1.0, b[:, top])
        b[:, top + 1:] = 0.0
        for d in range(1, self.order + 1):
            left = (x[:, None] - t[None, :-d - 1]) / (t[None, d:-1] - t[None, :-d - 1])
            right = (t[None, d + 1:] - x[:, None]) / (t[None, d + 1:] - t[None, 1:-d])
            b = left * b[:, :-1] + right * b[:, 1:]
        return b

    def _deriv_inside(self, x):
        """First derivative of each order-k basis function at interior x."""
        t = self.knots
        k = self.order
        x = np.asarray(x, dtype=np.float64)
        if k == 0:
            return np.zeros((x.size, self.n_basis))
        # Evaluate degree k-1 bases on the same knot vector.
        b = ((x[:, None] >= t[None, :-1]) & (x[:, None] < t[None, 1:])).astype(np.float64)
        top = self.num_intervals + self.order - 1
        b[:, top] = np.where(x == t[top + 1], 1.0, b[:, top])
        b[:, top + 1:] = 0.0
        for d in range(1, k):
            left = (x[:, None] - t[None, :-d - 1]) / (t[None, d:-1] - t[None, :-d - 1])
            right = (t[None, d + 1:] - x[:, None]) / (t[None, d + 1:] - t[None, 1:-d])
            b = left * b[:, :-1] + right * b[:, 1:]
        # b now holds the degree k-1 bases B_{i,k-1}, i = 0..G+2k-k
        n = self.n_basis
        d1 = k / (t[k:k + n] - t[:n])
        d2 = k / (t[k + 1:k + n + 1] - t[1:n + 1])
        db = d1[None, :] * b[:, :n] - d2[None, :] * b[:, 1:n + 1]
        return db

    def basis(self, x):
        """Basis values at x (scalar or 1-D array), linear beyond [lo, hi].

        Returns shape (G+k,) for scalar input, else (len(x), G+k).
        """
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.empty((xs.size, self.n_basis))
        inside = (xs >= self.lo) & (xs <= self.hi)
        if inside.any():
            out[inside] = self._basis_inside(xs[inside])
        lo_mask = xs < self.lo
        if lo_mask.any():
            b0 = self._basis_inside(np.array([self.lo]))
            db0 = self._deriv_inside(np.array([self.lo]))
            out[lo_mask] = b0 + (xs[lo_mask, None] - self.lo) * db0
        hi_mask = xs > self.hi
        if hi_mask.any():
            b1 = self._basis_inside(np.array([self.hi]))
            db1 = self._deriv_inside(np.array([self.hi]))
            out[hi_mask] = b1 + (xs[hi_mask, None] - self.hi) * db1
        return out[0] if scalar else out

    def basis_deriv(self, x):
        """d/dx of each basis function, constant beyond [lo, hi]."""
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.empty((xs.size, self.n_basis))
        inside = (xs >= self.lo) & (xs <= self.hi)
        if inside.any():
            out[inside] = self._deriv_inside(xs[inside])
        lo_mask = xs < self.lo
        if lo_mask.any():
            out[lo_mask] = self._deriv_inside(np.array([self.lo]))
        hi_mask = xs > self.hi
        if hi_mask.any():
            out[hi_mask] = self._deriv_inside(np.array([self.hi]))
        return out[0] if scalar else out

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi,
                "num_intervals": self.num_intervals, "order": self.order}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def bspline_basis(x, grid: SplineGrid):
    """Vector of all G+k order-k basis values at x."""
    return grid.basis(x)


def fit_coefficients(grid: SplineGrid, xs, ys):
    """Least-squares spline coefficients so that basis(xs) @ c ~= ys."""
    a = grid.basis(np.asarray(xs, dtype=np.float64))
    coef, *_ = np.linalg.lstsq(a, np.asarray(ys, dtype=np.float64), rcond=None)
    return coef
