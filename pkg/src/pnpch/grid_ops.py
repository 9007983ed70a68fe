"""Periodic cell-centred grids and the staggered finite-difference operators.

Cell fields are numpy arrays of shape ``grid.shape`` (row-major, periodic in
every axis).  Edge fields are tuples with one array per axis; entry ``i`` of
the axis-``a`` array holds the value at the face ``i + 1/2`` along ``a``.

Operators::

    D_a u(i+1/2) = (u(i+1) - u(i)) / h          (grad_h)
    d_a f(i)     = (f(i+1/2) - f(i-1/2)) / h    (div_h)
    A_a c(i+1/2) = (c(i+1) + c(i)) / 2          (edge_average)

Periodic wrap is done with ``np.roll``; there are no ghost layers.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on the cuboid ``[lo, hi]^dim`` with ``n`` cells per axis."""

    dim: int
    n: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.hi > self.lo:
            raise ValueError(f"empty domain [{self.lo}, {self.hi}]")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def volume(self) -> float:
        return (self.hi - self.lo) ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def centers(self) -> np.ndarray:
        """1D array of cell-centre coordinates ``lo + (i - 1/2) h``, i = 1..n."""
        return self.lo + (np.arange(self.n) + 0.5) * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcast coordinate arrays (``indexing='ij'``), one per axis."""
        return tuple(np.meshgrid(*([self.centers] * self.dim), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def edge_full(self, value: float) -> tuple[np.ndarray, ...]:
        return tuple(self.full(value) for _ in range(self.dim))

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(*coords)`` at cell centres."""
        return np.broadcast_to(np.asarray(func(*self.coords()), dtype=float), self.shape).copy()


def _axes(u):
    return range(np.ndim(u))


def grad_h(u, h):
    """Forward-difference gradient, cell field -> edge field."""
    return tuple((np.roll(u, -1, axis=a) - u) / h for a in _axes(u))


def div_h(f, h):
    """Backward-difference divergence, edge field -> cell field."""
    out = np.zeros_like(f[0])
    for a, fa in enumerate(f):
        out += (fa - np.roll(fa, 1, axis=a)) / h
    return out


def laplace_h(u, h):
    """Standard ``2 dim + 1`` point periodic Laplacian."""
    out = -2.0 * np.ndim(u) * u
    for a in _axes(u):
        out = out + np.roll(u, -1, axis=a) + np.roll(u, 1, axis=a)
    return out / (h * h)


def edge_average(c):
    """Arithmetic face average ``(c(i+1) + c(i)) / 2`` per axis."""
    return tuple(0.5 * (np.roll(c, -1, axis=a) + c) for a in _axes(c))


def div_coeff_grad(D, u, h):
    """``div_h(D * grad_h(u))`` for an edge coefficient ``D``."""
    return div_h(tuple(Da * ga for Da, ga in zip(D, grad_h(u, h))), h)


def mean(u, grid: PeriodicGrid) -> float:
    # np.sum reduces pairwise, which keeps mass bookkeeping at round-off level
    return float(np.sum(u)) * grid.cell_volume / grid.volume


def inner(u, w, grid: PeriodicGrid) -> float:
    return grid.cell_volume * float(np.sum(u * w))


def edge_inner(f, g, grid: PeriodicGrid) -> float:
    # <a_x(f g), 1> reduces to a plain sum over faces on a periodic grid
    return grid.cell_volume * sum(float(np.sum(fa * ga)) for fa, ga in zip(f, g))


def norms(u, grid: PeriodicGrid) -> dict[str, float]:
    """Discrete l1, l2, l-inf, H1_h and H2_h norms."""
    h = grid.h
    l2sq = inner(u, u, grid)
    grad = grad_h(u, h)
    grad_sq = edge_inner(grad, grad, grid)
    lap = laplace_h(u, h)
    lap_sq = inner(lap, lap, grid)
    return {
        "l1": grid.cell_volume * float(np.sum(np.abs(u))),
        "l2": np.sqrt(l2sq),
        "linf": float(np.max(np.abs(u))),
        "grad_l2": np.sqrt(grad_sq),
        "h1": np.sqrt(l2sq + grad_sq),
        "h2": np.sqrt(l2sq + grad_sq + lap_sq),
    }


# Sparse assembly (row-major flattening), used by the Newton linear solves.

def _periodic_forward_1d(n: int, h: float) -> sp.csr_matrix:
    if n == 1:
        return sp.csr_matrix((1, 1))
    shift = sp.diags([np.ones(n - 1), np.ones(1)], [1, -(n - 1)], shape=(n, n))
    return ((shift - sp.identity(n)) / h).tocsr()


@lru_cache(maxsize=32)
def difference_matrices(grid: PeriodicGrid) -> tuple[sp.csr_matrix, ...]:
    """Sparse ``D_a`` (cell -> face) per axis; ``d_a = -D_a^T``."""
    n, d = grid.n, grid.dim
    S = _periodic_forward_1d(n, grid.h)
    mats = []
    for a in range(d):
        left = sp.identity(n**a, format="csr")
        right = sp.identity(n ** (d - a - 1), format="csr")
        mats.append(sp.kron(sp.kron(left, S), right, format="csr"))
    return tuple(mats)


def div_coeff_grad_matrix(D, grid: PeriodicGrid) -> sp.csr_matrix:
    """Sparse matrix of ``u -> div_coeff_grad(D, u)``; symmetric negative semi-definite."""
    out = sp.csr_matrix((grid.size, grid.size))
    for Da, Dm in zip(D, difference_matrices(grid)):
        out = out - Dm.T @ sp.diags(np.ravel(Da)) @ Dm
    return out.tocsr()


@lru_cache(maxsize=32)
def laplace_matrix(grid: PeriodicGrid) -> sp.csr_matrix:
    return div_coeff_grad_matrix(grid.edge_full(1.0), grid)
