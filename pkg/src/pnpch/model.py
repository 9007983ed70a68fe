"""Physical description of a PNPCH system: species, steric splitting, charges, initial data."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.constants as const

from .errors import AmplitudeTooLarge, LineOffGrid, NotSymmetric
from .grid_ops import PeriodicGrid, mean

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpeciesSet:
    """Dimensionless per-species coefficients.

    ``epsilon`` multiplies the mobility term, ``sigma`` is the gradient-energy
    coefficient, and ``v`` the entropy scale that only enters the reported energy.
    """

    valence: tuple[int, ...]
    epsilon: tuple[float, ...]
    sigma: tuple[float, ...]
    v: float = 1.0

    def __post_init__(self):
        M = len(self.valence)
        if M < 1:
            raise ValueError("at least one species is required")
        if len(self.epsilon) != M or len(self.sigma) != M:
            raise ValueError("valence, epsilon and sigma must have one entry per species")
        if any(not e > 0 for e in self.epsilon):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if any(s < 0 for s in self.sigma):
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not self.v > 0:
            raise ValueError(f"v must be positive, got {self.v}")

    @property
    def M(self) -> int:
        return len(self.valence)


@dataclass(frozen=True)
class StericSplit:
    """``G = Gc - Ge`` with ``Gc = lam I + G`` and ``Ge = lam I``."""

    G: np.ndarray
    Gc: np.ndarray
    Ge: np.ndarray
    lam: float


@dataclass(frozen=True)
class PhysicalInputs:
    """Dimensional inputs; concentrations in mol/L, lengths in nm, diffusivities in nm^2/ns."""

    c0: float = 1.0
    L: float = 1.0
    D0: float = 1.0
    D: tuple[float, ...] = (1.0, 1.0)
    eps_r: float = 78.0
    T: float = 300.0

    def __post_init__(self):
        vals = [self.c0, self.L, self.D0, *self.D, self.eps_r, self.T]
        if any(not x > 0 for x in vals):
            raise ValueError("physical inputs must all be positive")


class Nondimensional(NamedTuple):
    kappa: float
    epsilon: tuple[float, ...]
    debye_length: float  # nm


def nondimensionalize(p: PhysicalInputs) -> Nondimensional:
    """Debye length, dielectric coefficient ``kappa`` and mobility prefactors ``epsilon^m``."""
    n0 = p.c0 * 1e3 * const.N_A  # number density, 1/m^3
    beta = 1.0 / (const.k * p.T)
    lam_d = math.sqrt(const.epsilon_0 * p.eps_r / (2.0 * const.e**2 * n0 * beta)) * 1e9
    kappa = 2.0 * lam_d**2 / p.L**2
    eps = tuple(lam_d / p.L * Dm / p.D0 for Dm in p.D)
    return Nondimensional(kappa, eps, lam_d)


def _symmetric_eigvals(A: np.ndarray) -> np.ndarray:
    if A.shape == (1, 1):
        return A.ravel().copy()
    if A.shape == (2, 2):
        mid = 0.5 * (A[0, 0] + A[1, 1])
        rad = math.hypot(0.5 * (A[0, 0] - A[1, 1]), A[0, 1])
        return np.array([mid - rad, mid + rad])
    return np.linalg.eigvalsh(A)


def split_steric(G, sym_tol: float = 1e-12) -> StericSplit:
    """Convex splitting of the steric matrix with the smallest non-negative shift.

    ``lam = max(0, -lambda_min(G))``, so ``lam I + G`` and ``lam I`` are both
    positive semi-definite.

    Raises
    ------
    NotSymmetric
        If ``G`` deviates from its transpose by more than ``sym_tol`` (relative).
    """
    G = np.array(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise NotSymmetric(f"steric matrix must be square, got shape {G.shape}")
    scale = max(1.0, float(np.max(np.abs(G)))) if G.size else 1.0
    if np.max(np.abs(G - G.T), initial=0.0) > sym_tol * scale:
        raise NotSymmetric("steric matrix is not symmetric")
    G = 0.5 * (G + G.T)
    lam = max(0.0, -float(np.min(_symmetric_eigvals(G))))
    eye = np.eye(G.shape[0])
    return StericSplit(G=G, Gc=G + lam * eye, Ge=lam * eye, lam=lam)


@dataclass(frozen=True)
class PnpchModel:
    """Everything the time stepper needs apart from the state and step settings."""

    grid: PeriodicGrid
    species: SpeciesSet
    split: StericSplit
    kappa: float
    rho_f: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.split.G.shape != (self.species.M, self.species.M):
            raise ValueError("steric matrix size does not match the species count")
        if np.shape(self.rho_f) != self.grid.shape:
            raise ValueError("fixed charge does not match the grid shape")

    @property
    def kappa_edges(self):
        return self.grid.edge_full(self.kappa)


class NeutralityCheck(NamedTuple):
    ok: bool
    residual: float


def check_neutrality(species: SpeciesSet, c_init: Sequence[np.ndarray], rho_f, grid: PeriodicGrid,
                     tol: float = 1e-10) -> NeutralityCheck:
    """Discrete neutrality ``mean(rho_f) + sum_m z^m mean(c^m)``."""
    r = mean(rho_f, grid) + sum(z * mean(c, grid) for z, c in zip(species.valence, c_init))
    return NeutralityCheck(abs(r) <= tol, r)


# Fixed charges

@dataclass(frozen=True)
class ZeroCharge:
    pass


@dataclass(frozen=True)
class GaussianPair:
    """``A [exp(-w (x - x_plus)^2) - exp(-w (x - x_minus)^2)]`` along the first axis."""

    amplitude: float = 5.0
    width: float = 5.0
    positive_center: float = 0.5
    negative_center: float = -0.5


@dataclass(frozen=True)
class LinePair:
    """Two charged planes normal to the first axis, surface densities ``-q`` and ``+q``."""

    surface_density: float = 0.5
    negative_x: float = -1.5
    positive_x: float = 1.5


@dataclass(frozen=True)
class SampledCharge:
    values: np.ndarray


def _nearest_column(grid: PeriodicGrid, x: float) -> int:
    s = (x - grid.lo) / grid.h - 0.5
    frac = s - math.floor(s)
    if abs(frac - 0.5) < 1e-9:
        i = math.floor(s)  # halfway between centres: take the smaller coordinate
    else:
        i = int(round(s))
    return i % grid.n


def make_fixed_charge(spec, grid: PeriodicGrid) -> np.ndarray:
    if isinstance(spec, ZeroCharge):
        return grid.zeros()
    if isinstance(spec, GaussianPair):
        x = grid.coords()[0]
        return spec.amplitude * (np.exp(-spec.width * (x - spec.positive_center) ** 2)
                                 - np.exp(-spec.width * (x - spec.negative_center) ** 2))
    if isinstance(spec, LinePair):
        i_neg = _nearest_column(grid, spec.negative_x)
        i_pos = _nearest_column(grid, spec.positive_x)
        if i_neg == i_pos:
            raise LineOffGrid(f"both lines fall into column {i_neg}")
        rho = grid.zeros()
        value = spec.surface_density / grid.h
        rho[i_neg, ...] = -value
        rho[i_pos, ...] = value
        return rho
    if isinstance(spec, SampledCharge):
        values = np.asarray(spec.values, dtype=float)
        if values.shape != grid.shape:
            values = values.reshape(grid.shape)
        return values.copy()
    raise TypeError(f"unknown charge spec {spec!r}")


# Initial conditions

@dataclass(frozen=True)
class UniformInit:
    values: tuple[float, ...]


@dataclass(frozen=True)
class RandomInit:
    """I.i.d. uniform perturbations of amplitude ``amplitude`` around per-species means."""

    means: tuple[float, ...]
    amplitude: float
    seed: int = 0


@dataclass(frozen=True)
class SampledInit:
    values: tuple


def make_initial_condition(spec, grid: PeriodicGrid, species: SpeciesSet) -> list[np.ndarray]:
    M = species.M
    if isinstance(spec, UniformInit):
        if len(spec.values) != M:
            raise ValueError(f"expected {M} initial values, got {len(spec.values)}")
        return [grid.full(v) for v in spec.values]
    if isinstance(spec, RandomInit):
        if len(spec.means) != M:
            raise ValueError(f"expected {M} means, got {len(spec.means)}")
        rng = np.random.default_rng(spec.seed)
        fields = []
        for m in spec.means:
            if spec.amplitude >= m:
                raise AmplitudeTooLarge(f"amplitude {spec.amplitude} >= mean {m} would allow c <= 0")
            pert = rng.uniform(-spec.amplitude, spec.amplitude, size=grid.shape)
            pert -= np.mean(pert)
            peak = float(np.max(np.abs(pert)))
            if peak > spec.amplitude:
                pert *= spec.amplitude / peak
            fields.append(m + pert)
        return fields
    if isinstance(spec, SampledInit):
        return [np.asarray(v, dtype=float).reshape(grid.shape).copy() for v in spec.values]
    raise TypeError(f"unknown initial-condition spec {spec!r}")
