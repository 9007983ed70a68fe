"""Manufactured-solution accuracy tests for the forced PNPCH system.

The forced system adds a source ``f_m(t, x)`` to each concentration equation
and a time-dependent fixed charge so that a chosen closed-form ``(c, psi)``
is an exact solution.  Sources are obtained symbolically with sympy and
evaluated at cell centres at the new time level of every step.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy

from .grid_ops import PeriodicGrid
from .model import PnpchModel, SpeciesSet, split_steric
from .scheme import FactorCache, StepConfig, initial_state, newton_step_solve

logger = logging.getLogger(__name__)

KAPPA = 0.185
EPSILON = 0.304


@dataclass
class ManufacturedCase:
    name: str
    dim: int
    lo: float
    hi: float
    valence: tuple[int, ...]
    epsilon: tuple[float, ...]
    sigma: tuple[float, ...]
    G: np.ndarray
    kappa: float
    final_time: float
    c_exprs: list = field(repr=False)
    psi_expr: object = field(repr=False)
    source_exprs: list = field(repr=False)
    rho_f_expr: object = field(repr=False)
    symbols: tuple = field(repr=False)

    def __post_init__(self):
        t, *xs = self.symbols
        args = (t, *xs)
        self.exact_c = [sympy.lambdify(args, e, "numpy") for e in self.c_exprs]
        self.exact_psi = sympy.lambdify(args, self.psi_expr, "numpy")
        self.source = [sympy.lambdify(args, e, "numpy") for e in self.source_exprs]
        self.rho_f = sympy.lambdify(args, self.rho_f_expr, "numpy")

    def grid(self, n: int) -> PeriodicGrid:
        return PeriodicGrid(self.dim, n, self.lo, self.hi)

    def dt(self, grid: PeriodicGrid) -> float:
        return grid.h**2

    def model(self, grid: PeriodicGrid, t: float = 0.0) -> PnpchModel:
        species = SpeciesSet(self.valence, self.epsilon, self.sigma)
        return PnpchModel(grid, species, split_steric(self.G), self.kappa, self.sample(self.rho_f, grid, t))

    @staticmethod
    def sample(func: Callable, grid: PeriodicGrid, t: float) -> np.ndarray:
        return grid.sample(lambda *xs: func(t, *xs))


def _derive(name, dim, lo, hi, c_of, psi_of, G, sigma, final_time, kappa=KAPPA, epsilon=EPSILON,
            valence=(1, -1)) -> ManufacturedCase:
    t = sympy.Symbol("t", real=True)
    xs = sympy.symbols("x y z", real=True)[:dim]
    c = [f(t, *xs) for f in c_of]
    psi = psi_of(t, *xs)
    M = len(c)
    Gs = sympy.Matrix(G).applyfunc(sympy.nsimplify)
    kap = sympy.nsimplify(kappa)
    eps = sympy.nsimplify(epsilon)
    sig = [sympy.nsimplify(s) for s in sigma]

    def lap(u):
        return sum(sympy.diff(u, x, 2) for x in xs)

    sources = []
    for m in range(M):
        mu = valence[m] * psi + sympy.log(c[m]) + sum(Gs[m, n] * c[n] for n in range(M)) - sig[m] * lap(c[m])
        div_flux = sum(sympy.diff(c[m] * sympy.diff(mu, x), x) for x in xs)
        sources.append(sympy.diff(c[m], t) - eps * div_flux)
    rho_f = -kap * lap(psi) - sum(valence[m] * c[m] for m in range(M))
    return ManufacturedCase(
        name=name, dim=dim, lo=lo, hi=hi, valence=tuple(valence), epsilon=(float(epsilon),) * M,
        sigma=tuple(float(s) for s in sigma), G=np.array(G, dtype=float), kappa=float(kappa),
        final_time=final_time, c_exprs=c, psi_expr=psi, source_exprs=sources, rho_f_expr=rho_f,
        symbols=(t, *xs))


def case_1d(sigma: float = 0.01) -> ManufacturedCase:
    """``c1 = c2 = 0.1 e^-t cos(pi x) + 0.2``, ``psi = e^-t cos(pi x)`` on [-1, 1]."""
    pi, exp, cos = sympy.pi, sympy.exp, sympy.cos
    conc = lambda t, x: sympy.Rational(1, 10) * exp(-t) * cos(pi * x) + sympy.Rational(1, 5)  # noqa: E731
    return _derive("1d", 1, -1.0, 1.0, [conc, conc], lambda t, x: exp(-t) * cos(pi * x),
                   G=[[3.6, 2.6], [2.6, 0.2]], sigma=(sigma, sigma), final_time=0.0016)


def case_2d(sigma: float = 0.01) -> ManufacturedCase:
    """``c1 = c2 = 0.1 e^-20t cos(pi x/4) sin(pi y/4) + 1``, ``psi = e^-20t cos(pi x) sin(pi y/4)`` on [-4, 4]^2."""
    pi, exp, cos, sin = sympy.pi, sympy.exp, sympy.cos, sympy.sin
    conc = lambda t, x, y: (sympy.Rational(1, 10) * exp(-20 * t) * cos(pi * x / 4)  # noqa: E731
                            * sin(pi * y / 4) + 1)
    return _derive("2d", 2, -4.0, 4.0, [conc, conc], lambda t, x, y: exp(-20 * t) * cos(pi * x) * sin(pi * y / 4),
                   G=[[2.0, 1.0], [1.0, 2.0]], sigma=(sigma, sigma), final_time=0.16)


CASES = {"1d": case_1d, "2d": case_2d}

DEFAULT_ORDER_WINDOWS = {"1d": (1.95, 2.05), "2d": (1.9, 2.2)}


@dataclass
class ConvergenceRow:
    N: int
    h: float
    dt: float
    errors: dict[str, float]
    orders: dict[str, float | None]


UNKNOWNS = ("c1", "c2", "psi")


def run_forced(case: ManufacturedCase, N: int, step_config: dict | None = None) -> ConvergenceRow:
    """Run the forced scheme to ``case.final_time`` with ``dt = h^2`` and measure l-inf errors."""
    if N % 2 or N < 8:
        raise ValueError(f"N must be even and >= 8, got {N}")
    grid = case.grid(N)
    dt = case.dt(grid)
    n_steps = int(round(case.final_time / dt))
    if n_steps < 1:
        raise ValueError(f"dt = {dt:.3g} exceeds the final time {case.final_time:.3g} at N={N}")
    if not math.isclose(n_steps * dt, case.final_time, rel_tol=1e-9):
        logger.warning("final time %.6g is not a multiple of dt %.6g; stopping at %.6g",
                       case.final_time, dt, n_steps * dt)
    model = case.model(grid)
    cfg = StepConfig(dt=dt, **(step_config or {}))
    c0 = [case.sample(f, grid, 0.0) for f in case.exact_c]
    state = initial_state(c0, model, rho_f=case.sample(case.rho_f, grid, 0.0))
    cache = FactorCache()
    for _ in range(n_steps):
        t_new = state.time + dt
        source = [case.sample(f, grid, t_new) for f in case.source]
        rho = case.sample(case.rho_f, grid, t_new)
        state, _ = newton_step_solve(state, cfg, model, source=source, rho_f=rho, with_energy=False, cache=cache)
    t_end = state.time
    errors = {}
    for m, f in enumerate(case.exact_c):
        errors[f"c{m + 1}"] = float(np.max(np.abs(state.c[m] - case.sample(f, grid, t_end))))
    psi_exact = case.sample(case.exact_psi, grid, t_end)
    errors["psi"] = float(np.max(np.abs((state.psi - np.mean(state.psi)) - (psi_exact - np.mean(psi_exact)))))
    logger.info("%s N=%d errors %s", case.name, N, errors)
    return ConvergenceRow(N=N, h=grid.h, dt=dt, errors=errors, orders={k: None for k in errors})


def convergence_study(case: ManufacturedCase, N_list: Sequence[int], order_window=None, step_config=None):
    """Rows for every ``N`` plus a summary with the observed orders and a pass flag."""
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    if order_window is None:
        order_window = DEFAULT_ORDER_WINDOWS.get(case.name, (1.9, 2.1))
    rows: list[ConvergenceRow] = []
    for N in N_list:
        row = run_forced(case, N, step_config)
        if rows:
            prev = rows[-1]
            for k, e in row.errors.items():
                row.orders[k] = math.log(prev.errors[k] / e) / math.log(prev.h / row.h)
        rows.append(row)
    orders = [o for r in rows[1:] for o in r.orders.values()]
    lo, hi = order_window
    summary = {
        "order_window": (lo, hi),
        "orders": orders,
        "passed": all(lo <= o <= hi for o in orders),
    }
    return rows, summary


CSV_COLUMNS = ["N", "h", "dt", "err_c1", "order_c1", "err_c2", "order_c2", "err_psi", "order_psi"]


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            line = [r.N, repr(r.h), repr(r.dt)]
            for k in UNKNOWNS:
                order = r.orders.get(k)
                line += [f"{r.errors[k]:.6e}", "" if order is None else f"{order:.4f}"]
            writer.writerow(line)
