"""Semi-implicit convex-splitting time step for the PNPCH system.

One step maps ``c^l`` to ``c^{l+1}`` by solving, for every species ``m``::

    (c^{m,l+1} - c^{m,l}) / dt = eps^m div_h(A c^{m,l} grad_h mu^{m,l+1})
    mu^{m,l+1} = z^m psi^{l+1} + log c^{m,l+1} + sum_n Gc[m,n] c^{n,l+1}
                 - sigma^m lap_h c^{m,l+1} - sum_n Ge[m,n] c^{n,l}
    -div_h(kappa grad_h psi^{l+1}) = sum_m z^m c^{m,l+1} + rho_f

with Newton's method on the stacked unknowns ``(c, mu, psi)``.  The mobility
``A c^{m,l}`` is the face average of the previous concentration, so the flux
operator is linear in ``mu`` and fixed during the Newton loop.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elliptic import EllipticProblem, hminus1_inner, solve_zero_mean
from .errors import (InvariantViolation, LinearSolveFailed, NewtonDiverged, NonPositiveConcentration,
                     PositivityLost)
from .grid_ops import (div_coeff_grad, div_coeff_grad_matrix, edge_average, edge_inner, grad_h, inner,
                       laplace_h, laplace_matrix, mean)
from .model import PnpchModel, SpeciesSet, StericSplit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemState:
    time: float
    step_index: int
    c: tuple[np.ndarray, ...]
    psi: np.ndarray
    mu: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class StepConfig:
    dt: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    linear_tol: float = 1e-8
    linear_max_iter: int = 500
    damping_safety: float = 0.9
    min_step_fraction: float = 1e-10
    # "direct" (sparse LU each iteration), "lu-gmres" (GMRES preconditioned by a reused LU),
    # "gmres" (ILU-preconditioned) or "auto" (direct in 1D, lu-gmres in 2D, gmres in 3D)
    linear_solver: str = "auto"
    # "additive" (fraction-to-the-boundary damping) or "log" (multiplicative update of c)
    newton_update: str = "additive"
    # lu-gmres refactors once GMRES needs more iterations than this
    refactor_iterations: int = 20

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.damping_safety < 1:
            raise ValueError(f"damping_safety must lie in (0, 1), got {self.damping_safety}")
        if self.linear_solver not in ("auto", "direct", "lu-gmres", "gmres"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if self.newton_update not in ("additive", "log"):
            raise ValueError(f"unknown Newton update {self.newton_update!r}")


@dataclass
class StepReport:
    newton_iterations: int
    final_residual: float
    damping_activations: int
    energy_before: float | None = None
    energy_after: float | None = None
    mass_drift: list[float] = field(default_factory=list)
    min_concentration: list[float] = field(default_factory=list)


class Energy(NamedTuple):
    total: float
    electrostatic: float
    entropy: float
    steric: float
    gradient: float


class Residual(NamedTuple):
    mass: list[np.ndarray]       # concentration equations
    chemical: list[np.ndarray]   # chemical-potential definitions
    poisson: np.ndarray

    def max_abs(self) -> float:
        blocks = [*self.mass, *self.chemical, self.poisson]
        return max(float(np.max(np.abs(b))) for b in blocks)


def _require_positive(c_list):
    for m, c in enumerate(c_list):
        cmin = float(np.min(c))
        if not cmin > 0:
            raise NonPositiveConcentration(f"species {m + 1} has minimum concentration {cmin:.3e}")


def chemical_potential_semi_implicit(c_new, c_old, psi_new, species: SpeciesSet, split: StericSplit, h: float):
    """Chemical potentials with the convex steric part implicit and the concave part explicit."""
    _require_positive(c_new)
    mu = []
    for m in range(species.M):
        val = species.valence[m] * psi_new + np.log(c_new[m])
        for n in range(species.M):
            if split.Gc[m, n] != 0.0:
                val = val + split.Gc[m, n] * c_new[n]
            if split.Ge[m, n] != 0.0:
                val = val - split.Ge[m, n] * c_old[n]
        if species.sigma[m] != 0.0:
            val = val - species.sigma[m] * laplace_h(c_new[m], h)
        mu.append(val)
    return mu


def residual(state_old: SystemState, c_new, mu_new, psi_new, cfg: StepConfig, model: PnpchModel,
             source=None, rho_f=None) -> Residual:
    """Residual of the discrete system at a candidate ``(c_new, mu_new, psi_new)``.

    ``source`` (one cell field per species) is added to the right side of the
    concentration equations and ``rho_f`` overrides the model's fixed charge;
    both are only used by manufactured-solution runs.
    """
    h = model.grid.h
    sp_ = model.species
    rho = model.rho_f if rho_f is None else rho_f
    mu_def = chemical_potential_semi_implicit(c_new, state_old.c, psi_new, sp_, model.split, h)
    F1, F2 = [], []
    for m in range(sp_.M):
        mobility = edge_average(state_old.c[m])
        r = (c_new[m] - state_old.c[m]) / cfg.dt - sp_.epsilon[m] * div_coeff_grad(mobility, mu_new[m], h)
        if source is not None:
            r = r - source[m]
        F1.append(r)
        F2.append(mu_new[m] - mu_def[m])
    charge = sum(z * c for z, c in zip(sp_.valence, c_new)) + rho
    F3 = -model.kappa * laplace_h(psi_new, h) - charge
    return Residual(F1, F2, F3)


def _pack(c, mu, psi):
    return np.concatenate([np.ravel(x) for x in (*c, *mu, psi)])


def _unpack(x, M, shape):
    size = int(np.prod(shape))
    parts = [x[k * size:(k + 1) * size].reshape(shape) for k in range(2 * M + 1)]
    return parts[:M], parts[M:2 * M], parts[2 * M]


_LOG_GROWTH_CAP = np.log(10.0)


class FactorCache:
    """Sparse LU of a recent Newton matrix, shared across iterations and time steps.

    The Jacobian changes slowly from step to step, so an old factorization is
    an excellent GMRES preconditioner and refactoring is rarely needed.
    """

    def __init__(self):
        self.lu = None
        self.shape = None
        self.factorizations = 0

    def factor(self, A):
        try:
            self.lu = spla.splu(A)
        except RuntimeError as exc:
            raise LinearSolveFailed(f"sparse LU failed: {exc}") from exc
        self.shape = A.shape
        self.factorizations += 1


class _LinearSystem:
    """Newton Jacobian of one time step.

    The Jacobian is singular along ``(dc, dmu, dpsi) = (0, z, 1)`` (the potential
    gauge), so the solved matrix replaces the first Poisson row by ``dpsi_0 = 0``.
    The dropped equation is implied by the others whenever the state is
    electroneutral.  Only the ``diag(1/c)`` entries change between Newton
    iterations; everything else is assembled once per time step.
    """

    def __init__(self, state_old: SystemState, cfg: StepConfig, model: PnpchModel, cache: FactorCache | None = None):
        grid, sp_, split = model.grid, model.species, model.split
        M, n = sp_.M, grid.size
        self.M, self.n = M, n
        eye = sp.identity(n, format="csr")
        lap = laplace_matrix(grid)
        blocks = [[None] * (2 * M + 1) for _ in range(2 * M + 1)]
        for m in range(M):
            blocks[m][m] = eye / cfg.dt
            mob = div_coeff_grad_matrix(edge_average(state_old.c[m]), grid)
            blocks[m][M + m] = -sp_.epsilon[m] * mob
            for k in range(M):
                blk = -split.Gc[m, k] * eye
                if k == m and sp_.sigma[m] != 0.0:
                    blk = blk + sp_.sigma[m] * lap
                blocks[M + m][k] = blk
            blocks[M + m][M + m] = eye
            blocks[M + m][2 * M] = -sp_.valence[m] * eye
            blocks[2 * M][m] = -sp_.valence[m] * eye
        blocks[2 * M][2 * M] = -model.kappa * lap
        self.base = sp.bmat(blocks, format="csr")
        size = self.base.shape[0]
        self.pin = 2 * M * n
        keep = np.ones(size)
        keep[self.pin] = 0.0
        unit = sp.csr_matrix(([1.0], ([self.pin], [self.pin])), shape=(size, size))
        self.pinned = (sp.diags(keep) @ self.base + unit).tocsr()
        # positions of the 1/c entries, species m occupies rows/cols (M+m)*n.., m*n..
        self._diag_rows = np.concatenate([(M + m) * n + np.arange(n) for m in range(M)])
        self._diag_cols = np.concatenate([m * n + np.arange(n) for m in range(M)])
        self.cfg = cfg
        self.method = cfg.linear_solver
        if self.method == "auto":
            self.method = {1: "direct", 2: "lu-gmres"}.get(grid.dim, "gmres")
        self.cache = cache if cache is not None else FactorCache()

    def _entropy_part(self, c):
        vals = -np.concatenate([1.0 / np.ravel(cm) for cm in c])
        return sp.csr_matrix((vals, (self._diag_rows, self._diag_cols)), shape=self.base.shape)

    def jacobian(self, c) -> sp.csc_matrix:
        return (self.base + self._entropy_part(c)).tocsc()

    def matrix(self, c) -> sp.csc_matrix:
        """Gauge-pinned Jacobian actually factored and solved."""
        return (self.pinned + self._entropy_part(c)).tocsc()

    def solve(self, c, rhs):
        # unknowns for c are the relative changes dc/c, which keeps the matrix
        # well scaled when concentrations become tiny
        rhs = rhs.copy()
        rhs[self.pin] = 0.0
        scale = np.ones(self.base.shape[0])
        scale[:self.M * self.n] = np.concatenate([np.ravel(cm) for cm in c])
        A = (self.matrix(c) @ sp.diags(scale)).tocsc()
        if self.method == "direct":
            try:
                x = spla.splu(A).solve(rhs)
            except RuntimeError as exc:
                raise LinearSolveFailed(f"sparse LU failed: {exc}") from exc
        elif self.method == "lu-gmres":
            x = self._solve_reused(A, rhs)
        else:
            try:
                ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
            except RuntimeError as exc:
                raise LinearSolveFailed(f"incomplete LU failed: {exc}") from exc
            prec = spla.LinearOperator(A.shape, ilu.solve)
            x, info = spla.gmres(A, rhs, M=prec, rtol=self.cfg.linear_tol, atol=1e-3 * self.cfg.newton_tol,
                                 restart=100, maxiter=self.cfg.linear_max_iter)
            if info != 0:
                raise LinearSolveFailed(f"GMRES did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailed("linear solve produced non-finite values")
        return scale * x

    def _solve_reused(self, A, rhs):
        cache = self.cache
        if cache.lu is None or cache.shape != A.shape:
            cache.factor(A)
            return cache.lu.solve(rhs)
        prec = spla.LinearOperator(A.shape, cache.lu.solve)
        k = self.cfg.refactor_iterations
        x, info = spla.gmres(A, rhs, M=prec, rtol=self.cfg.linear_tol,
                             atol=1e-3 * self.cfg.newton_tol, restart=k, maxiter=1)
        if info != 0:
            logger.debug("stale factorization needed more than %d GMRES iterations; refactoring", k)
            cache.factor(A)
            x = cache.lu.solve(rhs)
        return x


def newton_step_solve(state_old: SystemState, cfg: StepConfig, model: PnpchModel, source=None, rho_f=None,
                      with_energy: bool = True, psi_guess=None, cache: FactorCache | None = None):
    """Advance one time step.

    The initial guess is the previous ``(c, mu, psi)``.  Each Newton update is
    damped by the fraction-to-the-boundary rule so that iterates stay positive.

    Returns
    -------
    (SystemState, StepReport)

    Raises
    ------
    NewtonDiverged, LinearSolveFailed, PositivityLost
    """
    grid, M = model.grid, model.species.M
    shape, n = grid.shape, grid.size
    c = [np.array(x, dtype=float) for x in state_old.c]
    mu = [np.array(x, dtype=float) for x in state_old.mu]
    psi = np.array(state_old.psi if psi_guess is None else psi_guess, dtype=float)

    system = _LinearSystem(state_old, cfg, model, cache)
    damped = 0
    it = 0
    F = residual(state_old, c, mu, psi, cfg, model, source, rho_f)
    res = F.max_abs()
    while res > cfg.newton_tol:
        if it >= cfg.newton_max_iter:
            raise NewtonDiverged(
                f"step {state_old.step_index + 1}: residual {res:.3e} after {it} Newton iterations")
        rhs = -_pack(F.mass, F.chemical, F.poisson)
        delta = system.solve(c, rhs)
        dc, dmu, dpsi = _unpack(delta, M, shape)
        if cfg.newton_update == "log":
            # Newton in log c: c <- c exp(dc / c), growth capped at a factor 10 per iteration
            growth = max(float(np.max(dcm / cm)) for cm, dcm in zip(c, dc))
            alpha = min(1.0, _LOG_GROWTH_CAP / growth) if growth > 0 else 1.0
        else:
            ratio = np.inf
            for cm, dcm in zip(c, dc):
                neg = dcm < 0
                if np.any(neg):
                    ratio = min(ratio, float(np.min(-cm[neg] / dcm[neg])))
            alpha = min(1.0, cfg.damping_safety * ratio)
        if alpha < 1.0:
            damped += 1
            if alpha < cfg.min_step_fraction:
                raise PositivityLost(f"Newton step length {alpha:.3e} fell below the minimum fraction")
        if cfg.newton_update == "log":
            c = [cm * np.exp(alpha * dcm / cm) for cm, dcm in zip(c, dc)]
        else:
            c = [cm + alpha * dcm for cm, dcm in zip(c, dc)]
        mu = [mm + alpha * dmm for mm, dmm in zip(mu, dmu)]
        psi = psi + alpha * dpsi
        # gauge: shift psi to mean zero together with z^m * shift in mu
        shift = float(np.mean(psi))
        psi = psi - shift
        mu = [mm - z * shift for mm, z in zip(mu, model.species.valence)]
        it += 1
        F = residual(state_old, c, mu, psi, cfg, model, source, rho_f)
        res = F.max_abs()

    new_state = SystemState(time=state_old.time + cfg.dt, step_index=state_old.step_index + 1,
                            c=tuple(c), psi=psi, mu=tuple(mu))
    drift = []
    for c_old, c_new in zip(state_old.c, c):
        m_old, m_new = mean(c_old, grid), mean(c_new, grid)
        drift.append(abs(m_new - m_old) / max(abs(m_old), 1e-300))
    report = StepReport(newton_iterations=it, final_residual=res, damping_activations=damped,
                        mass_drift=drift, min_concentration=[float(np.min(cm)) for cm in c])
    if with_energy:
        report.energy_before = discrete_free_energy(state_old.c, model).total
        report.energy_after = discrete_free_energy(c, model).total
    return new_state, report


def discrete_free_energy(c, model: PnpchModel, rho_f=None) -> Energy:
    """Discrete free energy and its electrostatic, entropy, steric and gradient parts."""
    grid, sp_ = model.grid, model.species
    _require_positive(c)
    rho = model.rho_f if rho_f is None else rho_f
    charge = sum(z * cm for z, cm in zip(sp_.valence, c)) + rho
    electro = 0.5 * hminus1_inner(charge, charge, model.kappa_edges, grid)
    entropy = sum(inner(cm, np.log(sp_.v * cm) - 1.0, grid) for cm in c)
    G = model.split.G
    steric = 0.5 * sum(G[m, k] * inner(c[m], c[k], grid)
                       for m in range(sp_.M) for k in range(sp_.M) if G[m, k] != 0.0)
    gradient = 0.0
    for s, cm in zip(sp_.sigma, c):
        if s != 0.0:
            g = grad_h(cm, grid.h)
            gradient += 0.5 * s * edge_inner(g, g, grid)
    return Energy(electro + entropy + steric + gradient, electro, entropy, steric, gradient)


def solve_potential(c, model: PnpchModel, rho_f=None, tol: float = 1e-11) -> np.ndarray:
    rho = model.rho_f if rho_f is None else rho_f
    charge = sum(z * cm for z, cm in zip(model.species.valence, c)) + rho
    psi, _ = solve_zero_mean(EllipticProblem(model.grid, model.kappa_edges, charge), tol=tol)
    return psi


def initial_state(c0: Sequence[np.ndarray], model: PnpchModel, time: float = 0.0, rho_f=None) -> SystemState:
    """State at ``time`` with the consistent potential and chemical potentials of ``c0``."""
    c = tuple(np.array(cm, dtype=float) for cm in c0)
    _require_positive(c)
    psi = solve_potential(c, model, rho_f)
    mu = chemical_potential_semi_implicit(c, c, psi, model.species, model.split, model.grid.h)
    return SystemState(time=time, step_index=0, c=c, psi=psi, mu=tuple(mu))


def series_record(state: SystemState, model: PnpchModel, energy: Energy, newton_iterations: int) -> dict:
    grid = model.grid
    rec = {
        "step": state.step_index,
        "time": state.time,
        "F_total": energy.total,
        "F_electro": energy.electrostatic,
        "F_entropy": energy.entropy,
        "F_steric": energy.steric,
        "F_gradient": energy.gradient,
    }
    for m, cm in enumerate(state.c, start=1):
        rec[f"mass_{m}"] = grid.cell_volume * float(np.sum(cm))
    for m, cm in enumerate(state.c, start=1):
        rec[f"minc_{m}"] = float(np.min(cm))
    rec["newton_iters"] = newton_iterations
    return rec


def energy_slack(cfg: StepConfig, model: PnpchModel) -> float:
    return 100.0 * cfg.newton_tol * model.grid.size


def run(state0: SystemState, model: PnpchModel, cfg: StepConfig, n_steps: int | None = None,
        t_end: float | None = None, hooks: Sequence[Callable] = (), check_invariants: bool = True):
    """Fixed-step time loop.

    After every step a record (time, energies, masses, minimum concentrations,
    Newton iterations) is appended to the returned series and each hook is
    called as ``hook(state, record, report)``.

    Raises
    ------
    InvariantViolation
        On a mass, positivity or energy failure (only with ``check_invariants``).
    """
    if n_steps is None:
        if t_end is None:
            raise ValueError("give n_steps or t_end")
        n_steps = int(round((t_end - state0.time) / cfg.dt))
    grid = model.grid
    state = state0
    energy = discrete_free_energy(state.c, model)
    rec0 = series_record(state, model, energy, 0)
    series = [rec0]
    for hook in hooks:
        hook(state, rec0, None)
    slack = energy_slack(cfg, model)
    cache = FactorCache()
    for _ in range(n_steps):
        new, report = newton_step_solve(state, cfg, model, with_energy=False, cache=cache)
        new_energy = discrete_free_energy(new.c, model)
        report.energy_before, report.energy_after = energy.total, new_energy.total
        if check_invariants:
            k = new.step_index
            for m, (co, cn) in enumerate(zip(state.c, new.c), start=1):
                dmean = abs(mean(cn, grid) - mean(co, grid))
                if dmean > 10.0 * cfg.newton_tol / grid.volume:
                    raise InvariantViolation("mass", k, f"species {m} mean changed by {dmean:.3e}")
                if not float(np.min(cn)) > 0:
                    raise InvariantViolation("positivity", k, f"species {m} min {float(np.min(cn)):.3e}")
            if new_energy.total > energy.total + slack:
                raise InvariantViolation(
                    "energy", k, f"F rose from {energy.total:.15g} to {new_energy.total:.15g}")
        rec = series_record(new, model, new_energy, report.newton_iterations)
        series.append(rec)
        logger.debug("step %d t=%.6g F=%.12g newton=%d", new.step_index, new.time, new_energy.total,
                     report.newton_iterations)
        for hook in hooks:
            hook(new, rec, report)
        state, energy = new, new_energy
    return state, series
