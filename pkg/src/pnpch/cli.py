"""Command line front end: configuration files, scenario runs and all file output.

Usage::

    pnpch run <config-or-preset> [--n-steps K] [--t-end T] [--output-dir DIR]
    pnpch validate <config-or-preset>
    pnpch mms <case> --levels N1,N2,... [--out table.csv]

Exit codes are 0 on success, 1 when an MMS study misses its order window,
2 for configuration or neutrality errors, 3 for solver failures and 4 for
invariant violations.
"""
from __future__ import annotations

import os

# thread caps must be in place before numpy loads its BLAS
if os.environ.get("PNPCH_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = os.environ["PNPCH_THREADS"]

import argparse
import csv
import dataclasses
import datetime
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mms
from .errors import (ConfigError, InvariantViolation, LinearSolveFailed, NewtonDiverged, NoConvergence,
                     ParseError, PnpchError, PositivityLost, ValidationError)
from .grid_ops import PeriodicGrid
from .model import (GaussianPair, LinePair, PhysicalInputs, PnpchModel, RandomInit, SpeciesSet, UniformInit,
                    ZeroCharge, check_neutrality, make_fixed_charge, make_initial_condition, nondimensionalize,
                    split_steric)
from .scheme import StepConfig, SystemState, initial_state, run

logger = logging.getLogger("pnpch")

CONFIG_SCHEMA = "pnpch-config/1"
SNAPSHOT_SCHEMA = "pnpch-snapshot/1"

EXIT_OK, EXIT_ORDERS, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 1, 2, 3, 4

_SOLVER_FIELDS = {f.name for f in dataclasses.fields(StepConfig)} - {"dt"}


@dataclass
class OutputConfig:
    series: Path | None = None
    flush_every: int = 1
    snapshot_times: tuple[float, ...] = ()
    snapshot_every: int | None = None
    snapshot_prefix: Path | None = None
    snapshot_fields: tuple[str, ...] = ()


@dataclass
class PnpchConfig:
    name: str
    grid: PeriodicGrid
    species: SpeciesSet
    G: np.ndarray
    kappa: float
    fixed_charge: object
    initial: object
    step: StepConfig
    n_steps: int
    output: OutputConfig
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


# Config parsing

def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ValidationError(f"{where}.{key}" if where else key, "missing")
    return section[key]


def _section(raw: dict, key: str) -> dict:
    value = _require(raw, key, "")
    if not isinstance(value, dict):
        raise ValidationError(key, "must be an object")
    return value


def _number(value, key, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(key, f"expected a finite number, got {value!r}")
    if positive and not value > 0:
        raise ValidationError(key, f"must be positive, got {value}")
    if nonneg and value < 0:
        raise ValidationError(key, f"must be non-negative, got {value}")
    return float(value)


def _numbers(value, key, length=None, **kw) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ValidationError(key, "expected a list of numbers")
    if length is not None and len(value) != length:
        raise ValidationError(key, f"expected {length} entries, got {len(value)}")
    return tuple(_number(v, f"{key}[{i}]", **kw) for i, v in enumerate(value))


def _physical(raw: dict, M: int) -> PhysicalInputs:
    phys = raw.get("physical")
    if phys is None:
        raise ValidationError("physical", "needed when epsilon or kappa is not given")
    kw = {}
    for k in ("c0", "L", "D0", "eps_r", "T"):
        if k in phys:
            kw[k] = _number(phys[k], f"physical.{k}", positive=True)
    kw["D"] = _numbers(phys.get("D", [1.0] * M), "physical.D", length=M, positive=True)
    return PhysicalInputs(**kw)


def _parse_grid(raw) -> PeriodicGrid:
    sec = _section(raw, "grid")
    dim = _require(sec, "dim", "grid")
    n = _require(sec, "N", "grid")
    if dim not in (1, 2, 3):
        raise ValidationError("grid.dim", f"must be 1, 2 or 3, got {dim!r}")
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ValidationError("grid.N", f"must be an integer >= 2, got {n!r}")
    lo, hi = _numbers(_require(sec, "bounds", "grid"), "grid.bounds", length=2)
    if not hi > lo:
        raise ValidationError("grid.bounds", "upper bound must exceed lower bound")
    return PeriodicGrid(dim, n, lo, hi)


def _parse_species(raw) -> SpeciesSet:
    sec = _section(raw, "species")
    valence = _require(sec, "valence", "species")
    if not isinstance(valence, list) or not valence or not all(isinstance(z, int) for z in valence):
        raise ValidationError("species.valence", "expected a non-empty list of integers")
    M = len(valence)
    if "epsilon" in sec:
        eps = _numbers(sec["epsilon"], "species.epsilon", length=M, positive=True)
    else:
        eps = nondimensionalize(_physical(raw, M)).epsilon
    if "sigma" in sec:
        sigma = _numbers(sec["sigma"], "species.sigma", length=M, nonneg=True)
    else:
        logger.warning("species.sigma not given; using 0 (no gradient energy)")
        sigma = (0.0,) * M
    v = _number(sec.get("v", 1.0), "species.v", positive=True)
    return SpeciesSet(tuple(valence), eps, sigma, v)


def _parse_charge(sec: dict, grid: PeriodicGrid):
    spec = sec.get("fixed_charge", {"type": "none"})
    kind = spec.get("type") if isinstance(spec, dict) else None
    key = "electrostatics.fixed_charge"
    if kind == "none":
        return ZeroCharge()
    if kind == "gaussian_pair":
        kw = {k: _number(spec[k], f"{key}.{k}") for k in ("amplitude", "width", "positive_center",
                                                          "negative_center") if k in spec}
        return GaussianPair(**kw)
    if kind == "line_pair":
        kw = {k: _number(spec[k], f"{key}.{k}") for k in ("surface_density", "negative_x", "positive_x")
              if k in spec}
        return LinePair(**kw)
    raise ValidationError(f"{key}.type", f"unknown fixed charge {kind!r}")


def _parse_initial(raw, species: SpeciesSet):
    sec = _section(raw, "initial")
    kind = sec.get("type")
    M = species.M
    if kind == "uniform":
        return UniformInit(_numbers(_require(sec, "values", "initial"), "initial.values", length=M, positive=True))
    if kind == "random":
        means = _numbers(_require(sec, "means", "initial"), "initial.means", length=M, positive=True)
        amp = _number(_require(sec, "amplitude", "initial"), "initial.amplitude", nonneg=True)
        seed = sec.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ValidationError("initial.seed", f"expected a non-negative integer, got {seed!r}")
        if any(amp >= m for m in means):
            raise ValidationError("initial.amplitude", "must be smaller than every mean")
        return RandomInit(means, amp, seed)
    raise ValidationError("initial.type", f"unknown initial condition {kind!r}")


def _parse_stepping(raw, grid: PeriodicGrid):
    sec = _section(raw, "stepping")
    rule = sec.get("dt_rule", "absolute")
    factor = _number(sec.get("dt", 1.0), "stepping.dt", positive=True)
    if rule == "absolute":
        dt = factor
    elif rule == "h":
        dt = factor * grid.h
    elif rule == "h2":
        dt = factor * grid.h**2
    else:
        raise ValidationError("stepping.dt_rule", f"must be absolute, h or h2, got {rule!r}")
    if "n_steps" in sec:
        n = sec["n_steps"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ValidationError("stepping.n_steps", f"expected a non-negative integer, got {n!r}")
    elif "t_end" in sec:
        t_end = _number(sec["t_end"], "stepping.t_end", positive=True)
        n = int(round(t_end / dt))
        if not math.isclose(n * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
            logger.warning("t_end %.6g is not a multiple of dt %.6g; running %d steps", t_end, dt, n)
    else:
        raise ValidationError("stepping", "give t_end or n_steps")
    return dt, n


def _parse_solver(raw, dt) -> StepConfig:
    sec = raw.get("solver", {})
    if not isinstance(sec, dict):
        raise ValidationError("solver", "must be an object")
    unknown = set(sec) - _SOLVER_FIELDS
    if unknown:
        raise ValidationError(f"solver.{sorted(unknown)[0]}", "unknown solver option")
    try:
        return StepConfig(dt=dt, **sec)
    except (TypeError, ValueError) as exc:
        raise ValidationError("solver", str(exc)) from exc


def _parse_output(raw, species: SpeciesSet) -> OutputConfig:
    sec = raw.get("output", {})
    out = OutputConfig()
    if "series" in sec:
        out.series = Path(sec["series"])
    flush = sec.get("flush_every", 1)
    if not isinstance(flush, int) or flush < 1:
        raise ValidationError("output.flush_every", "expected a positive integer")
    out.flush_every = flush
    out.snapshot_times = _numbers(sec.get("snapshot_times", []), "output.snapshot_times", nonneg=True)
    every = sec.get("snapshot_every")
    if every is not None and (not isinstance(every, int) or every < 1):
        raise ValidationError("output.snapshot_every", "expected a positive integer")
    out.snapshot_every = every
    allowed = [f"c{m + 1}" for m in range(species.M)] + ["psi"] + [f"mu{m + 1}" for m in range(species.M)]
    fields = tuple(sec.get("snapshot_fields", allowed[:species.M + 1]))
    for f in fields:
        if f not in allowed:
            raise ValidationError("output.snapshot_fields", f"unknown field {f!r}")
    out.snapshot_fields = fields
    if out.snapshot_times or out.snapshot_every:
        out.snapshot_prefix = Path(_require(sec, "snapshot_prefix", "output"))
    return out


def parse_config(raw: dict, name: str = "config") -> PnpchConfig:
    """Validate a decoded configuration document."""
    if not isinstance(raw, dict):
        raise ValidationError("schema", "top level must be an object")
    schema = raw.get("schema")
    if schema != CONFIG_SCHEMA:
        raise ValidationError("schema", f"expected {CONFIG_SCHEMA!r}, got {schema!r}")
    grid = _parse_grid(raw)
    species = _parse_species(raw)
    steric = _section(raw, "steric")
    G = np.array(_require(steric, "G", "steric"), dtype=float)
    if G.shape != (species.M, species.M):
        raise ValidationError("steric.G", f"expected a {species.M}x{species.M} matrix")
    try:
        split_steric(G)
    except PnpchError as exc:
        raise ValidationError("steric.G", str(exc)) from exc
    elec = _section(raw, "electrostatics")
    if "kappa" in elec:
        kappa = _number(elec["kappa"], "electrostatics.kappa", positive=True)
    else:
        kappa = nondimensionalize(_physical(raw, species.M)).kappa
    charge = _parse_charge(elec, grid)
    init = _parse_initial(raw, species)
    dt, n_steps = _parse_stepping(raw, grid)
    step = _parse_solver(raw, dt)
    output = _parse_output(raw, species)
    sweep = raw.get("sweep", {})
    for key in sweep:
        if key not in ("g12", "sigma"):
            raise ValidationError(f"sweep.{key}", "only g12 and sigma can be swept")
        _numbers(sweep[key], f"sweep.{key}", nonneg=True)
    return PnpchConfig(name=raw.get("name", name), grid=grid, species=species, G=G, kappa=kappa,
                       fixed_charge=charge, initial=init, step=step, n_steps=n_steps, output=output,
                       sweep=sweep, raw=raw)


def resolve_config_path(name: str) -> Path:
    """A path to an existing file, or the name of a shipped preset."""
    path = Path(name)
    if path.is_file():
        return path
    preset = resources.files("pnpch") / "presets" / f"{name}.json"
    if preset.is_file():
        return Path(str(preset))
    raise ConfigError(f"no config file or preset named {name!r}")


def load_config(path) -> PnpchConfig:
    path = resolve_config_path(str(path))
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from exc
    return parse_config(raw, name=path.stem)


# Output

def series_columns(M: int) -> list[str]:
    return (["step", "time", "F_total", "F_electro", "F_entropy", "F_steric", "F_gradient"]
            + [f"mass_{m + 1}" for m in range(M)] + [f"minc_{m + 1}" for m in range(M)] + ["newton_iters"])


class SeriesWriter:
    """Run hook appending one CSV row per step."""

    def __init__(self, path: Path, M: int, flush_every: int = 1):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(path, "w", newline="")
        self.fh.write(f"# created {datetime.datetime.now().isoformat(timespec='seconds')}\n")
        self.writer = csv.writer(self.fh)
        self.columns = series_columns(M)
        self.writer.writerow(self.columns)
        self.flush_every = flush_every
        self.rows = 0

    def __call__(self, state, rec, report):
        self.writer.writerow([rec[k] if isinstance(rec[k], int) else repr(float(rec[k])) for k in self.columns])
        self.rows += 1
        if self.rows % self.flush_every == 0:
            self.fh.flush()

    def close(self):
        self.fh.close()


@dataclass
class Snapshot:
    time: float
    step: int
    dim: int
    N: int
    bounds: tuple[float, float]
    fields: dict[str, np.ndarray]


def _state_field(state: SystemState, name: str) -> np.ndarray:
    if name == "psi":
        return state.psi
    idx = int(name.lstrip("cmu")) - 1
    return state.mu[idx] if name.startswith("mu") else state.c[idx]


def write_snapshot(path, snap: Snapshot) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [SNAPSHOT_SCHEMA, f"time {snap.time!r}", f"step {snap.step}", f"dim {snap.dim}", f"N {snap.N}",
             f"bounds {snap.bounds[0]!r} {snap.bounds[1]!r}", "fields " + " ".join(snap.fields)]
    for name, values in snap.fields.items():
        lines.append(f"field {name}")
        flat = np.ravel(values)
        for start in range(0, flat.size, 8):
            lines.append(" ".join("%.17g" % v for v in flat[start:start + 8]))
    path.write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> Snapshot:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != SNAPSHOT_SCHEMA:
        raise ParseError(f"not a {SNAPSHOT_SCHEMA} file", 1)
    head = {}
    for i, line in enumerate(lines[1:7], start=2):
        key, _, rest = line.partition(" ")
        head[key] = rest
    try:
        dim, N = int(head["dim"]), int(head["N"])
        lo, hi = (float(x) for x in head["bounds"].split())
        names = head["fields"].split()
        time, step = float(head["time"]), int(head["step"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad snapshot header: {exc}") from exc
    count = N**dim
    fields, i = {}, 7
    for name in names:
        if i >= len(lines) or lines[i] != f"field {name}":
            raise ParseError(f"expected block for field {name}", i + 1)
        values = []
        i += 1
        while i < len(lines) and not lines[i].startswith("field "):
            values.extend(float(v) for v in lines[i].split())
            i += 1
        if len(values) != count:
            raise ParseError(f"field {name} has {len(values)} values, expected {count}")
        fields[name] = np.array(values).reshape((N,) * dim)
    return Snapshot(time, step, dim, N, (lo, hi), fields)


class SnapshotWriter:
    """Run hook writing snapshots at requested times and/or every k steps."""

    def __init__(self, out: OutputConfig, grid: PeriodicGrid, dt: float):
        self.out, self.grid, self.dt = out, grid, dt
        self.pending = sorted(out.snapshot_times)
        self.written: list[Path] = []

    def _due(self, state) -> bool:
        due = False
        while self.pending and self.pending[0] <= state.time + 0.5 * self.dt:
            if abs(self.pending[0] - state.time) <= 0.5 * self.dt:
                due = True
            self.pending.pop(0)
        every = self.out.snapshot_every
        return due or (every is not None and state.step_index % every == 0)

    def __call__(self, state, rec, report):
        if not self._due(state):
            return
        g = self.grid
        snap = Snapshot(state.time, state.step_index, g.dim, g.n, (g.lo, g.hi),
                        {f: _state_field(state, f) for f in self.out.snapshot_fields})
        prefix = self.out.snapshot_prefix
        path = prefix.parent / f"{prefix.name}_{state.step_index:06d}.txt"
        write_snapshot(path, snap)
        self.written.append(path)


# Scenario execution

def build_model(cfg: PnpchConfig) -> PnpchModel:
    rho = make_fixed_charge(cfg.fixed_charge, cfg.grid)
    return PnpchModel(cfg.grid, cfg.species, split_steric(cfg.G), cfg.kappa, rho)


def _relocate(path: Path | None, base: Path | None, suffix: str = "") -> Path | None:
    if path is None:
        return None
    if suffix:
        path = path.with_name(f"{path.stem}{suffix}{path.suffix}")
    if base is not None and not path.is_absolute():
        path = base / path
    return path


def _sweep_variants(cfg: PnpchConfig):
    if not cfg.sweep:
        yield "", cfg
        return
    g12s = cfg.sweep.get("g12", [None])
    sigmas = cfg.sweep.get("sigma", [None])
    for g12, sigma in itertools.product(g12s, sigmas):
        G = cfg.G.copy()
        species = cfg.species
        tag = ""
        if g12 is not None:
            G[0, 1] = G[1, 0] = g12
            tag += f"_g{g12:g}"
        if sigma is not None:
            species = dataclasses.replace(species, sigma=(float(sigma),) * species.M)
            tag += f"_s{sigma:g}"
        yield tag, dataclasses.replace(cfg, G=G, species=species, sweep={})


def run_scenario(cfg: PnpchConfig, output_dir: Path | None = None) -> int:
    """Run one configuration (or every point of its sweep) and return an exit code."""
    for tag, variant in _sweep_variants(cfg):
        code = _run_single(variant, output_dir, tag)
        if code != EXIT_OK:
            return code
    return EXIT_OK


def _run_single(cfg: PnpchConfig, output_dir: Path | None, tag: str) -> int:
    model = build_model(cfg)
    c0 = make_initial_condition(cfg.initial, cfg.grid, cfg.species)
    check = check_neutrality(cfg.species, c0, model.rho_f, cfg.grid)
    if not check.ok:
        print(f"error: initial state is not electroneutral (residual {check.residual:.3e})", file=sys.stderr)
        return EXIT_CONFIG
    out = dataclasses.replace(cfg.output, series=_relocate(cfg.output.series, output_dir, tag),
                              snapshot_prefix=_relocate(cfg.output.snapshot_prefix, output_dir, tag))
    hooks = []
    series_writer = None
    if out.series is not None:
        series_writer = SeriesWriter(out.series, cfg.species.M, out.flush_every)
        hooks.append(series_writer)
    if out.snapshot_prefix is not None:
        hooks.append(SnapshotWriter(out, cfg.grid, cfg.step.dt))
    label = cfg.name + tag
    logger.info("%s: %d steps of dt=%.6g on N=%d (dim %d)", label, cfg.n_steps, cfg.step.dt, cfg.grid.n,
                cfg.grid.dim)
    try:
        state = initial_state(c0, model)
        final, series = run(state, model, cfg.step, n_steps=cfg.n_steps, hooks=hooks)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (NewtonDiverged, LinearSolveFailed, PositivityLost, NoConvergence) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        if series_writer is not None:
            series_writer.close()
    last = series[-1]
    print(f"{label}: t={last['time']:.6g} F={last['F_total']:.12g} "
          + " ".join(f"minc_{m + 1}={last[f'minc_{m + 1}']:.3e}" for m in range(cfg.species.M)))
    return EXIT_OK


def run_mms(case_name: str, levels: Sequence[int], out: Path | None = None, sigma: float | None = None,
            window: tuple[float, float] | None = None) -> int:
    if case_name not in mms.CASES:
        print(f"error: unknown case {case_name!r}; choose from {', '.join(mms.CASES)}", file=sys.stderr)
        return EXIT_CONFIG
    case = mms.CASES[case_name]() if sigma is None else mms.CASES[case_name](sigma=sigma)
    try:
        rows, summary = mms.convergence_study(case, levels, order_window=window)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonDiverged, LinearSolveFailed, PositivityLost) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{'N':>6} " + " ".join(f"{'err_' + k:>12} {'order':>7}" for k in mms.UNKNOWNS))
    for r in rows:
        cells = []
        for k in mms.UNKNOWNS:
            o = r.orders[k]
            cells.append(f"{r.errors[k]:12.4e} {'-' if o is None else f'{o:.4f}':>7}")
        print(f"{r.N:>6} " + " ".join(cells))
    if out is not None:
        mms.write_convergence_csv(rows, out)
    lo, hi = summary["order_window"]
    print(f"orders within [{lo}, {hi}]: {'yes' if summary['passed'] else 'no'}")
    return EXIT_OK if summary["passed"] else EXIT_ORDERS


def _levels(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma separated integers, got {text!r}")


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be LO,HI, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnpch", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configuration file or preset")
    p.add_argument("config")
    p.add_argument("--n-steps", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("validate", help="parse a configuration and check neutrality")
    p.add_argument("config")

    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    p.add_argument("case")
    p.add_argument("--levels", type=_levels, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--sigma", type=float)
    p.add_argument("--window", type=_window)
    return parser


def _apply_overrides(cfg: PnpchConfig, n_steps, t_end) -> PnpchConfig:
    if n_steps is not None:
        if n_steps < 0:
            raise ValidationError("n_steps", "must be non-negative")
        cfg = dataclasses.replace(cfg, n_steps=n_steps)
    elif t_end is not None:
        cfg = dataclasses.replace(cfg, n_steps=int(round(t_end / cfg.step.dt)))
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "mms":
        return run_mms(args.case, args.levels, args.out, args.sigma, args.window)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            model = build_model(cfg)
            c0 = make_initial_condition(cfg.initial, cfg.grid, cfg.species)
            check = check_neutrality(cfg.species, c0, model.rho_f, cfg.grid)
            if not check.ok:
                print(f"error: initial state is not electroneutral (residual {check.residual:.3e})",
                      file=sys.stderr)
                return EXIT_CONFIG
            print(f"{cfg.name}: ok (N={cfg.grid.n}, dim={cfg.grid.dim}, dt={cfg.step.dt:.6g}, "
                  f"steps={cfg.n_steps}, lambda={model.split.lam:.6g})")
            return EXIT_OK
        cfg = _apply_overrides(cfg, args.n_steps, args.t_end)
        return run_scenario(cfg, args.output_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PnpchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
