"""User-facing surface: config files, presets, traces, plots, and the CLI.

Configs are flat ``key = value`` text with dotted section prefixes, e.g.
``physical.mu = 0.1``. Unknown keys are hard errors so typos cannot pass
silently. Two presets bundle the stock closed-loop scenarios: a lightly
damped tracking run with a sloshing start (``experiment1``) and a
weakly damped linear/nonlinear comparison from rest (``experiment2``).

Traces are CSV files with a fixed 13-column header and full double
precision values, so repeated runs are byte-identical. Plots are static
SVG line charts. The command-line entry point exposes ``simulate``,
``analyze transfer``, ``analyze impulse``, and ``check config``; exit
codes are 0 on success, 2 for validation failures, and 3 for runtime
failures (funnel contact, solver breakdown).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import analysis
from .closed_loop import TRACE_COLUMNS, RunSetup, TraceRecord, run_closed_loop
from .funnel_controller import (
    FeasibilityError,
    FunnelClassError,
    FunnelSpec,
    FunnelViolationError,
    check_initial_feasibility,
    validate_funnel_class,
)
from .model_core import PhysicalParams, ReferenceSignal, SpatialGrid, StateField
from .pde_linear import CFL_LIMIT, CflError
from .pde_nonlinear import PositivityError

TRACE_HEADER = ",".join(TRACE_COLUMNS)

_MODELS = ("linear", "nonlinear", "both")
_PROFILES = ("sine-squared", "flat", "table")


class ConfigError(ValueError):
    """Schema or value problem in a config file; message names the key."""


class TraceValidationError(ValueError):
    """An emitted trace failed re-validation."""


class RunFailure(Exception):
    """A validated run failed while stepping (funnel contact, solver)."""


@dataclass(frozen=True)
class InitialProfile:
    """Named initial tank state.

    ``sine-squared`` starts at rest depth with the standing velocity
    profile amplitude * sin(waves * pi * zeta)^2; integer wave counts
    vanish at both walls. ``flat`` is the rest state. ``table`` reads a
    CSV file with columns zeta, depth, velocity and interpolates linearly
    onto the run grid.
    """

    kind: str = "flat"
    amplitude: float = 0.1
    waves: float = 4.0
    table: str = ""

    def __post_init__(self):
        if self.kind not in _PROFILES:
            raise ConfigError(
                f"initial.kind must be one of {_PROFILES}, got {self.kind!r}"
            )
        if self.kind == "table" and not self.table:
            raise ConfigError("initial.kind = table requires initial.table = <path>")

    def build(self, grid: SpatialGrid, p: PhysicalParams) -> StateField:
        nodes = grid.nodes
        if self.kind == "flat":
            return StateField(np.full(grid.n_points, p.h0), np.zeros(grid.n_points), 0.0)
        if self.kind == "sine-squared":
            vel = self.amplitude * np.sin(self.waves * math.pi * nodes) ** 2
            return StateField(np.full(grid.n_points, p.h0), vel, 0.0)
        try:
            table = np.loadtxt(self.table, delimiter=",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"initial.table: cannot read {self.table!r}: {exc}")
        except ValueError as exc:
            raise ConfigError(f"initial.table: malformed CSV {self.table!r}: {exc}")
        if table.shape[1] != 3 or table.shape[0] < 2:
            raise ConfigError("initial.table needs >= 2 rows of zeta,depth,velocity")
        zeta = table[:, 0]
        if np.any(np.diff(zeta) <= 0.0):
            raise ConfigError("initial.table zeta column must increase strictly")
        if zeta[0] > 0.0 or zeta[-1] < 1.0:
            raise ConfigError("initial.table zeta column must cover [0, 1]")
        depth = np.interp(nodes, zeta, table[:, 1])
        vel = np.interp(nodes, zeta, table[:, 2])
        return StateField(depth, vel, 0.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully described closed-loop scenario.

    All structural validation happens on construction; grid derivation and
    feasibility need the derived spatial grid and are checked by
    validate_run_config before any run starts.
    """

    model: str
    params: PhysicalParams
    reference: ReferenceSignal
    funnel0: FunnelSpec
    funnel1: FunnelSpec
    initial: InitialProfile
    m_points: int
    horizon: float
    y0: float = 0.0
    y1: float = 0.0
    out_dir: str = "out"
    snapshots: int = 10

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ConfigError(f"model must be one of {_MODELS}, got {self.model!r}")
        if self.m_points < 2:
            raise ConfigError("grid.m must be >= 2")
        if not self.horizon > 0.0:
            raise ConfigError("grid.horizon must be > 0")
        if self.snapshots < 1:
            raise ConfigError("output.snapshots must be >= 1")
        if self.model == "both":
            # the linear damping is the slope of the friction law at rest;
            # a dual run only compares like with like when c_d = 2 mu
            if abs(self.params.c_d - 2.0 * self.params.mu) > 1e-12 * self.params.mu:
                raise ConfigError(
                    "model = both requires physical.c_d = 2 * physical.mu "
                    f"(got c_d = {self.params.c_d:.6g}, mu = {self.params.mu:.6g})"
                )
        validate_funnel_class(self.funnel0)
        validate_funnel_class(self.funnel1)


def preset_experiment1() -> ExperimentConfig:
    """Tracking run: strong damping, sloshing start, tight tanh funnels."""
    p = PhysicalParams(m=1.0, h0=0.5, g=9.81, mu=0.1)
    omega = 0.06 * math.pi * p.f
    return ExperimentConfig(
        model="linear",
        params=p,
        reference=ReferenceSignal(omega),
        funnel0=FunnelSpec(100.0, omega),
        funnel1=FunnelSpec(100.0, omega),
        initial=InitialProfile("sine-squared", amplitude=0.1, waves=4.0),
        m_points=2000,
        horizon=2.0 * p.tau,
    )


def preset_experiment2() -> ExperimentConfig:
    """Dual run: weak damping, start from rest, linear vs nonlinear."""
    p = PhysicalParams(m=1.0, h0=0.5, g=9.81, mu=0.01, c_d=0.02, c_s=1.0)
    omega = 0.025
    return ExperimentConfig(
        model="both",
        params=p,
        reference=ReferenceSignal(omega),
        funnel0=FunnelSpec(10.0, omega),
        funnel1=FunnelSpec(10.0, omega),
        initial=InitialProfile("flat"),
        m_points=2000,
        horizon=2.0 * p.tau,
    )


PRESETS = {
    "experiment1": preset_experiment1,
    "experiment2": preset_experiment2,
}


def _cast_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _cast_int(text: str) -> int:
    return int(text, 10)


def _cast_str(text: str) -> str:
    return text


_REQUIRED = object()

# key -> (caster, default); _REQUIRED means the key must appear
_SCHEMA = {
    "model": (_cast_str, _REQUIRED),
    "physical.m": (_cast_float, _REQUIRED),
    "physical.h0": (_cast_float, _REQUIRED),
    "physical.g": (_cast_float, _REQUIRED),
    "physical.mu": (_cast_float, _REQUIRED),
    "physical.c_d": (_cast_float, 0.0),
    "physical.c_s": (_cast_float, 0.0),
    "reference.kind": (_cast_str, "squared-tanh"),
    "reference.omega": (_cast_float, _REQUIRED),
    "funnel0.scale": (_cast_float, _REQUIRED),
    "funnel0.omega": (_cast_float, 0.0),
    "funnel0.kind": (_cast_str, "scaled-tanh"),
    "funnel1.scale": (_cast_float, _REQUIRED),
    "funnel1.omega": (_cast_float, 0.0),
    "funnel1.kind": (_cast_str, "scaled-tanh"),
    "initial.kind": (_cast_str, "flat"),
    "initial.amplitude": (_cast_float, 0.1),
    "initial.waves": (_cast_float, 4.0),
    "initial.table": (_cast_str, ""),
    "grid.m": (_cast_int, _REQUIRED),
    "grid.horizon": (_cast_float, _REQUIRED),
    "cart.y0": (_cast_float, 0.0),
    "cart.y1": (_cast_float, 0.0),
    "output.dir": (_cast_str, "out"),
    "output.snapshots": (_cast_int, 10),
}


def _read_mapping(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = text.partition("=")
            key = key.strip()
            if key in mapping:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value.strip()
    return mapping


def _config_from_mapping(raw: dict) -> ExperimentConfig:
    unknown = sorted(set(raw) - set(_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    values = {}
    for key, (cast, default) in _SCHEMA.items():
        if key in raw:
            try:
                values[key] = cast(raw[key])
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: bad value {raw[key]!r} ({exc})")
        elif default is _REQUIRED:
            raise ConfigError(f"missing required config key {key!r}")
        else:
            values[key] = default

    params = PhysicalParams(
        m=values["physical.m"],
        h0=values["physical.h0"],
        g=values["physical.g"],
        mu=values["physical.mu"],
        c_d=values["physical.c_d"],
        c_s=values["physical.c_s"],
    )
    return ExperimentConfig(
        model=values["model"],
        params=params,
        reference=ReferenceSignal(values["reference.omega"], values["reference.kind"]),
        funnel0=FunnelSpec(
            values["funnel0.scale"], values["funnel0.omega"], values["funnel0.kind"]
        ),
        funnel1=FunnelSpec(
            values["funnel1.scale"], values["funnel1.omega"], values["funnel1.kind"]
        ),
        initial=InitialProfile(
            values["initial.kind"],
            values["initial.amplitude"],
            values["initial.waves"],
            values["initial.table"],
        ),
        m_points=values["grid.m"],
        horizon=values["grid.horizon"],
        y0=values["cart.y0"],
        y1=values["cart.y1"],
        out_dir=values["output.dir"],
        snapshots=values["output.snapshots"],
    )


def parse_config(path: str) -> ExperimentConfig:
    """Load and validate a config file; unknown keys are hard errors."""
    return _config_from_mapping(_read_mapping(path))


def format_config(cfg: ExperimentConfig) -> str:
    """Render a config back to the flat key = value format (round trips)."""
    p = cfg.params
    pairs = [
        ("model", cfg.model),
        ("physical.m", repr(p.m)),
        ("physical.h0", repr(p.h0)),
        ("physical.g", repr(p.g)),
        ("physical.mu", repr(p.mu)),
        ("physical.c_d", repr(p.c_d)),
        ("physical.c_s", repr(p.c_s)),
        ("reference.kind", cfg.reference.kind),
        ("reference.omega", repr(cfg.reference.omega)),
        ("funnel0.scale", repr(cfg.funnel0.scale)),
        ("funnel0.omega", repr(cfg.funnel0.omega)),
        ("funnel0.kind", cfg.funnel0.kind),
        ("funnel1.scale", repr(cfg.funnel1.scale)),
        ("funnel1.omega", repr(cfg.funnel1.omega)),
        ("funnel1.kind", cfg.funnel1.kind),
        ("initial.kind", cfg.initial.kind),
        ("initial.amplitude", repr(cfg.initial.amplitude)),
        ("initial.waves", repr(cfg.initial.waves)),
        ("initial.table", cfg.initial.table),
        ("grid.m", str(cfg.m_points)),
        ("grid.horizon", repr(cfg.horizon)),
        ("cart.y0", repr(cfg.y0)),
        ("cart.y1", repr(cfg.y1)),
        ("output.dir", cfg.out_dir),
        ("output.snapshots", str(cfg.snapshots)),
    ]
    return "".join(f"{key} = {value}\n" for key, value in pairs)


def write_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))


def derive_grids(cfg: ExperimentConfig):
    """Derive (dt, SpatialGrid) from the time resolution.

    dt divides the horizon into m - 1 steps; the spatial node count is
    floor(m / (4 c tau)), which balances the wave transit time against the
    sampling rate and lands just under the CFL limit for a two-transit
    horizon. Too-coarse grids and CFL violations are rejected.
    """
    p = cfg.params
    dt = cfg.horizon / (cfg.m_points - 1)
    n = int(math.floor(cfg.m_points / (4.0 * p.c * p.tau) + 1e-9))
    if n < 3:
        raise ConfigError(
            f"grid.m = {cfg.m_points} yields only {n} spatial node(s); "
            "need at least 3"
        )
    grid = SpatialGrid(n)
    cfl = p.c * dt / grid.spacing
    if cfl > CFL_LIMIT * (1.0 + 1e-9):
        # the node count is slaved to grid.m, so the Courant number is set
        # by the horizon alone (it tends to horizon / (4 tau) for large m);
        # the only way out is a shorter horizon
        h_ok = (1.0 - 1e-9) * CFL_LIMIT * (cfg.m_points - 1) / (p.c * (n - 1))
        raise CflError(
            f"derived step is unstable: cfl = {cfl:.6g} > {CFL_LIMIT}; "
            f"at grid.m = {cfg.m_points} any grid.horizon <= {h_ok:.17g} "
            "is stable (the sampling rule is tuned for two-transit horizons)"
        )
    return dt, grid


def validate_run_config(cfg: ExperimentConfig) -> dict:
    """Full pre-run validation; returns the derived-grid facts."""
    dt, grid = derive_grids(cfg)
    cfg.initial.build(grid, cfg.params)
    check_initial_feasibility(cfg.funnel0, cfg.funnel1, cfg.y0, cfg.y1, cfg.reference)
    return {
        "m": cfg.m_points,
        "n": grid.n_points,
        "dt": dt,
        "cfl": cfg.params.c * dt / grid.spacing,
        "horizon": cfg.horizon,
    }


def run_setups(cfg: ExperimentConfig) -> list:
    """Expand a config into one RunSetup per model leg."""
    dt, grid = derive_grids(cfg)
    field = cfg.initial.build(grid, cfg.params)
    legs = ("linear", "nonlinear") if cfg.model == "both" else (cfg.model,)
    return [
        RunSetup(
            params=cfg.params,
            grid=grid,
            dt=dt,
            steps=cfg.m_points - 1,
            model=leg,
            reference=cfg.reference,
            funnel0=cfg.funnel0,
            funnel1=cfg.funnel1,
            initial_field=field.copy(),
            y0=cfg.y0,
            y1=cfg.y1,
            snapshot_count=cfg.snapshots,
        )
        for leg in legs
    ]


def write_trace(trace: TraceRecord, path: str) -> None:
    """Serialize a trace as CSV with 17 significant digits per value."""
    matrix = trace.as_matrix()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in matrix:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def read_trace(path: str) -> dict:
    """Parse a trace CSV back into a column dict of float arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise TraceValidationError(
                f"bad trace header: expected {TRACE_HEADER!r}, got {header!r}"
            )
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise TraceValidationError(
                    f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} values, "
                    f"got {len(parts)}"
                )
            try:
                rows.append([float(part) for part in parts])
            except ValueError as exc:
                raise TraceValidationError(f"{path}:{lineno}: {exc}")
    if not rows:
        raise TraceValidationError(f"{path}: trace has no data rows")
    matrix = np.asarray(rows)
    return {name: matrix[:, j] for j, name in enumerate(TRACE_COLUMNS)}


def validate_trace(path: str) -> dict:
    """Re-validate an emitted trace file; returns its columns on success.

    Checks: exact header, monotone time, finite entries (the funnel
    radius columns may be +inf on the first row only, where the funnel is
    still open), gains >= 1, and the funnel inequality |e| < 1/phi0 on
    every row where the radius is finite.
    """
    cols = read_trace(path)
    t = cols["t"]
    if np.any(np.diff(t) <= 0.0):
        raise TraceValidationError("time column must increase strictly")
    for name in TRACE_COLUMNS:
        values = cols[name]
        if name in ("funnel0_inv", "funnel1_inv"):
            bad = ~np.isfinite(values)
            bad[0] = bad[0] and not np.isposinf(values[0])
            if np.any(bad):
                raise TraceValidationError(
                    f"column {name} has non-finite entries beyond the open start"
                )
        elif not np.all(np.isfinite(values)):
            raise TraceValidationError(f"column {name} has non-finite entries")
    for name in ("k0", "k1"):
        if np.any(cols[name] < 1.0):
            raise TraceValidationError(f"gain column {name} dips below 1")
    radius = cols["funnel0_inv"]
    inside = np.abs(cols["e"]) < radius
    if not np.all(inside):
        first = int(np.argmin(inside))
        raise TraceValidationError(
            f"funnel inequality violated at row {first} (t = {t[first]:.6g})"
        )
    return cols


def _plot_axes_limit(t, envelope, *signals) -> float:
    """Vertical range that keeps the data readable under the t=0 pole."""
    late = t >= 0.05 * t[-1]
    finite = np.isfinite(envelope) & late
    cap = max((float(np.max(np.abs(s))) for s in signals), default=0.0)
    if np.any(finite):
        cap = max(cap, float(np.max(envelope[finite])))
    return 1.15 * cap if cap > 0.0 else 1.0


def emit_plots(trace: TraceRecord, out_dir: str, stem: str = "") -> list:
    """Write the kinematics and funnel SVG charts for one run.

    The kinematics chart stacks position, velocity, and acceleration
    against the reference (derivatives of the reference are recovered from
    the trace by finite differences). The funnel chart shows the error
    inside the +-1/phi0 envelope together with the control input; the
    envelope pole at t = 0 runs off the top of the axes.
    """
    if trace.t.size == 0:
        raise ValueError("cannot plot an empty trace")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    stem = stem or trace.model
    t = trace.t
    y_ref = trace.y_ref
    yd_ref = np.gradient(y_ref, t)
    ydd_ref = np.gradient(yd_ref, t)

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7.0, 8.0))
    rows = (
        (trace.y, y_ref, "position"),
        (trace.ydot, yd_ref, "velocity"),
        (trace.yddot, ydd_ref, "acceleration"),
    )
    for ax, (signal, ref, label) in zip(axes, rows):
        ax.plot(t, signal, label=label, lw=1.2)
        ax.plot(t, ref, label="reference", lw=1.0, ls="--")
        ax.set_ylabel(label)
        ax.legend(loc="best", fontsize=8)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    fig.suptitle(f"cart kinematics ({trace.model})")
    kin_path = os.path.join(out_dir, f"{stem}_kinematics.svg")
    fig.savefig(kin_path)
    plt.close(fig)

    envelope = trace.funnel0_inv.copy()
    cap = _plot_axes_limit(t, envelope, trace.e, trace.u)
    envelope[~np.isfinite(envelope)] = 10.0 * cap
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(t, envelope, color="k", lw=1.0, label="funnel boundary")
    ax.plot(t, -envelope, color="k", lw=1.0)
    ax.plot(t, trace.e, lw=1.2, label="tracking error")
    ax.plot(t, trace.u, lw=1.0, ls=":", label="control input")
    ax.set_ylim(-cap, cap)
    ax.set_xlabel("t [s]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    ax.set_title(f"performance funnel ({trace.model})")
    fun_path = os.path.join(out_dir, f"{stem}_funnel.svg")
    fig.savefig(fun_path)
    plt.close(fig)
    return [kin_path, fun_path]


def emit_overlay_plots(linear: TraceRecord, nonlinear: TraceRecord, out_dir: str) -> list:
    """Overlay charts comparing the two model legs of a dual run."""
    if linear.t.size == 0 or nonlinear.t.size == 0:
        raise ValueError("cannot plot an empty trace")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    t = linear.t

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(t, linear.y, lw=1.2, label="position (linear)")
    ax.plot(nonlinear.t, nonlinear.y, lw=1.2, ls="--", label="position (nonlinear)")
    ax.plot(t, linear.y_ref, lw=1.0, ls=":", color="k", label="reference")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    ax.set_title("model comparison: output")
    kin_path = os.path.join(out_dir, "overlay_kinematics.svg")
    fig.savefig(kin_path)
    plt.close(fig)

    envelope = linear.funnel0_inv.copy()
    cap = _plot_axes_limit(t, envelope, linear.e, linear.u, nonlinear.e, nonlinear.u)
    envelope[~np.isfinite(envelope)] = 10.0 * cap
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(t, envelope, color="k", lw=1.0, label="funnel boundary")
    ax.plot(t, -envelope, color="k", lw=1.0)
    ax.plot(t, linear.e, lw=1.2, label="error (linear)")
    ax.plot(nonlinear.t, nonlinear.e, lw=1.2, ls="--", label="error (nonlinear)")
    ax.plot(t, linear.u, lw=0.9, ls=":", label="input (linear)")
    ax.plot(nonlinear.t, nonlinear.u, lw=0.9, ls="-.", label="input (nonlinear)")
    ax.set_ylim(-cap, cap)
    ax.set_xlabel("t [s]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    ax.set_title("model comparison: funnel")
    fun_path = os.path.join(out_dir, "overlay_funnel.svg")
    fig.savefig(fun_path)
    plt.close(fig)
    return [kin_path, fun_path]


def simulate_config(cfg: ExperimentConfig, make_plots: bool = True) -> dict:
    """Validate, run every model leg, write artifacts, return the summary.

    Writes per-leg trace CSVs (re-validated after writing), SVG charts,
    overlay charts for dual runs, and a summary.json in the output
    directory. Raises RunFailure when a validated run fails mid-flight.
    """
    started = time.perf_counter()
    info = validate_run_config(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    traces = {}
    artifacts = []
    for setup in run_setups(cfg):
        try:
            record = run_closed_loop(setup)
        except (FunnelViolationError, PositivityError, CflError) as exc:
            raise RunFailure(f"{setup.model} run failed: {exc}") from exc
        path = os.path.join(cfg.out_dir, f"trace_{setup.model}.csv")
        write_trace(record, path)
        validate_trace(path)
        artifacts.append(path)
        if make_plots:
            artifacts.extend(emit_plots(record, cfg.out_dir))
        traces[setup.model] = record

    summary = {
        "model": cfg.model,
        "grid": info,
        "runs": {name: rec.summary() for name, rec in traces.items()},
    }
    if cfg.model == "both":
        if make_plots:
            artifacts.extend(
                emit_overlay_plots(traces["linear"], traces["nonlinear"], cfg.out_dir)
            )
        gap = float(np.max(np.abs(traces["linear"].y - traces["nonlinear"].y)))
        radius = 1.0 / cfg.funnel0.phi(cfg.horizon)
        summary["comparison"] = {
            "max_output_gap": gap,
            "funnel_radius_at_horizon": radius,
            "gap_over_radius": gap / radius,
        }
    summary["artifacts"] = artifacts
    summary["total_wall_time_s"] = time.perf_counter() - started

    summary_path = os.path.join(cfg.out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


DEFAULT_LAMBDA_GRID = tuple(
    complex(re, im) for re in (0.5, 1.0, 2.0, 5.0) for im in (-5.0, -1.0, 0.0, 1.0, 5.0)
)


def transfer_sweep(
    p: PhysicalParams,
    lams=DEFAULT_LAMBDA_GRID,
    n_terms: int = 10_000,
    oracle_points: int = 10_000,
) -> list:
    """Closed form vs modal series vs resolvent solve on a frequency grid.

    Returns one row dict per frequency with the closed-form value and the
    relative residuals of the other two representations.
    """
    rows = []
    for lam in lams:
        closed = analysis.transfer_closed_form(lam, p).value
        series = analysis.transfer_series(lam, n_terms, p).value
        oracle = analysis.resolvent_oracle(lam, p, oracle_points).value
        scale = abs(closed)
        rows.append(
            {
                "lam_re": lam.real,
                "lam_im": lam.imag,
                "closed_re": closed.real,
                "closed_im": closed.imag,
                "series_rel": abs(series - closed) / scale,
                "oracle_rel": abs(oracle - closed) / scale,
            }
        )
    return rows


def _write_dict_csv(rows: list, path: str) -> None:
    names = list(rows[0])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % row[name] for name in names) + "\n")


def _cmd_simulate(cfg: ExperimentConfig) -> int:
    summary = simulate_config(cfg)
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_analyze_transfer(cfg: ExperimentConfig, n_terms: int) -> int:
    rows = transfer_sweep(cfg.params, n_terms=n_terms)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "transfer_sweep.csv")
    _write_dict_csv(rows, path)
    report = {
        "points": len(rows),
        "series_terms": n_terms,
        "max_series_rel": max(row["series_rel"] for row in rows),
        "max_oracle_rel": max(row["oracle_rel"] for row in rows),
        "csv": path,
    }
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_analyze_impulse(cfg: ExperimentConfig, atoms: int) -> int:
    comb = analysis.impulse_response_comb(cfg.params, atoms)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "impulse_comb.csv")
    rows = [
        {"k": float(k), "location": loc, "weight": w}
        for k, (loc, w) in enumerate(zip(comb.locations, comb.weights))
    ]
    _write_dict_csv(rows, path)
    truncated = comb.truncated_total_variation()
    full = comb.total_variation()
    report = {
        "atoms": atoms + 1,
        "truncated_total_variation": truncated,
        "total_variation": full,
        "tail": full - truncated,
        "csv": path,
    }
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_check_config(cfg: ExperimentConfig) -> int:
    info = validate_run_config(cfg)
    json.dump({"valid": True, "model": cfg.model, "grid": info}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _add_common_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="path to a key = value config file")
    sp.add_argument("--preset", choices=sorted(PRESETS), help="bundled scenario")
    sp.add_argument("--out", help="output directory (overrides output.dir)")
    sp.add_argument(
        "--seed",
        type=int,
        default=None,
        help="reserved for randomized tooling; simulations are deterministic",
    )


def _load_config(args, default_preset: str = "") -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = parse_config(args.config)
    elif args.preset:
        cfg = PRESETS[args.preset]()
    elif default_preset:
        cfg = PRESETS[default_preset]()
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.out:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tanktrack",
        description="funnel-controlled water tank: simulation and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a closed-loop scenario")
    _add_common_flags(sim)

    ana = sub.add_parser("analyze", help="frequency-domain analysis")
    ana_sub = ana.add_subparsers(dest="what", required=True)
    tra = ana_sub.add_parser("transfer", help="transfer-function cross-check sweep")
    _add_common_flags(tra)
    tra.add_argument("--terms", type=int, default=10_000, help="modal series length")
    imp = ana_sub.add_parser("impulse", help="impulse-response comb and its TV")
    _add_common_flags(imp)
    imp.add_argument("--atoms", type=int, default=200, help="comb truncation index")

    chk = sub.add_parser("check", help="validate inputs without running")
    chk_sub = chk.add_subparsers(dest="what", required=True)
    ccf = chk_sub.add_parser("config", help="validate a config file")
    _add_common_flags(ccf)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "simulate":
            return _cmd_simulate(_load_config(args))
        if args.command == "analyze":
            cfg = _load_config(args, default_preset="experiment1")
            if args.what == "transfer":
                return _cmd_analyze_transfer(cfg, args.terms)
            return _cmd_analyze_impulse(cfg, args.atoms)
        if args.command == "check":
            _cmd_check_config(_load_config(args))
            return 0
    except (FunnelClassError, FeasibilityError, ConfigError, TraceValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
