"""Closed-loop coupling of funnel controller, cart, and tank flow.

One run advances the coupled system

    cart:  m ydd = output functional of the flow state + control force u,
    flow:  linear characteristic solver or nonlinear shallow-water solver,
    law:   u from the two-stage funnel controller on (e, edot),

in lockstep on a shared uniform time grid. Per step: sample the tracking
error, evaluate the control force and the cart acceleration from the
momentum balance (ydd is always this evaluation, never a finite difference
of ydot), advance the cart by semi-implicit Euler (velocity first), then
advance the flow field one step with ydd held constant. There is no
algebraic loop: u depends only on (e, edot), so ydd is explicit.

Every step appends one row to the trace (time, cart outputs, reference,
error, funnel boundaries, gains, force, mass, energy), so a run with
``steps`` steps yields ``steps + 1`` rows. Identical setups produce
bit-identical traces: the loop is pure floating-point arithmetic in a fixed
order with no randomness.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np

from .funnel_controller import (
    FunnelSpec,
    GainState,
    check_initial_feasibility,
    control_input,
    validate_funnel_class,
)
from .model_core import (
    CartState,
    PhysicalParams,
    ReferenceSignal,
    SpatialGrid,
    StateField,
    energy,
)
from .pde_linear import (
    CharacteristicState,
    LinearStepConfig,
    from_characteristic,
    step_linear,
    to_characteristic,
)
from .pde_nonlinear import NonlinearState, nonlinear_output_rhs, step_nonlinear

TRACE_COLUMNS = (
    "t",
    "y",
    "ydot",
    "yddot",
    "y_ref",
    "e",
    "funnel0_inv",
    "funnel1_inv",
    "k0",
    "k1",
    "u",
    "mass",
    "energy",
)


def linear_output_rhs(
    state: StateField, ydot: float, u: float, p: PhysicalParams, grid: SpatialGrid
) -> float:
    """Cart acceleration from the linearized momentum balance.

    m ydd = (g/2) (z1(1)^2 - z1(0)^2) + 2 mu <z1, z2>
            + 2 mu ydot (int z1 - h0) + u.

    The ydot term is proportional to the mass defect and vanishes when the
    flow solver conserves mass; it is kept so the expression stays exact for
    arbitrary profiles.
    """
    z1, z2 = state.z1, state.z2
    wall = 0.5 * p.g * (z1[-1] ** 2 - z1[0] ** 2)
    exchange = 2.0 * p.mu * grid.trapezoid(z1 * z2)
    defect = 2.0 * p.mu * ydot * (grid.trapezoid(z1) - p.h0)
    return (wall + exchange + defect + u) / p.m


@dataclass
class ClosedLoopState:
    """Snapshot of the coupled system at one instant."""

    cart: CartState
    flow: Union[CharacteristicState, NonlinearState]
    gains: GainState
    u: float
    t: float


@dataclass
class TraceRecord:
    """Per-step history of a closed-loop run.

    Column arrays all share one length (steps + 1); ``snapshots`` holds a
    few (time, depth profile, velocity profile) triples for plotting.
    """

    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    yddot: np.ndarray
    y_ref: np.ndarray
    e: np.ndarray
    funnel0_inv: np.ndarray
    funnel1_inv: np.ndarray
    k0: np.ndarray
    k1: np.ndarray
    u: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    model: str
    wall_time: float
    snapshots: List[Tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)
    final_state: ClosedLoopState = None

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise KeyError(f"unknown trace column {name!r}")
        return getattr(self, name)

    def as_matrix(self) -> np.ndarray:
        """Rows x columns view in TRACE_COLUMNS order."""
        return np.column_stack([getattr(self, c) for c in TRACE_COLUMNS])

    def funnel_margin(self) -> float:
        """min over t >= dt of (funnel radius - |e|); positive means in-funnel.

        The first sample is excluded: the funnel boundary is infinite at
        t = 0 for vanishing funnel functions.
        """
        if len(self.t) < 2:
            return float("inf")
        return float(np.min(self.funnel0_inv[1:] - np.abs(self.e[1:])))

    def summary(self) -> dict:
        mass_drift = float(np.max(np.abs(self.mass - self.mass[0])))
        rel = mass_drift / abs(self.mass[0]) if self.mass[0] != 0.0 else mass_drift
        return {
            "model": self.model,
            "steps": int(len(self.t) - 1),
            "funnel_margin": self.funnel_margin(),
            "max_abs_u": float(np.max(np.abs(self.u))),
            "max_k0": float(np.max(self.k0)),
            "max_k1": float(np.max(self.k1)),
            "max_abs_y": float(np.max(np.abs(self.y))),
            "max_abs_ydot": float(np.max(np.abs(self.ydot))),
            "final_abs_e": float(abs(self.e[-1])),
            "mass_drift_rel": rel,
            "wall_time_s": self.wall_time,
        }


@dataclass(frozen=True)
class RunSetup:
    """Everything one closed-loop run needs, already validated upstream.

    ``initial_field`` is given in physical variables (depth, relative
    velocity); the linear model converts to characteristic form internally.
    ``steps`` time steps of size ``dt`` cover the horizon steps * dt.
    """

    params: PhysicalParams
    grid: SpatialGrid
    dt: float
    steps: int
    model: str
    reference: ReferenceSignal
    funnel0: FunnelSpec
    funnel1: FunnelSpec
    initial_field: StateField
    y0: float = 0.0
    y1: float = 0.0
    snapshot_count: int = 10

    def __post_init__(self):
        if self.model not in ("linear", "nonlinear"):
            raise ValueError(f"model must be linear or nonlinear, got {self.model!r}")
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.initial_field.z1.shape[0] != self.grid.n_points:
            raise ValueError("initial field does not match the grid")


def _nonlinear_energy(s: NonlinearState, grid: SpatialGrid, p: PhysicalParams) -> float:
    return 0.5 * grid.trapezoid(p.g * s.h**2 + s.h * s.v**2)


def run_closed_loop(setup: RunSetup) -> TraceRecord:
    """Run the coupled system and return the full trace.

    Raises FeasibilityError / FunnelClassError before any stepping when the
    configuration is inadmissible, FunnelViolationError (with the failure
    time) when the error hits the funnel boundary mid-run, and the solver's
    CflError / PositivityError when the flow outruns the grid.
    """
    started = _time.perf_counter()
    p, grid, dt = setup.params, setup.grid, setup.dt

    validate_funnel_class(setup.funnel0)
    validate_funnel_class(setup.funnel1)
    f0 = setup.initial_field
    # wall condition on the initial velocity; profiles that are zero at the
    # walls analytically may carry roundoff there, which is pinned away
    if abs(f0.z2[0]) > 1e-12 or abs(f0.z2[-1]) > 1e-12:
        raise ValueError("initial velocity profile must vanish at both walls")
    vel0 = f0.z2.copy()
    vel0[0] = vel0[-1] = 0.0
    f0 = StateField(f0.z1.copy(), vel0, 0.0)
    check_initial_feasibility(
        setup.funnel0, setup.funnel1, setup.y0, setup.y1, setup.reference
    )

    cfg = LinearStepConfig(grid, p, dt)
    linear = setup.model == "linear"
    if linear:
        flow = to_characteristic(f0, p)
    else:
        flow = NonlinearState(f0.z1, f0.z2, 0.0)

    rows = setup.steps + 1
    cols = {name: np.empty(rows) for name in TRACE_COLUMNS}
    snapshots: List[Tuple[float, np.ndarray, np.ndarray]] = []
    if setup.snapshot_count > 0:
        snap_at = set(
            np.linspace(0, setup.steps, min(setup.snapshot_count, rows), dtype=int).tolist()
        )
    else:
        snap_at = set()

    y, ydot = float(setup.y0), float(setup.y1)
    gains = None
    u = 0.0

    for k in range(rows):
        t = k * dt
        yr, yr_dot, _ = setup.reference.eval(t)
        e = y - yr
        edot = ydot - yr_dot
        u, gains = control_input(t, e, edot, setup.funnel0, setup.funnel1)

        if linear:
            zstate = from_characteristic(flow, p)
            ydd = linear_output_rhs(zstate, ydot, u, p, grid)
            depth, vel = zstate.z1, zstate.z2
            en = energy(zstate, grid, p)
        else:
            ydd = nonlinear_output_rhs(flow, u, p, grid)
            depth, vel = flow.h, flow.v
            en = _nonlinear_energy(flow, grid, p)

        phi0 = setup.funnel0.phi(t)
        phi1 = setup.funnel1.phi(t)
        cols["t"][k] = t
        cols["y"][k] = y
        cols["ydot"][k] = ydot
        cols["yddot"][k] = ydd
        cols["y_ref"][k] = yr
        cols["e"][k] = e
        cols["funnel0_inv"][k] = 1.0 / phi0 if phi0 > 0.0 else np.inf
        cols["funnel1_inv"][k] = 1.0 / phi1 if phi1 > 0.0 else np.inf
        cols["k0"][k] = gains.k0
        cols["k1"][k] = gains.k1
        cols["u"][k] = u
        cols["mass"][k] = grid.trapezoid(depth)
        cols["energy"][k] = en
        if k in snap_at:
            snapshots.append((t, depth.copy(), vel.copy()))

        if k == setup.steps:
            break

        # cart first (velocity update uses the freshly evaluated ydd), then
        # the flow with ydd frozen across the step
        ydot = ydot + dt * ydd
        y = y + dt * ydot
        if linear:
            flow = step_linear(flow, ydd, cfg)
        else:
            flow = step_nonlinear(flow, ydd, cfg)

    final = ClosedLoopState(
        cart=CartState(y, ydot), flow=flow, gains=gains, u=u, t=setup.steps * dt
    )
    return TraceRecord(
        model=setup.model,
        wall_time=_time.perf_counter() - started,
        snapshots=snapshots,
        final_state=final,
        **cols,
    )
