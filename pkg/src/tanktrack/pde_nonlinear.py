"""Nonlinear shallow-water solver for the sloshing flow in a moving tank.

State variables are the water depth h(t, zeta) [m] and the horizontal
velocity v(t, zeta) [m/s] relative to the tank, on the normalized interval
[0, 1]:

    dt h + dzeta(h v) = 0,
    dt v + dzeta(v^2/2 + g h) + h S(v/h) = -ydd,    v = 0 at both walls,

where S(z) = c_d z + c_s z^2 is the quadratic friction law and ydd is the
cart acceleration acting as a uniform body force in the tank frame.

Scheme: Rusanov fluxes (central average plus local Lax-Friedrichs diffusion
scaled by the global wave speed max|v| + sqrt(g h)) on the same node-centered
control volumes as the linear solver, with half-width cells at the walls.
The wall mass flux is identically zero because v is pinned there, so the
trapezoid mass of h is conserved to roundoff. Friction and forcing are
applied pointwise after the hyperbolic update (first-order splitting), and
the wall velocities are re-pinned to zero. No limiters or entropy fixes: the
closed-loop regimes this solver targets stay smooth and well away from dry
states, and depth positivity is guarded by a hard error, not by clipping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import PhysicalParams, SpatialGrid
from .pde_linear import CflError, LinearStepConfig


class PositivityError(RuntimeError):
    """Raised when the depth profile loses positivity during a step.

    The flow is too violent for the grid/step combination; refining the
    grid (or shrinking the step) is the remedy, clipping is not.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass
class NonlinearState:
    """Depth and relative velocity profiles at one instant.

    Invariants: h > 0 everywhere and v vanishes at both walls. Both are
    checked on construction; steppers keep them or raise.
    """

    h: np.ndarray
    v: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.h.shape != self.v.shape or self.h.ndim != 1:
            raise ValueError("h and v must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.v))):
            raise ValueError("profiles must be finite")
        if np.any(self.h <= 0.0):
            raise ValueError("depth must be positive everywhere")
        if self.v[0] != 0.0 or self.v[-1] != 0.0:
            raise ValueError("wall velocities must vanish")

    def copy(self) -> "NonlinearState":
        return NonlinearState(self.h.copy(), self.v.copy(), self.time)


def friction(v_over_h, p: PhysicalParams):
    """Friction law S(z) = c_d z + c_s z^2 for the velocity ratio z = v/h.

    Accepts scalars or arrays. The linear coefficient doubles as the
    linearized damping: S'(0) = c_d recovers mu = c_d / 2.
    """
    z = np.asarray(v_over_h, dtype=float)
    out = p.c_d * z + p.c_s * z * z
    return float(out) if out.ndim == 0 else out


def step_nonlinear(
    s: NonlinearState, ydd: float, cfg: LinearStepConfig
) -> NonlinearState:
    """Advance depth and velocity by one step under constant forcing.

    Raises CflError when the instantaneous wave speed outruns the grid and
    PositivityError when the updated depth is not strictly positive.
    """
    p = cfg.params
    dz = cfg.grid.spacing
    h, v = s.h, s.v

    speed = float(np.max(np.abs(v) + np.sqrt(p.g * h)))
    courant = speed * cfg.dt / dz
    if courant > 1.0 + 1e-9:
        raise CflError(
            f"nonlinear wave speed {speed:.6g} m/s needs dt <= {dz / speed:.6g} s "
            f"(got dt = {cfg.dt:.6g} s, Courant number {courant:.3f} > 1) "
            f"at t = {s.time:.6g} s"
        )

    # Rusanov interface fluxes between nodes i and i+1
    fh = h * v
    fv = 0.5 * v * v + p.g * h
    flux_h = 0.5 * (fh[:-1] + fh[1:]) - 0.5 * speed * (h[1:] - h[:-1])
    flux_v = 0.5 * (fv[:-1] + fv[1:]) - 0.5 * speed * (v[1:] - v[:-1])

    # depth: conservative update; wall boundary fluxes are exactly zero
    # (h v with v pinned), so the trapezoid mass telescopes to a constant
    r = cfg.dt / dz
    new_h = h.copy()
    new_h[1:-1] -= r * (flux_h[1:] - flux_h[:-1])
    new_h[0] -= 2.0 * r * flux_h[0]
    new_h[-1] -= 2.0 * r * (0.0 - flux_h[-1])

    if np.any(new_h <= 0.0):
        worst = int(np.argmin(new_h))
        raise PositivityError(
            f"depth lost positivity at node {worst} "
            f"(h = {new_h[worst]:.6g} m) at t = {s.time + cfg.dt:.6g} s; "
            "the flow is too violent for this grid",
            time=s.time + cfg.dt,
        )

    # velocity: flux form in the interior, walls stay pinned
    new_v = v.copy()
    new_v[1:-1] -= r * (flux_v[1:] - flux_v[:-1])

    # split sources: friction -h S(v/h) = -(c_d v + c_s v^2/h), forcing -ydd
    new_v[1:-1] -= cfg.dt * (
        p.c_d * new_v[1:-1]
        + p.c_s * new_v[1:-1] ** 2 / new_h[1:-1]
        + ydd
    )
    new_v[0] = new_v[-1] = 0.0

    return NonlinearState(new_h, new_v, s.time + cfg.dt)


def nonlinear_output_rhs(
    s: NonlinearState, u: float, p: PhysicalParams, grid: SpatialGrid
) -> float:
    """Cart acceleration from the momentum balance of the nonlinear model.

    m ydd = u + c_d * int(h v) + c_s * int(v^2) + (g/2) (h(1)^2 - h(0)^2),
    all integrals by the trapezoid rule on the solver grid.
    """
    drag = p.c_d * grid.trapezoid(s.h * s.v) + p.c_s * grid.trapezoid(s.v * s.v)
    wall = 0.5 * p.g * (s.h[-1] ** 2 - s.h[0] ** 2)
    return (u + drag + wall) / p.m
