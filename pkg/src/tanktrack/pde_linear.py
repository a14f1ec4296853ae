"""Transport solver for the linearized shallow-water tank.

The linear model for depth z1 and relative velocity z2 on [0, 1],

    dt z1 = -h0 * dzeta z2,
    dt z2 = -g * dzeta z1 - 2*mu*z2 - ydd,      z2 = 0 at both walls,

is advanced in characteristic variables

    eta1 = (z1 + (c/g) z2) / 2,   eta2 = (z1 - (c/g) z2) / 2,   c = sqrt(h0*g),

which decouple the wave operator into one rightward and one leftward
transport equation exchanging amplitude through the damping mu:

    dt eta1 + c dzeta eta1 + mu (eta1 - eta2) = -(c/2g) ydd,
    dt eta2 - c dzeta eta2 - mu (eta1 - eta2) = +(c/2g) ydd.

Discretization: first-order upwind fluxes on node-centered control volumes
(half-width cells at the walls, so cell volumes coincide with the trapezoid
quadrature weights). The rightward component is advanced implicitly (lower
bidiagonal solve, coupling implicit in its own variable with the leftward
component lagged); the leftward component is advanced explicitly and reuses
the fresh rightward values in the coupling term, so the exchange terms cancel
pointwise in the depth budget. The wall condition z2 = 0 (perfect reflection
eta1 = eta2) enters twice:

* through the wall fluxes: the incoming characteristic flux equals the
  outgoing one at the same time level, so the net depth flux through each
  wall is exactly zero and the trapezoid mass of z1 is conserved to roundoff
  for arbitrary forcing;
* through a mass-neutral projection after the update (both characteristic
  components at each wall node are replaced by their mean), which restores
  eta1 = eta2 at the walls exactly without touching z1 there.

The forcing term is dropped on the wall rows of both legs: it drives the
relative velocity, which is pinned to zero at the walls, so the projected
wall value must evolve by transport alone. Keeping it would leave a spurious
O(ydd) point source at the left wall after projection (the implicit leg
damps the source by the diagonal factor, the explicit leg re-adds it
undamped). Mass cancellation is row-wise and unaffected.

Stability: the explicit leg with half-width wall cells is monotone for
c*dt/dzeta <= 1/2, which LinearStepConfig enforces. The operational grids
tie dt to the spacing so that c*dt/dzeta ~= 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .model_core import PhysicalParams, SpatialGrid, StateField

# explicit-leg stability bound of this scheme (half cells at the walls)
CFL_LIMIT = 0.5


class CflError(ValueError):
    """Raised when the time step violates the advective stability bound."""


@dataclass
class CharacteristicState:
    """Rightward (eta1) and leftward (eta2) wave amplitudes [m].

    Wall coupling eta1 = eta2 holds at both end nodes (zero relative
    velocity); z1 = eta1 + eta2, z2 = (g/c) (eta1 - eta2).
    """

    eta1: np.ndarray
    eta2: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.eta1 = np.asarray(self.eta1, dtype=float)
        self.eta2 = np.asarray(self.eta2, dtype=float)
        if self.eta1.shape != self.eta2.shape or self.eta1.ndim != 1:
            raise ValueError("eta1 and eta2 must be 1-d arrays on one grid")

    def copy(self) -> "CharacteristicState":
        return CharacteristicState(self.eta1.copy(), self.eta2.copy(), self.time)


@dataclass(frozen=True)
class LinearStepConfig:
    """Grid, physics and time step of the linear solver.

    Construction validates the step: dt > 0 and the advective CFL number
    c*dt/dzeta within this scheme's explicit-leg bound of 1/2.
    """

    grid: SpatialGrid
    params: PhysicalParams
    dt: float

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        cfl = self.cfl
        if cfl > CFL_LIMIT * (1.0 + 1e-9):
            raise CflError(
                f"explicit leg unstable: c*dt/dzeta = {cfl:.6g} > {CFL_LIMIT}; "
                f"reduce dt below {CFL_LIMIT * self.grid.spacing / self.params.c:.6g}"
            )

    @property
    def cfl(self) -> float:
        return self.params.c * self.dt / self.grid.spacing


def to_characteristic(s: StateField, p: PhysicalParams) -> CharacteristicState:
    """Map a (z1, z2) state to characteristic amplitudes."""
    r = p.c / p.g
    return CharacteristicState(
        0.5 * (s.z1 + r * s.z2), 0.5 * (s.z1 - r * s.z2), s.time
    )


def from_characteristic(cs: CharacteristicState, p: PhysicalParams) -> StateField:
    """Map characteristic amplitudes back to the (z1, z2) state."""
    return StateField(
        cs.eta1 + cs.eta2, (p.g / p.c) * (cs.eta1 - cs.eta2), cs.time
    )


def solve_steady_state(p: PhysicalParams, grid: SpatialGrid) -> StateField:
    """Flat rest state: depth h0 everywhere, no relative flow."""
    n = grid.n_points
    return StateField(np.full(n, p.h0), np.zeros(n), 0.0)


def step_linear(
    s: CharacteristicState, ydd: float, cfg: LinearStepConfig
) -> CharacteristicState:
    """Advance the characteristic state by one step under constant forcing.

    Parameters
    ----------
    s : CharacteristicState
        State at the current time, eta1 = eta2 at the walls.
    ydd : float
        Cart acceleration [m/s^2], held constant over the step.
    cfg : LinearStepConfig
        Validated step configuration.

    Returns
    -------
    CharacteristicState
        Fresh state at time + dt. The input is not modified.
    """
    p = cfg.params
    n = cfg.grid.n_points
    lam = cfg.cfl
    mm = p.mu * cfg.dt
    src = np.full(n, (p.c / (2.0 * p.g)) * ydd * cfg.dt)
    src[0] = src[-1] = 0.0  # forcing drives z2, which is pinned at the walls

    e1, e2 = s.eta1, s.eta2

    # implicit rightward leg: (1 + lam_i + mm) x_i - lam_i x_{i-1} = rhs_i,
    # wall rows carry 2*lam (half cells); left-wall inflow is the reflected
    # outgoing amplitude at the old time level
    ab = np.zeros((2, n))
    ab[0] = 1.0 + lam + mm
    ab[0, 0] = ab[0, -1] = 1.0 + 2.0 * lam + mm
    ab[1, : n - 1] = -lam  # banded storage: ab[1, j] holds row j+1's subdiagonal
    ab[1, n - 2] = -2.0 * lam
    rhs = e1 + mm * e2 - src
    rhs[0] += 2.0 * lam * e2[0]
    new1 = solve_banded((1, 0), ab, rhs)

    # explicit leftward leg, coupling evaluated with the fresh eta1 so the
    # exchange cancels pointwise in z1 = eta1 + eta2
    coup = mm * (new1 - e2) + src
    new2 = np.empty(n)
    new2[0] = e2[0] + 2.0 * lam * (e2[1] - e2[0]) + coup[0]
    new2[1:-1] = e2[1:-1] + lam * (e2[2:] - e2[1:-1]) + coup[1:-1]
    new2[-1] = e2[-1] + 2.0 * lam * (new1[-1] - e2[-1]) + coup[-1]

    # mass-neutral wall projection: zero relative velocity, depth untouched
    for i in (0, -1):
        mean = 0.5 * (new1[i] + new2[i])
        new1[i] = mean
        new2[i] = mean

    return CharacteristicState(new1, new2, s.time + cfg.dt)


def semi_discrete_system(cfg: LinearStepConfig) -> tuple[np.ndarray, np.ndarray]:
    """Dense method-of-lines form of the spatial discretization.

    Returns (A, b) with d/dt [eta1; eta2] = A @ [eta1; eta2] + b * ydd: the
    same first-order upwind interior stencil as step_linear, with the wall
    reflection imposed strongly. Both characteristic components at a wall
    node share one averaged equation (the continuous-time limit of the
    per-step mean projection), so eta1 = eta2 stays invariant there, the
    damping exchange and the forcing cancel at the walls, and the wall value
    moves by the outgoing one-sided transport alone. Meant for small grids:
    the matrix is dense 2n x 2n. Tests integrate it with high-accuracy
    methods as an independent time-integration oracle for the split stepping.
    """
    p = cfg.params
    n = cfg.grid.n_points
    a = p.c / cfg.grid.spacing
    mu = p.mu
    A = np.zeros((2 * n, 2 * n))

    # rightward component rows, interior
    for i in range(1, n - 1):
        A[i, i] += -a
        A[i, i - 1] += a
    # leftward component rows, interior
    for i in range(1, n - 1):
        A[n + i, n + i] += -a
        A[n + i, n + i + 1] += a
    # damping exchange, interior only (cancels in the wall average)
    for i in range(1, n - 1):
        A[i, i] += -mu
        A[i, n + i] += mu
        A[n + i, i] += mu
        A[n + i, n + i] += -mu
    # wall pairs: identical averaged rows, outgoing one-sided transport
    for row in (0, n):  # left wall follows the leftward (outgoing) amplitude
        A[row, n] = -a
        A[row, n + 1] = a
    for row in (n - 1, 2 * n - 1):  # right wall follows the rightward one
        A[row, n - 1] = -a
        A[row, n - 2] = a

    b = np.zeros(2 * n)
    s_coef = p.c / (2.0 * p.g)
    b[1 : n - 1] = -s_coef
    b[n + 1 : 2 * n - 1] = s_coef
    return A, b
