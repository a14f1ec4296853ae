"""Shared model data for the water tank on a moving cart.

All quantities are SI (m, s, kg). The tank interior is normalized to the
interval [0, 1]; spatial profiles are sampled on a uniform node grid that
includes both walls. The linear model state holds the water depth z1 [m] and
the velocity z2 [m/s] of the water relative to the cart; the wall condition
is z2 = 0 at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the cart-tank system.

    Parameters
    ----------
    m : float
        Total mass of cart plus tank [kg].
    h0 : float
        Rest water depth [m].
    g : float
        Gravitational acceleration [m/s^2].
    mu : float
        Linear damping rate of the relative flow [1/s]. Equals half the
        slope of the friction law at zero, so mu = c_d / 2 whenever the
        nonlinear friction coefficients are in play. Must be positive: the
        undamped case is a structurally different problem and is rejected.
    c_d, c_s : float
        Linear and quadratic friction coefficients of the nonlinear model
        (dimensionless rate coefficients applied to the velocity ratio).
    """

    m: float
    h0: float
    g: float
    mu: float
    c_d: float = 0.0
    c_s: float = 0.0

    def __post_init__(self):
        for name in ("m", "h0", "g", "mu"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"PhysicalParams.{name} must be > 0")
        for name in ("c_d", "c_s"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"PhysicalParams.{name} must be >= 0")

    @property
    def c(self) -> float:
        """Gravity wave speed sqrt(h0*g) [m/s]."""
        return math.sqrt(self.h0 * self.g)

    @property
    def f(self) -> float:
        """Natural frequency sqrt(g/h0) [1/s]."""
        return math.sqrt(self.g / self.h0)

    @property
    def tau(self) -> float:
        """Natural time scale 1/f [s]."""
        return 1.0 / self.f


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform node grid on [0, 1] with both walls included."""

    n_points: int

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("SpatialGrid needs at least 3 nodes")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    def trapezoid(self, values) -> float:
        """Trapezoidal quadrature of nodal values over [0, 1]."""
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n_points,):
            raise ValueError("values must be sampled on the grid nodes")
        return self.spacing * (v.sum() - 0.5 * (v[0] + v[-1]))


def _as_profile(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be a 1-d profile")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass
class StateField:
    """Linear-model water state: depth z1 [m] and relative velocity z2 [m/s]."""

    z1: np.ndarray
    z2: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.z1 = _as_profile(self.z1, "z1")
        self.z2 = _as_profile(self.z2, "z2")
        if self.z1.shape != self.z2.shape:
            raise ValueError("z1 and z2 must share the grid")

    def copy(self) -> "StateField":
        return StateField(self.z1.copy(), self.z2.copy(), self.time)


@dataclass
class CartState:
    """Cart position y [m] and velocity ydot [m/s]."""

    y: float
    ydot: float

    def __post_init__(self):
        if not (math.isfinite(self.y) and math.isfinite(self.ydot)):
            raise ValueError("cart state must be finite")


@dataclass(frozen=True)
class ReferenceSignal:
    """Smooth position reference for the cart.

    The only implemented kind is ``squared-tanh``: y_ref(t) = tanh(omega*t)^2,
    a C-infinity ramp from 0 to 1 with y_ref(0) = yd_ref(0) = 0. All
    derivatives are evaluated analytically; omega = 0 gives the identically
    zero reference.
    """

    omega: float
    kind: str = "squared-tanh"

    def __post_init__(self):
        if self.kind != "squared-tanh":
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.omega < 0.0:
            raise ValueError("reference omega must be >= 0")

    def eval(self, t):
        """Return (y_ref, yd_ref, ydd_ref) at time t >= 0 (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0):
            raise ValueError("reference is defined for t >= 0")
        s = self.omega * t_arr
        th = np.tanh(s)
        sech2 = 1.0 - th * th
        y = th * th
        yd = 2.0 * self.omega * th * sech2
        ydd = 2.0 * self.omega**2 * sech2 * (sech2 - 2.0 * th * th)
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(y), float(yd), float(ydd)
        return y, yd, ydd


def reference_eval(ref: ReferenceSignal, t):
    """Evaluate the reference and its first two derivatives at time t."""
    return ref.eval(t)


def mass_integral(s: StateField, grid: SpatialGrid) -> float:
    """Total water volume per unit width: integral of z1 over [0, 1] [m^2]."""
    return grid.trapezoid(s.z1)


def energy(s: StateField, grid: SpatialGrid, p: PhysicalParams) -> float:
    """Quadratic energy 0.5 * integral(g*z1^2 + h0*z2^2) of the linear model.

    For the free system (no cart forcing) this functional is non-increasing
    in time; the decay rate is 2*mu*h0*integral(z2^2).
    """
    dens = p.g * s.z1 * s.z1 + p.h0 * s.z2 * s.z2
    return 0.5 * grid.trapezoid(dens)
