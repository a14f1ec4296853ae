"""Error-funnel tracking controller of relative degree two.

The controller keeps the tracking error e = y - y_ref inside the shrinking
tube |e(t)| < 1/phi0(t) by blowing up its gains as the error approaches the
funnel boundary:

    k0 = 1 / (1 - phi0(t)^2 e^2),   w = edot + k0 e,
    k1 = 1 / (1 - phi1(t)^2 w^2),   u = -k1 w.

Admissible funnel shapes phi are C^1, bounded with bounded derivative,
positive for t > 0 and bounded away from zero at infinity; phi(0) = 0 is
allowed and gives an unconstrained start.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .model_core import ReferenceSignal


class FunnelClassError(ValueError):
    """Raised when a funnel shape violates the admissible class."""


class FeasibilityError(ValueError):
    """Raised when initial data start outside the funnel."""


class FunnelViolationError(RuntimeError):
    """Raised when the running error reaches the funnel boundary."""

    def __init__(self, time: float, which: str):
        self.time = time
        self.which = which
        super().__init__(
            f"funnel boundary reached at t = {time:.6g} ({which} channel)"
        )


@dataclass(frozen=True)
class FunnelSpec:
    """Parametric funnel shape.

    kind ``scaled-tanh``: phi(t) = scale * tanh(omega * t), the operational
    choice (wide-open start, radius shrinking to 1/scale).
    kind ``constant``: phi(t) = scale, for funnels active from t = 0.
    """

    scale: float
    omega: float = 0.0
    kind: str = "scaled-tanh"

    def phi(self, t: float) -> float:
        if self.kind == "scaled-tanh":
            return self.scale * math.tanh(self.omega * t)
        return self.scale

    def phi_dot(self, t: float) -> float:
        if self.kind == "scaled-tanh":
            th = math.tanh(self.omega * t)
            return self.scale * self.omega * (1.0 - th * th)
        return 0.0


@dataclass(frozen=True)
class GainState:
    """Gains and the combined error w = edot + k0*e of one control evaluation."""

    k0: float
    k1: float
    w: float


# sampling horizon and density used by validate_funnel_class
_SAMPLE_TIMES = np.concatenate(([0.0], np.logspace(-6.0, 6.0, 121)))


def validate_funnel_class(phi: FunnelSpec) -> None:
    """Check membership of phi in the admissible funnel class.

    Raises FunnelClassError naming the first violated property. Parametric
    shortcuts are checked first; the shape is then sampled on a logarithmic
    time grid up to 1e6 s as a guard against future kinds.
    """
    if phi.kind not in ("scaled-tanh", "constant"):
        raise FunnelClassError(f"unknown funnel kind {phi.kind!r}")
    if not phi.scale > 0.0:
        raise FunnelClassError("positivity: funnel scale must be > 0")
    if phi.kind == "scaled-tanh" and not phi.omega > 0.0:
        raise FunnelClassError(
            "positivity: scaled-tanh needs omega > 0 to open the funnel"
        )
    vals = np.array([phi.phi(t) for t in _SAMPLE_TIMES])
    slopes = np.array([phi.phi_dot(t) for t in _SAMPLE_TIMES])
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(slopes))):
        raise FunnelClassError("boundedness: phi or phi' not finite")
    if np.any(vals[1:] <= 0.0):
        raise FunnelClassError("positivity: phi(t) <= 0 for some t > 0")
    if vals[-1] <= 0.0:
        raise FunnelClassError("asymptotic positivity: liminf phi <= 0")


def check_initial_feasibility(
    phi0: FunnelSpec,
    phi1: FunnelSpec,
    y0: float,
    y1: float,
    ref: ReferenceSignal,
) -> None:
    """Verify that (y0, y1) start strictly inside both funnels at t = 0.

    The two strict inequalities are checked in order; the error names the
    first one that fails. With phi(0) = 0 both hold trivially.
    """
    yr0, ydr0, _ = ref.eval(0.0)
    e0 = y0 - yr0
    p0 = phi0.phi(0.0)
    if not p0 * abs(e0) < 1.0:
        raise FeasibilityError(
            "initial position error outside funnel: phi0(0)*|y0 - y_ref(0)| >= 1"
        )
    k0 = 1.0 / (1.0 - (p0 * e0) ** 2)
    w = (y1 - ydr0) + k0 * e0
    if not phi1.phi(0.0) * abs(w) < 1.0:
        raise FeasibilityError(
            "initial combined error outside funnel: "
            "phi1(0)*|y1 - yd_ref(0) + k0(0)*e(0)| >= 1"
        )


def control_input(
    t: float,
    e: float,
    edot: float,
    phi0: FunnelSpec,
    phi1: FunnelSpec,
) -> tuple[float, GainState]:
    """Evaluate the funnel control law at time t.

    Returns the force u [N] and the gain state. Raises FunnelViolationError
    when either gain denominator is not strictly positive, i.e. the error
    has reached its funnel boundary. Both gains are >= 1 inside the funnel.
    """
    p0 = phi0.phi(t)
    d0 = 1.0 - (p0 * e) ** 2
    if d0 <= 0.0:
        raise FunnelViolationError(t, "position")
    k0 = 1.0 / d0
    w = edot + k0 * e
    p1 = phi1.phi(t)
    d1 = 1.0 - (p1 * w) ** 2
    if d1 <= 0.0:
        raise FunnelViolationError(t, "derivative")
    k1 = 1.0 / d1
    return -k1 * w, GainState(k0=k0, k1=k1, w=w)
