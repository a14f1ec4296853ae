import math

import numpy as np
import pytest

from tanktrack import (
    PhysicalParams,
    ReferenceSignal,
    SpatialGrid,
    StateField,
    energy,
    mass_integral,
)

P1 = PhysicalParams(m=1.0, h0=0.5, g=9.81, mu=0.1)
OMEGA1 = 0.06 * math.pi * P1.f

# frozen against a 50-digit evaluation of the closed forms
REF_AT_QUARTER = (
    0.042334392749785413018,
    0.32903430400464962521,
    1.1656221679440004259,
)


def test_derived_scales():
    assert P1.c == pytest.approx(math.sqrt(0.5 * 9.81), rel=1e-15)
    assert P1.f * P1.tau == pytest.approx(1.0, rel=1e-15)
    # transit time times wave speed is the rest depth for a unit tank
    assert P1.c * P1.tau == pytest.approx(P1.h0, rel=1e-14)


def test_params_reject_nonpositive():
    base = dict(m=1.0, h0=0.5, g=9.81, mu=0.1)
    for key in ("m", "h0", "g", "mu"):
        bad = dict(base)
        bad[key] = 0.0
        with pytest.raises(ValueError):
            PhysicalParams(**bad)
    with pytest.raises(ValueError):
        PhysicalParams(c_d=-0.1, **base)
    with pytest.raises(ValueError):
        PhysicalParams(c_s=-1.0, **base)


def test_grid_spacing_and_nodes():
    grid = SpatialGrid(11)
    assert grid.spacing == pytest.approx(0.1, rel=1e-15)
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 1.0
    with pytest.raises(ValueError):
        SpatialGrid(2)


def test_trapezoid_exact_on_affine():
    grid = SpatialGrid(17)
    zeta = grid.nodes
    assert grid.trapezoid(np.ones(17)) == pytest.approx(1.0, rel=1e-15)
    assert grid.trapezoid(3.0 - 2.0 * zeta) == pytest.approx(2.0, rel=1e-14)


def test_state_field_validation():
    with pytest.raises(ValueError):
        StateField(np.ones(5), np.ones(4), 0.0)
    with pytest.raises(ValueError):
        StateField(np.array([1.0, np.nan, 1.0]), np.zeros(3), 0.0)


def test_reference_initial_values():
    ref = ReferenceSignal(OMEGA1)
    y, yd, ydd = ref.eval(0.0)
    assert y == 0.0 and yd == 0.0
    assert ydd == pytest.approx(2.0 * OMEGA1**2, rel=1e-15)


def test_reference_frozen_regression():
    ref = ReferenceSignal(OMEGA1)
    y, yd, ydd = ref.eval(0.25)
    assert y == pytest.approx(REF_AT_QUARTER[0], rel=1e-15)
    assert yd == pytest.approx(REF_AT_QUARTER[1], rel=1e-15)
    assert ydd == pytest.approx(REF_AT_QUARTER[2], rel=1e-14)


def test_reference_saturates():
    ref = ReferenceSignal(0.8)
    y, yd, ydd = ref.eval(60.0)
    assert abs(y - 1.0) < 1e-12
    assert abs(yd) < 1e-12 and abs(ydd) < 1e-12


def test_reference_derivatives_match_finite_differences():
    ref = ReferenceSignal(0.7)
    t0 = 0.9
    errs_yd, errs_ydd = [], []
    for h in (1e-3, 5e-4):
        yp, ydp, _ = ref.eval(t0 + h)
        ym, ydm, _ = ref.eval(t0 - h)
        errs_yd.append(abs((yp - ym) / (2.0 * h) - ref.eval(t0)[1]))
        errs_ydd.append(abs((ydp - ydm) / (2.0 * h) - ref.eval(t0)[2]))
    for errs in (errs_yd, errs_ydd):
        order = math.log(errs[0] / errs[1]) / math.log(2.0)
        assert order > 1.9


def test_reference_vector_eval_matches_scalar():
    ref = ReferenceSignal(OMEGA1)
    ts = np.array([0.0, 0.1, 0.25, 0.4])
    y, yd, ydd = ref.eval(ts)
    for i, t in enumerate(ts):
        ys, yds, ydds = ref.eval(float(t))
        assert y[i] == ys and yd[i] == yds and ydd[i] == ydds


def test_reference_validation():
    with pytest.raises(ValueError):
        ReferenceSignal(1.0, kind="ramp")
    with pytest.raises(ValueError):
        ReferenceSignal(-0.5)
    with pytest.raises(ValueError):
        ReferenceSignal(1.0).eval(-0.1)


def test_mass_and_energy_functionals():
    grid = SpatialGrid(41)
    s = StateField(np.full(41, 0.7), np.full(41, 0.2), 0.0)
    assert mass_integral(s, grid) == pytest.approx(0.7, rel=1e-14)
    expected = 0.5 * (P1.g * 0.7**2 + P1.h0 * 0.2**2)
    assert energy(s, grid, P1) == pytest.approx(expected, rel=1e-14)

    rng = np.random.default_rng(3)
    w = StateField(rng.standard_normal(41), rng.standard_normal(41), 0.0)
    assert energy(w, grid, P1) >= 0.0
