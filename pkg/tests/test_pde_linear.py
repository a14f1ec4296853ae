import math

import numpy as np
import pytest

from convergence_utils import sweep_orders
from tanktrack import (
    CFL_LIMIT,
    CflError,
    LinearStepConfig,
    PhysicalParams,
    SpatialGrid,
    StateField,
    energy,
    from_characteristic,
    mass_integral,
    semi_discrete_system,
    solve_steady_state,
    step_linear,
    to_characteristic,
)

P = PhysicalParams(m=1.0, h0=0.5, g=9.81, mu=0.1)


def _config(n: int, ratio: float = 0.5) -> LinearStepConfig:
    grid = SpatialGrid(n)
    return LinearStepConfig(grid, P, ratio * grid.spacing / P.c)


def _slosh(grid: SpatialGrid) -> StateField:
    zeta = grid.nodes
    return StateField(
        P.h0 + 0.02 * np.cos(np.pi * zeta), 0.05 * np.sin(np.pi * zeta), 0.0
    )


def test_characteristic_round_trip():
    grid = SpatialGrid(33)
    rng = np.random.default_rng(5)
    s = StateField(rng.standard_normal(33), rng.standard_normal(33), 0.3)
    back = from_characteristic(to_characteristic(s, P), P)
    assert np.allclose(back.z1, s.z1, atol=1e-12)
    assert np.allclose(back.z2, s.z2, atol=1e-12)
    assert back.time == s.time


def test_steady_state_is_fixed_point():
    cfg = _config(41)
    state = to_characteristic(solve_steady_state(P, cfg.grid), P)
    for _ in range(200):
        state = step_linear(state, 0.0, cfg)
    final = from_characteristic(state, P)
    assert np.max(np.abs(final.z1 - P.h0)) < 1e-13
    assert np.max(np.abs(final.z2)) < 1e-13


def test_mass_conserved_under_forcing():
    cfg = _config(41)
    state = to_characteristic(_slosh(cfg.grid), P)
    m0 = mass_integral(from_characteristic(state, P), cfg.grid)
    rng = np.random.default_rng(7)
    for _ in range(500):
        state = step_linear(state, rng.uniform(-1.0, 1.0), cfg)
    m1 = mass_integral(from_characteristic(state, P), cfg.grid)
    assert abs(m1 - m0) / m0 < 1e-12


def test_free_energy_never_increases():
    cfg = _config(41)
    state = to_characteristic(_slosh(cfg.grid), P)
    prev = energy(from_characteristic(state, P), cfg.grid, P)
    for _ in range(2000):
        state = step_linear(state, 0.0, cfg)
        now = energy(from_characteristic(state, P), cfg.grid, P)
        assert now <= prev + 1e-10
        prev = now


def test_forced_response_first_step():
    # from rest, one step of constant forcing drives z2 ~ -ydd*dt inside,
    # while the wall values stay pinned exactly
    cfg = _config(101, ratio=0.1)
    ydd = 0.8
    state = step_linear(to_characteristic(solve_steady_state(P, cfg.grid), P), ydd, cfg)
    f = from_characteristic(state, P)
    assert f.z2[0] == 0.0 and f.z2[-1] == 0.0
    interior = f.z2[2:-2]
    assert np.max(np.abs(interior + ydd * cfg.dt)) < 5e-3 * ydd * cfg.dt


def test_cfl_guard():
    grid = SpatialGrid(21)
    with pytest.raises(CflError):
        LinearStepConfig(grid, P, 1.1 * CFL_LIMIT * grid.spacing / P.c)


def test_semi_discrete_structure():
    cfg = _config(11)
    n = cfg.grid.n_points
    A, b = semi_discrete_system(cfg)
    s_coef = P.c / (2.0 * P.g)
    assert np.all(b[1 : n - 1] == -s_coef)
    assert np.all(b[n + 1 : 2 * n - 1] == s_coef)
    assert b[0] == b[n - 1] == b[n] == b[2 * n - 1] == 0.0

    # trapezoid mass is flat along trajectories: wall pairs move together,
    # and on that manifold the weighted row sums cancel exactly
    w = np.full(n, cfg.grid.spacing)
    w[0] = w[-1] = 0.5 * cfg.grid.spacing
    wfull = np.concatenate([w, w])
    assert abs(wfull @ b) < 1e-15
    rng = np.random.default_rng(13)
    for _ in range(20):
        x = rng.standard_normal(2 * n)
        x[n] = x[0]
        x[2 * n - 1] = x[n - 1]
        assert abs(wfull @ (A @ x)) < 1e-12

    # dissipative spectrum
    assert np.max(np.linalg.eigvals(A).real) < 1e-10


def test_stepper_converges_to_semi_discrete_limit():
    # fixed grid, shrinking step: pure time-marching error, order about one
    n = 15
    errs = []
    for ratio in (0.4, 0.2, 0.1):
        e, _, _ = sweep_orders(
            P,
            0.0,
            lambda z: P.h0 + 0.02 * np.cos(np.pi * z),
            lambda z: 0.05 * np.sin(np.pi * z),
            0.3,
            levels=((n, ratio),),
        )
        errs.append(e[0])
    orders = [math.log(errs[i] / errs[i + 1]) / math.log(2.0) for i in range(2)]
    assert min(orders) > 0.9


def test_simultaneous_refinement_free():
    # three-level sweep, spacing and Courant ratio halving together
    errs, _, orders = sweep_orders(
        P,
        0.0,
        lambda z: P.h0 + 0.02 * np.cos(np.pi * z),
        lambda z: 0.05 * np.sin(np.pi * z),
        0.45,
    )
    assert min(orders) > 0.9  # measured about 1.67 per spacing halving
    assert errs[-1] < errs[0]


def test_simultaneous_refinement_forced():
    errs, _, orders = sweep_orders(
        P,
        0.7,
        lambda z: np.full_like(z, P.h0),
        lambda z: np.zeros_like(z),
        0.45,
    )
    assert min(orders) > 0.9  # measured about 1.43 per spacing halving
    assert errs[-1] < errs[0]
