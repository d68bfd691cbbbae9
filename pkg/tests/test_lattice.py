import numpy as np
import pytest

from bicdyn.greens import solve_u
from bicdyn.lattice import (
    LatticeState,
    active_radius,
    half_size_for,
    reflection_horizon,
    simulate,
    snapshot_rows,
    step,
)

from conftest import scenario


def test_decoupled():
    model, cav = scenario(0.2, 0.0)
    run = simulate(model, cav, 10, dt=0.01, t_max=5)
    np.testing.assert_allclose(run.c_a, np.exp(-1j * cav.omega_c * run.t), atol=1e-12)
    assert np.all(run.grid_population == 0)


@pytest.mark.parametrize("frame", ["cavity", "array", "lab"])
def test_frames_agree(frame):
    model, cav = scenario(0.5, 1.0)
    ref = simulate(model, cav, 20, dt=0.002, t_max=3, frame="cavity")
    run = simulate(model, cav, 20, dt=0.002, t_max=3, frame=frame)
    # the lab frame carries the fast omega_c phase, so RK4 is less accurate there
    tol = 1e-4 if frame == "lab" else 1e-6
    assert np.max(np.abs(run.c_a - ref.c_a)) < tol


def test_windowed_matches_full_grid():
    model, cav = scenario(0.0, 2.0)
    a = simulate(model, cav, 40, dt=0.01, t_max=8, windowed=True)
    b = simulate(model, cav, 40, dt=0.01, t_max=8, windowed=False)
    assert np.max(np.abs(a.c_a - b.c_a)) < 1e-13
    assert np.max(np.abs(a.final.c_grid - b.final.c_grid)) < 1e-13


def test_step_matches_simulate():
    model, cav = scenario(0.5, 1.0)
    state = LatticeState.initial(8, cav.omega_c)
    for _ in range(50):
        state = step(state, model, cav, 0.01)
    run = simulate(model, cav, 8, dt=0.01, t_max=0.5, windowed=False)
    assert state.lab_c_a == pytest.approx(run.c_a[-1], abs=1e-14)
    assert state.time == pytest.approx(0.5)


def test_norm_conserved():
    run = simulate(*scenario(0.0, 0.01), 30, dt=0.01, t_max=10)
    assert np.max(np.abs(run.norm - 1)) < 1e-8


def test_norm_drift_is_fifth_order():
    # RK4 damps each mode by O((lambda dt)^6) per step
    drift = [np.max(np.abs(simulate(*scenario(0.5, 1.0), 30, dt=dt, t_max=10).norm - 1)) for dt in (0.02, 0.01)]
    assert drift[1] < 1e-7
    assert 24 < drift[0] / drift[1] < 40


def test_c4_symmetry():
    run = simulate(*scenario(0.0, 2.0, xi00=0.5), 25, dt=0.01, t_max=5, windowed=False)
    g = run.final.c_grid
    for k in (1, 2, 3):
        assert np.max(np.abs(np.rot90(g, k) - g)) < 1e-10
    sites = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    run = simulate(*scenario(0.0, 2.0), 25, dt=0.01, t_max=5, sites=sites)
    s = run.site_series(sites)
    assert np.max(np.ptp(s, axis=0)) < 1e-10


def test_matches_greens_before_horizon():
    model, cav = scenario(0.5, 1.0)
    N = 50
    horizon = reflection_horizon(N, model)
    run = simulate(model, cav, N, dt=0.01, t_max=horizon)
    tr = solve_u(model, cav, dt=0.01, t_max=horizon)
    assert np.max(np.abs(run.c_a - tr.u_values[: run.t.size])) < 1e-3


def test_reflection_horizon_is_conservative():
    model, cav = scenario(0.0, 1.0)
    assert reflection_horizon(150, model) == pytest.approx(37.0)
    assert reflection_horizon(302, model) == pytest.approx(2 * reflection_horizon(152, model))
    N = 20
    run = simulate(model, cav, N, dt=0.01, t_max=reflection_horizon(N, model), snapshot_every=10,
                   windowed=False)
    for _, grid in run.snapshots:
        rim = np.concatenate([grid[0], grid[-1], grid[:, 0], grid[:, -1]])
        assert np.max(np.abs(rim)) < 1e-2
    assert half_size_for(37, model) >= 150


def test_active_radius_is_safe():
    model, cav = scenario(0.0, 2.0)
    run = simulate(model, cav, 60, dt=0.01, t_max=6, windowed=False)
    r = active_radius(6.0, model)
    g = run.final.c_grid
    outside = np.abs(g).copy()
    outside[60 - r:60 + r + 1, 60 - r:60 + r + 1] = 0
    assert outside.max() < 1e-13


def test_bic_localisation_short():
    run = simulate(*scenario(0.0, 0.01), 60, dt=0.01, t_max=15, sites=[(0, 0)])
    assert np.min(np.abs(run.c_a)) > 0.99
    assert np.max(run.grid_population) < 0.01
    assert np.max(run.site_series([(0, 0)])) < 0.05


def test_errors_and_helpers():
    model, cav = scenario(0.0, 1.0)
    with pytest.raises(ValueError):
        simulate(model, cav, 10, dt=0.1)
    with pytest.raises(IndexError):
        simulate(model, cav, 10, sites=[(11, 0)])
    with pytest.raises(ValueError):
        LatticeState.initial(0)
    state = LatticeState.initial(3)
    with pytest.raises(IndexError):
        state.amplitude(4, 0)
    run = simulate(model, cav, 5, dt=0.01, t_max=0.1, sites=[(1, 0)])
    with pytest.raises(KeyError):
        run.site_series([(2, 2)])
    rows = snapshot_rows(run.final.c_grid)
    assert rows.shape == (121, 5)
    assert rows[0, 0] == -5 and rows[-1, 1] == 5
