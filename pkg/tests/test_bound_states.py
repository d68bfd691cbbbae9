import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bicdyn.bound_states import (
    Kind,
    boc_emergence_threshold,
    completeness_check,
    continuum_weight,
    dissipation_spectrum,
    edge_residues,
    find_bound_states,
    root_residual,
    self_energy,
    self_energy_derivative,
    self_energy_derivative_exact,
    self_energy_exact,
)
from bicdyn.spectral import BandEdgeError, CavityModel, ReservoirModel, spectral_density

from conftest import scenario

M = ReservoirModel(eta=1.0)


def m0():
    return quad(lambda w: spectral_density(w, M), M.band_lo, M.omega0, limit=200)[0] / math.pi


def test_self_energy_center_is_zero():
    assert self_energy(M.omega0, M) == pytest.approx(0.0, abs=1e-12)
    assert self_energy_exact(M.omega0, M) == pytest.approx(0.0, abs=1e-14)


def test_self_energy_far_field():
    z = 1e6
    mom = m0()
    assert self_energy(M.omega0 + z, M) == pytest.approx(mom / z, rel=1e-2)
    assert self_energy_derivative(M.omega0 + z, M) == pytest.approx(-mom / z ** 2, rel=1e-2)


@pytest.mark.parametrize("x", [-6.0, -1.3, -1.001, -0.7, -0.25, 0.1, 0.5, 0.999, 1.02, 3.0])
def test_quadrature_matches_closed_form(x):
    z = float(M.absolute(x))
    assert self_energy(z, M) == pytest.approx(self_energy_exact(z, M), rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("x", [-4.0, -1.2, -0.6, 0.0, 0.4, 1.5])
def test_derivative_quadrature_matches_closed_form(x):
    z = float(M.absolute(x))
    assert self_energy_derivative(z, M) == pytest.approx(self_energy_derivative_exact(z, M), rel=1e-5, abs=1e-8)


def test_derivative_at_center_is_finite_negative():
    d = self_energy_derivative_exact(M.omega0, M)
    assert math.isfinite(d) and d < 0


@settings(max_examples=40)
@given(st.floats(1.001, 50), st.sampled_from([-1, 1]), st.floats(0.05, 3))
def test_sign_outside_band(a, side, eta):
    m = ReservoirModel(eta=eta)
    z = float(m.absolute(side * a))
    sig = self_energy_exact(z, m)
    # z - omega has the sign of ``side`` for every band mode
    assert np.sign(sig) == side
    assert self_energy_derivative_exact(z, m) < 0


def test_band_edge_errors():
    for z in (M.band_lo, M.band_hi):
        with pytest.raises(BandEdgeError):
            self_energy(z, M)
        with pytest.raises(BandEdgeError):
            self_energy_derivative(z, M)


def test_fig4_gap_anchor():
    model, cav = scenario(5.0, 1.0)
    states = find_bound_states(model, cav)
    above = [s for s in states if s.kind == Kind.BOC_ABOVE]
    assert len(above) == 1
    assert above[0].reduced == pytest.approx(5.0, abs=0.1)
    assert above[0].residue_z == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("eta", [0.1, 0.5, 1.0, 2.0])
def test_resonant_bic(eta):
    model, cav = scenario(0.0, eta)
    bic = [s for s in find_bound_states(model, cav) if s.kind == Kind.BIC]
    assert len(bic) == 1
    assert bic[0].omega_b == model.omega0
    assert bic[0].residue_z == pytest.approx(1 / (1 + eta ** 2), rel=1e-9)


def test_no_visible_boc_weak_inband():
    model, cav = scenario(0.5, 0.1)
    assert all(s.residue_z < 1e-12 for s in find_bound_states(model, cav) if s.kind != Kind.BIC)
    assert not any(s.kind == Kind.BIC for s in find_bound_states(model, cav))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.0, 0.3, -0.5, 0.9, 1.5, -5.0]), st.floats(0.05, 2.5))
def test_bound_state_invariants(det, eta):
    model, cav = scenario(det, eta)
    states = find_bound_states(model, cav)
    assert [s.reduced for s in states] == sorted(s.reduced for s in states)
    assert sum(s.kind == Kind.BOC_BELOW for s in states) <= 1
    assert sum(s.kind == Kind.BOC_ABOVE for s in states) <= 1
    for s in states:
        assert 0 < s.residue_z <= 1
        assert root_residual(s, model, cav) < 1e-10 * 4
        if s.kind == Kind.BOC_BELOW:
            assert s.reduced < -1
        elif s.kind == Kind.BOC_ABOVE:
            assert s.reduced > 1
        else:
            assert abs(s.reduced) < 1 and spectral_density(s.omega_b, model) == 0


@pytest.mark.parametrize("eta", [1.2, 1.6, 2.4])
def test_symmetric_pair(eta):
    model, cav = scenario(0.0, eta)
    lo, hi = [s for s in find_bound_states(model, cav) if s.kind != Kind.BIC]
    assert lo.omega_b - model.omega0 == pytest.approx(-(hi.omega_b - model.omega0), abs=1e-8)
    assert lo.residue_z == pytest.approx(hi.residue_z, abs=1e-8)


def test_resonant_trends():
    etas = [0.4, 0.8, 1.2, 1.6, 2.0]
    z0 = [find_bound_states(*scenario(0.0, e))[1].residue_z for e in etas]
    assert np.all(np.diff(z0) < 0)
    zp = [edge_residues(e, 0.0)[1] for e in etas]
    assert zp[0] < 1e-3 and np.all(np.diff(zp) > 0)


def test_emergence_thresholds():
    assert 0.8 <= boc_emergence_threshold(0.0) <= 1.2
    assert 0.4 <= boc_emergence_threshold(0.5) <= 0.7


@pytest.mark.parametrize("det", [0.0, 0.5, 5.0])
@pytest.mark.parametrize("eta", [0.1, 1.0])
def test_sum_rule(det, eta):
    model, cav = scenario(det, eta)
    assert completeness_check(model, cav) == pytest.approx(1.0, abs=1e-6)


def test_shifted_coupling_bic():
    model = ReservoirModel(eta=1.0, xi00=1.0)
    zb = model.shift / model.eta
    # the BIC requires the cavity to sit where Sigma(omega_b) is cancelled
    zc = zb - float(self_energy_exact(model.absolute(zb), model)) / 4
    cav = CavityModel(float(model.absolute(zc)))
    bic = [s for s in find_bound_states(model, cav) if s.kind == Kind.BIC]
    assert len(bic) == 1 and bic[0].omega_b == pytest.approx(model.coupling_zero())
    assert completeness_check(model, cav) == pytest.approx(1.0, abs=1e-6)


def test_decoupled_limit():
    model, cav = scenario(0.3, 0.0)
    (s,) = find_bound_states(model, cav)
    assert s.residue_z == 1.0 and s.omega_b == cav.omega_c
    assert continuum_weight(model, cav) == 0.0


def test_dissipation_spectrum():
    model, cav = scenario(0.5, 0.1)
    spec = dissipation_spectrum(model, cav)
    assert np.all(spec.dc_values >= 0)
    assert 0 <= spec.continuum_weight <= 1 + 1e-12
    centre = np.argmin(np.abs(spec.omega_grid - model.omega0))
    assert spec.dc_values[centre] < 1e-6
    # weak coupling: a Lorentzian-like peak near the cavity frequency
    peak = spec.omega_grid[np.argmax(spec.dc_values)]
    assert abs(peak - cav.omega_c) < 0.05
    with pytest.raises(ValueError):
        dissipation_spectrum(model, cav, [model.band_hi + 1])
