"""Time-domain Green's functions of the cavity field.

``u(t)`` solves the causal integro-differential equation

    du/dt + i omega_c u + int_0^t g(t - tau) u(tau) dtau = 0,   u(0) = 1,

with memory kernel ``g(tau) = int domega/2pi J(omega) exp(-i omega tau)``.
Writing the band integral as a quadrature over modes ``omega_j`` turns the
convolution into a sum of exponentially damped memories

    B_j(t) = int_0^t exp(-i nu_j (t - tau)) w(tau) dtau,

with ``w = u exp(i omega_c t)`` and ``nu_j = omega_j - omega_c``.  Each step
integrates the ``B_j`` exactly against a local polynomial interpolant of
``w`` (exponential product integration), so the only step error comes from
interpolating the slowly varying envelope ``w``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .bound_states import BoundState, Kind, continuum_rule, reduced_dissipation
from .spectral import (
    CavityModel,
    ReservoirModel,
    _reduced_dos,
    band_quadrature,
    reduced_spectral_density,
)

MAX_SAFE_DT = 0.02


class SteadyStateError(RuntimeError):
    """Raised when a trajectory ends before its transient has settled."""


@dataclass(frozen=True)
class ThermalBath:
    """Initial thermal state of the array (k_B = 1)."""

    temperature: float = 0.0
    zero_temperature: bool = False

    def __post_init__(self):
        if self.zero_temperature:
            return
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ValueError("temperature must be positive unless zero_temperature is set")

    @classmethod
    def zero(cls) -> "ThermalBath":
        return cls(0.0, True)


@dataclass(frozen=True)
class Trajectory:
    """Sampled Green's functions on a uniform time grid.

    ``u_dot`` is the exact time derivative supplied by the solver, so the
    master-equation coefficients need no numerical differentiation of ``u``.
    """

    t_grid: np.ndarray
    u_values: np.ndarray
    model: ReservoirModel
    cavity: CavityModel
    dt: float
    u_dot: np.ndarray | None = None
    v_values: np.ndarray | None = None
    v_dot: np.ndarray | None = None
    bath: ThermalBath = field(default_factory=ThermalBath.zero)
    order: int = 3
    accuracy_warning: bool = False

    @property
    def envelope(self) -> np.ndarray:
        """``u`` with the bare cavity rotation removed."""
        return self.u_values * np.exp(1j * self.cavity.omega_c * self.t_grid)


# --- mode discretisation ------------------------------------------------------

@dataclass(frozen=True)
class _Modes:
    omega: np.ndarray
    weight: np.ndarray  # dx-weight * (4 xi0) * J / 2pi; sums to g(0)


def _modes(model: ReservoirModel, max_time: float, phase_per_panel: float = 12.0) -> _Modes:
    x, wx = band_quadrature(max_time, model.xi0, phase_per_panel=phase_per_panel)
    j = reduced_spectral_density(x, model)
    keep = j > 0
    x, wx, j = x[keep], wx[keep], j[keep]
    return _Modes(model.absolute(x), wx * (4 * model.xi0) ** 2 * j / (2 * np.pi))


def memory_kernel(tau, model: ReservoirModel, max_time: float | None = None):
    """g(tau) = int domega/2pi J(omega) exp(-i omega tau), by band quadrature."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    if model.eta == 0 and model.xi00 == 0:
        return np.zeros_like(tau, dtype=complex)
    span = float(np.max(tau, initial=0.0)) if max_time is None else max_time
    m = _modes(model, span)
    out = np.exp(-1j * np.multiply.outer(tau, m.omega)) @ m.weight
    return out


# --- exponential product-integration weights ----------------------------------

_GL_T, _GL_W = leggauss(16)
_GL_T = 0.5 * (_GL_T + 1)
_GL_W = 0.5 * _GL_W


def _phi1(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    out = np.empty_like(z)
    out[small] = 1 + 0.5 * z[small]
    out[~small] = np.expm1(z[~small]) / z[~small]
    return out


def _lagrange(nodes, phi):
    """L_m(phi) for each node; returns shape (len(phi), len(nodes))."""
    nodes = np.asarray(nodes, float)
    L = np.ones((len(phi), len(nodes)))
    for m, a in enumerate(nodes):
        for b in np.delete(nodes, m):
            L[:, m] *= (phi - b) / (a - b)
    return L


def _step_weights(lam, degree):
    """Product-integration weights over one step for interpolation ``degree``.

    Interpolation nodes are the ``degree + 1`` samples ending at the new point,
    at offsets ``1 - degree, ..., 0, 1`` in step units.  Returns

    P = int_0^1 exp(-i lam s) ds,
    F[:, m] = int_0^1 exp(-i lam (1 - phi)) L_m(phi) dphi,
    G[:, m] = int_0^1 L_m(phi) (1 - phi) phi1(-i lam (1 - phi)) dphi.
    """
    nodes = np.arange(1 - degree, 2)
    L = _lagrange(nodes, _GL_T)
    arg = -1j * np.multiply.outer(lam, 1 - _GL_T)
    F = (np.exp(arg) * _GL_W) @ L
    G = (_phi1(arg) * (_GL_W * (1 - _GL_T))) @ L
    return _phi1(-1j * lam), F, G


# --- u(t) ---------------------------------------------------------------------

def solve_u(model: ReservoirModel, cavity: CavityModel, dt: float = 0.01, t_max: float = 100.0,
            order: int = 3) -> Trajectory:
    """Integrate u(t) on ``[0, t_max]`` with step ``dt`` (units 1/xi0).

    Parameters
    ----------
    order : int
        Degree of the local interpolant of the envelope (1, 2 or 3); the
        global error scales as ``dt**(order + 1)``.  ``order=1`` is the
        trapezoidal-type second-order scheme.

    Notes
    -----
    Steps larger than ``0.02 / xi0`` set ``accuracy_warning``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_max < dt:
        raise ValueError("t_max must be at least dt")
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    n_steps = int(round(t_max / dt))
    t = np.arange(n_steps + 1) * dt
    w = np.zeros(n_steps + 1, dtype=complex)
    wd = np.zeros(n_steps + 1, dtype=complex)
    w[0] = 1.0
    if model.decoupled:
        w[:] = 1.0
    else:
        modes = _modes(model, t[-1])
        q = modes.weight.astype(complex)
        lam = (modes.omega - cavity.omega_c) * dt
        E = np.exp(-1j * lam)
        rules = []
        for d in range(1, order + 1):
            P, F, G = _step_weights(lam, d)
            rules.append((q * P, F, q @ G))
        B = np.zeros_like(q)
        for n in range(n_steps):
            d = min(order, n + 1)
            qP, F, gam = rules[d - 1]
            old = w[n + 1 - d:n + 1]
            rhs = w[n] - dt * (qP @ B) - dt * dt * (gam[:-1] @ old)
            w[n + 1] = rhs / (1 + dt * dt * gam[-1])
            B = E * B + dt * (F[:, :-1] @ old + F[:, -1] * w[n + 1])
            wd[n + 1] = -(q @ B)
    rot = np.exp(-1j * cavity.omega_c * t)
    u = rot * w
    udot = rot * (wd - 1j * cavity.omega_c * w)
    return Trajectory(t, u, model, cavity, dt, u_dot=udot, order=order,
                      accuracy_warning=dt > MAX_SAFE_DT * (1 / model.xi0))


def u_reconstruct(model: ReservoirModel, cavity: CavityModel, bound_states, t_grid,
                  chunk: int = 512) -> np.ndarray:
    """u(t) = sum_j Z_j exp(-i Omega_j t) + int domega/2pi D_c exp(-i omega t)."""
    t = np.asarray(t_grid, dtype=float)
    wc = cavity.omega_c
    out = np.zeros(t.shape, dtype=complex)
    for s in bound_states:
        out += s.residue_z * np.exp(-1j * (s.omega_b - wc) * t)
    if not model.decoupled:
        x, wx = continuum_rule(model, cavity, float(np.max(np.abs(t), initial=0.0)))
        dc = reduced_dissipation(x, model, cavity) * wx / (2 * np.pi)
        nu = model.absolute(x) - wc
        for i in range(0, t.size, chunk):
            tt = t.ravel()[i:i + chunk]
            out.ravel()[i:i + chunk] += np.exp(-1j * np.multiply.outer(tt, nu)) @ dc
    return out * np.exp(-1j * wc * t)


def steady_u_magnitude(bound_states, t) -> float | np.ndarray:
    """|sum_j Z_j exp(-i Omega_j t)|, the late-time |u| once the continuum has decayed.

    One pole gives ``Z``; two and three poles give the beat forms with
    ``Z_i Z_j cos((Omega_i - Omega_j) t)`` cross terms.
    """
    t = np.asarray(t, dtype=float)
    if not bound_states:
        return np.zeros_like(t) if t.ndim else 0.0
    z = np.array([s.residue_z for s in bound_states])
    om = np.array([s.omega_b for s in bound_states])
    mag2 = np.sum(z ** 2) + 2 * sum(
        z[i] * z[k] * np.cos((om[i] - om[k]) * t)
        for i in range(len(z)) for k in range(i + 1, len(z)))
    mag = np.sqrt(np.maximum(mag2, 0.0))
    return float(mag) if mag.ndim == 0 else mag


# --- thermal fluctuations -----------------------------------------------------

def nbar(omega, bath: ThermalBath):
    """Bose-Einstein occupation 1 / (exp(omega / T) - 1)."""
    omega = np.asarray(omega, dtype=float)
    if bath.zero_temperature:
        return np.zeros_like(omega)
    if np.any(omega <= 0):
        raise ValueError("nbar needs omega > 0")
    out = 1 / np.expm1(omega / bath.temperature)
    return float(out) if out.ndim == 0 else out


def solve_v(model: ReservoirModel, cavity: CavityModel, bath: ThermalBath, traj: Trajectory) -> Trajectory:
    """Fill ``v(t) = int domega/2pi J nbar |W_t(omega)|^2`` into ``traj``.

    ``W_t(omega) = int_0^t u(s) exp(-i omega (t - s)) ds`` is accumulated per
    mode with the same product-integration weights used for ``u``, giving
    ``v`` and its exact derivative ``dv/dt = 2 Re sum_j c_j conj(W_j) u``.
    """
    n = traj.t_grid.size
    v = np.zeros(n)
    vd = np.zeros(n)
    if bath.zero_temperature or model.decoupled:
        return dataclasses.replace(traj, v_values=v, v_dot=vd, bath=bath)
    dt, order = traj.dt, traj.order
    w = traj.envelope
    modes = _modes(model, traj.t_grid[-1])
    c = modes.weight * nbar(modes.omega, bath)
    lam = (modes.omega - cavity.omega_c) * dt
    E = np.exp(-1j * lam)
    Fs = [_step_weights(lam, d)[1] for d in range(1, order + 1)]
    B = np.zeros(lam.shape, dtype=complex)
    for k in range(n - 1):
        d = min(order, k + 1)
        B = E * B + dt * (Fs[d - 1] @ w[k + 1 - d:k + 2])
        v[k + 1] = c @ (B.real ** 2 + B.imag ** 2)
        vd[k + 1] = 2 * np.real(np.conj(w[k + 1]) * (c @ B))
    return dataclasses.replace(traj, v_values=v, v_dot=vd, bath=bath)


def _db_reduced(x, model, states, t):
    """D_b * 4 xi0 on band coordinates at time ``t``."""
    root_j = np.sqrt(reduced_spectral_density(x, model))
    amp = np.zeros(np.shape(x), dtype=complex)
    for s in states:
        gap = x - s.reduced
        if s.kind == Kind.BIC:
            # J carries a double zero at the BIC; divide it out analytically
            ratio = np.sqrt(2 * np.pi * _reduced_dos(x)) * model.eta * np.sign(gap)
        else:
            ratio = root_j / gap
        amp += s.residue_z * np.exp(-1j * s.omega_b * t) * ratio
    return np.abs(amp) ** 2


def db_variant(states) -> str:
    """Name of the bound-state contribution to the steady fluctuations."""
    kinds = [s.kind for s in states]
    if not kinds:
        return "none"
    if len(kinds) == 1:
        return "bic" if kinds[0] == Kind.BIC else "single"
    if len(kinds) == 2:
        return "bic-pair" if Kind.BIC in kinds else "two-pole"
    return "three-pole"


def v_steady(model: ReservoirModel, cavity: CavityModel, bath: ThermalBath, bound_states, t) -> float:
    """Late-time v(t) = int domega/2pi [D_b(omega, t) + D_c(omega)] nbar(omega).

    ``D_b = J |sum_j Z_j exp(-i Omega_j t) / (omega - Omega_j)|^2`` expands to
    the single-pole, two-pole cosine, BIC and three-pole forms depending on
    which poles are present (see :func:`db_variant`).  A BIC pole enters
    through ``J / (omega - Omega_b)^2``, which is finite because J vanishes
    quadratically there.
    """
    if bath.zero_temperature or model.decoupled:
        return 0.0
    focus = [(s.reduced, 1e-14) for s in bound_states if s.kind == Kind.BIC]
    x, wx = continuum_rule(model, cavity, extra_focus=focus)
    nb = nbar(model.absolute(x), bath)
    dens = reduced_dissipation(x, model, cavity) + _db_reduced(x, model, bound_states, t)
    return float(np.dot(wx, dens * nb) / (2 * np.pi))


def photon_number(n0: float, traj: Trajectory) -> np.ndarray:
    """n(t) = |u(t)|^2 n0 + v(t)."""
    if n0 < 0:
        raise ValueError("n0 must be >= 0")
    v = traj.v_values if traj.v_values is not None else 0.0
    return np.abs(traj.u_values) ** 2 * n0 + v


# --- steady-state window ------------------------------------------------------

def steady_state_time(traj: Trajectory, window: float = 20.0, tol: float = 1e-3,
                      bound_states=None) -> float:
    """Earliest t after which the trailing-window envelope of |u| stays put.

    The envelope is the running max and min of |u| over ``[t - window, t]``;
    t_s is the first time from which both move by less than ``tol`` over one
    window for the rest of the trajectory.

    With ``bound_states`` the test is applied to the decaying remainder
    ``|u - sum_j Z_j exp(-i Omega_j t)|`` instead.  Several poles beat
    quasi-periodically and keep a finite-window envelope of |u| moving
    indefinitely, so only the remainder settles.
    """
    u = traj.u_values
    if bound_states:
        u = u - sum(s.residue_z * np.exp(-1j * s.omega_b * traj.t_grid) for s in bound_states)
    a = np.abs(u)
    k = max(int(round(window / traj.dt)), 1)
    if a.size <= 2 * k:
        raise SteadyStateError("trajectory shorter than two envelope windows")
    # trailing filters: centre the kernel on the window's last sample
    hi = maximum_filter1d(a, size=k + 1, origin=k // 2, mode="nearest")
    lo = minimum_filter1d(a, size=k + 1, origin=k // 2, mode="nearest")
    moved = np.maximum(np.abs(hi[k:] - hi[:-k]), np.abs(lo[k:] - lo[:-k])) >= tol
    moved[: k] = True  # the first window has no history
    bad = np.flatnonzero(moved)
    first = 0 if bad.size == 0 else bad[-1] + 1
    if first >= moved.size:
        raise SteadyStateError("envelope of |u| has not settled by the end of the trajectory")
    return float(traj.t_grid[first + k])


def window_max(series, t_grid, t_s: float, width: float = 100.0) -> float:
    """max of ``series`` over ``[t_s, t_s + width]``."""
    t_grid = np.asarray(t_grid)
    sel = (t_grid >= t_s - 1e-12) & (t_grid <= t_s + width + 1e-12)
    if not np.any(sel):
        raise SteadyStateError("steady-state window lies outside the trajectory")
    return float(np.max(np.asarray(series)[sel]))
