"""Self-energy, bound states, residues and the continuum dissipation spectrum."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad as _quad
from scipy.optimize import brentq

from .spectral import (
    BandEdgeError,
    CavityModel,
    ReservoirModel,
    band_quadrature,
    reduced_self_energy,
    reduced_spectral_density,
)

# Offsets from a band edge below this (band units) are not resolvable in
# double precision; roots closer than this carry residues below ~1e-13.
MIN_EDGE_OFFSET = 1e-14
BIC_TOL = 1e-8
# residue above which an edge bound state counts as having emerged
Z_VISIBLE = 0.05
_QUAD = dict(limit=400, epsabs=1e-13, epsrel=1e-12)


def quad(f, a, b, **kw):
    # roundoff warnings are expected once the subtracted integrands hit 1e-13
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return _quad(f, a, b, **kw)


class Kind(str, enum.Enum):
    BIC = "BIC"
    BOC_BELOW = "BOC_BELOW"
    BOC_ABOVE = "BOC_ABOVE"


@dataclass(frozen=True)
class BoundState:
    """Real pole of the cavity propagator.

    ``reduced`` is the band coordinate of the pole; ``edge_offset`` is its
    distance from the nearest band edge in band units (0 for a BIC), kept
    separately because poles can sit closer to an edge than the absolute
    frequency can resolve.
    """

    omega_b: float
    residue_z: float
    kind: Kind
    reduced: float
    edge_offset: float = 0.0


@dataclass(frozen=True)
class DissipationSpectrum:
    omega_grid: np.ndarray
    dc_values: np.ndarray
    continuum_weight: float


# --- quadrature route ---------------------------------------------------------

def _j(model):
    return lambda x: float(reduced_spectral_density(x, model))


def _check_z(z, model):
    zeta = float(model.reduced(z))
    if abs(zeta) == 1:
        raise BandEdgeError(f"self-energy diverges at the band edge z = {z}")
    return zeta


def _outside_integral(zeta, f):
    """int_{-1}^{1} f(x) / (zeta - x) dx for |zeta| > 1 via s = ln|zeta - x|."""
    sgn = 1.0 if zeta > 1 else -1.0
    lo, hi = math.log(abs(zeta) - 1), math.log(abs(zeta) + 1)
    mid = math.log(abs(zeta))
    g = lambda s: f(zeta - sgn * math.exp(s))
    return sgn * (quad(g, lo, mid, **_QUAD)[0] + quad(g, mid, hi, **_QUAD)[0])


def _pv_integral(zeta, f, window=None):
    """Principal value of int_{-1}^{1} f(x) / (zeta - x) dx, |zeta| < 1.

    Subtracts f(zeta) analytically and excises a symmetric window around
    zeta whose contribution is folded as (f(zeta - y) - f(zeta + y)) / y.
    """
    fz = f(zeta)
    if window is None:
        window = 1e-4 * 2
    gap = min(abs(zeta - 1), abs(zeta + 1), abs(zeta) if zeta != 0 else 1.0)
    eps = min(window, 0.5 * gap)
    total = fz * math.log((1 + zeta) / (1 - zeta))
    reg = lambda x: (f(x) - fz) / (zeta - x)
    pts = sorted({-1.0, 0.0, 1.0, zeta - eps, zeta + eps})
    for a, b in zip(pts[:-1], pts[1:]):
        if a >= zeta - eps and b <= zeta + eps:
            continue
        total += quad(reg, a, b, **_QUAD)[0]
    total += quad(lambda y: (f(zeta - y) - f(zeta + y)) / y if y > 0 else 0.0, 0.0, eps, **_QUAD)[0]
    return total


def self_energy(z: float, model: ReservoirModel) -> float:
    """Sigma(z) = int domega/2pi J(omega) / (z - omega) by adaptive quadrature.

    Principal value inside the band.

    Raises
    ------
    BandEdgeError
        if ``z`` sits exactly on a band edge.
    """
    zeta = _check_z(z, model)
    j = _j(model)
    if abs(zeta) > 1:
        val = _outside_integral(zeta, j)
    else:
        val = _pv_integral(zeta, j)
    return 4 * model.xi0 * val / (2 * np.pi)


def self_energy_derivative(z: float, model: ReservoirModel, step: float = 1e-5) -> float:
    """dSigma/dz by quadrature.

    Outside the band this is ``-int domega/2pi J / (z - omega)^2``.  Inside
    the band the finite-part integral is evaluated from the subtracted form,
    with ``J'(z)`` taken by central differences.
    """
    zeta = _check_z(z, model)
    j = _j(model)
    if abs(zeta) > 1:
        sgn = 1.0 if zeta > 1 else -1.0
        a = abs(zeta)
        j_edge = j(sgn)
        # subtract the edge value so the integrand stays bounded as zeta -> edge
        rem = lambda s: (j(zeta - sgn * math.exp(s)) - j_edge) * math.exp(-s)
        lo, mid, hi = math.log(a - 1), math.log(a), math.log(a + 1)
        val = quad(rem, lo, mid, **_QUAD)[0] + quad(rem, mid, hi, **_QUAD)[0]
        val += j_edge * (1 / (a - 1) - 1 / (a + 1))
        return -val / (2 * np.pi)
    jz = j(zeta)
    h = min(step, 0.25 * abs(zeta) if zeta != 0 else step, 0.25 * (1 - abs(zeta)))
    if zeta == 0 and model.shift == 0:
        djz = 0.0
    else:
        djz = (j(zeta + h) - j(zeta - h)) / (2 * h)
    rem = lambda x: (j(x) - jz - djz * (x - zeta)) / (x - zeta) ** 2 if x != zeta else 0.0
    total = 0.0
    pts = sorted({-1.0, 0.0, zeta, 1.0})
    for a, b in zip(pts[:-1], pts[1:]):
        total += quad(rem, a, b, **_QUAD)[0]
    L = math.log((1 + zeta) / (1 - zeta))
    return (djz * L + 2 * jz / (1 - zeta * zeta) - total) / (2 * np.pi)


# --- closed-form route --------------------------------------------------------

def self_energy_exact(z, model: ReservoirModel):
    """Sigma(z) from the closed-form lattice Green's function (vectorised)."""
    zeta = model.reduced(z)
    if np.any(np.abs(zeta) == 1):
        raise BandEdgeError("self-energy diverges at the band edge")
    sigma, _ = reduced_self_energy(zeta, model)
    out = 4 * model.xi0 * sigma
    return float(out[0]) if np.ndim(z) == 0 else out


def self_energy_derivative_exact(z, model: ReservoirModel):
    zeta = model.reduced(z)
    if np.any(np.abs(zeta) == 1):
        raise BandEdgeError("self-energy derivative diverges at the band edge")
    _, dsigma = reduced_self_energy(zeta, model)
    return float(dsigma[0]) if np.ndim(z) == 0 else dsigma


# --- bound states -------------------------------------------------------------

def _edge_root(model, zc, side):
    """Root of zeta - zc - sigma(zeta) beyond the edge at ``side`` (+1/-1).

    Works in the edge offset d = |zeta| - 1.  Returns d or None.
    """

    def f(d):
        sig, _ = reduced_self_energy(side, model, edge_offset=d)
        return side * (side * (1 + d) - zc - sig[0])

    # f increases with d; scan a geometric grid outward for the sign change
    d_hi = 10 * max(1.0, model.eta ** 2) + abs(zc) + 10 * model.shift
    grid = np.geomspace(MIN_EDGE_OFFSET, d_hi, 80)
    vals = [f(d) for d in grid]
    if vals[0] >= 0:
        return None
    while vals[-1] <= 0:
        grid = np.append(grid, grid[-1] * 4)
        vals.append(f(grid[-1]))
    k = next(i for i, v in enumerate(vals) if v > 0)
    lo, hi = math.log(grid[k - 1]), math.log(grid[k])
    u = brentq(lambda u: f(math.exp(u)), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(u)


def find_bound_states(model: ReservoirModel, cavity: CavityModel) -> list[BoundState]:
    """All real poles of 1 / (z - omega_c - Sigma(z)), sorted by energy."""
    zc = cavity.detuning(model)
    if model.decoupled:
        kind = Kind.BIC if abs(zc) < 1 else (Kind.BOC_ABOVE if zc > 0 else Kind.BOC_BELOW)
        return [BoundState(cavity.omega_c, 1.0, kind, zc, max(abs(zc) - 1, 0.0))]
    states = []
    for side, kind in ((-1, Kind.BOC_BELOW), (1, Kind.BOC_ABOVE)):
        d = _edge_root(model, zc, side)
        if d is None:
            continue
        _, ds = reduced_self_energy(side, model, edge_offset=d)
        z = 1 / (1 - ds[0])
        states.append(BoundState(float(model.absolute(side * (1 + d))), float(z), kind, side * (1 + d), d))
    if model.eta > 0:
        zb = model.shift / model.eta
        if abs(zb) < 1:
            sig, ds = reduced_self_energy(zb, model)
            if abs(zb - zc - sig[0]) < BIC_TOL:
                states.append(BoundState(float(model.absolute(zb)), float(1 / (1 - ds[0])), Kind.BIC, zb))
    return sorted(states, key=lambda s: s.reduced)


def root_residual(state: BoundState, model: ReservoirModel, cavity: CavityModel) -> float:
    """|Omega - omega_c - Sigma(Omega)| evaluated at the stored pole."""
    zc = cavity.detuning(model)
    if model.decoupled:
        return abs(state.reduced - zc) * 4 * model.xi0
    if state.kind == Kind.BIC:
        sig, _ = reduced_self_energy(state.reduced, model)
        zeta = state.reduced
    else:
        side = 1.0 if state.kind == Kind.BOC_ABOVE else -1.0
        sig, _ = reduced_self_energy(side, model, edge_offset=state.edge_offset)
        zeta = side * (1 + state.edge_offset)
    return abs(zeta - zc - sig[0]) * 4 * model.xi0


def edge_residues(eta: float, detuning: float, xi00: float = 0.0) -> tuple[float, float]:
    """Residues (Z-, Z+) of the edge bound states; 0 where none is resolved."""
    model = ReservoirModel(eta=eta, xi00=xi00)
    found = {s.kind: s.residue_z for s in find_bound_states(model, CavityModel.from_detuning(detuning, model))}
    return found.get(Kind.BOC_BELOW, 0.0), found.get(Kind.BOC_ABOVE, 0.0)


def boc_emergence_threshold(detuning: float, z_visible: float = Z_VISIBLE, xi00: float = 0.0,
                            eta_max: float = 10.0) -> float:
    """Smallest eta at which an edge bound state's residue reaches ``z_visible``.

    Edge bound states exist for any eta > 0 once J is finite at the band
    edges, but their residues vanish like exp(-1/eta^2); this locates where
    they become visible in u(t).  For a cavity in a gap the pole continued
    from the bare cavity mode is excluded.
    """
    pick = {1: lambda z: z[0], -1: lambda z: z[1]}.get(int(np.sign(detuning)) if abs(detuning) > 1 else 0, max)
    f = lambda eta: pick(edge_residues(eta, detuning, xi00)) - z_visible
    lo, hi = 1e-3, 0.1
    while f(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > eta_max:
            raise ValueError("no visible edge bound state below eta_max")
    return brentq(f, lo, hi, xtol=1e-6)


# --- continuum ----------------------------------------------------------------

def reduced_dissipation(x, model: ReservoirModel, cavity: CavityModel):
    """D_c * 4 xi0 on band coordinates; integrates with dx / 2pi."""
    x = np.asarray(x, dtype=float)
    zc = cavity.detuning(model)
    j = reduced_spectral_density(x, model)
    sig, _ = reduced_self_energy(x, model)
    den = (x - zc - sig) ** 2 + 0.25 * j * j
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(j > 0, j / den, 0.0)
    return np.where(np.isfinite(out), out, 0.0)


def _peak_focus(model, cavity):
    """Band positions where D_c may be sharply peaked, with their widths."""
    zc = cavity.detuning(model)
    focus = []
    if abs(zc) < 1:
        width = float(reduced_spectral_density(zc, model)) if zc != 0 else 0.0
        sig, _ = reduced_self_energy(zc, model) if zc != 0 else (np.zeros(1), None)
        centre = zc + float(sig[0])
        focus.append((centre, max(width / 20, 1e-10)))
        focus.append((zc, max(width / 20, 1e-10)))
    return focus


def continuum_rule(model: ReservoirModel, cavity: CavityModel, max_time: float = 0.0, extra_focus=()):
    """Band-coordinate quadrature nodes/weights refined around D_c peaks."""
    return band_quadrature(max_time, model.xi0, focus=_peak_focus(model, cavity) + list(extra_focus))


def dissipation_spectrum(model: ReservoirModel, cavity: CavityModel, grid=None) -> DissipationSpectrum:
    """D_c(omega) on ``grid`` (absolute frequencies inside the band)."""
    if grid is None:
        grid = model.absolute(np.linspace(-1, 1, 803)[1:-1])
    grid = np.asarray(grid, dtype=float)
    if np.any(np.abs(model.reduced(grid)) >= 1):
        raise ValueError("dissipation spectrum grid must lie inside the band")
    dc = reduced_dissipation(model.reduced(grid), model, cavity) / (4 * model.xi0)
    return DissipationSpectrum(grid, dc, continuum_weight(model, cavity))


def continuum_weight(model: ReservoirModel, cavity: CavityModel) -> float:
    """int domega/2pi D_c(omega)."""
    if model.decoupled:
        return 0.0
    x, w = continuum_rule(model, cavity)
    return float(np.dot(w, reduced_dissipation(x, model, cavity)) / (2 * np.pi))


def completeness_check(model: ReservoirModel, cavity: CavityModel, states=None) -> float:
    """Sum of residues plus continuum weight; should equal u(0) = 1."""
    if states is None:
        states = find_bound_states(model, cavity)
    return sum(s.residue_z for s in states) + continuum_weight(model, cavity)
