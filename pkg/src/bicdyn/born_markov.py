"""Weak-coupling (Born-Markov) limit with constant coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bound_states import self_energy
from .greens import ThermalBath, Trajectory, nbar
from .spectral import CavityModel, ReservoirModel, spectral_density


@dataclass(frozen=True)
class BMCoefficients:
    """Time-independent coefficients; ``omega_c_ren = omega_c + delta``."""

    omega_c_ren: float
    kappa: float
    kappa_tilde: float
    nbar_c: float = 0.0

    @property
    def decoupled(self) -> bool:
        return self.kappa == 0


def bm_coefficients(model: ReservoirModel, cavity: CavityModel, bath: ThermalBath) -> BMCoefficients:
    """kappa = J(omega_c)/2, kappa~ = 2 kappa nbar(omega_c) and the shifted frequency.

    The shift is the principal-value self-energy
    ``PV int domega/2pi J / (omega_c - omega)``, which is the late-time limit
    of the exact ``omega_c'(t)`` at weak coupling.

    Raises
    ------
    BandEdgeError
        if ``omega_c`` sits on a band edge, where ``delta`` diverges.
    """
    wc = cavity.omega_c
    kappa = 0.5 * float(spectral_density(wc, model))
    delta = 0.0 if model.decoupled else self_energy(wc, model)
    nb = float(nbar(wc, bath)) if not bath.zero_temperature else 0.0
    return BMCoefficients(wc + delta, kappa, 2 * kappa * nb, nb)


def bm_green_functions(coeffs: BMCoefficients, t_grid, model: ReservoirModel | None = None,
                       cavity: CavityModel | None = None, bath: ThermalBath | None = None) -> Trajectory:
    """u = exp(-(i omega_c' + kappa) t), v = nbar (1 - exp(-2 kappa t))."""
    t = np.asarray(t_grid, dtype=float)
    rate = 1j * coeffs.omega_c_ren + coeffs.kappa
    u = np.exp(-rate * t)
    v = coeffs.nbar_c * -np.expm1(-2 * coeffs.kappa * t)
    dt = float(t[1] - t[0]) if t.size > 1 else 0.0
    return Trajectory(t, u, model or ReservoirModel(eta=0.0), cavity or CavityModel(coeffs.omega_c_ren), dt,
                      u_dot=-rate * u, v_values=v, v_dot=coeffs.kappa_tilde * np.exp(-2 * coeffs.kappa * t),
                      bath=bath or ThermalBath.zero())


def bm_mean_field(coeffs: BMCoefficients, a0: complex, t_grid) -> np.ndarray:
    """<a(t)> = a0 exp(-(i omega_c' + kappa) t)."""
    t = np.asarray(t_grid, dtype=float)
    return a0 * np.exp(-(1j * coeffs.omega_c_ren + coeffs.kappa) * t)


def bm_photon_number(coeffs: BMCoefficients, n0: float, t_grid) -> np.ndarray:
    """n(t) = n0 exp(-2 kappa t) + nbar (1 - exp(-2 kappa t))."""
    t = np.asarray(t_grid, dtype=float)
    decay = np.exp(-2 * coeffs.kappa * t)
    return n0 * decay + coeffs.nbar_c * (1 - decay)
