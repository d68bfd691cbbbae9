"""Master-equation coefficients and density-matrix evolution of the cavity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, eigvalsh
from scipy.special import gammaln

from .greens import Trajectory

SINGULAR_U = 1e-12
MAX_LEAKAGE = 1e-3


class TruncationError(ValueError):
    """Raised when the Fock cutoff drops more probability than allowed."""


@dataclass(frozen=True)
class CoefficientSeries:
    """Time-local coefficients of the exact master equation.

    ``singular`` marks samples with ``|u| < 1e-12`` where ``du/dt / u`` is
    undefined; the coefficient values there are NaN.
    """

    t_grid: np.ndarray
    omega_c_ren: np.ndarray
    kappa: np.ndarray
    kappa_tilde: np.ndarray
    singular: np.ndarray


def _derivative(values, explicit, dt):
    if explicit is not None:
        return explicit
    return np.gradient(values, dt, edge_order=2)


def coefficients(traj: Trajectory) -> CoefficientSeries:
    """omega_c' = -Im(du/dt / u), kappa = -Re(du/dt / u), kappa~ = dv/dt - 2 v Re(du/dt / u).

    Uses the solver's exact derivatives when the trajectory carries them and
    second-order centred differences (of the rotating-frame envelope for u)
    otherwise.
    """
    u = traj.u_values
    if traj.u_dot is not None:
        du = traj.u_dot
    else:
        # difference the slowly varying envelope, not the fast lab-frame phase
        wc = traj.cavity.omega_c
        rot = np.exp(-1j * wc * traj.t_grid)
        du = rot * (np.gradient(traj.envelope, traj.dt, edge_order=2) - 1j * wc * traj.envelope)
    singular = np.abs(u) < SINGULAR_U
    ratio = np.full(u.shape, np.nan + 0j)
    ratio[~singular] = du[~singular] / u[~singular]
    if traj.v_values is None:
        v = np.zeros(u.shape)
        dv = np.zeros(u.shape)
    else:
        v = traj.v_values
        dv = _derivative(v, traj.v_dot, traj.dt)
    return CoefficientSeries(traj.t_grid, -ratio.imag, -ratio.real, dv - 2 * v * ratio.real, singular)


def occupation_from_coefficients(coeffs: CoefficientSeries, n0: float, rtol: float = 1e-10) -> np.ndarray:
    """Integrate dn/dt = -2 kappa n + kappa~ from n(0) = n0.

    An independent check of ``n = |u|^2 n0 + v``: the coefficients are
    interpolated linearly between samples.
    """
    t = coeffs.t_grid
    if np.any(coeffs.singular):
        raise ValueError("coefficients are singular on this trajectory")
    rhs = lambda s, n: -2 * np.interp(s, t, coeffs.kappa) * n + np.interp(s, t, coeffs.kappa_tilde)
    sol = solve_ivp(rhs, (t[0], t[-1]), [n0], t_eval=t, method="DOP853", rtol=rtol, atol=1e-12,
                    max_step=10 * (t[1] - t[0]))
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[0]


# --- density matrices ---------------------------------------------------------

@dataclass(frozen=True)
class FockDensityMatrix:
    """Density operator truncated to ``dim`` Fock states.

    ``leakage`` is the probability lost above the cutoff (1 - trace).
    """

    elements: np.ndarray
    leakage: float = 0.0

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def from_state(cls, psi, dim: int | None = None) -> "FockDensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        if dim is not None and dim > psi.size:
            psi = np.concatenate([psi, np.zeros(dim - psi.size)])
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def fock(cls, n: int, dim: int | None = None) -> "FockDensityMatrix":
        dim = default_dim(n) if dim is None else dim
        rho = np.zeros((dim, dim), dtype=complex)
        rho[n, n] = 1.0
        return cls(rho)

    @classmethod
    def thermal(cls, mean: float, dim: int | None = None) -> "FockDensityMatrix":
        dim = default_dim(mean) if dim is None else dim
        p = _thermal_weights(mean, dim)
        return cls(np.diag(p).astype(complex), 1 - p.sum())

    def check(self, tol: float = 1e-10) -> None:
        """Raise if Hermiticity, trace or positivity fails."""
        rho = self.elements
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if not (1 - self.leakage - 1e-9 <= tr <= 1 + tol):
            raise ValueError(f"trace {tr} inconsistent with leakage {self.leakage}")
        if eigvalsh(0.5 * (rho + rho.conj().T))[0] < -1e-8:
            raise ValueError("density matrix is not positive")


def default_dim(n0: float) -> int:
    return int(np.ceil(4 * n0)) + 20


def _thermal_weights(mean, dim):
    l = np.arange(dim)
    if mean == 0:
        return (l == 0).astype(float)
    return np.exp(l * np.log(mean) - (l + 1) * np.log1p(mean))


def evolve_density_matrix(rho0: FockDensityMatrix, u: complex, v: float, dim: int | None = None,
                          max_leakage: float = MAX_LEAKAGE) -> FockDensityMatrix:
    """Propagate ``rho0`` with the Green's functions ``u`` and ``v`` at one time.

    ``rho = sum_mn c_mn sum_k d_k A+_mk rho~(v) A_nk`` with
    ``d_k = (1 - |u|^2 / (1 + v))^k``,
    ``A+_mk = sqrt(m!) / ((m - k)! sqrt(k!)) (u / (1 + v) a+)^(m - k)``
    and the thermal-form kernel ``rho~(v) = sum_l v^l / (1 + v)^(l + 1) |l><l|``.

    Raises
    ------
    TruncationError
        if more than ``max_leakage`` of the trace falls outside ``dim``.
    """
    if abs(u) ** 2 > 1 + 1e-9:
        raise ValueError("|u| must not exceed 1")
    if v < 0:
        raise ValueError("v must be >= 0")
    c = rho0.elements
    dim = rho0.dim if dim is None else dim
    alpha = u / (1 + v)
    d = max(1 - abs(u) ** 2 / (1 + v), 0.0)
    p = _thermal_weights(v, dim)
    lg = gammaln(np.arange(2 * dim + 1) + 1)
    out = np.zeros((dim, dim), dtype=complex)
    ls = np.arange(dim)
    for m, n in zip(*np.nonzero(c)):
        for k in range(min(m, n) + 1):
            dk = d ** k
            if dk == 0:
                break
            a, b = m - k, n - k
            i, j = ls + a, ls + b
            ok = (i < dim) & (j < dim) & (p > 0)
            if not np.any(ok):
                continue
            l = ls[ok]
            log_coef = (lg[m] + lg[n]) / 2 - lg[a] - lg[b] - lg[k]
            log_lad = 0.5 * (lg[l + a] + lg[l + b]) - lg[l]
            amp = c[m, n] * dk * alpha ** a * np.conj(alpha) ** b
            out[i[ok], j[ok]] += amp * np.exp(log_coef + log_lad) * p[ok]
    out = 0.5 * (out + out.conj().T)
    leak = max(1 - np.trace(out).real, 0.0)
    if leak > max_leakage:
        raise TruncationError(f"Fock cutoff {dim} loses {leak:.3g} of the trace; raise the dimension")
    return FockDensityMatrix(out, leak)


def fidelity(rho: FockDensityMatrix, sigma: FockDensityMatrix) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    a, b = rho.elements, sigma.elements
    if a.shape != b.shape:
        dim = max(a.shape[0], b.shape[0])
        a = np.pad(a, (0, dim - a.shape[0]))
        b = np.pad(b, (0, dim - b.shape[0]))
    lam, vec = eigh(0.5 * (a + a.conj().T))
    ra = (vec * np.sqrt(np.clip(lam, 0, None))) @ vec.conj().T
    m = ra @ b @ ra
    f = np.sum(np.sqrt(np.clip(eigvalsh(0.5 * (m + m.conj().T)), 0, None))) ** 2
    return float(min(max(f, 0.0), 1.0))


@dataclass(frozen=True)
class TrappingSeries:
    t_grid: np.ndarray
    trapped: np.ndarray
    phase: np.ndarray


def trapping_condition(traj: Trajectory, tol: float = 1e-2) -> TrappingSeries:
    """Where ``||u| - 1| < tol`` and ``v < tol``; the phase of ``u`` is kept aside."""
    v = traj.v_values if traj.v_values is not None else np.zeros(traj.t_grid.shape)
    trapped = (np.abs(np.abs(traj.u_values) - 1) < tol) & (v < tol)
    return TrappingSeries(traj.t_grid, trapped, np.angle(traj.u_values))
