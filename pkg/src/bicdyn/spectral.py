"""Reservoir spectrum of a square coupled-cavity array.

All reduced quantities use the band coordinate ``x = (omega - omega0) / (4 xi0)``
so the band is ``(-1, 1)``.  Elliptic integrals follow the *modulus*
convention::

    K(k) = 1/2 * int_0^pi dalpha / sqrt(1 - k^2 cos^2 alpha)

i.e. ``K(k)`` here equals ``scipy.special.ellipk(k**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

UEV_OMEGA0 = 50.25
UEV_XI0 = 1.24


class BandEdgeError(ValueError):
    """Raised when a quantity diverges at a band edge or the band center."""


@dataclass(frozen=True)
class ReservoirModel:
    """2D coupled-cavity array seen by the target cavity.

    Parameters
    ----------
    omega0 : float
        On-site frequency of the array cavities.
    xi0 : float
        Nearest-neighbour hopping inside the array (> 0).
    eta : float
        Target coupling in units of ``xi0`` (``xi = eta * xi0``).
    xi00 : float
        Optional direct coupling to the central cavity (energy).
    """

    omega0: float = UEV_OMEGA0 / UEV_XI0
    xi0: float = 1.0
    eta: float = 1.0
    xi00: float = 0.0

    def __post_init__(self):
        if not (self.xi0 > 0 and math.isfinite(self.xi0)):
            raise ValueError(f"xi0 must be positive and finite, got {self.xi0}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not (self.xi00 >= 0 and math.isfinite(self.xi00)):
            raise ValueError(f"xi00 must be >= 0, got {self.xi00}")
        if not math.isfinite(self.omega0):
            raise ValueError("omega0 must be finite")

    @property
    def xi(self) -> float:
        return self.eta * self.xi0

    @property
    def band_lo(self) -> float:
        return self.omega0 - 4 * self.xi0

    @property
    def band_hi(self) -> float:
        return self.omega0 + 4 * self.xi0

    @property
    def half_width(self) -> float:
        return 4 * self.xi0

    @property
    def shift(self) -> float:
        """Central-cavity coupling in band units, ``xi00 / (4 xi0)``."""
        return self.xi00 / (4 * self.xi0)

    @property
    def decoupled(self) -> bool:
        return self.eta == 0 and self.xi00 == 0

    def reduced(self, omega):
        return (np.asarray(omega, dtype=float) - self.omega0) / (4 * self.xi0)

    def absolute(self, x):
        return self.omega0 + 4 * self.xi0 * np.asarray(x, dtype=float)

    def coupling_zero(self) -> float | None:
        """Frequency where the coupling function vanishes, or None."""
        if self.eta == 0:
            return None
        return self.omega0 + self.xi00 / self.eta

    @property
    def bic_inside_band(self) -> bool:
        if self.eta == 0:
            return False
        return abs(self.xi00 / (self.eta * self.xi0)) < 4


@dataclass(frozen=True)
class CavityModel:
    omega_c: float

    def detuning(self, model: ReservoirModel) -> float:
        return (self.omega_c - model.omega0) / (4 * model.xi0)

    def regime(self, model: ReservoirModel) -> str:
        d = self.detuning(model)
        if d == 0:
            return "center"
        return "in-band" if abs(d) < 1 else "gap"

    @classmethod
    def from_detuning(cls, detuning: float, model: ReservoirModel) -> "CavityModel":
        return cls(model.omega0 + 4 * model.xi0 * detuning)


@dataclass(frozen=True)
class SpectralCurve:
    omega_grid: np.ndarray
    values: np.ndarray
    singular_index: int | None = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.omega_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.shape != v.shape:
            raise ValueError("grid and values differ in shape")
        if np.any(np.diff(w) <= 0):
            raise ValueError("omega grid must be strictly ascending")
        object.__setattr__(self, "omega_grid", w)
        object.__setattr__(self, "values", v)


# --- elliptic integrals ------------------------------------------------------

def _agm_full(a, b, c0):
    """AGM iteration that also accumulates sum_n 2^(n-1) c_n^2.

    ``c0`` must satisfy ``c0^2 = a^2 - b^2``; later ``c`` follow from
    ``c_{n+1} = c_n^2 / (4 a_{n+1})`` which avoids the ``a - b`` cancellation.
    Returns the mean and the tail ``sum_{n>=1} 2^(n-1) c_n^2`` (the n = 0 term
    is left to the caller, who usually knows it exactly).
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    c = np.array(c0, dtype=float, copy=True)
    tail = np.zeros(np.broadcast(a, b, c).shape)
    a, b, c = np.broadcast_arrays(a, b, c)
    a, b, c = a.copy(), b.copy(), c.copy()
    power = 1.0
    for _ in range(64):
        a_next = 0.5 * (a + b)
        b = np.sqrt(a * b)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(a_next > 0, c * c / (4 * a_next), 0.0)
        a = a_next
        tail += power * c * c
        power *= 2
        if np.all(c <= 1e-17 * np.abs(a)):
            break
    return a, tail


def agm(a, b):
    """Arithmetic-geometric mean of non-negative arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        c0 = np.sqrt(np.abs(a * a - b * b))
    m, _ = _agm_full(np.maximum(a, b), np.minimum(a, b), c0)
    return m


def _ellipk_from_complement(kp):
    """K(k) given the complementary modulus ``k' = sqrt(1 - k^2)``."""
    kp = np.asarray(kp, dtype=float)
    with np.errstate(divide="ignore"):
        return np.pi / (2 * agm(1.0, kp))


def _ellip_ke(k, kp):
    """K(k), E(k) and dK/dk for modulus ``k`` with complement ``kp``.

    Both moduli are passed so callers near ``k -> 1`` keep full precision.
    """
    k = np.asarray(k, dtype=float)
    kp = np.asarray(kp, dtype=float)
    m, tail = _agm_full(1.0, kp, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.pi / (2 * m)
        E = K * (1 - 0.5 * k * k - tail)
        # dK/dk = (E - k'^2 K) / (k k'^2), rearranged to avoid E - K cancellation
        dK = np.where(k > 0, K * (0.5 * k * k - tail) / (k * kp * kp), 0.0)
    return K, E, dK


def elliptic_K(x):
    """Complete elliptic integral of the first kind, modulus convention.

    Raises
    ------
    ValueError
        if any ``x`` lies outside ``[0, 1)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x >= 1) or np.any(~np.isfinite(x)):
        raise ValueError("elliptic_K requires 0 <= x < 1 (K diverges at x = 1)")
    kp = np.sqrt((1 - x) * (1 + x))
    out = _ellipk_from_complement(kp)
    return float(out) if out.ndim == 0 else out


# --- dispersion and coupling -------------------------------------------------

def dispersion(kx, ky, model: ReservoirModel):
    return model.omega0 - 2 * model.xi0 * (np.cos(kx) + np.cos(ky))


def coupling_v(kx, ky, model: ReservoirModel, r0=(0, 0)):
    """Target-array coupling amplitude ``V_k`` (complex)."""
    phase = np.exp(1j * (np.asarray(kx) * r0[0] + np.asarray(ky) * r0[1]))
    w = dispersion(kx, ky, model)
    return phase * (model.eta * (model.omega0 - w) + model.xi00)


def _reduced_dos(x):
    """Band-normalised DOS on (-1, 1); integrates to one."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        out = np.where(ax <= 1, 1.0 / (np.pi * agm(1.0, np.minimum(ax, 1.0))), 0.0)
    return out


def reduced_spectral_density(x, model: ReservoirModel):
    """``J / (4 xi0)`` as a function of the band coordinate."""
    x = np.asarray(x, dtype=float)
    amp = model.eta * x - model.shift
    with np.errstate(invalid="ignore"):
        out = 2 * np.pi * _reduced_dos(x) * amp * amp
    # eta * x - s vanishing cancels the log divergence at the center
    return np.where(np.isfinite(out), out, np.where(amp == 0, 0.0, np.inf))


def density_of_states(omega, model: ReservoirModel):
    """Density of states per unit energy.  Zero outside the band.

    Raises
    ------
    BandEdgeError
        at the band center, where the density diverges logarithmically.
    """
    x = model.reduced(omega)
    if np.any(x == 0):
        raise BandEdgeError("density of states diverges at the band center")
    out = _reduced_dos(x) / (4 * model.xi0)
    return float(out) if out.ndim == 0 else out


def spectral_density(omega, model: ReservoirModel):
    """Spectral density J(omega) = 2 pi rho(omega) |V(omega)|^2."""
    x = model.reduced(omega)
    out = 4 * model.xi0 * reduced_spectral_density(x, model)
    if np.any(~np.isfinite(out)):
        raise BandEdgeError("spectral density diverges where rho does and V does not vanish")
    return float(out) if out.ndim == 0 else out


def spectral_curve(model: ReservoirModel, n: int = 801, kind: str = "J") -> SpectralCurve:
    """Sample rho or J on an open grid strictly inside the band."""
    x = np.linspace(-1, 1, n + 2)[1:-1]
    omega = model.absolute(x)
    if kind == "J":
        values = spectral_density(omega, model)
        return SpectralCurve(omega, values)
    if kind == "rho":
        center = np.flatnonzero(x == 0)
        xs = np.where(x == 0, np.nan, x)
        values = np.where(np.isnan(xs), np.inf, _reduced_dos(np.nan_to_num(xs, nan=0.5)) / (4 * model.xi0))
        return SpectralCurve(omega, values, int(center[0]) if center.size else None)
    raise ValueError(f"unknown curve kind {kind!r}")


def dos_brute_force(model: ReservoirModel, grid_size: int = 4096, bins: int = 400) -> SpectralCurve:
    """Histogram of the dispersion over a uniform k grid, unit-normalised."""
    if grid_size < 256:
        raise ValueError("grid_size must be >= 256")
    k = -np.pi + 2 * np.pi * (np.arange(grid_size) + 0.5) / grid_size
    c = np.cos(k)
    edges = np.linspace(model.band_lo, model.band_hi, bins + 1)
    counts = np.zeros(bins)
    # row-by-row keeps memory at O(grid_size) for 4096^2 grids
    chunk = 256
    for start in range(0, grid_size, chunk):
        w = model.omega0 - 2 * model.xi0 * (c[start:start + chunk, None] + c[None, :])
        counts += np.histogram(w, bins=edges)[0]
    widths = np.diff(edges)
    rho = counts / (counts.sum() * widths)
    return SpectralCurve(0.5 * (edges[1:] + edges[:-1]), rho)


# --- lattice Green's function (closed form) ----------------------------------

_SERIES_N = np.arange(1, 80)
_SERIES_C = np.exp(2 * (np.array([math.lgamma(2 * n + 1) - 2 * math.lgamma(n + 1) for n in _SERIES_N])
                        - _SERIES_N * math.log(4.0)))


def _green_outside(a, offset=None):
    """g(a) and g'(a) for a = |zeta| > 1, optionally from a - 1 = offset."""
    a = np.asarray(a, dtype=float)
    d = a - 1 if offset is None else np.asarray(offset, dtype=float)
    b = np.sqrt(d * (2 + d))
    k = 1 / a
    kp = b / a
    K, E, _ = _ellip_ke(k, kp)
    g = 2 * K / (np.pi * a)
    dg = -(2 / np.pi) * E / (d * (2 + d))
    return g, dg


def _h_outside(a, offset=None):
    """h = a g(a) - 1 and h' for 1-D a > 1, series form at large a."""
    g, dg = _green_outside(a, offset)
    h = a * g - 1
    dh = g + a * dg
    big = a >= 2
    if np.any(big):
        ab = a[big]
        pw = (1 / ab[:, None] ** 2) ** _SERIES_N[None, :]
        h[big] = (_SERIES_C * pw).sum(axis=1)
        dh[big] = -(2 * _SERIES_N * _SERIES_C * pw).sum(axis=1) / ab
    return h, dh


def reduced_green(zeta, edge_offset=None):
    """Real part of the band-normalised lattice Green's function.

    Returns ``(g, h, dg, dh)`` where ``g(zeta) = int rho(x) / (zeta - x) dx``
    (principal value inside the band), ``h = zeta g - 1`` and primes are
    derivatives in ``zeta``.  ``edge_offset`` (``|zeta| - 1``, only for
    points outside the band) preserves precision next to the band edges.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    a = np.abs(zeta)
    sgn = np.sign(zeta)
    if np.any(a == 1) and edge_offset is None:
        raise BandEdgeError("lattice Green's function diverges at the band edge")
    g = np.zeros_like(a)
    h = np.zeros_like(a)
    dg = np.zeros_like(a)
    dh = np.zeros_like(a)
    out = a > 1 if edge_offset is None else np.ones_like(a, dtype=bool)
    if np.any(out):
        off = None if edge_offset is None else np.broadcast_to(np.asarray(edge_offset, float), a.shape)[out]
        ao = a[out] if off is None else 1 + off
        go, dgo = _green_outside(ao, off)
        ho, dho = _h_outside(ao, off)
        g[out] = sgn[out] * go
        dg[out] = dgo
        h[out] = ho
        dh[out] = sgn[out] * dho
    inside = ~out
    if np.any(inside):
        x = a[inside]
        kp = np.sqrt((1 - x) * (1 + x))
        K, _, dK = _ellip_ke(x, kp)
        gi = (2 / np.pi) * K
        g[inside] = sgn[inside] * gi
        dg[inside] = (2 / np.pi) * dK
        h[inside] = x * gi - 1
        dh[inside] = sgn[inside] * (gi + x * (2 / np.pi) * dK)
    return g, h, dg, dh


def reduced_self_energy(zeta, model: ReservoirModel, edge_offset=None):
    """Self-energy and its derivative in band units, via the closed form.

    ``sigma = Sigma / (4 xi0)`` (principal value in the band) and
    ``dsigma = dSigma/domega``.  Uses
    ``sigma = h (eta^2 zeta - 2 eta s) + s^2 g`` with ``s = xi00 / (4 xi0)``.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if edge_offset is not None:
        zeta = np.sign(zeta) * (1 + np.asarray(edge_offset, float))
    g, h, dg, dh = reduced_green(zeta, edge_offset)
    eta, s = model.eta, model.shift
    lin = eta * eta * zeta - 2 * eta * s
    sigma = h * lin + s * s * g
    dsigma = dh * lin + h * eta * eta + s * s * dg
    return sigma, dsigma


# --- quadrature rule over the band --------------------------------------------

def band_quadrature(max_time: float = 0.0, xi0: float = 1.0, focus=(), order: int = 20,
                    max_panel: float = 0.05, phase_per_panel: float = 8.0):
    """Composite Gauss-Legendre rule on (-1, 1) in the band coordinate.

    Panels are uniform with width chosen so ``exp(-i omega t)`` advances by at
    most ``phase_per_panel`` radians per panel for ``t <= max_time``, and are
    graded geometrically toward the band edges, the band center and every
    ``(position, scale)`` pair in ``focus``.

    Returns nodes and weights for ``int_{-1}^{1} f(x) dx``.
    """
    h = max_panel
    if max_time > 0:
        h = min(h, phase_per_panel / (4 * xi0 * max_time))
    n = max(int(math.ceil(2 / h)), 2)
    cuts = set(np.linspace(-1, 1, n + 1).tolist())
    h = 2 / n
    marks = [(-1.0, 1e-10), (0.0, 1e-14), (1.0, 1e-10)]
    marks += [(float(p), max(float(sc), 1e-14)) for p, sc in focus]
    for p, smallest in marks:
        if not -1 <= p <= 1:
            continue
        cuts.add(p)
        step = h
        while step > smallest:
            step *= 0.3
            for q in (p - step, p + step):
                if -1 < q < 1:
                    cuts.add(q)
    cuts = np.array(sorted(cuts))
    cuts = cuts[np.concatenate([[True], np.diff(cuts) > 1e-15])]
    t, wt = leggauss(order)
    lo, hi = cuts[:-1], cuts[1:]
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * wt[None, :]).ravel()
    return nodes, weights
