"""Exact dynamics of a cavity coupled to a two-dimensional coupled-cavity array."""

__version__ = "0.1.0"

from .spectral import BandEdgeError, CavityModel, ReservoirModel, SpectralCurve  # noqa: E402
from .bound_states import BoundState, DissipationSpectrum, Kind, find_bound_states  # noqa: E402
from .greens import ThermalBath, Trajectory, solve_u, solve_v  # noqa: E402

__all__ = [
    "BandEdgeError",
    "BoundState",
    "CavityModel",
    "DissipationSpectrum",
    "Kind",
    "ReservoirModel",
    "SpectralCurve",
    "ThermalBath",
    "Trajectory",
    "find_bound_states",
    "solve_u",
    "solve_v",
]
