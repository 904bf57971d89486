"""Dispersion formation control: steer the covariance spectrum of a swarm.

Modules
-------
graph        interaction graphs, Laplacian spectra, connectivity
dispersion   covariance, closed-form 2x2 eigenpairs, spectral error
control      centralized control law and its closed-form oracles
estimators   consensus estimators of barycentric coordinates and covariance
sim          fixed-step RK4 scenario engine (centralized / distributed)
cli          ``dispersion-control`` command line
"""
__version__ = "0.1.0"

from .dispersion import DispersionError, DispersionTarget, EigenBasis2, Sym2, covariance, eig_sym2
from .graph import Graph, laplacian, spectral_summary
from .sim import ScenarioConfig, metrics, prepare, run

__all__ = [
    "__version__",
    "DispersionError",
    "DispersionTarget",
    "EigenBasis2",
    "Sym2",
    "covariance",
    "eig_sym2",
    "Graph",
    "laplacian",
    "spectral_summary",
    "ScenarioConfig",
    "metrics",
    "prepare",
    "run",
]
