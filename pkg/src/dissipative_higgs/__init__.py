"""Dissipative particle on a sphere: gnomonic-chart dynamics coupled to an oscillator reservoir.

Submodules
----------
geometry
    Metric, vielbein and embedding of the sphere in gnomonic coordinates.
reservoir
    Susceptibility models, memory kernels, Kramers-Kronig, bath modes and noise.
dynamics
    Conservative, generalized-Langevin and explicit-bath integrators.
spectra
    Truncated-basis Higgs-oscillator spectrum and golden-rule rates.
cli
    Batch front end writing CSV tables, manifests and figures.
"""

__version__ = "0.1.0"

from . import dynamics, geometry, reservoir, spectra  # noqa: E402,F401
from .geometry import CurvedSpace, TangentState  # noqa: E402,F401
