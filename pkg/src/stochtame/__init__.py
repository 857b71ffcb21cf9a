"""stochtame: pseudo-spectral simulation of blow-up taming by superlinear noise.

Subpackages: spectral fields and Sobolev ladder (:mod:`stochtame.spectral`),
fluid drift operators (:mod:`stochtame.models`), taming noise and the 1D SDE
lab (:mod:`stochtame.noise`), time stepping (:mod:`stochtame.integrators`),
the deterministic/stochastic switching controller (:mod:`stochtame.control`),
Monte Carlo studies (:mod:`stochtame.experiments`) and the CLI front end
(:mod:`stochtame.cli`).
"""

from ._backend import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
