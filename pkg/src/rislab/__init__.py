"""Numerical laboratory for adiabatic repeated interaction systems.

Submodules:

* ``linalg``    dense operators, vectorization, superoperators;
* ``model``     repeated interaction models, schedules, deformed maps;
* ``spectral``  irreducibility and peripheral spectral decompositions;
* ``adiabatic`` intertwiners, adiabatic products, deformed adiabatic states;
* ``fullstats`` two-time measurement statistics, balance, sampling;
* ``mgfldp``    generating functions, large deviations, CLT quantities;
* ``config``/``cli``  JSON-configured command line runs.
"""

__version__ = "0.1.0"

from . import adiabatic, config, fullstats, linalg, mgfldp, model, spectral

__all__ = [
    "adiabatic",
    "config",
    "fullstats",
    "linalg",
    "mgfldp",
    "model",
    "spectral",
    "__version__",
]
