"""Biased variable-range hopping on random marked points.

Library layout:

* :mod:`motthop.env`     -- environments (windowed, periodic, lazy i.i.d.)
* :mod:`motthop.kernel`  -- jump rates, conductances, certified jump laws
* :mod:`motthop.walk`    -- trajectory samplers (discrete, continuous, truncated)
* :mod:`motthop.network` -- resistor-network solvers for the truncated walk
* :mod:`motthop.oracle`  -- exact finite-period chain computations
* :mod:`motthop.mc`      -- Monte Carlo estimators with batch-means intervals
* :mod:`motthop.cli`     -- command line entry point (``motthop``)
"""

from .env import (
    Environment,
    EnergyLaw,
    GapLaw,
    GeneratorSpec,
    LazyEnvironment,
    PeriodicEnvironment,
    USpec,
    check_assumptions,
    make_periodic,
    mott_u,
    reflect,
    sample_environment,
    shift,
)
from .errors import BudgetError, ConfigError, MottHopError, NumericsError, WindowExceeded

__version__ = "0.1.0"

__all__ = [
    "Environment",
    "EnergyLaw",
    "GapLaw",
    "GeneratorSpec",
    "LazyEnvironment",
    "PeriodicEnvironment",
    "USpec",
    "check_assumptions",
    "make_periodic",
    "mott_u",
    "reflect",
    "sample_environment",
    "shift",
    "BudgetError",
    "ConfigError",
    "MottHopError",
    "NumericsError",
    "WindowExceeded",
    "__version__",
]
