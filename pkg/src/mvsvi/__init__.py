"""Numerical toolkit for stochastic variational inequalities with mean-field coefficients."""

__version__ = "0.1.0"

from .convex import (  # noqa: E402
    AbsValue,
    Custom,
    EvenPower,
    IndicatorInterval,
    MaxAffine,
    Quadratic,
    YosidaView,
    build_psi,
)
from .coefficients import CoefficientPair, build_coefficients  # noqa: E402
from .measures import EmpiricalMeasure, wasserstein  # noqa: E402
from .paths import IncrementGrid, NoiseKey, StreamTag  # noqa: E402
from .schemes import SchemeConfig, simulate_frozen  # noqa: E402
from .mckean_vlasov import picard_solve, simulate_particle_system  # noqa: E402
from .poc import fit_rate, run_poc  # noqa: E402
