"""Drift and diffusion coefficients ``b(t, x, mu)``, ``sigma(t, x, mu)``.

Coefficients are vectorised in ``x``: they take a time, an array of states
and an :class:`~mvsvi.measures.EmpiricalMeasure` and return an array. Measure
dependence enters only through empirical averages (kernels) or statistics of
the measure such as its mean or ``W_1(mu, delta_0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams, NonFinite
from .expressions import parse_expression
from .measures import EmpiricalMeasure

__all__ = [
    "Regularity",
    "CoefficientPair",
    "MeanFieldKernel",
    "eval_drift",
    "eval_diffusion",
    "COEFFICIENT_REGISTRY",
    "build_coefficients",
    "toy_cubic",
    "ou_meanfield",
    "cir_like",
    "custom",
]

Coefficient = Callable[[float, np.ndarray, EmpiricalMeasure], np.ndarray]


@dataclass(frozen=True)
class Regularity:
    """Declared constants of the growth/regularity assumptions.

    ``C`` may be ``None`` when no bound is claimed; validators then only
    estimate it.
    """

    C: Optional[float] = None
    l: float = 1.0
    alpha: float = 0.0
    p0: float = 2.0
    measure_dependent: bool = False

    def __post_init__(self):
        if self.C is not None and not self.C > 0:
            raise InvalidParams(f"C must be positive, got {self.C}")
        # l = 0 is accepted so that validators can flag a too-small declaration
        if not self.l >= 0:
            raise InvalidParams(f"l must be nonnegative, got {self.l}")
        if not 0.0 <= self.alpha <= 0.5:
            raise InvalidParams(f"alpha must lie in [0, 1/2], got {self.alpha}")


@dataclass(frozen=True)
class CoefficientPair:
    drift: Coefficient
    diffusion: Coefficient
    declared: Regularity = field(default_factory=Regularity)
    name: str = "custom"
    default_psi: Optional[tuple] = None

    @property
    def measure_dependent(self) -> bool:
        return self.declared.measure_dependent


class MeanFieldKernel:
    """``self_term(x) + int interaction(x, y) mu(dy)`` over an empirical measure.

    The integral is the exact atom average, computed in blocks to bound the
    ``len(x) * len(mu)`` broadcast.
    """

    block = 1 << 20

    def __init__(self, self_term: Callable, interaction: Callable):
        self.self_term = self_term
        self.interaction = interaction

    def __call__(self, t, x, mu: EmpiricalMeasure):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        y = mu.atoms
        out = np.empty_like(flat)
        rows = max(1, self.block // y.size)
        for i in range(0, flat.size, rows):
            xi = flat[i:i + rows, None]
            out[i:i + rows] = np.mean(self.interaction(xi, y[None, :]), axis=1)
        return (np.asarray(self.self_term(flat), dtype=float) + out).reshape(x.shape)


def _checked(kind: str, values, x):
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        bad = np.flatnonzero(~np.isfinite(np.broadcast_to(v, np.shape(x))).ravel())
        where = float(np.ravel(x)[bad[0]]) if bad.size else x
        raise NonFinite(f"{kind} evaluated to a non-finite value at x={where!r}")
    return v


def eval_drift(pair: CoefficientPair, t: float, x, mu: EmpiricalMeasure):
    """``b(t, x, mu)``; raises :class:`NonFinite` on NaN/inf output."""
    v = _checked("drift", pair.drift(t, np.asarray(x, dtype=float), mu), x)
    return float(v) if np.ndim(x) == 0 else v


def eval_diffusion(pair: CoefficientPair, t: float, x, mu: EmpiricalMeasure):
    """``sigma(t, x, mu)``; raises :class:`NonFinite` on NaN/inf output."""
    v = _checked("diffusion", pair.diffusion(t, np.asarray(x, dtype=float), mu), x)
    return float(v) if np.ndim(x) == 0 else v


# registry ------------------------------------------------------------------


def toy_cubic(alpha: float = 0.0, C: float = 16.0) -> CoefficientPair:
    """``b = x - 2x^3``, ``sigma = |x^2 + x|^(1/2 + alpha)``.

    With ``p0 = 12`` the coercivity supremum is about 10.006 at ``alpha = 0``
    and grows with ``alpha``; the default ``C`` covers ``alpha <= 0.1``.
    """
    expo = 0.5 + float(alpha)
    l = 2.0
    return CoefficientPair(
        drift=lambda t, x, mu: x - 2.0 * x**3,
        diffusion=lambda t, x, mu: np.abs(x * x + x) ** expo,
        declared=Regularity(C=C, l=l, alpha=float(alpha), p0=4 * l + 4),
        name="toy_cubic",
        default_psi=("interval", {"lo": -2.0, "hi": 2.0}),
    )


def ou_meanfield(sigma: float = 1.0, C: float = 10.0) -> CoefficientPair:
    """``b = -x + mean(mu)`` with constant ``sigma``."""
    s = float(sigma)
    return CoefficientPair(
        drift=lambda t, x, mu: mu.mean() - x,
        diffusion=lambda t, x, mu: np.full(np.shape(x), s),
        declared=Regularity(C=C, l=1.0, alpha=0.5, p0=1.0, measure_dependent=True),
        name="ou_meanfield",
        default_psi=("interval", {"lo": -5.0, "hi": 5.0}),
    )


def cir_like(kappa: float = 1.0, theta: float = 1.0, sigma: float = 1.0,
             C: Optional[float] = None) -> CoefficientPair:
    """``b = kappa (theta - x)``, ``sigma = s sqrt(max(x, 0))``."""
    k, th, s = float(kappa), float(theta), float(sigma)
    return CoefficientPair(
        drift=lambda t, x, mu: k * (th - x),
        diffusion=lambda t, x, mu: s * np.sqrt(np.maximum(x, 0.0)),
        declared=Regularity(C=C, l=1.0, alpha=0.0, p0=8.0),
        name="cir_like",
        default_psi=("interval", {"lo": 0.0, "hi": math.inf}),
    )


def custom(drift="0", diffusion="0", C: Optional[float] = None, l: float = 1.0,
           alpha: float = 0.0, p0: float = 2.0) -> CoefficientPair:
    """Coefficients from expression strings, e.g. ``drift="-x + mean(mu)"``."""
    b = parse_expression(drift)
    s = parse_expression(diffusion)
    return CoefficientPair(
        drift=b,
        diffusion=s,
        declared=Regularity(C=C, l=l, alpha=alpha, p0=p0,
                            measure_dependent=b.uses_measure or s.uses_measure),
        name="custom",
    )


COEFFICIENT_REGISTRY = {
    "toy_cubic": toy_cubic,
    "ou_meanfield": ou_meanfield,
    "cir_like": cir_like,
    "custom": custom,
}


def build_coefficients(kind: str, params: Optional[dict] = None) -> CoefficientPair:
    try:
        factory = COEFFICIENT_REGISTRY[kind]
    except KeyError:
        raise InvalidParams(
            f"unknown coefficients {kind!r}; registry: {sorted(COEFFICIENT_REGISTRY)}"
        ) from None
    try:
        return factory(**dict(params or {}))
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for coefficients {kind!r}: {exc}") from None
