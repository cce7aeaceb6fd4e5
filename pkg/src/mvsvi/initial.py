"""Initial-condition samplers driven by counter-based uniforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParams

__all__ = ["Deterministic", "Uniform", "Gaussian", "INIT_REGISTRY", "build_initial"]


@dataclass(frozen=True)
class Deterministic:
    x0: float = 0.0
    a0: float = 1.0

    def sample(self, u) -> np.ndarray:
        return np.full(np.shape(u), float(self.x0))


@dataclass(frozen=True)
class Uniform:
    a: float = 0.0
    b: float = 1.0
    a0: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidParams(f"uniform needs a < b, got a={self.a}, b={self.b}")

    def sample(self, u) -> np.ndarray:
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)


@dataclass(frozen=True)
class Gaussian:
    m: float = 0.0
    s: float = 1.0
    a0: float = 1.0

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise InvalidParams(f"gaussian needs s > 0, got {self.s}")

    def sample(self, u) -> np.ndarray:
        return self.m + self.s * ndtri(np.asarray(u, dtype=float))


INIT_REGISTRY = {"deterministic": Deterministic, "uniform": Uniform, "gaussian": Gaussian}


def build_initial(kind: str, params: dict | None = None, a0: float = 1.0):
    try:
        cls = INIT_REGISTRY[kind]
    except KeyError:
        raise InvalidParams(
            f"unknown initial condition {kind!r}; registry: {sorted(INIT_REGISTRY)}"
        ) from None
    if not a0 > 0:
        raise InvalidParams(f"a0 must be positive, got {a0}")
    try:
        return cls(**dict(params or {}), a0=float(a0))
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for initial condition {kind!r}: {exc}") from None
