"""Yamada-Watanabe smoothings of ``|x|``.

``V(x) = int_0^|x| int_0^y phi(z) dz dy`` where the weight ``phi`` lives on
``[eps/delta, eps]``, integrates to one and obeys ``phi(z) <= 2/(z ln delta)``.
The weight used here is a tent in logarithmic coordinates,

    u(z) = ln(z delta / eps) / ln(delta),      phi(z) = 2 tent(u) / (z ln delta),
    tent(u) = 1 - |2u - 1|,

for which ``int phi = int_0^1 2 tent(u) du = 1`` exactly. ``V`` and ``V'`` are
evaluated in closed form; no quadrature is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams

__all__ = ["YWFunction", "build_yw", "yw_apply_path"]

_MIN_LOG_DELTA = 1e-9


def _e0(x):
    """``int_0^1 exp(x s) ds``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 24):
        series = series + term
        term = term * xs / (k + 1)
    xl = np.where(small, 1.0, x)
    return np.where(small, series, np.expm1(xl) / xl)


def _e1(x):
    """``int_0^1 s exp(x s) ds``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(x)
    term = np.ones_like(x)  # x^k / k!
    for k in range(0, 24):
        series = series + term / (k + 2)
        term = term * xs / (k + 1)
    xl = np.where(small, 1.0, x)
    closed = (np.exp(xl) * (xl - 1.0) + 1.0) / (xl * xl)
    return np.where(small, series, closed)


@dataclass(frozen=True)
class YWFunction:
    """``V_{eps,delta}`` with its first two derivatives and its weight."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParams(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.delta > 1.0 + _MIN_LOG_DELTA or not math.isfinite(self.delta):
            raise InvalidParams(f"delta must exceed 1 (by more than 1e-9), got {self.delta}")

    @property
    def support(self) -> tuple[float, float]:
        return self.epsilon / self.delta, self.epsilon

    @property
    def _log_delta(self) -> float:
        return math.log(self.delta)

    def _u(self, r):
        a = self.epsilon / self.delta
        with np.errstate(divide="ignore"):
            u = np.log(np.maximum(r, 1e-300) / a) / self._log_delta
        return np.clip(u, 0.0, 1.0)

    def weight(self, z):
        """The density ``phi(|z|)``; zero off the support."""
        r = np.abs(np.asarray(z, dtype=float))
        a, e = self.support
        u = self._u(r)
        tent = 1.0 - np.abs(2.0 * u - 1.0)
        inside = (r >= a) & (r <= e)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(inside, 2.0 * tent / (np.where(inside, r, 1.0) * self._log_delta), 0.0)
        return w if np.ndim(z) else float(w)

    def _cdf(self, r):
        # int_0^r phi, as a function of u: 2u^2 on [0, 1/2], 4u - 2u^2 - 1 on [1/2, 1]
        u = self._u(r)
        g = np.where(u <= 0.5, 2.0 * u * u, 4.0 * u - 2.0 * u * u - 1.0)
        a, e = self.support
        return np.where(r <= a, 0.0, np.where(r >= e, 1.0, g))

    def _first_moment(self, r):
        # S(r) = int_a^min(r,eps) s phi(s) ds = 2a int_0^u tent(v) e^{Lv} dv
        a, _ = self.support
        L = self._log_delta
        u = self._u(r)
        # tent(v) = 2v on [0, 1/2]
        u1 = np.minimum(u, 0.5)
        part1 = 2.0 * u1 * u1 * _e1(L * u1)
        # tent(v) = 2 - 2v on [1/2, u]; with v = 1/2 + h tau it is 1 - 2 h tau
        h = np.maximum(u - 0.5, 0.0)
        part2 = h * math.exp(0.5 * L) * (_e0(L * h) - 2.0 * h * _e1(L * h))
        return 2.0 * a * (part1 + part2)

    def value(self, x):
        r = np.abs(np.asarray(x, dtype=float))
        v = r * self._cdf(r) - self._first_moment(r)
        return v if np.ndim(x) else float(v)

    def derivative(self, x):
        xa = np.asarray(x, dtype=float)
        d = np.sign(xa) * self._cdf(np.abs(xa))
        return d if np.ndim(x) else float(d)

    def second_derivative(self, x):
        return self.weight(x)

    __call__ = value


def build_yw(epsilon: float, delta: float) -> YWFunction:
    """Yamada-Watanabe function for ``0 < epsilon < 1`` and ``delta > 1``."""
    return YWFunction(float(epsilon), float(delta))


def yw_apply_path(f: YWFunction, diff_path) -> np.ndarray:
    """Apply ``V_{eps,delta}`` elementwise to a difference trajectory."""
    return np.asarray(f.value(np.asarray(diff_path, dtype=float)), dtype=float)
