"""Convex functions on the real line, their subdifferentials and resolvents.

Every function here is proper, convex and lower semicontinuous with a
closed-interval effective domain. Infinite interval endpoints and values
outside the domain are IEEE ``inf``; those compare and clip exactly, which is
all the extended-real arithmetic the package needs.

All evaluators accept scalars or numpy arrays and broadcast elementwise.
The resolvent ``J_lam(x)`` is the unique solution ``x'`` of
``x in x' + lam * dpsi(x')``. With ``lam = 1/n`` it is the map ``J_n`` of the
Moreau-Yosida approximation

    psi_n(x) = inf_y { n/2 |y - x|^2 + psi(y) } = n/2 (x - J_n x)^2 + psi(J_n x),
    grad psi_n(x) = n (x - J_n x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidParams, NonConvergence

__all__ = [
    "Interval",
    "ConvexFunction",
    "IndicatorInterval",
    "AbsValue",
    "Quadratic",
    "EvenPower",
    "MaxAffine",
    "Custom",
    "YosidaView",
    "subdifferential_interval",
    "resolvent",
    "moreau_envelope",
    "yosida_gradient",
    "project_domain",
    "PSI_REGISTRY",
    "build_psi",
]

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200


class Interval(NamedTuple):
    """Closed interval ``[lo, hi]`` with possibly infinite endpoints."""

    lo: float
    hi: float

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _out(a: np.ndarray, like):
    """Return a python float for scalar input, the array otherwise."""
    if np.ndim(like) == 0:
        return float(a)
    return a


class ConvexFunction:
    """Base class. Subclasses implement ``_value``, ``_bounds``, ``_resolvent``.

    ``_bounds(x)`` returns arrays ``(lo, hi)`` of the subdifferential
    endpoints, both NaN where the subdifferential is empty. ``exact_bounds``
    says whether those endpoints are exact rather than numerical estimates.
    """

    kind: str = "convex"
    exact_bounds: bool = True

    @property
    def domain(self) -> Interval:
        return Interval(-math.inf, math.inf)

    @property
    def interior_anchor(self) -> float:
        """A point of the interior of the domain (0 whenever 0 qualifies)."""
        lo, hi = self.domain
        if lo < 0.0 < hi:
            return 0.0
        if math.isinf(lo) and math.isinf(hi):
            return 0.0
        if math.isinf(hi):
            return lo + 1.0
        if math.isinf(lo):
            return hi - 1.0
        return 0.5 * (lo + hi)

    @property
    def zero_in_interior(self) -> bool:
        lo, hi = self.domain
        return lo < 0.0 < hi

    def value(self, x):
        xa = _arr(x)
        return _out(self._value(xa), x)

    def bounds(self, x):
        xa = _arr(x)
        lo, hi = self._bounds(xa)
        return _out(lo, x), _out(hi, x)

    def resolvent(self, lam: float, x):
        if not lam > 0:
            raise InvalidParams(f"resolvent parameter must be positive, got {lam}")
        xa = _arr(x)
        return _out(self._resolvent(float(lam), xa), x)

    def project(self, x):
        lo, hi = self.domain
        xa = _arr(x)
        return _out(np.clip(xa, lo, hi), x)

    # subclass hooks -------------------------------------------------------

    def _value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _bounds(self, x: np.ndarray):
        raise NotImplementedError

    def _resolvent(self, lam: float, x: np.ndarray) -> np.ndarray:
        return _bisect_resolvent(self, lam, x)

    def params(self) -> dict:
        return {}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class IndicatorInterval(ConvexFunction):
    """Indicator of ``[lo, hi]``: 0 inside, ``inf`` outside.

    The resolvent is the projection onto the interval for every ``lam``.
    """

    kind = "interval"

    def __init__(self, lo: float = -math.inf, hi: float = math.inf):
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise InvalidParams(f"need lo <= hi, got [{lo}, {hi}]")
        if lo == math.inf or hi == -math.inf:
            raise InvalidParams("interval must be nonempty")
        self.lo, self.hi = lo, hi

    @property
    def domain(self) -> Interval:
        return Interval(self.lo, self.hi)

    def _value(self, x):
        return np.where((x >= self.lo) & (x <= self.hi), 0.0, np.inf)

    def _bounds(self, x):
        inside = (x >= self.lo) & (x <= self.hi)
        lo = np.where(inside, 0.0, np.nan)
        hi = np.where(inside, 0.0, np.nan)
        lo = np.where(x == self.lo, -np.inf, lo)
        hi = np.where(x == self.hi, np.inf, hi)
        return lo, hi

    def _resolvent(self, lam, x):
        return np.clip(x, self.lo, self.hi)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


class AbsValue(ConvexFunction):
    """``scale * |x|``; its resolvent is soft thresholding."""

    kind = "abs"

    def __init__(self, scale: float = 1.0):
        if not scale > 0 or not math.isfinite(scale):
            raise InvalidParams(f"scale must be positive, got {scale}")
        self.scale = float(scale)

    def _value(self, x):
        return self.scale * np.abs(x)

    def _bounds(self, x):
        s = self.scale
        lo = np.where(x > 0, s, -s)
        hi = np.where(x < 0, -s, s)
        return lo.astype(float), hi.astype(float)

    def _resolvent(self, lam, x):
        t = lam * self.scale
        return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)

    def params(self):
        return {"scale": self.scale}


class Quadratic(ConvexFunction):
    """``curvature / 2 * x**2``."""

    kind = "quadratic"

    def __init__(self, curvature: float = 1.0):
        if not curvature >= 0 or not math.isfinite(curvature):
            raise InvalidParams(f"curvature must be nonnegative, got {curvature}")
        self.curvature = float(curvature)

    def _value(self, x):
        return 0.5 * self.curvature * x * x

    def _bounds(self, x):
        g = self.curvature * x
        return g, g.copy()

    def _resolvent(self, lam, x):
        return x / (1.0 + lam * self.curvature)

    def params(self):
        return {"curvature": self.curvature}


class EvenPower(ConvexFunction):
    """``scale * x**exponent`` for an even integer exponent >= 2.

    The resolvent solves ``y + c y^(p-1) = x`` with ``c = lam * scale * p``.
    The map is odd, increasing and convex on ``y >= 0``, so Newton's method
    started above the root decreases monotonically onto it. The start
    ``min(|x|, (|x|/c)^(1/(p-1)))`` is within a factor of two of the root.
    Bisection is kept as a fallback for entries that do not settle.
    """

    kind = "even_power"

    def __init__(self, exponent: int = 4, scale: float = 1.0):
        if int(exponent) != exponent or exponent < 2 or int(exponent) % 2:
            raise InvalidParams(f"exponent must be an even integer >= 2, got {exponent}")
        if not scale > 0 or not math.isfinite(scale):
            raise InvalidParams(f"scale must be positive, got {scale}")
        self.exponent = int(exponent)
        self.scale = float(scale)

    def _value(self, x):
        return self.scale * x**self.exponent

    def _bounds(self, x):
        g = self.scale * self.exponent * x ** (self.exponent - 1)
        return g, g.copy()

    def _resolvent(self, lam, x):
        p = self.exponent
        c = lam * self.scale * p
        r = np.abs(x)
        y = np.minimum(r, (r / c) ** (1.0 / (p - 1)))
        settled = np.zeros(r.shape, dtype=bool)
        for _ in range(100):
            yk = y ** (p - 2)
            g = y + c * yk * y - r
            step = g / (1.0 + c * (p - 1) * yk)
            y_new = y - step
            # monotone from above: once a step fails to decrease y we are at the root
            settled = ~(y_new < y) | (step <= 2.0 * np.spacing(y))
            y = np.where(y_new < y, y_new, y)
            if settled.all():
                break
        if not settled.all():
            bad = ~settled
            y[bad] = np.abs(_bisect_resolvent(self, lam, r[bad]))
        return np.copysign(y, x)

    def params(self):
        return {"exponent": self.exponent, "scale": self.scale}


class MaxAffine(ConvexFunction):
    """Pointwise maximum of affine pieces ``slope * x + intercept``.

    Only the upper envelope is kept; the resolvent is exact (piecewise
    linear in ``x``).
    """

    kind = "max_affine"

    def __init__(self, pieces: Sequence[Sequence[float]]):
        pieces = [(float(a), float(c)) for a, c in pieces]
        if not pieces:
            raise InvalidParams("MaxAffine needs at least one piece")
        for a, c in pieces:
            if not (math.isfinite(a) and math.isfinite(c)):
                raise InvalidParams("slopes and intercepts must be finite")
        self.pieces = tuple(pieces)
        slopes, intercepts = _upper_envelope(pieces)
        self._slopes = np.array(slopes)
        self._intercepts = np.array(intercepts)
        self._breaks = -np.diff(self._intercepts) / np.diff(self._slopes)

    def _value(self, x):
        # evaluate on the envelope piece that owns x
        j = np.searchsorted(self._breaks, x, side="left")
        return self._slopes[j] * x + self._intercepts[j]

    def _bounds(self, x):
        j = np.searchsorted(self._breaks, x, side="left")
        lo = self._slopes[j]
        on_break = np.zeros(np.shape(x), dtype=bool)
        if self._breaks.size:
            jj = np.minimum(j, self._breaks.size - 1)
            on_break = (j < self._breaks.size) & (self._breaks[jj] == x)
        hi = np.where(on_break, self._slopes[np.minimum(j + 1, self._slopes.size - 1)], lo)
        return lo.astype(float), hi.astype(float)

    def _resolvent(self, lam, x):
        s, b = self._slopes, self._breaks
        if b.size == 0:
            return x - lam * s[0]
        edges = np.empty(2 * b.size)
        edges[0::2] = b + lam * s[:-1]
        edges[1::2] = b + lam * s[1:]
        r = np.searchsorted(edges, x, side="right")
        piece = r // 2
        on_break = (r % 2) == 1
        lin = x - lam * s[piece]
        brk = b[np.minimum(piece, b.size - 1)]
        return np.where(on_break, brk, lin)

    def params(self):
        return {"pieces": [list(p) for p in self.pieces]}


def _upper_envelope(pieces):
    """Slopes/intercepts of the upper envelope, slopes strictly increasing."""
    best = {}
    for a, c in pieces:
        if a not in best or c > best[a]:
            best[a] = c
    lines = sorted(best.items())
    hull: list = []
    for a, c in lines:
        while len(hull) >= 2:
            (a1, c1), (a2, c2) = hull[-2], hull[-1]
            # middle line is never strictly on top
            if (c - c1) * (a2 - a1) >= (c2 - c1) * (a - a1):
                hull.pop()
            else:
                break
        hull.append((a, c))
    return [h[0] for h in hull], [h[1] for h in hull]


class Custom(ConvexFunction):
    """User-supplied convex function.

    Parameters
    ----------
    value:
        Vectorised evaluator; it is only called on points of ``domain``.
    subgradient:
        Optional vectorised evaluator returning ``(lo, hi)`` arrays of the
        subdifferential endpoints on the domain. When omitted, endpoints are
        one-sided difference quotients; a boundary point whose inward
        quotient diverges is reported as having an empty subdifferential.
    domain:
        Closed effective domain ``(lo, hi)``.
    """

    kind = "custom"
    diff_step = 1e-7
    divergence_threshold = 1e3

    def __init__(
        self,
        value: Callable,
        subgradient: Optional[Callable] = None,
        domain: Sequence[float] = (-math.inf, math.inf),
        name: str = "custom",
    ):
        lo, hi = float(domain[0]), float(domain[1])
        if lo > hi:
            raise InvalidParams(f"empty domain [{lo}, {hi}]")
        self._f = value
        self._g = subgradient
        self.exact_bounds = subgradient is not None
        self._domain = Interval(lo, hi)
        self.name = name

    @property
    def domain(self) -> Interval:
        return self._domain

    def _value(self, x):
        lo, hi = self._domain
        inside = (x >= lo) & (x <= hi)
        out = np.full(x.shape, np.inf)
        if np.any(inside):
            out[inside] = np.asarray(self._f(x[inside]), dtype=float)
        return out

    def _bounds(self, x):
        lo_d, hi_d = self._domain
        inside = (x >= lo_d) & (x <= hi_d)
        glo = np.full(x.shape, np.nan)
        ghi = np.full(x.shape, np.nan)
        if not np.any(inside):
            return glo, ghi
        xi = x[inside]
        if self._g is not None:
            a, b = self._g(xi)
            a = np.broadcast_to(np.asarray(a, dtype=float), xi.shape)
            b = np.broadcast_to(np.asarray(b, dtype=float), xi.shape)
            glo[inside], ghi[inside] = a, b
            return glo, ghi
        glo[inside], ghi[inside] = self._numeric_bounds(xi)
        return glo, ghi

    def _numeric_bounds(self, x):
        lo_d, hi_d = self._domain
        h = self.diff_step * np.maximum(1.0, np.abs(x))
        f0 = np.asarray(self._f(x), dtype=float)
        left_ok = x - h >= lo_d
        right_ok = x + h <= hi_d
        with np.errstate(invalid="ignore"):
            fl = np.asarray(self._f(np.where(left_ok, x - h, x)), dtype=float)
            fr = np.asarray(self._f(np.where(right_ok, x + h, x)), dtype=float)
            ql = np.where(left_ok, (f0 - fl) / h, -np.inf)
            qr = np.where(right_ok, (fr - f0) / h, np.inf)
            # inward quotient blowing up at a boundary point: no subgradient
            h2 = h * 1e-2
            fl2 = np.asarray(self._f(np.where(left_ok, x - h2, x)), dtype=float)
            fr2 = np.asarray(self._f(np.where(right_ok, x + h2, x)), dtype=float)
            ql2 = (f0 - fl2) / h2
            qr2 = (fr2 - f0) / h2
        thr = self.divergence_threshold
        diverge_hi = (~right_ok) & left_ok & (ql2 > thr) & (ql2 > 3.0 * ql)
        diverge_lo = (~left_ok) & right_ok & (qr2 < -thr) & (qr2 < 3.0 * qr)
        empty = diverge_hi | diverge_lo
        ql = np.where(empty, np.nan, ql)
        qr = np.where(empty, np.nan, qr)
        # interior smooth points: collapse the O(h) gap to a single slope
        smooth = left_ok & right_ok & (np.abs(qr - ql) <= 1e-4 * (1.0 + np.abs(ql)))
        mid = 0.5 * (ql + qr)
        return np.where(smooth, mid, ql), np.where(smooth, mid, qr)

    def params(self):
        return {"name": self.name, "domain": list(self._domain)}


def _bisect_resolvent(psi: ConvexFunction, lam: float, x: np.ndarray) -> np.ndarray:
    """Solve ``x in y + lam * dpsi(y)`` for ``y`` elementwise by bisection."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = np.atleast_1d(x).ravel()
    dlo, dhi = psi.domain

    def side(m):
        # +1: root lies left of m, -1: root lies right of m, 0: m is the root
        glo, ghi = psi._bounds(m)
        with np.errstate(invalid="ignore"):
            left = m + lam * glo > x
            right = m + lam * ghi < x
        s = np.where(left, 1, np.where(right, -1, 0))
        empty = np.isnan(glo)
        s = np.where(empty & (m >= dhi), 1, s)
        s = np.where(empty & (m <= dlo), -1, s)
        s = np.where(empty & (m > dlo) & (m < dhi), 1, s)
        return s

    p = np.clip(x, dlo, dhi)
    glo, ghi = psi._bounds(p)
    glo = np.where(np.isfinite(glo), glo, 0.0)
    ghi = np.where(np.isfinite(ghi), ghi, 0.0)
    a = np.clip(x - lam * np.abs(ghi) - 1.0, dlo, dhi)
    b = np.clip(x + lam * np.abs(glo) + 1.0, dlo, dhi)

    width = np.maximum(b - a, 1.0)
    it = 0
    while True:
        sa, sb = side(a), side(b)
        bad_a, bad_b = sa > 0, sb < 0
        if not (bad_a.any() or bad_b.any()):
            break
        it += 1
        if it > BISECTION_MAX_ITER:
            raise NonConvergence("resolvent bracket could not be established")
        width = width * 2.0
        a = np.where(bad_a, np.clip(a - width, dlo, dhi), a)
        b = np.where(bad_b, np.clip(b + width, dlo, dhi), b)

    done = (sa == 0) | (sb == 0)
    root = np.where(sa == 0, a, np.where(sb == 0, b, 0.5 * (a + b)))
    for _ in range(BISECTION_MAX_ITER):
        tol = np.maximum(BISECTION_TOL, 4.0 * np.spacing(np.maximum(np.abs(a), np.abs(b))))
        active = ~done & (b - a > tol)
        if not active.any():
            break
        m = 0.5 * (a + b)
        s = side(m)
        hit = active & (s == 0)
        root = np.where(hit, m, root)
        done = done | hit
        a = np.where(active & (s < 0), m, a)
        b = np.where(active & (s > 0), m, b)
    else:
        raise NonConvergence(f"resolvent bisection exceeded {BISECTION_MAX_ITER} iterations")
    root = np.where(done, root, 0.5 * (a + b))
    return root.reshape(shape)


@dataclass(frozen=True)
class YosidaView:
    """Moreau-Yosida approximation of ``base`` with penalisation ``n``."""

    base: ConvexFunction
    n: float

    def __post_init__(self):
        if not self.n > 0 or not math.isfinite(self.n):
            raise InvalidParams(f"penalisation parameter must be positive, got {self.n}")

    def resolvent(self, x):
        return self.base.resolvent(1.0 / self.n, x)

    def envelope(self, x):
        xa = _arr(x)
        j = self.base._resolvent(1.0 / self.n, xa)
        return _out(0.5 * self.n * (xa - j) ** 2 + self.base._value(j), x)

    def gradient(self, x):
        """``n (x - J_n x)``, snapped into ``dpsi(J_n x)``.

        The difference quotient cancels badly for large ``n``. The gradient
        always lies in the subdifferential at ``J_n x``, so where that is a
        single known slope the slope is returned, and elsewhere the quotient
        is clipped into it.
        """
        return _out(self._resolve(_arr(x))[1], x)

    def resolve(self, x):
        """``(J_n x, gradient(x))`` from a single resolvent evaluation."""
        j, g = self._resolve(_arr(x))
        return _out(j, x), _out(g, x)

    def _resolve(self, xa):
        j = self.base._resolvent(1.0 / self.n, xa)
        g = self.n * (xa - j)
        if self.base.exact_bounds:
            lo, hi = self.base._bounds(j)
            known = ~np.isnan(lo)
            with np.errstate(invalid="ignore"):
                snapped = np.where(lo == hi, lo, np.clip(g, lo, hi))
            g = np.where(known, snapped, g)
        return j, g


def subdifferential_interval(psi: ConvexFunction, x: float) -> Optional[Interval]:
    """The subdifferential of ``psi`` at a point; ``None`` when it is empty."""
    lo, hi = psi.bounds(float(x))
    if math.isnan(lo):
        return None
    return Interval(lo, hi)


def resolvent(psi: ConvexFunction, lam: float, x):
    """Proximal map: argmin over y of ``(y - x)**2 / (2 lam) + psi(y)``."""
    return psi.resolvent(lam, x)


def moreau_envelope(view: YosidaView, x):
    return view.envelope(x)


def yosida_gradient(view: YosidaView, x):
    return view.gradient(x)


def project_domain(psi: ConvexFunction, x):
    """Euclidean projection onto the closed domain of ``psi``."""
    return psi.project(x)


def _zero(**_):
    return IndicatorInterval(-math.inf, math.inf)


PSI_REGISTRY: dict = {
    "none": _zero,
    "interval": IndicatorInterval,
    "abs": AbsValue,
    "quadratic": Quadratic,
    "even_power": EvenPower,
    "max_affine": MaxAffine,
}


def build_psi(kind: str, params: Optional[dict] = None) -> ConvexFunction:
    """Construct a catalog function from its registry name and parameters."""
    try:
        factory = PSI_REGISTRY[kind]
    except KeyError:
        raise InvalidParams(
            f"unknown psi kind {kind!r}; registry: {sorted(PSI_REGISTRY)}"
        ) from None
    params = dict(params or {})
    for key in ("lo", "hi"):
        if isinstance(params.get(key), str):
            params[key] = float(params[key])
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for psi {kind!r}: {exc}") from None
