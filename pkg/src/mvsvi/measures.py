"""Uniform empirical measures on the real line.

On the line, optimal transport between two measures couples their quantile
functions, so every Wasserstein distance here is exact: sorted order
statistics for equal sizes, and integration of the piecewise-constant
quantile functions over their common refinement otherwise.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParams

__all__ = [
    "EmpiricalMeasure",
    "wasserstein",
    "moment",
    "exp_moment",
    "w1_to_dirac0",
    "sup_wasserstein",
    "write_atoms_csv",
]


class EmpiricalMeasure:
    """Equal-weight point cloud ``(1/N) sum_i delta_{x_i}``.

    Atoms are sorted (stably) once at construction and stored read-only.
    """

    __slots__ = ("_atoms",)

    def __init__(self, atoms: Iterable[float], *, assume_sorted: bool = False):
        a = np.array(atoms, dtype=float).ravel()
        if a.size == 0:
            raise InvalidParams("an empirical measure needs at least one atom")
        if not np.all(np.isfinite(a)):
            raise InvalidParams("atoms must be finite")
        if not assume_sorted:
            a = np.sort(a, kind="stable")
        a.flags.writeable = False
        self._atoms = a

    @classmethod
    def dirac(cls, x: float = 0.0) -> "EmpiricalMeasure":
        return cls([x])

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms

    @property
    def n(self) -> int:
        return self._atoms.size

    def __len__(self) -> int:
        return self._atoms.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmpiricalMeasure):
            return NotImplemented
        return np.array_equal(self._atoms, other._atoms)

    def __repr__(self) -> str:
        return f"EmpiricalMeasure(n={self.n}, mean={self.mean():.6g})"

    def shift(self, c: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self._atoms + c, assume_sorted=True)

    def mean(self) -> float:
        return float(np.mean(self._atoms))

    def var(self) -> float:
        return float(np.var(self._atoms))

    def quantile(self, q):
        return np.quantile(self._atoms, q)

    def moment(self, p: float) -> float:
        return moment(self, p)

    def expect(self, f) -> float:
        """Average of ``f`` over the atoms."""
        return float(np.mean(f(self._atoms)))


def wasserstein(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 1.0) -> float:
    """Exact ``W_p`` between two empirical measures, ``p >= 1``."""
    if not p >= 1:
        raise InvalidParams(f"Wasserstein order must be >= 1, got {p}")
    x, y = mu.atoms, nu.atoms
    n, m = x.size, y.size
    if n == m:
        cost = np.mean(np.abs(x - y) ** p)
    else:
        # quantile breakpoints in integer units of 1/(n m): multiples of m and of n
        g = math.gcd(n, m)
        step_x, step_y = m // g, n // g
        total = n * m // g
        cuts = np.union1d(np.arange(1, n + 1) * step_x, np.arange(1, m + 1) * step_y)
        widths = np.diff(cuts, prepend=0) / total
        ix = (cuts + step_x - 1) // step_x - 1
        iy = (cuts + step_y - 1) // step_y - 1
        cost = float(np.sum(widths * np.abs(x[ix] - y[iy]) ** p))
    return float(cost ** (1.0 / p))


def moment(mu: EmpiricalMeasure, p: float) -> float:
    """``(1/N) sum |x_i|^p``."""
    if not p > 0:
        raise InvalidParams(f"moment order must be positive, got {p}")
    return float(np.mean(np.abs(mu.atoms) ** p))


def exp_moment(mu: EmpiricalMeasure, a: float) -> float:
    """``(1/N) sum exp(a |x_i|)``; overflow yields ``inf`` rather than an error."""
    if not a > 0:
        raise InvalidParams(f"exponential moment rate must be positive, got {a}")
    with np.errstate(over="ignore"):
        val = float(np.mean(np.exp(a * np.abs(mu.atoms))))
    return val


def w1_to_dirac0(mu: EmpiricalMeasure) -> float:
    """``W_1(mu, delta_0)``, i.e. the first absolute moment."""
    return float(np.mean(np.abs(mu.atoms)))


def sup_wasserstein(
    flow_a: Sequence[EmpiricalMeasure], flow_b: Sequence[EmpiricalMeasure], p: float = 1.0
) -> float:
    """Supremum over a shared time grid of ``W_p`` between two measure flows."""
    if len(flow_a) != len(flow_b):
        raise InvalidParams("measure flows live on different grids")
    return max(wasserstein(a, b, p) for a, b in zip(flow_a, flow_b))


def write_atoms_csv(path, mu: EmpiricalMeasure, time_index: int, scenario_hash: str) -> Path:
    """Dump atoms one per line under a header naming time index and scenario."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"atoms[time_index={time_index};scenario={scenario_hash}]"])
        for v in mu.atoms:
            w.writerow([f"{v:.17g}"])
    return path
