"""Propagation-of-chaos experiments.

For each particle count ``N`` the interacting system is simulated, and for
the first few particle ids the limit process is simulated with the *same*
Brownian stream and initial state but driven by a frozen reference flow
(a large independent particle system). The pathwise gap between the two
measures how far particle ``i`` is from its limit. Separately, ``N``
states are resampled from the reference terminal law and their squared
``W_2`` distance to it estimates the empirical-measure rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .coefficients import CoefficientPair
from .convex import ConvexFunction
from .errors import ConfigError, DegenerateFit, InvalidParams
from .measures import EmpiricalMeasure, wasserstein
from .mckean_vlasov import initial_states, reference_limit_flow, simulate_particle_system
from .paths import IncrementGrid, NoiseKey, StreamAudit, StreamTag, derive_seed, uniforms
from .schemes import SchemeConfig, simulate_frozen_batch

__all__ = ["PocRow", "PocTable", "RateFit", "run_poc", "fit_rate", "fit_loglog"]

_RESAMPLE_COUNTER = 1


@dataclass(frozen=True)
class PocRow:
    N: int
    trials: int
    mean_sup_error: float
    std_error: float
    w2sq_mean: float


@dataclass
class PocTable:
    rows: list
    floor_estimate: float = float("nan")
    coupling_verified: Optional[bool] = None
    probe_particles: int = 0
    M_ref: int = 0

    def __post_init__(self):
        Ns = [r.N for r in self.rows]
        if any(b <= a for a, b in zip(Ns, Ns[1:])):
            raise InvalidParams("PocTable rows must have strictly increasing N")
        if any(r.trials < 1 for r in self.rows):
            raise InvalidParams("trials must be >= 1")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def N(self) -> np.ndarray:
        return self.column("N")

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "trials", "mean_sup_error", "std_error", "w2sq_mean",
                        "floor_estimate"])
            for r in self.rows:
                w.writerow([r.N, r.trials] + [f"{v:.17g}" for v in (
                    r.mean_sup_error, r.std_error, r.w2sq_mean, self.floor_estimate)])
        return path


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float

    def summary(self, column: str = "error", variable: str = "N") -> str:
        return (f"{column} ~ exp({self.intercept:.6g}) * {variable}^({self.slope:.6g}), "
                f"r^2={self.r_squared:.6g}")


def fit_loglog(xs, ys) -> RateFit:
    """Least-squares line through ``(ln x, ln y)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or xs.size != ys.size:
        raise InvalidParams("need at least two (x, y) pairs of equal length")
    if np.any(ys <= 0) or np.any(xs <= 0):
        raise DegenerateFit("log-log fit needs strictly positive values")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(ly) == 0.0:
        # constant data: linregress reports r = 0 with a warning; the fit is exact
        return RateFit(0.0, float(ly[0]), 1.0)
    res = linregress(lx, ly)
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2))


def fit_rate(table: PocTable, column: str = "w2sq_mean") -> RateFit:
    """Slope of ``ln(column)`` against ``ln N``; needs at least three rows."""
    if len(table.rows) < 3:
        raise InvalidParams("fit_rate needs at least three rows")
    return fit_loglog(table.N, table.column(column))


def run_poc(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig, init_sampler,
            N_list: Sequence[int], M_ref: int, trials: int, key_base: NoiseKey, T: float, *,
            probe_particles: int = 16, threads: int = 1, audit: bool = True,
            floor: bool = True) -> PocTable:
    """Propagation-of-chaos table over ``N_list``.

    Trial ``j`` uses seed ``derive_seed(key_base.seed, j)``; the reference
    flow is computed once from ``key_base`` on the limit-process tag. The
    floor estimate is ``sup_t W_1`` between that flow and a second reference
    flow from an independent seed.
    """
    N_list = [int(n) for n in N_list]
    if not N_list or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ConfigError("N_list must be non-empty and strictly increasing")
    if M_ref < max(N_list):
        raise ConfigError(f"M_ref={M_ref} must be >= max(N_list)={max(N_list)}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if probe_particles < 1:
        raise ConfigError("probe_particles must be >= 1")
    grid = IncrementGrid(T, cfg.dt)
    ref = reference_limit_flow(pair, psi, cfg, init_sampler, M_ref, key_base, T,
                               grid=grid, threads=threads)
    ref_T = ref[-1]
    floor_est = float("nan")
    if floor:
        other = NoiseKey(derive_seed(key_base.seed, 1 << 32), key_base.particle_id)
        ref2 = reference_limit_flow(pair, psi, cfg, init_sampler, M_ref, other, T,
                                    grid=grid, threads=threads)
        floor_est = max(wasserstein(a, b) for a, b in zip(ref, ref2))

    base_id = key_base.particle_id
    tracker = StreamAudit(watch=base_id + np.arange(probe_particles)) if audit else None
    rows, coupled = [], True
    for N in N_list:
        probes = min(probe_particles, N)
        probe_ids = base_id + np.arange(probes)
        trial_means, w2 = [], []
        for j in range(trials):
            seed = derive_seed(key_base.seed, j)
            key = NoiseKey(seed, base_id, StreamTag.PARTICLE_SYSTEM)
            la, lb = f"particles/N={N}/trial={j}", f"limit/N={N}/trial={j}"
            ens = simulate_particle_system(pair, psi, cfg, init_sampler, N, key, T, grid=grid,
                                           threads=threads, audit=tracker, label=la)
            x0 = initial_states(init_sampler, seed, StreamTag.PARTICLE_SYSTEM, probe_ids)
            lim = simulate_frozen_batch(pair, psi, cfg, x0, ref, seed,
                                        StreamTag.PARTICLE_SYSTEM, probe_ids, T, grid=grid,
                                        audit=tracker, label=lb)
            gap = np.max(np.abs(ens.batch.X[:, :probes] - lim.X), axis=0)
            trial_means.append(float(np.mean(gap)))
            if tracker is not None:
                coupled &= tracker.matches(la, lb, probe_ids)
            u = uniforms(seed, StreamTag.LIMIT_PROCESS, base_id + np.arange(N),
                         _RESAMPLE_COUNTER)
            idx = np.minimum((u * ref_T.n).astype(np.int64), ref_T.n - 1)
            sample = EmpiricalMeasure(ref_T.atoms[idx])
            w2.append(wasserstein(sample, ref_T, 2.0) ** 2)
        tm = np.array(trial_means)
        se = float(np.std(tm, ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
        rows.append(PocRow(N, trials, float(np.mean(tm)), se, float(np.mean(w2))))
    return PocTable(rows, floor_est, coupled if audit else None, probe_particles, M_ref)
