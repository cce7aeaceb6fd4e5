"""Interacting particle systems and Picard iteration in distribution.

Both constructions approximate the law flow ``mu_t`` of the solution by
empirical measures on the time grid. The particle system freezes, at every
step, the empirical measure of the current states. Picard iteration freezes
a whole flow, solves the frozen equation for ``M`` coupled copies, and
replaces the flow by the copies' empirical flow; copies reuse the same noise
across iterations so that consecutive iterates can be compared pathwise.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .coefficients import CoefficientPair
from .convex import ConvexFunction
from .errors import InvalidParams, NoConvergenceWarning
from .measures import EmpiricalMeasure, exp_moment, wasserstein
from .paths import BrownianDriver, IncrementGrid, NoiseKey, StreamAudit, StreamTag, uniforms
from .schemes import PathBatch, SchemeConfig, integrate

__all__ = [
    "ParticleEnsemble",
    "PicardState",
    "PicardResult",
    "initial_states",
    "simulate_particle_system",
    "picard_solve",
    "reference_limit_flow",
    "write_ensemble_csv",
    "write_flow_summary_csv",
]


def initial_states(init_sampler, seed: int, tag: int, particle_ids) -> np.ndarray:
    """i.i.d. initial states, each a function of its particle stream only."""
    return np.asarray(init_sampler.sample(uniforms(seed, tag, particle_ids)), dtype=float)


@dataclass
class ParticleEnsemble:
    batch: PathBatch
    measure_flow: list

    @property
    def N(self) -> int:
        return self.batch.particle_ids.size

    @property
    def times(self) -> np.ndarray:
        return self.batch.times

    def record(self, i: int):
        return self.batch.record(i)

    @property
    def records(self) -> list:
        return [self.batch.record(i) for i in range(self.N)]

    def sup_exp_moment(self, a: float) -> float:
        """``max_t (1/N) sum exp(a |X_t^i|)``; ``inf`` signals overflow."""
        return max(exp_moment(mu, a) for mu in self.measure_flow)


def simulate_particle_system(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig,
                             init_sampler, N: int, key_base: NoiseKey, T: float, *,
                             grid: Optional[IncrementGrid] = None, level: int = 0,
                             particle_ids=None, threads: int = 1,
                             audit: Optional[StreamAudit] = None, label: str = "",
                             keep_paths: bool = True) -> ParticleEnsemble:
    """``N`` particles coupled through their pre-step empirical measure.

    Particle ``i`` uses the stream ``(key_base.seed, key_base.stream_tag,
    key_base.particle_id + i)`` unless explicit ``particle_ids`` are given.
    """
    if N < 1:
        raise InvalidParams(f"need N >= 1, got {N}")
    if particle_ids is None:
        particle_ids = key_base.particle_id + np.arange(N)
    particle_ids = np.asarray(particle_ids, dtype=np.int64)
    if particle_ids.size != N:
        raise InvalidParams("particle_ids must have N entries")
    grid = grid or IncrementGrid(T, cfg.dt)
    driver = BrownianDriver(grid, key_base.seed, key_base.stream_tag, particle_ids,
                            level, audit, label)
    x0 = initial_states(init_sampler, key_base.seed, key_base.stream_tag, particle_ids)
    flow: list = []
    batch = integrate(pair, psi, cfg, x0, driver, interacting=True, keep_paths=keep_paths,
                      threads=threads, on_measure=lambda k, mu: flow.append(mu))
    return ParticleEnsemble(batch, flow)


def reference_limit_flow(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig,
                         init_sampler, M_ref: int, key_base: NoiseKey, T: float, *,
                         grid: Optional[IncrementGrid] = None, threads: int = 1) -> list:
    """Law flow of the limit equation, approximated by ``M_ref`` particles.

    The run always uses the limit-process stream tag, so it is independent of
    any particle system driven by the particle-system tag.
    """
    key = NoiseKey(key_base.seed, key_base.particle_id, StreamTag.LIMIT_PROCESS)
    ens = simulate_particle_system(pair, psi, cfg, init_sampler, M_ref, key, T, grid=grid,
                                   threads=threads, keep_paths=False)
    return ens.measure_flow


@dataclass
class PicardState:
    iteration: int
    measure_flow: list
    A: float
    W1_step: float


@dataclass
class PicardResult:
    measure_flow: list
    states: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.states)


def picard_solve(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig, init_sampler,
                 M: int, K_max: int, tol: float, key_base: NoiseKey, T: float, *,
                 grid: Optional[IncrementGrid] = None, threads: int = 1) -> PicardResult:
    """Fixed-point iteration on measure flows.

    Iterate ``k`` freezes the flow of iterate ``k - 1`` (iterate 0 is the
    initial law at every time), simulates ``M`` copies with noise shared
    across iterations, and records ``A`` (largest time-wise mean pathwise
    change) and ``W1_step`` (largest time-wise ``W_1`` between consecutive
    flows). Stops once ``W1_step < tol``; otherwise warns after ``K_max``
    iterations and returns the last flow with ``converged=False``.
    """
    if M < 2:
        raise InvalidParams(f"need M >= 2, got {M}")
    if K_max < 1:
        raise InvalidParams(f"need K_max >= 1, got {K_max}")
    grid = grid or IncrementGrid(T, cfg.dt)
    tag = StreamTag.PICARD_SHARED
    ids = key_base.particle_id + np.arange(M)
    x0 = initial_states(init_sampler, key_base.seed, tag, ids)
    K = grid.steps
    mu0 = EmpiricalMeasure(x0)
    flow = [mu0] * (K + 1)
    prev_paths = np.broadcast_to(x0, (K + 1, M))
    result = PicardResult(flow)
    for it in range(1, K_max + 1):
        driver = BrownianDriver(grid, key_base.seed, tag, ids)
        batch = integrate(pair, psi, cfg, x0, driver, flow, threads=threads)
        new_flow = [EmpiricalMeasure(row) for row in batch.X]
        A = float(np.max(np.mean(np.abs(batch.X - prev_paths), axis=1)))
        W1 = max(wasserstein(a, b) for a, b in zip(new_flow, flow))
        result.states.append(PicardState(it, new_flow, A, W1))
        result.measure_flow = new_flow
        flow, prev_paths = new_flow, batch.X
        if W1 < tol:
            result.converged = True
            break
    if not result.converged:
        warnings.warn(
            f"Picard iteration stopped after {K_max} iterations with "
            f"W1_step={result.states[-1].W1_step:.3g} >= tol={tol:g}",
            NoConvergenceWarning, stacklevel=2,
        )
    return result


def write_ensemble_csv(path, ens: ParticleEnsemble, limit: int = 0) -> Path:
    """Wide table ``t, X_1, ..., X_N`` at 17 significant digits.

    ``limit > 0`` keeps only the first ``limit`` particles.
    """
    path = Path(path)
    b = ens.batch
    times = b.times if b.full else b.times[[0, -1]]
    cols = ens.N if limit <= 0 else min(limit, ens.N)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"X_{i + 1}" for i in range(cols)])
        for t, row in zip(times, b.X[:, :cols]):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
    return path


def write_flow_summary_csv(path, times, flow) -> Path:
    """Per-time ``mean, var, q05, q50, q95`` of a measure flow."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "var", "q05", "q50", "q95"])
        for t, mu in zip(times, flow):
            q = mu.quantile([0.05, 0.5, 0.95])
            w.writerow([f"{v:.17g}" for v in (t, mu.mean(), mu.var(), *q)])
    return path
