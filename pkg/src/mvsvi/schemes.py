"""Time stepping for the frozen-measure equation ``dX in b dt + sigma dB - dpsi(X) dt``.

Two one-step rules are provided.

*Penalized*: the subdifferential is replaced by the Moreau-Yosida gradient,
``x' = x + b~ dt + sigma dB - grad psi_n(x) dt``, where ``b~`` is the tamed
drift ``b / (1 + dt |b|)`` when taming is on. Only ``b`` is tamed; the
penalty is Lipschitz with constant ``n`` and is kept stable by requiring
``n dt <= 2``.

*Proximal*: an explicit predictor ``y = x + b~ dt + sigma dB`` followed by
the resolvent ``x' = J_dt(y)``. For an interval indicator this is the
projection (reflection) scheme.

In both cases the increment ``dphi`` of the constraint process is chosen so
that ``X_k = X_0 + sum b~ dt + sum sigma dB - phi_k`` telescopes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .coefficients import CoefficientPair, eval_diffusion, eval_drift
from .convex import ConvexFunction, YosidaView
from .errors import InvalidParams
from .measures import EmpiricalMeasure
from .paths import BrownianDriver, IncrementGrid, NoiseKey, StreamAudit

__all__ = [
    "PENALIZED",
    "PROXIMAL",
    "SchemeConfig",
    "PathRecord",
    "PathBatch",
    "step_penalized",
    "step_proximal",
    "integrate",
    "simulate_frozen",
    "simulate_frozen_batch",
    "write_path_csv",
]

PENALIZED = "penalized"
PROXIMAL = "proximal"
CHUNK = 16384
_DIRAC0 = EmpiricalMeasure.dirac(0.0)


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme selection. ``taming`` defaults to on for penalized, off for proximal."""

    kind: str = PROXIMAL
    dt: float = 1e-2
    n: Optional[float] = None
    taming: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in (PENALIZED, PROXIMAL):
            raise InvalidParams(f"scheme kind must be 'penalized' or 'proximal', got {self.kind!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidParams(f"dt must be positive, got {self.dt}")
        if self.kind == PENALIZED:
            if self.n is None or not self.n > 0:
                raise InvalidParams(f"penalized scheme needs n > 0, got {self.n}")
            if self.n * self.dt > 2.0:
                raise InvalidParams(
                    f"penalized scheme needs n*dt <= 2, got n={self.n}, dt={self.dt}"
                )
        if self.taming is None:
            object.__setattr__(self, "taming", self.kind == PENALIZED)

    def with_dt(self, dt: float) -> "SchemeConfig":
        return SchemeConfig(self.kind, dt, self.n, self.taming)


def _drift_term(pair, t, x, mu, cfg):
    b = eval_drift(pair, t, x, mu)
    if cfg.taming:
        b = b / (1.0 + cfg.dt * np.abs(b))
    return b * cfg.dt


def step_penalized(x, t: float, mu: EmpiricalMeasure, pair: CoefficientPair,
                   view: YosidaView, cfg: SchemeConfig, dB):
    """One penalized tamed Euler step; returns ``(x_next, dphi)``."""
    x_next, dphi, _, _ = _penalized(x, t, mu, pair, view, cfg, dB)
    return x_next, dphi


def step_proximal(x, t: float, mu: EmpiricalMeasure, pair: CoefficientPair,
                  psi: ConvexFunction, cfg: SchemeConfig, dB):
    """One proximal Euler step; returns ``(x_next, dphi)``."""
    x_next, dphi, _, _ = _proximal(x, t, mu, pair, psi, cfg, dB)
    return x_next, dphi


def _penalized(x, t, mu, pair, view, cfg, dB):
    bdt = _drift_term(pair, t, x, mu, cfg)
    sdB = eval_diffusion(pair, t, x, mu) * dB
    dphi = view.gradient(x) * cfg.dt
    return x + bdt + sdB - dphi, dphi, bdt, sdB


def _proximal(x, t, mu, pair, psi, cfg, dB):
    bdt = _drift_term(pair, t, x, mu, cfg)
    sdB = eval_diffusion(pair, t, x, mu) * dB
    y = x + bdt + sdB
    x_next = psi.resolvent(cfg.dt, y)
    return x_next, y - x_next, bdt, sdB


@dataclass
class PathRecord:
    """One trajectory with its constraint process and running variation."""

    times: np.ndarray
    X: np.ndarray
    phi: np.ndarray
    var_phi: np.ndarray
    drift_integral: np.ndarray
    noise_integral: np.ndarray
    key: Optional[NoiseKey] = None

    def residual(self) -> float:
        """Largest deviation from ``X = X0 + int b + int sigma dB - phi``."""
        rhs = self.X[0] + self.drift_integral + self.noise_integral - self.phi
        return float(np.max(np.abs(self.X - rhs)))


@dataclass
class PathBatch:
    """Trajectories of many particles on one grid, stored time-major.

    With ``keep_paths=False`` only the initial and terminal rows are kept.
    """

    times: np.ndarray
    X: np.ndarray
    phi: np.ndarray
    var_phi: np.ndarray
    drift_integral: np.ndarray
    noise_integral: np.ndarray
    particle_ids: np.ndarray
    seed: int
    tag: int

    @property
    def terminal(self) -> np.ndarray:
        return self.X[-1]

    @property
    def full(self) -> bool:
        return self.X.shape[0] == self.times.size

    def record(self, i: int) -> PathRecord:
        """Path of the ``i``-th particle of the batch (by position)."""
        times = self.times if self.full else self.times[[0, -1]]
        key = NoiseKey(self.seed, int(self.particle_ids[i]), self.tag)
        return PathRecord(times, self.X[:, i].copy(), self.phi[:, i].copy(),
                          self.var_phi[:, i].copy(), self.drift_integral[:, i].copy(),
                          self.noise_integral[:, i].copy(), key)

    def residual(self) -> float:
        rhs = self.X[0] + self.drift_integral + self.noise_integral - self.phi
        return float(np.max(np.abs(self.X - rhs)))


MeasureFlow = Union[None, Sequence[EmpiricalMeasure], Callable[[int], EmpiricalMeasure]]


def _flow_at(flow: MeasureFlow, k: int) -> EmpiricalMeasure:
    if flow is None:
        return _DIRAC0
    if callable(flow):
        return flow(k)
    return flow[k]


def integrate(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig, x0,
              driver: BrownianDriver, measure_flow: MeasureFlow = None, *,
              interacting: bool = False, keep_paths: bool = True, threads: int = 1,
              on_measure: Optional[Callable[[int, EmpiricalMeasure], None]] = None
              ) -> PathBatch:
    """Advance every particle of ``driver`` over its grid.

    The measure used at step ``k`` is ``measure_flow[k]`` for a frozen flow,
    or, with ``interacting=True``, the empirical measure of the current states
    (pre-step). ``on_measure`` receives each measure used, plus the terminal
    empirical measure when interacting. Particles are processed in fixed
    chunks; ``threads`` only changes how chunks are scheduled, never the
    result.
    """
    if not math.isclose(driver.dt, cfg.dt, rel_tol=1e-12):
        raise InvalidParams(f"scheme dt={cfg.dt} differs from grid dt={driver.dt}")
    ids = driver.particle_ids
    P = ids.size
    x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (P,)))
    K = driver.steps
    times = driver.times()
    rows = K + 1 if keep_paths else 2
    X = np.empty((rows, P))
    phi = np.zeros((rows, P))
    var = np.zeros((rows, P))
    dint = np.zeros((rows, P))
    nint = np.zeros((rows, P))
    X[0] = x
    cur_phi, cur_var = np.zeros(P), np.zeros(P)
    cur_d, cur_n = np.zeros(P), np.zeros(P)
    view = YosidaView(psi, cfg.n) if cfg.kind == PENALIZED else None
    chunks = [slice(i, min(i + CHUNK, P)) for i in range(0, P, CHUNK)]
    x_next = np.empty(P)

    def work(k, t, mu, sl):
        dB = driver(k, sl)
        if view is not None:
            xn, dphi, bdt, sdB = _penalized(x[sl], t, mu, pair, view, cfg, dB)
        else:
            xn, dphi, bdt, sdB = _proximal(x[sl], t, mu, pair, psi, cfg, dB)
        x_next[sl] = xn
        cur_phi[sl] += dphi
        cur_var[sl] += np.abs(dphi)
        cur_d[sl] += bdt
        cur_n[sl] += sdB

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 and len(chunks) > 1 else None
    try:
        for k in range(K):
            t = float(times[k])
            mu = EmpiricalMeasure(x) if interacting else _flow_at(measure_flow, k)
            if on_measure is not None:
                on_measure(k, mu)
            if pool is None:
                for sl in chunks:
                    work(k, t, mu, sl)
            else:
                list(pool.map(lambda sl: work(k, t, mu, sl), chunks))
            x, x_next = x_next, x
            r = k + 1 if keep_paths else (1 if k == K - 1 else None)
            if r is not None:
                X[r], phi[r], var[r] = x, cur_phi, cur_var
                dint[r], nint[r] = cur_d, cur_n
    finally:
        if pool is not None:
            pool.shutdown()
    if interacting and on_measure is not None:
        on_measure(K, EmpiricalMeasure(x))
    return PathBatch(times, X, phi, var, dint, nint, ids.copy(), driver.seed, int(driver.tag))


def simulate_frozen_batch(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig,
                          x0, measure_flow: MeasureFlow, seed: int, tag: int, particle_ids,
                          T: float, *, grid: Optional[IncrementGrid] = None, level: int = 0,
                          keep_paths: bool = True, threads: int = 1,
                          audit: Optional[StreamAudit] = None, label: str = "") -> PathBatch:
    """Many independent copies of the frozen-flow equation, one per particle id."""
    grid = grid or IncrementGrid(T, cfg.dt)
    driver = BrownianDriver(grid, seed, tag, particle_ids, level, audit, label)
    return integrate(pair, psi, cfg, x0, driver, measure_flow,
                     keep_paths=keep_paths, threads=threads)


def simulate_frozen(pair: CoefficientPair, psi: ConvexFunction, cfg: SchemeConfig, x0: float,
                    measure_flow: MeasureFlow, key: NoiseKey, T: float, *,
                    grid: Optional[IncrementGrid] = None, level: int = 0) -> PathRecord:
    """Single trajectory driven by the Brownian stream of ``key``."""
    batch = simulate_frozen_batch(pair, psi, cfg, x0, measure_flow, key.seed, key.stream_tag,
                                  [key.particle_id], T, grid=grid, level=level)
    return batch.record(0)


def write_path_csv(path, rec: PathRecord) -> Path:
    """Columns ``t, X, phi, var_phi`` at 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "X", "phi", "var_phi"])
        for row in zip(rec.times, rec.X, rec.phi, rec.var_phi):
            w.writerow([f"{v:.17g}" for v in row])
    return path
