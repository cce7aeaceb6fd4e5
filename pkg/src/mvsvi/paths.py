"""Counter-based Brownian increments.

Every Gaussian is a pure function of ``(seed, stream tag, particle id,
finest level, step)``: the tuple is hashed by a keyed 64-bit mixing
bijection (the splitmix64 finaliser, applied in two keyed rounds), the top
53 bits become a uniform in (0, 1), and the inverse normal CDF turns that
into a standard normal. Nothing is stored and nothing depends on the order
of queries, so particles can be regenerated, coupled and refined at will.

Refinement is fine-to-coarse: the finest level of an :class:`IncrementGrid`
is drawn directly and every coarser increment is the exact sum of the fine
increments it covers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParams, OutOfRange

__all__ = [
    "StreamTag",
    "NoiseKey",
    "IncrementGrid",
    "BrownianDriver",
    "StreamAudit",
    "increment",
    "derive_seed",
    "uniforms",
]

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_K_SEED = np.uint64(0xD1B54A32D192ED03)
_K_TAG = np.uint64(0xA0761D6478BD642F)
_K_PID = np.uint64(0xE7037ED1A0B428DB)
_K_LEVEL = np.uint64(0x8EBC6AF09C88C6E3)
_K_OUT = np.uint64(0x589965CC75374CC3)
_INIT_COUNTER = 1 << 63
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)
_S11 = np.uint64(11)


class StreamTag(enum.IntEnum):
    PARTICLE_SYSTEM = 1
    LIMIT_PROCESS = 2
    PICARD_SHARED = 3


@dataclass(frozen=True)
class NoiseKey:
    """Identity of one Brownian motion."""

    seed: int
    particle_id: int = 0
    stream_tag: StreamTag = StreamTag.PARTICLE_SYSTEM

    def offset(self, i: int) -> "NoiseKey":
        return NoiseKey(self.seed, self.particle_id + int(i), self.stream_tag)


def _fmix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _u64(v) -> np.ndarray:
    if isinstance(v, np.ndarray):
        return v.astype(np.uint64)
    return np.array([int(v) & _M64], dtype=np.uint64)


def stream_keys(seed: int, tag: int, particle_ids) -> np.ndarray:
    """Per-particle 64-bit stream keys (level independent)."""
    ids = np.atleast_1d(np.asarray(particle_ids, dtype=np.int64)).astype(np.uint64)
    k = _fmix(_u64(seed) ^ _K_SEED)
    k = _fmix(k ^ (_u64(int(tag)) * _K_TAG))
    return _fmix(k ^ (ids * _K_PID))


def _level_keys(keys: np.ndarray, level: int) -> np.ndarray:
    return _fmix(keys ^ (_u64(level + 1) * _K_LEVEL))


def _hash(keys: np.ndarray, counter: int) -> np.ndarray:
    c = _u64(counter)
    h = _fmix(keys + (c + np.uint64(1)) * _GOLDEN)
    return _fmix(h ^ (keys * _K_OUT))


def _to_uniform(h: np.ndarray) -> np.ndarray:
    return ((h >> _S11).astype(np.float64) + 0.5) * (2.0**-53)


def uniforms(seed: int, tag: int, particle_ids, j: int = 0) -> np.ndarray:
    """The ``j``-th initial-condition uniform of each particle stream."""
    keys = stream_keys(seed, tag, particle_ids)
    return _to_uniform(_hash(keys, _INIT_COUNTER + int(j)))


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed, e.g. one per Monte-Carlo trial."""
    k = _fmix(_u64(seed) ^ _K_SEED)
    return int(_fmix(k ^ (_u64(index + 1) * _GOLDEN))[0])


class IncrementGrid:
    """Uniform grid on ``[0, T]`` with dyadic refinement levels.

    Level ``l`` has step ``dt / 2**l`` and ``steps * 2**l`` increments;
    ``finest`` is the level drawn directly from the counter hash.
    """

    def __init__(self, T: float, dt: float, finest: int = 0):
        if not (T > 0 and dt > 0):
            raise InvalidParams(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
        steps = round(T / dt)
        if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
            raise InvalidParams(f"T={T} is not an integer multiple of dt={dt}")
        if finest < 0:
            raise InvalidParams("finest level must be >= 0")
        self.T = float(T)
        self.dt = float(dt)
        self.steps = int(steps)
        self.finest = int(finest)

    def __repr__(self):
        return f"IncrementGrid(T={self.T}, dt={self.dt}, finest={self.finest})"

    def dt_at(self, level: int) -> float:
        return self.dt / (1 << level)

    def steps_at(self, level: int) -> int:
        return self.steps << level

    def times(self, level: int = 0) -> np.ndarray:
        return np.arange(self.steps_at(level) + 1) * self.dt_at(level)

    def _check(self, level: int, step: int):
        if not 0 <= level <= self.finest:
            raise OutOfRange(f"level {level} outside 0..{self.finest}")
        if not 0 <= step < self.steps_at(level):
            raise OutOfRange(f"step {step} outside 0..{self.steps_at(level) - 1}")

    def increments(self, seed: int, tag: int, particle_ids, level: int, step: int,
                   *, keys: Optional[np.ndarray] = None) -> np.ndarray:
        """Increments ``dB`` over step ``step`` of ``level`` for many particles."""
        self._check(level, step)
        if keys is None:
            keys = _level_keys(stream_keys(seed, tag, particle_ids), self.finest)
        ratio = 1 << (self.finest - level)
        scale = math.sqrt(self.dt_at(self.finest))
        first = step * ratio
        total = np.zeros(keys.shape, dtype=float)
        # fine increments are summed left to right, already scaled, so a coarse
        # increment is bit-identical to adding up the fine ones in order
        for c in range(first, first + ratio):
            total += scale * ndtri(_to_uniform(_hash(keys, c)))
        return total

    def level_keys(self, seed: int, tag: int, particle_ids) -> np.ndarray:
        return _level_keys(stream_keys(seed, tag, particle_ids), self.finest)


def increment(grid: IncrementGrid, key: NoiseKey, level: int, step: int) -> float:
    """Single Brownian increment addressed by key, level and step."""
    return float(grid.increments(key.seed, key.stream_tag, [key.particle_id], level, step)[0])


class StreamAudit:
    """Order-independent digest of the increments each particle consumed.

    ``watch`` restricts bookkeeping to a subset of particle ids. Two
    consumers of the same particle stream produce equal digests exactly
    when they read bit-identical increments at the same steps.
    """

    def __init__(self, watch=None):
        self._digests: dict = {}
        self.watch = None if watch is None else np.unique(np.asarray(watch, dtype=np.int64))

    def record(self, label: str, particle_ids: np.ndarray, step: int, values: np.ndarray):
        particle_ids = np.asarray(particle_ids, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if self.watch is not None:
            keep = np.isin(particle_ids, self.watch)
            particle_ids, values = particle_ids[keep], values[keep]
        bits = np.ascontiguousarray(values).view(np.uint64)
        w = _fmix(bits ^ (_u64(step) * _GOLDEN))
        table = self._digests.setdefault(label, {})
        for pid, v in zip(particle_ids.tolist(), w.tolist()):
            d, n = table.get(pid, (0, 0))
            table[pid] = ((d + v) & _M64, n + 1)

    def digest(self, label: str, particle_id: int):
        return self._digests.get(label, {}).get(int(particle_id))

    def matches(self, label_a: str, label_b: str, particle_ids) -> bool:
        return all(
            self.digest(label_a, i) is not None
            and self.digest(label_a, i) == self.digest(label_b, i)
            for i in particle_ids
        )


class BrownianDriver:
    """Increments for a fixed batch of particles on one level of a grid."""

    def __init__(self, grid: IncrementGrid, seed: int, tag: int, particle_ids,
                 level: int = 0, audit: Optional[StreamAudit] = None, label: str = ""):
        self.grid = grid
        self.seed = int(seed)
        self.tag = StreamTag(tag)
        self.particle_ids = np.atleast_1d(np.asarray(particle_ids, dtype=np.int64))
        self.level = int(level)
        if not 0 <= self.level <= grid.finest:
            raise OutOfRange(f"level {level} outside 0..{grid.finest}")
        self._keys = grid.level_keys(self.seed, self.tag, self.particle_ids)
        self.audit = audit
        self.label = label

    @property
    def dt(self) -> float:
        return self.grid.dt_at(self.level)

    @property
    def steps(self) -> int:
        return self.grid.steps_at(self.level)

    def times(self) -> np.ndarray:
        return self.grid.times(self.level)

    def __call__(self, step: int, sl: slice = slice(None)) -> np.ndarray:
        keys = self._keys[sl]
        dB = self.grid.increments(self.seed, self.tag, None, self.level, step, keys=keys)
        if self.audit is not None:
            self.audit.record(self.label, self.particle_ids[sl], step, dB)
        return dB

    def initial_uniforms(self, j: int = 0) -> np.ndarray:
        return uniforms(self.seed, self.tag, self.particle_ids, j)
