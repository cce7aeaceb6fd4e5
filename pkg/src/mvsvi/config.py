"""Scenario files.

A scenario is a YAML mapping with the sections below; unknown keys are
rejected everywhere and every problem found is reported in one
:class:`ValidationError`.

.. code-block:: yaml

    name: toy_cubic            # used for output file names
    seed: 12345                # 64-bit noise seed
    coefficients: {kind: toy_cubic, params: {alpha: 0.0}}
    psi: {kind: interval, params: {lo: -2.0, hi: 2.0}}   # optional
    initial: {kind: uniform, params: {a: -0.5, b: 0.5}, a0: 1.0}
    scheme: {kind: proximal, n: null, taming: null}
    grid: {T: 1.0, dt: 0.001}
    experiment: {kind: simulate, params: {paths: 1000}}
    output_dir: out            # optional, overridden by MVSVI_OUTPUT_DIR

``experiment.kind`` is one of ``simulate``, ``particles``, ``picard``,
``poc``, ``validate`` or ``convergence``; its parameters and defaults are
listed in :data:`EXPERIMENT_PARAMS`. A missing ``psi`` section falls back to
the coefficient entry's default constraint.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from .coefficients import CoefficientPair, build_coefficients
from .convex import ConvexFunction, build_psi
from .errors import InvalidParams, ParseError, ValidationError
from .initial import build_initial
from .paths import IncrementGrid
from .schemes import SchemeConfig

__all__ = [
    "Section",
    "ScenarioConfig",
    "Scenario",
    "EXPERIMENT_PARAMS",
    "load_config",
    "parse_config",
    "config_from_dict",
    "canonical_text",
    "config_hash",
    "builtin_scenarios",
    "materialize",
]

_TOP_KEYS = ("name", "seed", "coefficients", "psi", "initial", "scheme", "grid",
             "experiment", "output_dir")


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _pos(v):
    return _num(v) and v > 0


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _inc_ints(v):
    return (isinstance(v, list) and len(v) >= 1 and all(_pos_int(a) for a in v)
            and all(b > a for a, b in zip(v, v[1:])))


def _pos_list(v):
    return isinstance(v, list) and len(v) >= 1 and all(_pos(a) for a in v)


# name -> (default, predicate, description); a default of ... means required
EXPERIMENT_PARAMS: dict = {
    "simulate": {
        "paths": (1000, _pos_int, "positive integer"),
        "write_paths": (1, lambda v: isinstance(v, int) and v >= 0, "integer >= 0"),
    },
    "particles": {
        "N": (..., _pos_int, "positive integer"),
        "write_particles": (16, lambda v: isinstance(v, int) and v >= 0, "integer >= 0"),
    },
    "picard": {
        "M": (2000, lambda v: _pos_int(v) and v >= 2, "integer >= 2"),
        "K_max": (15, _pos_int, "positive integer"),
        "tol": (1e-3, _pos, "positive number"),
    },
    "poc": {
        "N_list": (..., _inc_ints, "strictly increasing list of positive integers"),
        "M_ref": (..., _pos_int, "positive integer"),
        "trials": (8, _pos_int, "positive integer"),
        "probe_particles": (16, _pos_int, "positive integer"),
    },
    "validate": {
        "assumption": ("auto", lambda v: v in ("auto", 1, 2), "one of auto, 1, 2"),
        "R_levels": ([1.0, 2.0, 5.0, 10.0], _pos_list, "list of positive numbers"),
        "n_points": (256, lambda v: _pos_int(v) and v >= 2, "integer >= 2"),
    },
    "convergence": {
        "n_list": ([4, 16, 64, 256], _pos_list, "list of positive numbers"),
        "levels": (4, lambda v: _pos_int(v) and v >= 2, "integer >= 2"),
        "paths": (100, _pos_int, "positive integer"),
    },
}


@dataclass
class Section:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    coefficients: Section
    psi: Section
    initial: Section
    a0: float
    scheme_kind: str
    n: Optional[float]
    taming: Optional[bool]
    T: float
    dt: float
    experiment: Section
    output_dir: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "seed": self.seed,
            "coefficients": {"kind": self.coefficients.kind,
                             "params": dict(self.coefficients.params)},
            "psi": {"kind": self.psi.kind, "params": dict(self.psi.params)},
            "initial": {"kind": self.initial.kind, "params": dict(self.initial.params),
                        "a0": self.a0},
            "scheme": {"kind": self.scheme_kind, "n": self.n, "taming": self.taming},
            "grid": {"T": self.T, "dt": self.dt},
            "experiment": {"kind": self.experiment.kind,
                           "params": dict(self.experiment.params)},
        }
        if self.output_dir is not None:
            d["output_dir"] = self.output_dir
        return d


@dataclass
class Scenario:
    """Live objects built from a validated config."""

    config: ScenarioConfig
    pair: CoefficientPair
    psi: ConvexFunction
    init: Any
    scheme: SchemeConfig
    grid: IncrementGrid


def _sorted_params(p: dict) -> dict:
    return {k: p[k] for k in sorted(p)}


def canonical_text(cfg: ScenarioConfig) -> str:
    """Deterministic YAML rendering; reloading it yields an equal config."""
    d = cfg.to_dict()
    for sec in ("coefficients", "psi", "initial", "experiment"):
        d[sec]["params"] = _sorted_params(d[sec]["params"])
    return yaml.safe_dump(d, sort_keys=False, default_flow_style=False, allow_unicode=False)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()[:16]


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ParseError(f"{source}: {exc.problem or exc}", line, col) from None
    except yaml.YAMLError as exc:
        raise ParseError(f"{source}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be a mapping", 1, 1)
    return config_from_dict(data)


def _resolve_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    name = str(path)
    if name.startswith("builtin:"):
        name = name[len("builtin:"):]
    builtins = builtin_scenarios()
    key = name if name.endswith(".scenario") else name + ".scenario"
    if key in builtins:
        return builtins[key]
    raise ValidationError([f"scenario file not found: {path}"])


def load_config(path) -> ScenarioConfig:
    """Load a scenario file (or a built-in scenario by name)."""
    p = _resolve_path(path)
    return parse_config(p.read_text(), str(p))


def builtin_scenarios() -> dict:
    root = resources.files("mvsvi") / "scenarios"
    return {f.name: Path(str(f)) for f in root.iterdir() if f.name.endswith(".scenario")}


def _mapping(errors, data, key, allowed, required=()):
    sec = data.get(key)
    if sec is None:
        return None
    if not isinstance(sec, dict):
        errors.append(f"{key}: must be a mapping")
        return None
    for k in sec:
        if k not in allowed:
            errors.append(f"{key}.{k}: unknown key (allowed: {', '.join(allowed)})")
    for k in required:
        if k not in sec:
            errors.append(f"{key}.{k}: required")
    return sec


def _params(errors, where, sec):
    p = sec.get("params", {}) if sec else {}
    if p is None:
        return {}
    if not isinstance(p, dict):
        errors.append(f"{where}.params: must be a mapping")
        return {}
    return dict(p)


def config_from_dict(data: dict) -> ScenarioConfig:
    """Validate a raw mapping, collecting every problem before raising."""
    errors: list = []
    for k in data:
        if k not in _TOP_KEYS:
            errors.append(f"{k}: unknown key (allowed: {', '.join(_TOP_KEYS)})")
    name = data.get("name")
    if not isinstance(name, str) or not name or any(c in name for c in "/\\ "):
        errors.append("name: required non-empty string without spaces or slashes")
    seed = data.get("seed")
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        errors.append("seed: required integer in [0, 2^64)")

    co = _mapping(errors, data, "coefficients", ("kind", "params"), ("kind",))
    if co is None and "coefficients" not in data:
        errors.append("coefficients: required")
    coeff = Section(str(co.get("kind")) if co else "", _params(errors, "coefficients", co))
    pair = None
    if co and "kind" in co:
        try:
            pair = build_coefficients(coeff.kind, coeff.params)
        except InvalidParams as exc:
            errors.append(f"coefficients: {exc}")

    ps = _mapping(errors, data, "psi", ("kind", "params"), ("kind",))
    if ps is not None and "kind" in ps:
        psi = Section(str(ps["kind"]), _params(errors, "psi", ps))
    elif pair is not None and pair.default_psi is not None:
        psi = Section(pair.default_psi[0], dict(pair.default_psi[1]))
    else:
        psi = Section("none", {})
    try:
        psi_obj = build_psi(psi.kind, psi.params)
        psi.params = psi_obj.params()
    except InvalidParams as exc:
        errors.append(f"psi: {exc}")

    ini = _mapping(errors, data, "initial", ("kind", "params", "a0"), ("kind",))
    if ini is None and "initial" not in data:
        errors.append("initial: required")
    initial = Section(str(ini.get("kind")) if ini else "", _params(errors, "initial", ini))
    a0 = ini.get("a0", 1.0) if ini else 1.0
    if not _pos(a0):
        errors.append(f"initial.a0: must be a positive number, got {a0!r}")
    elif ini and "kind" in ini:
        try:
            build_initial(initial.kind, initial.params, a0)
        except InvalidParams as exc:
            errors.append(f"initial: {exc}")

    sc = _mapping(errors, data, "scheme", ("kind", "n", "taming")) or {}
    kind = sc.get("kind", "proximal")
    n = sc.get("n")
    taming = sc.get("taming")
    if taming is not None and not isinstance(taming, bool):
        errors.append("scheme.taming: must be true, false or null")
    if n is not None and not _pos(n):
        errors.append(f"scheme.n: must be a positive number, got {n!r}")

    gr = _mapping(errors, data, "grid", ("T", "dt"), ("T", "dt"))
    if gr is None and "grid" not in data:
        errors.append("grid: required")
    gr = gr or {}
    T, dt = gr.get("T"), gr.get("dt")
    if "T" in gr and not _pos(T):
        errors.append(f"grid.T: must be a positive number, got {T!r}")
    if "dt" in gr and not _pos(dt):
        errors.append(f"grid.dt: must be a positive number, got {dt!r}")
    if _pos(T) and _pos(dt):
        try:
            IncrementGrid(T, dt)
        except InvalidParams as exc:
            errors.append(f"grid: {exc}")
        if kind in ("proximal", "penalized") and (n is None or _pos(n)):
            try:
                SchemeConfig(kind, float(dt), None if n is None else float(n), taming)
            except InvalidParams as exc:
                errors.append(f"scheme: {exc}")
    if kind not in ("proximal", "penalized"):
        errors.append(f"scheme.kind: must be 'proximal' or 'penalized', got {kind!r}")

    ex = _mapping(errors, data, "experiment", ("kind", "params"), ("kind",))
    if ex is None and "experiment" not in data:
        errors.append("experiment: required")
    experiment = Section(str(ex.get("kind")) if ex else "", _params(errors, "experiment", ex))
    if ex and "kind" in ex:
        schema = EXPERIMENT_PARAMS.get(experiment.kind)
        if schema is None:
            errors.append(f"experiment.kind: unknown {experiment.kind!r} "
                          f"(registry: {', '.join(EXPERIMENT_PARAMS)})")
        else:
            filled = {}
            for key in experiment.params:
                if key not in schema:
                    errors.append(f"experiment.params.{key}: unknown key "
                                  f"(allowed: {', '.join(schema)})")
            for key, (default, ok, desc) in schema.items():
                if key in experiment.params:
                    v = experiment.params[key]
                    if not ok(v):
                        errors.append(f"experiment.params.{key}: must be {desc}, got {v!r}")
                    filled[key] = v
                elif default is ...:
                    errors.append(f"experiment.params.{key}: required")
                else:
                    filled[key] = default
            experiment.params = filled
            if experiment.kind == "poc" and not errors:
                if filled["M_ref"] < max(filled["N_list"]):
                    errors.append("experiment.params.M_ref: must be >= max(N_list)")
            if experiment.kind == "simulate" and pair is not None and pair.measure_dependent:
                errors.append("experiment.kind: simulate needs measure-free coefficients "
                              "(use particles for interacting systems)")
            if experiment.kind == "convergence" and _pos(dt):
                bad = [v for v in filled.get("n_list", []) if _num(v) and v * dt > 2]
                if bad:
                    errors.append(f"experiment.params.n_list: n*dt must be <= 2, "
                                  f"violated by {bad}")

    out = data.get("output_dir")
    if out is not None and not isinstance(out, str):
        errors.append("output_dir: must be a string")
    if errors:
        raise ValidationError(errors)
    return ScenarioConfig(
        name=name, seed=int(seed), coefficients=coeff, psi=psi, initial=initial,
        a0=float(a0), scheme_kind=kind, n=None if n is None else float(n), taming=taming,
        T=float(T), dt=float(dt), experiment=experiment, output_dir=out,
    )


def materialize(cfg: ScenarioConfig) -> Scenario:
    pair = build_coefficients(cfg.coefficients.kind, cfg.coefficients.params)
    psi = build_psi(cfg.psi.kind, cfg.psi.params)
    init = build_initial(cfg.initial.kind, cfg.initial.params, cfg.a0)
    scheme = SchemeConfig(cfg.scheme_kind, cfg.dt, cfg.n, cfg.taming)
    return Scenario(cfg, pair, psi, init, scheme, IncrementGrid(cfg.T, cfg.dt))
