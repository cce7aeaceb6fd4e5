"""Sampling-based checks of the growth and regularity conditions on ``b``, ``sigma``.

The conditions quantify over all states (and measures), so they cannot be
proved by sampling; what the validators do is reproducible falsification.
A deterministic Halton plan on ``[-R, R] x [0, T]`` plus corner points
(``0``, ``+-R/2``, ``+-R``) is evaluated for every radius ``R`` in the plan,
and three kinds of failure are reported:

* a declared constant ``C`` is exceeded at some sample (with that sample as
  the witness),
* a ratio that should stay bounded keeps growing with ``R`` (the estimated
  growth exponent between the two largest radii exceeds a limit),
* a Lipschitz/Hölder quotient blows up as the pair separation ``h`` shrinks
  through ``1e-2, 1e-4, 1e-6``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .coefficients import CoefficientPair
from .errors import AssumptionViolation, InvalidParams
from .measures import EmpiricalMeasure, moment, w1_to_dirac0, wasserstein

__all__ = [
    "SamplingPlan",
    "MeasureSampler",
    "CheckResult",
    "ValidationReport",
    "validate_assumption1",
    "validate_assumption2",
]


@dataclass(frozen=True)
class SamplingPlan:
    R_levels: tuple = (1.0, 2.0, 5.0, 10.0)
    T: float = 1.0
    n_points: int = 256
    n_times: int = 3
    h_levels: tuple = (1e-2, 1e-4, 1e-6)
    n_pair_points: int = 48
    tol: float = 1e-8
    growth_exponent_limit: float = 0.25
    blowup_slope_limit: float = 0.1

    def __post_init__(self):
        if not self.R_levels or min(self.R_levels) <= 0:
            raise InvalidParams("R_levels must be positive")
        if list(self.R_levels) != sorted(self.R_levels):
            raise InvalidParams("R_levels must be increasing")
        if self.n_points < 2 or self.n_times < 1:
            raise InvalidParams("need n_points >= 2 and n_times >= 1")

    def times(self) -> np.ndarray:
        if self.n_times == 1:
            return np.array([0.0])
        return np.linspace(0.0, self.T, self.n_times)

    def points(self, R: float) -> np.ndarray:
        """Halton points in ``[-R, R]`` followed by the corner points."""
        u = qmc.Halton(d=1, scramble=False).random(self.n_points)[:, 0]
        corners = np.array([0.0, R, -R, 0.5 * R, -0.5 * R])
        return np.concatenate([R * (2.0 * u - 1.0), corners])


@dataclass(frozen=True)
class MeasureSampler:
    """Deterministic family of random empirical measures.

    Measure ``k`` has between 1 and ``max_atoms`` Gaussian atoms whose centre
    lies in ``[-radius, radius]``.
    """

    seed: int = 0
    radius: float = 1.0
    max_atoms: int = 16

    def __call__(self, k: int) -> EmpiricalMeasure:
        rng = np.random.default_rng([self.seed, int(k)])
        n = int(rng.integers(1, self.max_atoms + 1))
        loc = rng.uniform(-self.radius, self.radius)
        spread = rng.uniform(0.0, self.radius)
        return EmpiricalMeasure(loc + spread * rng.standard_normal(n))


@dataclass
class CheckResult:
    name: str
    estimate: float
    passed: bool
    declared: Optional[float] = None
    residual: float = 0.0
    witness: Optional[dict] = None
    note: str = ""
    informational: bool = False

    def line(self) -> str:
        status = "info" if self.informational else ("pass" if self.passed else "FAIL")
        decl = "" if self.declared is None else f" declared={self.declared:.6g}"
        extra = f" ({self.note})" if self.note else ""
        return f"[{status}] {self.name}: estimate={self.estimate:.6g}{decl}{extra}"


@dataclass
class ValidationReport:
    assumption: str
    checks: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed and not c.informational]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        head = f"{self.assumption}: {'pass' if self.passed else 'FAIL'}"
        return "\n".join([head] + ["  " + c.line() for c in self.checks])


# helpers -------------------------------------------------------------------


def _evaluate(fn: Callable, ts, xs, mids, measures) -> np.ndarray:
    """``fn(t_i, x_i, measures[mid_i])`` grouped by (t, measure) for vectorisation."""
    out = np.empty(xs.shape, dtype=float)
    keys = np.stack([ts, mids.astype(float)], axis=1)
    for t, m in np.unique(keys, axis=0):
        mask = (ts == t) & (mids == int(m))
        out[mask] = np.asarray(fn(float(t), xs[mask], measures[int(m)]), dtype=float)
    return out


def _growth_exponent(per_radius: list, radii) -> float:
    """Log-log growth of the per-radius maximum between the two largest radii."""
    if len(per_radius) < 2:
        return 0.0
    a, b = per_radius[-2], per_radius[-1]
    if not (a > 0 and b > 0):
        return 0.0 if b <= a else math.inf
    return math.log(b / a) / math.log(radii[-1] / radii[-2])


def _blowup_slope(q_by_h: list, h_levels) -> float:
    """How fast the quotient grows as ``h`` shrinks (positive means blow-up)."""
    q0, q1 = q_by_h[0], q_by_h[-1]
    if not (q0 > 0 and q1 > 0):
        return 0.0 if q1 <= q0 else math.inf
    return math.log(q1 / q0) / math.log(h_levels[0] / h_levels[-1])


def _witness(samples: dict, i: int) -> dict:
    return {k: v[i].item() for k, v in samples.items()}


def _bound_check(name, lhs, rhs, samples, plan, C, per_radius, note=""):
    """Estimate ``sup lhs / rhs`` and compare with a declared constant."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    i = int(np.argmax(ratio))
    estimate = max(0.0, float(ratio[i]))
    witness = _witness(samples, i)
    passed = True
    notes = [note] if note else []
    residual = 0.0
    if C is not None:
        excess = lhs - C * rhs - plan.tol * np.maximum(1.0, np.abs(C * rhs))
        j = int(np.argmax(excess))
        residual = float(excess[j])
        if residual > 0:
            passed = False
            witness = _witness(samples, j)
            notes.append(f"declared C={C:g} exceeded by {residual:.3g}")
    expo = _growth_exponent(per_radius, plan.R_levels)
    if expo > plan.growth_exponent_limit:
        passed = False
        notes.append(f"ratio keeps growing with R (exponent {expo:.3g})")
        if C is None or residual <= 0:
            witness = _witness(samples, i)
    return CheckResult(name, estimate, passed, declared=C, residual=residual,
                       witness=witness, note="; ".join(notes))


def _quotient_check(name, q_by_h, best, h_levels, plan, witness, note=""):
    slope = _blowup_slope(q_by_h, h_levels)
    passed = slope <= plan.blowup_slope_limit
    notes = [note] if note else []
    if not passed:
        notes.append(f"quotient blows up as h -> 0 (slope {slope:.3g})")
    return CheckResult(name, float(best), passed, witness=witness, note="; ".join(notes))


def _raise_if(report: ValidationReport, strict: bool):
    if strict and not report.passed:
        bad = report.failures[0]
        raise AssumptionViolation(
            f"{report.assumption}: {bad.name} failed ({bad.note})", report, bad.witness
        )
    return report


# assumption 1 --------------------------------------------------------------


def validate_assumption1(pair: CoefficientPair, plan: Optional[SamplingPlan] = None,
                         *, strict: bool = False) -> ValidationReport:
    """Growth, coercivity and local regularity of a measure-free pair.

    Checks ``|b| <= C(1 + |x|^(l+1))``, ``2xb + (p0-1) sigma^2 <= C(1 + x^2)``,
    local Lipschitz continuity of ``b``, local ``(alpha + 1/2)``-Hölder
    continuity of ``sigma`` and ``p0 >= 4l + 4``.
    """
    plan = plan or SamplingPlan()
    d = pair.declared
    if d.measure_dependent:
        raise InvalidParams("validate_assumption1 applies to measure-free coefficients")
    dirac = [EmpiricalMeasure.dirac(0.0)]
    C, l, p0, alpha = d.C, d.l, d.p0, d.alpha
    expo = alpha + 0.5
    report = ValidationReport("assumption1")

    xs_all, ts_all = [], []
    growth_r, coerc_r = [], []
    for R in plan.R_levels:
        x = plan.points(R)
        xx = np.tile(x, plan.n_times)
        tt = np.repeat(plan.times(), x.size)
        mids = np.zeros(xx.size, dtype=int)
        b = _evaluate(pair.drift, tt, xx, mids, dirac)
        s = _evaluate(pair.diffusion, tt, xx, mids, dirac)
        growth_r.append(float(np.max(np.abs(b) / (1 + np.abs(xx) ** (l + 1)))))
        coerc_r.append(float(np.max(np.maximum(2 * xx * b + (p0 - 1) * s * s, 0) / (1 + xx * xx))))
        xs_all.append(xx)
        ts_all.append(tt)
    xx = np.concatenate(xs_all)
    tt = np.concatenate(ts_all)
    mids = np.zeros(xx.size, dtype=int)
    b = _evaluate(pair.drift, tt, xx, mids, dirac)
    s = _evaluate(pair.diffusion, tt, xx, mids, dirac)
    samples = {"t": tt, "x": xx}
    report.checks.append(_bound_check(
        "growth |b| <= C(1+|x|^(l+1))", np.abs(b), 1 + np.abs(xx) ** (l + 1),
        samples, plan, C, growth_r))
    report.checks.append(_bound_check(
        "coercivity 2xb+(p0-1)sigma^2 <= C(1+x^2)",
        np.maximum(2 * xx * b + (p0 - 1) * s * s, 0.0), 1 + xx * xx,
        samples, plan, C, coerc_r))

    # local regularity: pairwise quotients per radius and a shrinking-h probe
    lip, hol = {}, {}
    R = plan.R_levels[-1]
    t0 = float(plan.times()[0])
    for Rk in plan.R_levels:
        lip[Rk], hol[Rk], _, _ = _local_quotients(pair, Rk, t0, plan, expo)
    q_lip_h, q_hol_h, w_lip, w_hol = [], [], None, None
    for h in plan.h_levels:
        base = plan.points(R)
        base = np.clip(base, -R, R - h)
        xp = base + h
        mu = dirac[0]
        db = np.abs(pair.drift(t0, xp, mu) - pair.drift(t0, base, mu))
        ds = np.abs(pair.diffusion(t0, xp, mu) - pair.diffusion(t0, base, mu))
        q_lip_h.append(float(np.max(db) / h))
        q_hol_h.append(float(np.max(ds) / h**expo))
        w_lip = {"t": t0, "x": float(base[np.argmax(db)]), "x_prime": float(xp[np.argmax(db)])}
        w_hol = {"t": t0, "x": float(base[np.argmax(ds)]), "x_prime": float(xp[np.argmax(ds)])}
    best_lip = max(lip[R], max(q_lip_h))
    best_hol = max(hol[R], max(q_hol_h))
    report.checks.append(_quotient_check(
        f"local Lipschitz L_R of b (R={R:g})", q_lip_h, best_lip, plan.h_levels, plan, w_lip))
    report.checks.append(_quotient_check(
        f"local Hoelder (alpha+1/2={expo:g}) constant of sigma (R={R:g})",
        q_hol_h, best_hol, plan.h_levels, plan, w_hol))

    need = 4 * l + 4
    report.checks.append(CheckResult(
        "moment order p0 >= 4l+4", float(p0), p0 >= need, declared=need,
        note=f"p0={p0:g}, 4l+4={need:g}"))
    report.constants = {
        "C_growth": report.checks[0].estimate,
        "C_coercivity": report.checks[1].estimate,
        "C_estimate": max(report.checks[0].estimate, report.checks[1].estimate),
        "L_R": {float(k): v for k, v in lip.items()},
        "holder_R": {float(k): v for k, v in hol.items()},
    }
    return _raise_if(report, strict)


def _local_quotients(pair, R, t, plan, expo):
    """Max pairwise Lipschitz and Hölder quotients over a point subsample."""
    x = plan.points(R)[: plan.n_pair_points]
    mu = EmpiricalMeasure.dirac(0.0)
    b = np.asarray(pair.drift(t, x, mu), dtype=float)
    s = np.asarray(pair.diffusion(t, x, mu), dtype=float)
    i, j = np.triu_indices(x.size, k=1)
    dx = np.abs(x[i] - x[j])
    ok = (dx >= 1e-6) & (dx <= 2 * R)
    dx, i, j = dx[ok], i[ok], j[ok]
    ql = np.abs(b[i] - b[j]) / dx
    qh = np.abs(s[i] - s[j]) / dx**expo
    return float(ql.max(initial=0.0)), float(qh.max(initial=0.0)), i, j


# assumption 2 --------------------------------------------------------------


def validate_assumption2(pair: CoefficientPair, plan: Optional[SamplingPlan] = None,
                         measure_sampler: Optional[MeasureSampler] = None, *,
                         n_measures: int = 32, strict: bool = False) -> ValidationReport:
    """Conditions on measure-dependent coefficients.

    Samples ``(x, x', mu, mu')`` tuples and checks ``xb <= C(1+x^2)``,
    ``|b| <= C(1+|x|^(l+1)+W1(mu, delta_0))``, the joint Lipschitz bound on
    ``b``, ``sigma^2 <= C`` and the joint Hölder-type bound on ``sigma``.
    Both moment thresholds (``p0 >= 1`` and ``p0 >= 4l+4``) are reported
    without deciding which one applies.
    """
    plan = plan or SamplingPlan()
    sampler = measure_sampler or MeasureSampler()
    d = pair.declared
    C, l, p0, alpha = d.C, d.l, d.p0, d.alpha
    measures = [sampler(k) for k in range(n_measures)]
    w1_0 = np.array([w1_to_dirac0(m) for m in measures])
    mom = np.array([moment(m, p0) for m in measures])
    report = ValidationReport("assumption2")

    def build(R):
        x = plan.points(R)
        xx = np.tile(x, plan.n_times)
        tt = np.repeat(plan.times(), x.size)
        mids = np.arange(xx.size) % n_measures
        return tt, xx, mids

    per = {"drift_sign": [], "growth": [], "sigma_bound": []}
    blocks = []
    for R in plan.R_levels:
        tt, xx, mids = build(R)
        b = _evaluate(pair.drift, tt, xx, mids, measures)
        s = _evaluate(pair.diffusion, tt, xx, mids, measures)
        per["drift_sign"].append(float(np.max(np.maximum(xx * b, 0) / (1 + xx * xx))))
        per["growth"].append(float(np.max(np.abs(b) / (1 + np.abs(xx) ** (l + 1) + w1_0[mids]))))
        per["sigma_bound"].append(float(np.max(s * s)))
        blocks.append((tt, xx, mids, b, s))
    tt, xx, mids, b, s = (np.concatenate(z) for z in zip(*blocks))
    samples = {"t": tt, "x": xx, "measure": mids}
    report.checks.append(_bound_check(
        "drift sign xb <= C(1+x^2)", np.maximum(xx * b, 0.0), 1 + xx * xx,
        samples, plan, C, per["drift_sign"]))
    report.checks.append(_bound_check(
        "growth |b| <= C(1+|x|^(l+1)+W1(mu,delta0))", np.abs(b),
        1 + np.abs(xx) ** (l + 1) + w1_0[mids], samples, plan, C, per["growth"]))
    report.checks.append(_bound_check(
        "boundedness sigma^2 <= C", s * s, np.ones_like(s), samples, plan, C,
        per["sigma_bound"]))

    # joint regularity over pairs (x, mu), (x', mu')
    lip_r, hol_r, pair_blocks = [], [], []
    for R in plan.R_levels:
        blk = _pair_block(pair, plan, R, measures, mids_count=n_measures)
        pair_blocks.append(blk)
        lip_r.append(_joint_ratio(blk, w1_0, mom, measures, alpha, "b"))
        hol_r.append(_joint_ratio(blk, w1_0, mom, measures, alpha, "s"))
    blk = {k: np.concatenate([p[k] for p in pair_blocks]) for k in pair_blocks[0]}
    lhs_b, rhs_b, lhs_s, rhs_s = _joint_terms(blk, mom, measures, alpha)
    psamples = {"t": blk["t"], "x": blk["x"], "x_prime": blk["xp"],
                "measure": blk["m"], "measure_prime": blk["mp"]}
    report.checks.append(_bound_check(
        "joint Lipschitz of b in (x, W1)", lhs_b, rhs_b, psamples, plan, C, lip_r))
    report.checks.append(_bound_check(
        "joint Hoelder-type bound on sigma", lhs_s, rhs_s, psamples, plan, C, hol_r))

    # shrinking-h probe with a shared measure
    R = plan.R_levels[-1]
    t0 = float(plan.times()[0])
    qb, qs = [], []
    for h in plan.h_levels:
        base = np.clip(plan.points(R), -R, R - h)
        mm = np.arange(base.size) % n_measures
        zero = np.zeros_like(base)
        hb = {"t": np.full(base.size, t0), "x": base, "xp": base + h, "m": mm, "mp": mm,
              "w1": zero}
        _fill_values(pair, hb, measures)
        lb, rb, ls, rs = _joint_terms(hb, mom, measures, alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            qb.append(float(np.max(np.where(rb > 0, lb / rb, 0.0))))
            qs.append(float(np.max(np.where(rs > 0, ls / rs, 0.0))))
    for idx, q in ((3, qb), (4, qs)):
        slope = _blowup_slope(q, plan.h_levels)
        if slope > plan.blowup_slope_limit:
            c = report.checks[idx]
            c.passed = False
            c.note = "; ".join(filter(None, [c.note, f"quotient blows up as h -> 0 (slope {slope:.3g})"]))

    for name, need in (("p0 >= 1 (measure-dependent case)", 1.0),
                       ("p0 >= 4l+4 (measure-free case)", 4 * l + 4)):
        report.checks.append(CheckResult(
            f"moment order {name}", float(p0), p0 >= need, declared=need,
            note=f"p0={p0:g}", informational=True))
    report.constants = {c.name: c.estimate for c in report.checks if not c.informational}
    report.constants["C_estimate"] = max(report.constants.values())
    return _raise_if(report, strict)


def _fill_values(pair, blk, measures):
    blk["b"] = _evaluate(pair.drift, blk["t"], blk["x"], blk["m"], measures)
    blk["bp"] = _evaluate(pair.drift, blk["t"], blk["xp"], blk["mp"], measures)
    blk["s"] = _evaluate(pair.diffusion, blk["t"], blk["x"], blk["m"], measures)
    blk["sp"] = _evaluate(pair.diffusion, blk["t"], blk["xp"], blk["mp"], measures)


def _pair_block(pair, plan, R, measures, mids_count):
    """Three pair families: both arguments moved, only x moved, only mu moved."""
    x = plan.points(R)
    n = x.size
    times = plan.times()
    t = times[np.arange(n) % times.size]
    xp = np.roll(x, 1)
    m = np.arange(n) % mids_count
    mp = (m + 1 + np.arange(n) // mids_count) % mids_count
    xs = np.concatenate([x, x, x])
    xps = np.concatenate([xp, xp, x])
    ms = np.concatenate([m, m, m])
    mps = np.concatenate([mp, m, mp])
    ts = np.concatenate([t, t, t])
    w1 = np.array([wasserstein(measures[a], measures[b]) for a, b in zip(ms, mps)])
    blk = {"t": ts, "x": xs, "xp": xps, "m": ms, "mp": mps, "w1": w1}
    _fill_values(pair, blk, measures)
    return blk


def _joint_terms(blk, mom, measures, alpha):
    dx = np.abs(blk["x"] - blk["xp"])
    factor = 1 + np.abs(blk["x"]) + np.abs(blk["xp"]) + mom[blk["m"]] + mom[blk["mp"]]
    lhs_b = np.abs(blk["b"] - blk["bp"])
    rhs_b = factor * (dx + blk["w1"])
    lhs_s = (blk["s"] - blk["sp"]) ** 2
    rhs_s = factor * (dx ** (1 + 2 * alpha) + dx * blk["w1"])
    return lhs_b, rhs_b, lhs_s, rhs_s


def _joint_ratio(blk, w1_0, mom, measures, alpha, which):
    lb, rb, ls, rs = _joint_terms(blk, mom, measures, alpha)
    lhs, rhs = (lb, rb) if which == "b" else (ls, rs)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / rhs, np.where(lhs > 1e-300, np.inf, 0.0))
    return float(np.max(r))
