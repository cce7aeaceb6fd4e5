import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvsvi.coefficients import custom, ou_meanfield, toy_cubic
from mvsvi.errors import AssumptionViolation, InvalidParams
from mvsvi.measures import EmpiricalMeasure
from mvsvi.validation import (
    MeasureSampler,
    SamplingPlan,
    validate_assumption1,
    validate_assumption2,
)

SMALL = SamplingPlan(n_points=64, n_pair_points=24)


def test_toy_pair_passes_measure_free_checks():
    rep = validate_assumption1(toy_cubic())
    assert rep.passed, rep.summary()
    assert rep.constants["C_estimate"] <= 16.0
    # coercivity supremum at p0 = 12 is slightly above 10
    assert 10.0 < rep.constants["C_coercivity"] < 10.01
    assert rep.constants["L_R"][10.0] <= 600.0 + 1e-9


def test_superlinear_drift_with_too_small_degree_is_flagged():
    rep = validate_assumption1(custom("x^2", "0", C=10.0, l=0, p0=4), SMALL)
    assert not rep.passed
    bad = rep.check("growth |b| <= C(1+|x|^(l+1))")
    assert not bad.passed and bad.witness is not None
    with pytest.raises(AssumptionViolation) as exc:
        validate_assumption1(custom("x^2", "0", C=10.0, l=0, p0=4), SMALL, strict=True)
    assert exc.value.witness is not None and exc.value.report is not None


def test_zero_pair_passes_with_zero_constants():
    rep = validate_assumption1(custom("0", "0", l=1, p0=8), SMALL)
    assert rep.passed, rep.summary()
    assert rep.constants["C_estimate"] == 0.0


def test_moment_order_threshold_reported():
    rep = validate_assumption1(custom("0", "0", l=1, p0=2), SMALL)
    assert not rep.passed
    assert not rep.check("moment order p0 >= 4l+4").passed


def test_holder_blowup_is_flagged():
    # |x|^(1/4) is not (alpha + 1/2)-Hoelder at 0 for alpha = 0
    rep = validate_assumption1(custom("-x", "abs(x)^0.25", l=1, p0=8), SMALL)
    assert not rep.passed
    assert any("blows up" in c.note for c in rep.failures)


def test_measure_dependent_pair_rejected_by_measure_free_validator():
    with pytest.raises(InvalidParams):
        validate_assumption1(ou_meanfield())


def test_meanfield_pair_passes_measure_checks():
    rep = validate_assumption2(ou_meanfield())
    assert rep.passed, rep.summary()
    infos = [c for c in rep.checks if c.informational]
    assert {c.name for c in infos} == {"moment order p0 >= 1 (measure-dependent case)",
                                      "moment order p0 >= 4l+4 (measure-free case)"}


def test_unbounded_diffusion_flagged_with_witness():
    rep = validate_assumption2(custom("-x", "x", C=10.0))
    bad = rep.check("boundedness sigma^2 <= C")
    assert not bad.passed
    assert bad.witness == {"t": 0.0, "x": -10.0, "measure": 0}
    with pytest.raises(AssumptionViolation):
        validate_assumption2(custom("-x", "x", C=10.0), strict=True)


def test_identical_arguments_give_zero_lipschitz_sides():
    # a constant pair has zero increments everywhere, so only x = x', mu = mu' type
    # quotients occur and the joint checks estimate 0
    rep = validate_assumption2(custom("1", "1", C=2.0), SMALL)
    assert rep.check("joint Lipschitz of b in (x, W1)").estimate == 0.0
    assert rep.check("joint Hoelder-type bound on sigma").estimate == 0.0
    assert rep.passed


def test_measure_sampler_is_deterministic():
    s = MeasureSampler(seed=3)
    assert s(5) == s(5)
    assert isinstance(s(0), EmpiricalMeasure)
    assert all(1 <= s(k).n <= 16 for k in range(50))


def test_plan_validation():
    with pytest.raises(InvalidParams):
        SamplingPlan(R_levels=(2.0, 1.0))
    with pytest.raises(InvalidParams):
        SamplingPlan(R_levels=(0.0, 1.0))
    pts = SamplingPlan(n_points=8).points(3.0)
    assert pts.min() >= -3 and pts.max() <= 3 and {0.0, 3.0, -3.0} <= set(pts.tolist())


@settings(max_examples=15)
@given(a=st.floats(0.1, 5.0), s=st.floats(0.0, 2.0))
def test_validator_soundness_on_hand_computed_constants(a, s):
    # b = -a x, sigma = s, l = 1, p0 = 8:
    #   sup |b| / (1 + x^2) = a / 2 at |x| = 1
    #   sup (2 x b + 7 s^2) / (1 + x^2) = 7 s^2 at x = 0
    C = max(a / 2, 7 * s * s)
    pair = custom(f"-{a!r} * x", repr(s), C=C, l=1, alpha=0.5, p0=8)
    rep = validate_assumption1(pair, SMALL)
    assert rep.passed, rep.summary()
    assert rep.constants["C_estimate"] <= C * (1 + 1e-12)
    assert rep.constants["C_estimate"] >= C * (1 - 1e-12)
    tight = custom(f"-{a!r} * x", repr(s), C=C * (1 - 1e-3), l=1, alpha=0.5, p0=8)
    assert not validate_assumption1(tight, SMALL).passed
