import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvsvi.coefficients import (
    COEFFICIENT_REGISTRY,
    MeanFieldKernel,
    Regularity,
    build_coefficients,
    cir_like,
    custom,
    eval_diffusion,
    eval_drift,
    ou_meanfield,
    toy_cubic,
)
from mvsvi.errors import InvalidParams, NonFinite
from mvsvi.expressions import parse_expression
from mvsvi.initial import Deterministic, Gaussian, Uniform, build_initial
from mvsvi.measures import EmpiricalMeasure as E

DIRAC0 = E.dirac(0.0)


def test_toy_examples():
    pair = toy_cubic()
    assert eval_drift(pair, 0.0, 1.0, DIRAC0) == -1.0
    assert eval_diffusion(pair, 0.0, 1.0, DIRAC0) == pytest.approx(math.sqrt(2), abs=1e-8)
    assert pair.declared.l == 2 and pair.declared.alpha == 0.0
    assert pair.declared.p0 >= 4 * pair.declared.l + 4


def test_meanfield_examples():
    assert eval_drift(ou_meanfield(), 0.0, 0.0, E([1, 3])) == 2.0
    assert eval_diffusion(custom("0", "1"), 0.3, 17.0, E([5.0])) == 1.0
    assert eval_diffusion(custom("0", "1 + w1_to_dirac0(mu)"), 0.0, 2.0, DIRAC0) == 1.0


@pytest.mark.parametrize("name", ["toy_cubic", "cir_like"])
def test_measure_free_pairs_ignore_mu(name, rng):
    pair = build_coefficients(name)
    assert not pair.measure_dependent
    x = rng.uniform(-3, 3, 100)
    mu1, mu2 = E(rng.normal(size=5)), E(rng.normal(4, 2, size=9))
    np.testing.assert_array_equal(eval_drift(pair, 0.5, x, mu1), eval_drift(pair, 0.5, x, mu2))
    np.testing.assert_array_equal(eval_diffusion(pair, 0.5, x, mu1),
                                  eval_diffusion(pair, 0.5, x, mu2))


def test_nonfinite_is_reported():
    pair = custom("1/x", "1")
    with np.errstate(divide="ignore"):
        with pytest.raises(NonFinite, match="x=0.0"):
            eval_drift(pair, 0.0, np.array([1.0, 0.0]), DIRAC0)


def test_cir_like_values():
    pair = cir_like(kappa=2.0, theta=0.5, sigma=0.3)
    assert eval_drift(pair, 0, 1.0, DIRAC0) == -1.0
    assert eval_diffusion(pair, 0, 4.0, DIRAC0) == pytest.approx(0.6)
    assert eval_diffusion(pair, 0, -4.0, DIRAC0) == 0.0


def test_regularity_validation():
    with pytest.raises(InvalidParams):
        Regularity(C=0.0)
    with pytest.raises(InvalidParams):
        Regularity(alpha=0.7)
    with pytest.raises(InvalidParams):
        Regularity(l=-1)


def test_registry():
    assert set(COEFFICIENT_REGISTRY) == {"toy_cubic", "ou_meanfield", "cir_like", "custom"}
    with pytest.raises(InvalidParams, match="registry"):
        build_coefficients("heat")
    with pytest.raises(InvalidParams):
        build_coefficients("toy_cubic", {"beta": 1})
    pair = build_coefficients("custom", {"drift": "-x + mean(mu)", "diffusion": "1"})
    assert pair.measure_dependent


# kernels --------------------------------------------------------------------

def test_kernel_is_exact_average(rng):
    k = MeanFieldKernel(lambda x: -x, lambda x, y: np.sin(x - y))
    mu = E(rng.normal(size=37))
    x = rng.normal(size=11)
    expected = -x + np.array([np.mean(np.sin(xi - mu.atoms)) for xi in x])
    np.testing.assert_allclose(k(0.0, x, mu), expected, rtol=0, atol=1e-15)


def test_kernel_blocking_does_not_change_results(rng):
    k = MeanFieldKernel(lambda x: 0 * x, lambda x, y: (x - y) ** 2)
    mu = E(rng.normal(size=100))
    x = rng.normal(size=1000)
    full = k(0.0, x, mu)
    k.block = 250
    np.testing.assert_array_equal(k(0.0, x, mu), full)


@given(n=st.integers(1, 20), m=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
def test_kernel_linearity_over_merged_measures(n, m, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n), rng.normal(size=m)
    k = MeanFieldKernel(lambda x: np.zeros_like(x), lambda x, y: np.abs(x - y) + x * y)
    x = rng.normal(size=5)
    merged = k(0.0, x, E(np.concatenate([a, b])))
    mix = (n * k(0.0, x, E(a)) + m * k(0.0, x, E(b))) / (n + m)
    np.testing.assert_allclose(merged, mix, rtol=1e-12, atol=1e-12)


# expressions ----------------------------------------------------------------

@pytest.mark.parametrize("src,x,expected", [
    ("x - 2*x^3", 1.0, -1.0),
    ("abs(x**2 + x)**0.5", 1.0, math.sqrt(2)),
    ("min(x, 1, 0.5) + max(-x, 2)", -3.0, -0.0),
    ("sqrt(4) * pi / e", 0.0, 2 * math.pi / math.e),
    ("-(+x) / 4", 2.0, -0.5),
    ("3", 123.0, 3.0),
])
def test_expression_values(src, x, expected):
    assert float(parse_expression(src)(0.0, x, DIRAC0)) == pytest.approx(expected, abs=1e-15)


def test_expression_uses_time_and_measure():
    e = parse_expression("t * x + mean(mu) - w1_to_dirac0(mu)")
    assert e.uses_measure
    assert float(e(2.0, 3.0, E([-1, 3]))) == pytest.approx(6 + 1 - 2)
    assert not parse_expression("x + t").uses_measure
    out = parse_expression("1")(0.0, np.zeros(4), DIRAC0)
    assert out.shape == (4,) and np.all(out == 1.0)


@pytest.mark.parametrize("src", [
    "__import__('os')", "x.real", "y + 1", "mean(x)", "lambda: 1", "x if x else 1",
    "x[0]", "max(x)", "abs(x, x)", "'text'", "x +", "sqrt(x=1)", "x // 2",
])
def test_expression_rejects(src):
    with pytest.raises(InvalidParams):
        parse_expression(src)


# initial conditions ------------------------------------------------------------

def test_initial_samplers(rng):
    u = rng.uniform(size=200_000)
    assert np.all(Deterministic(1.5).sample(u[:3]) == 1.5)
    x = Uniform(-1, 3).sample(u)
    assert x.min() >= -1 and x.max() <= 3 and abs(x.mean() - 1) < 0.02
    g = Gaussian(2, 0.5).sample(u)
    assert abs(g.mean() - 2) < 0.01 and abs(g.std() - 0.5) < 0.01
    assert build_initial("gaussian", {"m": 1}, a0=0.3).a0 == 0.3
    for kind, params, a0 in [("poisson", {}, 1.0), ("uniform", {"a": 2, "b": 1}, 1.0),
                             ("gaussian", {"s": 0}, 1.0), ("deterministic", {}, 0.0),
                             ("uniform", {"c": 1}, 1.0)]:
        with pytest.raises(InvalidParams):
            build_initial(kind, params, a0)
