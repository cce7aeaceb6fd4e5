import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvsvi.errors import InvalidParams
from mvsvi.measures import (
    EmpiricalMeasure,
    exp_moment,
    moment,
    sup_wasserstein,
    w1_to_dirac0,
    wasserstein,
    write_atoms_csv,
)

E = EmpiricalMeasure
atoms = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=30)


def brute_force(a, b, p):
    return min(np.mean(np.abs(np.asarray(a) - np.asarray(b)[list(perm)]) ** p)
               for perm in itertools.permutations(range(len(a)))) ** (1 / p)


def quantile_oracle(x, y, p):
    # midpoint rule on the quantile functions; exact because every breakpoint is a grid node
    grid = len(x) * len(y) * 100
    u = (np.arange(grid) + 0.5) / grid
    qx = np.sort(x)[np.minimum((u * len(x)).astype(int), len(x) - 1)]
    qy = np.sort(y)[np.minimum((u * len(y)).astype(int), len(y) - 1)]
    return np.mean(np.abs(qx - qy) ** p) ** (1 / p)


def test_wasserstein_examples():
    assert wasserstein(E([0, 1]), E([1, 2]), 1) == 1.0
    mu = E([3.0, -1.0, 2.5])
    assert wasserstein(mu, mu, 1) == 0.0 and wasserstein(mu, mu, 3) == 0.0
    assert wasserstein(E([0, 2]), E([1, 1]), 2) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InvalidParams):
        wasserstein(mu, mu, 0.5)


def test_moment_examples():
    assert moment(E([-1, 1]), 2) == 1.0
    assert moment(E([0.0]), 3.7) == 0.0
    assert moment(E([1, 2, 3]), 1) == 2.0
    with pytest.raises(InvalidParams):
        moment(E([1.0]), 0)


def test_exp_moment_examples():
    assert exp_moment(E([0.0]), 1) == 1.0
    assert exp_moment(E([math.log(2), -math.log(2)]), 1) == pytest.approx(2.0, rel=1e-15)
    assert exp_moment(E([0, 1]), 2) == pytest.approx((1 + math.e**2) / 2, rel=1e-15)
    assert exp_moment(E([1e6]), 1.0) == math.inf
    with pytest.raises(InvalidParams):
        exp_moment(E([0.0]), 0.0)


def test_w1_to_dirac_examples():
    assert w1_to_dirac0(E([0.0])) == 0.0
    assert w1_to_dirac0(E([3.0])) == 3.0
    assert w1_to_dirac0(E([-1, 2])) == 1.5
    mu = E([-4, 0.5, 7, 2])
    assert w1_to_dirac0(mu) == wasserstein(mu, E.dirac(0.0), 1) == moment(mu, 1)


def test_atoms_sorted_and_immutable():
    mu = E([3, 1, 2])
    np.testing.assert_array_equal(mu.atoms, [1, 2, 3])
    with pytest.raises(ValueError):
        mu.atoms[0] = 5.0
    with pytest.raises(InvalidParams):
        E([])
    with pytest.raises(InvalidParams):
        E([1.0, math.nan])


def test_brute_force_oracle(rng):
    for _ in range(300):
        n = int(rng.integers(1, 7))
        a, b = rng.normal(size=n), rng.normal(size=n) * 3
        for p in (1.0, 2.0, 3.0):
            assert abs(wasserstein(E(a), E(b), p) - brute_force(a, b, p)) <= 1e-12


@pytest.mark.parametrize("n,m", [(1, 3), (2, 5), (4, 6), (7, 3), (10, 16)])
def test_unequal_sizes_match_quantile_integration(n, m, rng):
    for _ in range(5):
        x, y = rng.normal(size=n), rng.normal(1, 2, size=m)
        for p in (1.0, 2.0):
            assert wasserstein(E(x), E(y), p) == pytest.approx(quantile_oracle(x, y, p),
                                                                rel=1e-9, abs=1e-12)


def test_unequal_size_replication_invariance(rng):
    x, y = rng.normal(size=4), rng.normal(size=6)
    base = wasserstein(E(x), E(y), 2)
    assert wasserstein(E(np.repeat(x, 3)), E(np.repeat(y, 2)), 2) == pytest.approx(base,
                                                                                    rel=1e-13)


@given(a=atoms, b=atoms, c=atoms, p=st.sampled_from([1.0, 2.0, 3.5]))
def test_metric_axioms(a, b, c, p):
    A, B, C = E(a), E(b), E(c)
    assert wasserstein(A, B, p) == wasserstein(B, A, p)
    assert wasserstein(A, A, p) == 0.0
    scale = 1 + max(map(abs, a + b + c))
    assert wasserstein(A, C, p) <= wasserstein(A, B, p) + wasserstein(B, C, p) + 1e-12 * scale


@given(data=st.data(), n=st.integers(1, 40))
def test_monotone_in_order(data, n):
    a = data.draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n))
    b = data.draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n))
    vals = [wasserstein(E(a), E(b), p) for p in (1.0, 1.5, 2.0, 4.0)]
    assert all(x <= y * (1 + 1e-12) + 1e-12 for x, y in zip(vals, vals[1:]))


@given(a=atoms, b=atoms, c=st.floats(-1e3, 1e3))
def test_translation_covariance(a, b, c):
    w = wasserstein(E(a), E(b), 2)
    w_shift = wasserstein(E(a).shift(c), E(b).shift(c), 2)
    assert w_shift == pytest.approx(w, rel=1e-9, abs=1e-9)


def test_sup_wasserstein():
    fa = [E([0.0]), E([1.0]), E([2.0])]
    fb = [E([0.0]), E([3.0]), E([2.5])]
    assert sup_wasserstein(fa, fb) == 2.0
    with pytest.raises(InvalidParams):
        sup_wasserstein(fa, fb[:2])


def test_csv_dump(tmp_path):
    path = write_atoms_csv(tmp_path / "mu.csv", E([0.1, -2.0]), 7, "abc123")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["atoms[time_index=7;scenario=abc123]"]
    assert [float(r[0]) for r in rows[1:]] == [-2.0, 0.1]
