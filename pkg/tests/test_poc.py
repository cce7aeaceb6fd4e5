import csv
import math

import numpy as np
import pytest

from mvsvi.coefficients import ou_meanfield, toy_cubic
from mvsvi.convex import IndicatorInterval
from mvsvi.errors import ConfigError, DegenerateFit, InvalidParams
from mvsvi.initial import Gaussian
from mvsvi.paths import NoiseKey
from mvsvi.poc import PocRow, PocTable, fit_loglog, fit_rate, run_poc
from mvsvi.schemes import SchemeConfig

CFG = SchemeConfig("proximal", 0.02)


def table(Ns, values, column="w2sq_mean"):
    rows = []
    for n, v in zip(Ns, values):
        kw = {"mean_sup_error": 1.0, "std_error": 0.0, "w2sq_mean": 1.0, column: v}
        rows.append(PocRow(N=n, trials=1, **kw))
    return PocTable(rows)


NS = [64, 256, 1024, 4096]


def test_fit_exact_power_law():
    fit = fit_rate(table(NS, [n**-0.5 for n in NS]))
    assert fit.slope == pytest.approx(-0.5, abs=1e-12) and fit.r_squared == pytest.approx(1.0)


def test_fit_constant():
    fit = fit_rate(table(NS, [0.3] * 4))
    assert fit.slope == 0.0 and fit.intercept == pytest.approx(math.log(0.3))


def test_fit_noisy_quarter_rate():
    eta = [0.05, -0.05, 0.03, -0.04]
    fit = fit_rate(table(NS, [3 * n**-0.25 * (1 + e) for n, e in zip(NS, eta)],
                         "mean_sup_error"), "mean_sup_error")
    assert -0.35 <= fit.slope <= -0.15


def test_fit_errors():
    with pytest.raises(DegenerateFit):
        fit_rate(table(NS, [1.0, 0.5, 0.0, 0.1]))
    with pytest.raises(InvalidParams):
        fit_rate(table(NS[:2], [1.0, 0.5]))
    with pytest.raises(InvalidParams):
        fit_loglog([1.0], [1.0])


def test_table_invariants(tmp_path):
    with pytest.raises(InvalidParams):
        table([64, 64], [1, 1])
    with pytest.raises(InvalidParams):
        PocTable([PocRow(4, 0, 1.0, 0.0, 1.0)])
    t = table(NS, [1, 2, 3, 4])
    t.floor_estimate = 0.25
    rows = list(csv.reader(t.to_csv(tmp_path / "t.csv").open()))
    assert rows[0] == ["N", "trials", "mean_sup_error", "std_error", "w2sq_mean",
                       "floor_estimate"]
    assert rows[1][:2] == ["64", "1"] and float(rows[4][4]) == 4.0 and float(rows[1][5]) == 0.25


def test_rate_summary():
    s = fit_loglog([1, 2, 4], [1, 0.5, 0.25]).summary("err", "dt")
    assert s.startswith("err ~ exp(") and "dt^(-1)" in s


def test_config_errors():
    args = (ou_meanfield(), IndicatorInterval(-5, 5), CFG, Gaussian())
    with pytest.raises(ConfigError):
        run_poc(*args, [16, 64], 32, 1, NoiseKey(1), 0.1)
    with pytest.raises(ConfigError):
        run_poc(*args, [64, 16], 128, 1, NoiseKey(1), 0.1)
    with pytest.raises(ConfigError):
        run_poc(*args, [16], 128, 0, NoiseKey(1), 0.1)


def test_measure_free_null_case_is_exactly_zero():
    tab = run_poc(toy_cubic(), IndicatorInterval(-2, 2), CFG, Gaussian(0, 0.3), [8, 32, 128],
                  256, 2, NoiseKey(11), 0.5, probe_particles=4)
    assert np.all(tab.column("mean_sup_error") == 0.0)
    assert tab.coupling_verified is True
    assert np.all(tab.column("w2sq_mean") > 0)


def test_meanfield_coupling_and_decrease():
    tab = run_poc(ou_meanfield(), IndicatorInterval(-5, 5), SchemeConfig("proximal", 0.05),
                  Gaussian(1.0, 1.0), [16, 64, 256, 1024], 4096, 4, NoiseKey(7), 1.0,
                  probe_particles=8)
    assert tab.coupling_verified is True
    errs = tab.column("mean_sup_error")
    assert errs[-1] < errs[0]
    assert 0 < tab.floor_estimate < errs[0]
    assert np.all(np.isfinite(tab.column("std_error")))
    w2 = fit_rate(tab)
    assert w2.slope < 0
