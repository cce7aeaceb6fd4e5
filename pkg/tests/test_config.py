import math

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from mvsvi.config import (
    EXPERIMENT_PARAMS,
    builtin_scenarios,
    canonical_text,
    config_from_dict,
    config_hash,
    load_config,
    materialize,
    parse_config,
)
from mvsvi.convex import IndicatorInterval
from mvsvi.errors import ParseError, ValidationError

BASE = {
    "name": "t",
    "seed": 1,
    "coefficients": {"kind": "toy_cubic"},
    "initial": {"kind": "uniform", "params": {"a": -0.5, "b": 0.5}},
    "grid": {"T": 1.0, "dt": 0.01},
    "experiment": {"kind": "simulate", "params": {"paths": 10}},
}


def with_(**changes):
    d = yaml.safe_load(yaml.safe_dump(BASE))
    for path, value in changes.items():
        cur = d
        keys = path.split("__")
        for k in keys[:-1]:
            cur = cur.setdefault(k, {})
        cur[keys[-1]] = value
    return d


def test_builtin_toy_scenario():
    cfg = load_config("toy_cubic")
    sc = materialize(cfg)
    assert isinstance(sc.psi, IndicatorInterval)
    assert (sc.psi.lo, sc.psi.hi) == (-2.0, 2.0)
    assert sc.pair.name == "toy_cubic"
    assert load_config("builtin:toy_cubic.scenario") == cfg


@pytest.mark.parametrize("name", sorted(builtin_scenarios()))
def test_every_builtin_loads_and_round_trips(name):
    cfg = load_config(name)
    assert parse_config(canonical_text(cfg)) == cfg
    materialize(cfg)


def test_dt_zero_names_the_field():
    with pytest.raises(ValidationError) as exc:
        config_from_dict(with_(grid__dt=0))
    assert any("grid.dt" in e for e in exc.value.errors)


def test_unknown_coefficient_lists_registry():
    with pytest.raises(ValidationError) as exc:
        config_from_dict(with_(coefficients__kind="heat"))
    msg = str(exc.value)
    assert "toy_cubic" in msg and "ou_meanfield" in msg and "cir_like" in msg


def test_all_errors_reported_together():
    bad = with_(grid__dt=-1, seed="x", extra=3, experiment__params={"paths": 0, "bogus": 1})
    with pytest.raises(ValidationError) as exc:
        config_from_dict(bad)
    text = "\n".join(exc.value.errors)
    for needle in ("grid.dt", "seed", "extra", "paths", "bogus"):
        assert needle in text
    assert len(exc.value.errors) >= 5


def test_unknown_nested_keys_rejected():
    for d in (with_(grid__steps=3), with_(initial__shape=1), with_(scheme__kind="implicit")):
        with pytest.raises(ValidationError):
            config_from_dict(d)


def test_scheme_constraints_checked_at_load():
    with pytest.raises(ValidationError, match="n"):
        config_from_dict(with_(scheme={"kind": "penalized", "n": 1000}))
    cfg = config_from_dict(with_(scheme={"kind": "penalized", "n": 100}))
    assert materialize(cfg).scheme.taming is True


def test_grid_must_divide_horizon():
    with pytest.raises(ValidationError):
        config_from_dict(with_(grid__dt=0.3))


def test_psi_defaults_to_pair_constraint():
    cfg = config_from_dict(BASE)
    assert cfg.psi.kind == "interval" and cfg.psi.params == {"lo": -2.0, "hi": 2.0}


def test_experiment_defaults_filled():
    cfg = config_from_dict(with_(experiment={"kind": "picard"}))
    assert cfg.experiment.params == {k: d for k, (d, _, _) in EXPERIMENT_PARAMS["picard"].items()}
    with pytest.raises(ValidationError, match="N_list"):
        config_from_dict(with_(experiment={"kind": "poc", "params": {"M_ref": 10}}))


def test_parse_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_config("name: x\nseed: [1, 2\ngrid: {}\n")
    assert exc.value.line is not None and exc.value.column is not None
    with pytest.raises(ParseError):
        parse_config("- just\n- a list\n")


def test_missing_file():
    with pytest.raises(ValidationError, match="not found"):
        load_config("/nonexistent/file.scenario")


def test_hash_is_stable_and_sensitive():
    a = config_from_dict(BASE)
    assert config_hash(a) == config_hash(config_from_dict(BASE))
    assert config_hash(a) != config_hash(config_from_dict(with_(seed=2)))
    assert len(config_hash(a)) == 16


def test_infinite_bounds_round_trip():
    cfg = load_config("reflected_bm")
    assert cfg.psi.params["hi"] == math.inf
    assert parse_config(canonical_text(cfg)) == cfg


@given(seed=st.integers(0, 2**63 - 1), T=st.sampled_from([0.5, 1.0, 2.0]),
       steps=st.integers(1, 400), paths=st.integers(1, 10**6), a=st.floats(-5, 0),
       width=st.floats(0.01, 5))
def test_round_trip_property(seed, T, steps, paths, a, width):
    d = with_(seed=seed, grid={"T": T, "dt": T / steps},
              initial={"kind": "uniform", "params": {"a": a, "b": a + width}},
              experiment={"kind": "simulate", "params": {"paths": paths}})
    cfg = config_from_dict(d)
    again = parse_config(canonical_text(cfg))
    assert again == cfg and canonical_text(again) == canonical_text(cfg)
