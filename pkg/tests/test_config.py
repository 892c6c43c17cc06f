import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rswave.config import RunConfig, config_hash, dump_config, parse_config, with_overrides
from rswave.errors import ConfigError


def test_defaults_round_trip():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert parse_config(dump_config(cfg)) == cfg
    assert config_hash(cfg) == config_hash(parse_config(dump_config(cfg)))


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0.01, 0.9), alpha=st.floats(0.1, 2.0), seed=st.integers(0, 2**63),
       n=st.sampled_from([64, 256, 1024]))
def test_round_trip_is_fixed_point(eps, alpha, seed, n):
    cfg = parse_config(f"eps = {eps!r}\nalpha = {alpha!r}\nseed = {seed}\n[grid]\nn = {n}\n")
    again = parse_config(dump_config(cfg))
    assert again == cfg and dump_config(again) == dump_config(cfg)


def test_errors_carry_key_paths():
    with pytest.raises(ConfigError) as exc:
        parse_config('eps = "a"\n[grid]\nn = 100\nfoo = 1\n')
    keys = {k for k, _ in exc.value.errors}
    assert {"eps", "grid.foo"} <= keys


def test_constraint_errors():
    with pytest.raises(ConfigError) as exc:
        parse_config("eps = 0.05\n[grid]\nn = 100\nL = 10.0\n")
    keys = {k for k, _ in exc.value.errors}
    assert "grid.n" in keys and "grid.L" in keys


def test_cfl_constraint():
    with pytest.raises(ConfigError) as exc:
        parse_config("[kinetic]\ndt = 10.0\n")
    assert any(k == "kinetic.dt" for k, _ in exc.value.errors)


def test_wigner_scenario_requires_beta():
    with pytest.raises(ConfigError):
        parse_config('scenario = "wigner"\nalpha = 0.7\n')
    cfg = parse_config('scenario = "wigner"\nalpha = 0.7\nbeta = 1.3\n')
    assert cfg.beta == 1.3


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("eps = = 1")


def test_overrides():
    cfg = with_overrides(RunConfig(), seed=7, eps=None)
    assert cfg.seed == 7
    with pytest.raises(ConfigError):
        with_overrides(RunConfig(), seed=-1)


def test_derived_objects():
    cfg = RunConfig()
    assert cfg.kappa == pytest.approx(0.05**0.5)
    assert cfg.model().dim == 1
    assert cfg.ensemble(workers=2).workers == 2
