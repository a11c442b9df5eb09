import json
import math

import numpy as np
import pytest

from fishsim.config import (ConfigError, build_model, config_from_dict,
                            config_to_dict, default_config, derive_model,
                            eval_profile, load_config, serialize_config,
                            PolyProfile)
from fishsim.quadrature import gauss_legendre


def test_default_config_is_valid():
    cfg = default_config()
    assert cfg.body_length == 0.3
    assert cfg.numerics.ritz_modes == 5
    assert cfg.numerics.state_dim == 8


def test_negative_body_length_names_field():
    with pytest.raises(ConfigError, match="body_length"):
        config_from_dict({"geometry": {"body_length": -0.1}})


def test_cubic_modulus_profile_accepted_and_positive():
    cfg = config_from_dict({"material": {
        "youngs_modulus_profile": [0.35e6, 0.0, 0.0, -0.7e6]}})
    s = np.linspace(0, 0.3, 100)
    assert np.all(cfg.youngs_modulus_profile(s) > 0)


def test_modulus_profile_that_goes_negative_rejected():
    with pytest.raises(ConfigError, match="youngs_modulus_profile"):
        config_from_dict({"material": {
            "youngs_modulus_profile": [0.35e6, 0.0, 0.0, -20e6]}})


def test_eval_profile_at_endpoints():
    prof = PolyProfile((0.35e6, 0.0, 0.0, -0.7e6), 0.3)
    assert eval_profile(prof, 0.0) == 0.35e6
    # 0.35e6 - 0.7e6 * 0.3^3 = 331100
    assert eval_profile(prof, 0.3) == pytest.approx(331100.0, rel=1e-14)


def test_eval_profile_zero_polynomial():
    prof = PolyProfile((0.0, 0.0), 0.3)
    assert eval_profile(prof, 0.17) == 0.0


def test_eval_profile_outside_domain_raises():
    prof = PolyProfile((1.0,), 0.3)
    with pytest.raises(ConfigError):
        eval_profile(prof, 0.31)
    with pytest.raises(ConfigError):
        eval_profile(prof, -0.01)


def test_added_mass_per_length_formula():
    cfg = config_from_dict({"geometry": {"height_profile": [0.05]},
                            "fluid": {"density": 1000.0}})
    derived = derive_model(cfg)
    # quarter pi rho h^2 with h = 0.05
    assert derived.rho_a_profile(0.1) == pytest.approx(
        0.25 * math.pi * 1000.0 * 0.05**2, rel=1e-14)
    assert derived.rho_a_profile(0.1) == pytest.approx(1.9635, rel=1e-4)


def test_circular_section_inertia():
    d = 0.04
    cfg = config_from_dict({"geometry": {"width_profile": [d],
                                         "height_profile": [d]}})
    derived = derive_model(cfg)
    assert derived.i_profile(0.2) == pytest.approx(math.pi * d**4 / 64.0, rel=1e-14)


def test_total_mass_uniform_density():
    cfg = config_from_dict({"material": {"density_profile": [1.0]},
                            "head": {"mass": 0.2}})
    derived = derive_model(cfg)
    assert derived.m_total == pytest.approx(0.5, rel=1e-13)


def test_total_mass_quadrature_invariance():
    # polynomial density of degree 2 is integrated exactly at K and 2K nodes
    cfg = config_from_dict({"material": {"density_profile": [2.0, 1.0, 3.0]}})
    length = cfg.body_length
    for k in (8, 16):
        grid = gauss_legendre(k, 0.0, length)
        mass_k = grid.integrate(cfg.density_profile(grid.nodes))
        grid2 = gauss_legendre(2 * k, 0.0, length)
        mass_2k = grid2.integrate(cfg.density_profile(grid2.nodes))
        assert mass_k == pytest.approx(mass_2k, rel=1e-12)


def test_serialize_round_trip(tmp_path):
    cfg = config_from_dict({"gait": {"frequency": 2.5},
                            "numerics": {"ritz_modes": 4}})
    text = serialize_config(cfg)
    path = tmp_path / "cfg.json"
    path.write_text(text)
    again = load_config(path)
    assert again == cfg


def test_toml_and_json_configs_load(tmp_path):
    toml_path = tmp_path / "cfg.toml"
    toml_path.write_text("[gait]\nfrequency = 1.5\n")
    cfg = load_config(toml_path)
    assert cfg.gait.frequency == 1.5
    json_path = tmp_path / "cfg.json"
    json_path.write_text(json.dumps({"gait": {"frequency": 1.5}}))
    assert load_config(json_path) == cfg


def test_missing_file_and_bad_parse(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="typo_field"):
        config_from_dict({"gait": {"typo_field": 1.0}})


def test_head_invariants_enforced():
    with pytest.raises(ConfigError, match="head.mass"):
        config_from_dict({"head": {"mass": 0.0}})
    with pytest.raises(ConfigError, match="positive semidefinite"):
        config_from_dict({"head": {"drag_matrix": [[-1.0, 0, 0], [0, 1, 0], [0, 0, 1]]}})
    with pytest.raises(ConfigError, match="symmetric"):
        config_from_dict({"head": {"drag_matrix": [[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]}})


def test_quadrature_node_floor():
    with pytest.raises(ConfigError, match="quadrature_nodes"):
        config_from_dict({"numerics": {"ritz_modes": 5, "quadrature_nodes": 9}})


def test_zero_fluid_density_allowed_for_conservation_runs():
    cfg = config_from_dict({"fluid": {"density": 0.0, "body_drag_coefficient": 0.0}})
    model = build_model(cfg)
    assert np.all(model.rho_a_nodes == 0.0)
    assert np.all(model.derived.added_mass_head == 0.0)


def test_derived_model_deterministic():
    raw = {"material": {"density_profile": [1.5, 0.3]}}
    m1 = build_model(config_from_dict(raw))
    m2 = build_model(config_from_dict(raw))
    assert np.array_equal(m1.rho_nodes, m2.rho_nodes)
    assert np.array_equal(m1.ei_nodes, m2.ei_nodes)
    assert m1.derived.m_total == m2.derived.m_total
    assert np.array_equal(m1.derived.added_mass_head, m2.derived.added_mass_head)


def test_config_hash_stable_and_sensitive():
    from fishsim.config import config_hash
    a = config_from_dict({})
    b = config_from_dict({"gait": {"frequency": 2.0000001}})
    assert config_hash(a) == config_hash(default_config())
    assert config_hash(a) != config_hash(b)
