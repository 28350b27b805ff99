import json
import math

import pytest

from hybridrelay.config import (ConfigError, SystemConfig, config_from_dict, config_to_doc, dbm_to_w,
                                load_config, profile_path, resolve_field)


def table2_doc():
    return json.loads(profile_path("table2").read_text())


def test_thresholds_linear(cfg):
    assert cfg.tau_w == pytest.approx(1.0)
    assert cfg.tau_a == pytest.approx(100.0)


def test_density_conversion():
    doc = table2_doc()
    doc["interferer_density_per_km2"] = 2000
    assert config_from_dict(doc).interferer_density == pytest.approx(2e-3)


def test_reference_values(cfg):
    assert cfg.emitter_power == pytest.approx(10.0)
    assert cfg.interferer_power == pytest.approx(0.1)
    assert cfg.source_power == pytest.approx(0.1)
    assert cfg.rho_w == pytest.approx(50e-6)
    assert cfg.rho_a == pytest.approx(5e-6)
    assert cfg.rho_c == pytest.approx(0.02)
    assert cfg.etcp_n == 5
    # -120 dBm/Hz over 50 kHz
    assert cfg.noise_active == pytest.approx(dbm_to_w(-120 + 10 * math.log10(5e4)))


def test_normalized_thresholds(cfg):
    wb = cfg.harvest_fraction * cfg.conversion_efficiency
    assert cfg.varrho_w == pytest.approx(cfg.wpr_circuit_energy / cfg.slot_duration / wb)
    assert cfg.varrho_a < cfg.varrho_w < cfg.varrho_c


def test_omega_out_of_range_rejected():
    doc = table2_doc()
    doc["harvest_fraction"] = 1.2
    with pytest.raises(ConfigError) as exc:
        config_from_dict(doc)
    assert any("omega" in p for p in exc.value.problems)


def test_all_problems_reported():
    doc = table2_doc()
    doc["harvest_fraction"] = 1.2
    del doc["d_sr_m"]
    doc["bandwidth"] = 5
    doc["interferer_repulsion"] = 0.3
    with pytest.raises(ConfigError) as exc:
        config_from_dict(doc)
    text = "\n".join(exc.value.problems)
    assert "d_sr" in text and "bandwidth" in text
    assert len(exc.value.problems) >= 3


def test_unknown_field():
    doc = table2_doc()
    doc["warp_factor"] = 9
    with pytest.raises(ConfigError, match="warp_factor"):
        config_from_dict(doc)


def test_energy_ordering():
    doc = table2_doc()
    doc["abr_circuit_energy_uj"] = 500
    with pytest.raises(ConfigError, match="E_A <= E_W <= E_C"):
        config_from_dict(doc)


def test_ppp_marker(ppp_cfg):
    assert ppp_cfg.emitter_repulsion == "ppp"
    doc = table2_doc()
    doc["emitter_repulsion"] = "poisson"
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_si_echo_roundtrip(cfg):
    assert config_from_dict(config_to_doc(cfg)) == cfg


def test_digest_stable(cfg):
    assert cfg.digest() == cfg.replace().digest()
    assert cfg.digest() != cfg.replace(harvest_fraction=0.5).digest()


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_resolve_field():
    assert resolve_field("interferer_density_per_km2", 1000) == ("interferer_density", pytest.approx(1e-3))
    assert resolve_field("tau_w_db", 10)[1] == pytest.approx(10.0)
    assert resolve_field("harvest_fraction", 0.3) == ("harvest_fraction", 0.3)
    with pytest.raises(ConfigError):
        resolve_field("nonsense", 1)


def test_exclusion_bounds(cfg):
    assert cfg.replace(exclusion_radius=cfg.d_rd).problems()
    assert not cfg.replace(exclusion_radius=0.0).problems()
