import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridrelay import analytics as an


def enumerate_commit(s_w, s_a, n):
    """Exhaustive 2^(2n) enumeration of exploration outcomes."""
    w = a = 0.0
    for bits in itertools.product((0, 1), repeat=2 * n):
        bw, ba = bits[:n], bits[n:]
        p = 1.0
        for b in bw:
            p *= s_w if b else 1 - s_w
        for b in ba:
            p *= s_a if b else 1 - s_a
        if sum(bw) > sum(ba):
            w += p
        elif sum(ba) > sum(bw):
            a += p
    return w, a, 1 - w - a


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 5))
@settings(max_examples=60, deadline=None)
def test_commit_probabilities_enumeration(s_w, s_a, n):
    got = an.etcp_commit_probabilities(s_w, s_a, n)
    ref = enumerate_commit(s_w, s_a, n)
    assert got == pytest.approx(ref, abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 10))
def test_commit_probabilities_symmetry(s_w, s_a, n):
    w, a, t = an.etcp_commit_probabilities(s_w, s_a, n)
    w2, a2, t2 = an.etcp_commit_probabilities(s_a, s_w, n)
    assert w == pytest.approx(a2, abs=1e-12) and t == pytest.approx(t2, abs=1e-12)
    assert min(w, a, t) >= -1e-12


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 10))
def test_etcp_beats_urms(s_w, s_a, n):
    e = an.etcp_combine(s_w, s_a, s_w, s_a, n)
    assert e >= 0.5 * (s_w + s_a) - 1e-12
    assert e <= max(s_w, s_a) + 1e-12


def test_commit_input_checks():
    with pytest.raises(ValueError):
        an.etcp_commit_probabilities(0.5, 0.5, 0)
    with pytest.raises(ValueError):
        an.etcp_commit_probabilities(1.5, 0.5, 2)


def test_lagrange_weights_partition_unity():
    t = np.linspace(0, 1, 7)
    w = an._lagrange4(t)
    assert np.allclose(w.sum(axis=1), 1.0)
    assert np.allclose(w @ np.array([-1, 0, 1, 2.0]), t)


def test_lattice_matches_direct(cfg):
    fld = an.interference_field(cfg)
    for A, B in [(279.5, 419.0), (50.0, 3000.0), (2000.0, 70.0)]:
        assert fld.log_j(A, B) == pytest.approx(fld.joint_log(A, B), rel=1e-4, abs=1e-6)
    # B = 0 reduces to the relay-only functional
    assert fld.log_j(300.0, 0.0) == pytest.approx(float(fld.relay_log(300.0)[0]), rel=1e-12)


def test_chi_joint_exact_vs_lattice(cfg):
    v, p = cfg.tau_w, 0.3 * cfg.rho_c
    assert an.chi_joint(v, p, cfg) == pytest.approx(an.chi_joint(v, p, cfg, exact=True), rel=1e-4)


def test_success_table2(cfg):
    s = an.success_esap(cfg)
    assert 0 < s.value < 1
    assert s.value == pytest.approx(s.breakdown["S_W"] + s.breakdown["S_A"], rel=1e-12)
    assert s.breakdown["S_W"] == pytest.approx(an.success_wpr(cfg).value, rel=1e-12)
    g = an.gains(cfg)
    assert g["G_over_ABR"] == pytest.approx(g["G_over_ABR_diff"], abs=1e-12)
    assert g["G_over_WPR"] == pytest.approx(g["G_over_WPR_diff"], abs=1e-12)


def test_urms_is_average(cfg):
    assert an.success_urms(cfg).value == pytest.approx(
        0.5 * (an.success_abr(cfg).value + an.success_wpr(cfg).value), rel=1e-12)


def test_relay_success_decreasing(cfg):
    vals = [an.relay_success(v, cfg) for v in (0.5, 1.0, 2.0, 5.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_wpr_success_curve(cfg):
    v = np.array([1.0, 3.0, 10.0, 100.0])
    s = an.wpr_success_curve(v, cfg)
    assert s[0] == pytest.approx(an.success_wpr(cfg).value, rel=1e-6)
    assert np.all(np.diff(s) < 0)


def test_capacity_decomposition(cfg):
    c = an.capacity_esap(cfg)
    pre = (1 - cfg.harvest_fraction) / 2
    assert c.value == pytest.approx(an.capacity_wpr(cfg).value + pre * cfg.backscatter_capacity
                                    * c.breakdown["S_A"], rel=1e-12)
    assert an.capacity_abr(cfg).value == pytest.approx(pre * cfg.backscatter_capacity
                                                       * an.success_abr(cfg).value, rel=1e-12)
    # the rate on success is at least log2(1 + tau_W)
    assert an.capacity_wpr(cfg).value >= pre * cfg.bandwidth * math.log2(1 + cfg.tau_w) * an.success_wpr(cfg).value


def test_energy_efficiency(cfg):
    assert an.energy_efficiency(cfg, "abr") == pytest.approx(an.capacity_abr(cfg).value / cfg.source_power)


def test_closed_form_guards(cfg):
    with pytest.raises(ValueError):
        an.success_abr_ppp_closed(cfg)


def test_closed_form_matches_general(ppp_cfg):
    c = ppp_cfg.replace(exclusion_radius=0.0)
    assert an.success_abr(c).value == pytest.approx(an.success_abr_ppp_closed(c).value, rel=1e-4)


def test_field_bias_small(cfg):
    b = an.field_bias(cfg, 30.0, 23, protocols=("esap",))
    assert abs(b["esap"]) < 5e-4


def test_disk_cache_roundtrip(cfg, tmp_path):
    fld = an.interference_field(cfg)
    fld.log_j(300.0, 500.0)
    path = tmp_path / "lat.npz"
    fld.save(path)
    other = an.InterferenceField(cfg.interferer_density, cfg.interferer_repulsion, cfg.pathloss_active,
                                 cfg.d_rd, cfg.window_radius, cfg.exclusion_radius)
    assert other.load(path) == len(fld._nodes)
    before = other.evaluations
    assert other.log_j(300.0, 500.0) == fld.log_j(300.0, 500.0)
    assert other.evaluations == before
