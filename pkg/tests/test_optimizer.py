import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridrelay import analytics
from hybridrelay.optimizer import Evaluator, golden_max, omega_bounds, solve_p1, solve_p2


class Toy(Evaluator):
    """Closed-form surface: capacity 4000 sqrt(P) w(1-w), success 1 - exp(-10 w P)."""

    def __init__(self, cfg):
        super().__init__(cfg)

    def __call__(self, omega, p_s):
        key = (float(omega), float(p_s))
        if key not in self.memo:
            c = 4000.0 * math.sqrt(p_s) * omega * (1 - omega)
            s = 1.0 - math.exp(-10.0 * omega * p_s)
            self.memo[key] = (c, s)
            self.trace.append((*key, c, s))
        return self.memo[key]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95))
def test_golden_max_quadratic(x0):
    x, f = golden_max(lambda x: -(x - x0) ** 2, 0.0, 1.0, tol=1e-6)
    assert x == pytest.approx(x0, abs=1e-5)


def test_omega_bounds(cfg):
    lo, hi = omega_bounds(cfg, 1.0)
    assert hi == pytest.approx(1 - 2 * cfg.rho_c / 1.0)
    assert lo < hi
    assert omega_bounds(cfg, 2 * cfg.rho_c * 0.999) is None


def test_p1_toy(cfg):
    ev = Toy(cfg)
    r = solve_p1(cfg, 500.0, 1.0, evaluator=ev, rtol=1e-4, omega_tol=1e-5)
    ob = omega_bounds(cfg, 1.0)
    w_best = min(max(0.5, ob[0]), ob[1])
    p_exact = (500.0 / (4000.0 * w_best * (1 - w_best))) ** 2
    assert r.feasible
    assert r.p_s_star == pytest.approx(p_exact, rel=2e-4)
    assert r.omega_star == pytest.approx(w_best, abs=1e-3)
    assert r.constraint_values["slack"] >= 0
    assert r.constraint_values["monotone_scan"]


def test_p1_zero_target_and_infeasible(cfg):
    r = solve_p1(cfg, 0.0, 1.0, evaluator=Toy(cfg))
    assert r.feasible and r.p_s_star == pytest.approx(1e-3)
    r = solve_p1(cfg, 1e9, 1.0, evaluator=Toy(cfg))
    assert not r.feasible and r.constraint_values["slack"] < 0
    with pytest.raises(ValueError):
        solve_p1(cfg, -1.0, 1.0, evaluator=Toy(cfg))
    r = solve_p1(cfg, 100.0, cfg.rho_c, evaluator=Toy(cfg))
    assert not r.feasible and "reason" in r.constraint_values


def test_p2_toy_beats_dense_grid(cfg):
    ev = Toy(cfg)
    r = solve_p2(cfg, 0.3, 1.0, evaluator=ev)
    ob = omega_bounds(cfg, 1.0)
    W, P = np.meshgrid(np.linspace(*ob, 201), np.geomspace(1e-3, 1.0, 201), indexing="ij")
    C = 4000.0 * np.sqrt(P) * W * (1 - W)
    S = 1.0 - np.exp(-10.0 * W * P)
    best = np.max(np.where(S >= 0.3, C / P, -np.inf))
    assert r.feasible
    assert r.constraint_values["success"] >= 0.3
    assert r.objective >= best * (1 - 1e-3)


def test_p2_infeasible(cfg):
    r = solve_p2(cfg, 0.99999, 1.0, evaluator=Toy(cfg), grid=5)
    assert not r.feasible and r.constraint_values["slack"] < 0
    with pytest.raises(ValueError):
        solve_p2(cfg, 1.0, 1.0, evaluator=Toy(cfg))


def test_result_json(cfg):
    r = solve_p2(cfg, 0.3, 1.0, evaluator=Toy(cfg), grid=5)
    doc = r.to_json()
    assert set(doc) == {"omega_star", "p_s_star_dbm", "objective", "feasible", "constraint_slack",
                        "constraint_values", "evaluations"}
    assert doc["p_s_star_dbm"] == pytest.approx(10 * math.log10(r.p_s_star * 1e3))
    assert doc["evaluations"] == len(r.trace) > 0


def test_analytic_evaluator_memoizes(cfg):
    ev = Evaluator(cfg, "esap")
    a = ev(0.2, 0.1)
    assert ev(0.2, 0.1) == a and len(ev.trace) == 1
    c = cfg.replace(harvest_fraction=0.2, source_power=0.1)
    assert a[1] == pytest.approx(analytics.success(c, "esap").value, rel=1e-12)
    with pytest.raises(ValueError):
        Evaluator(cfg, engine="guess")


def test_simulation_engine_is_seeded(small_cfg):
    a = Evaluator(small_cfg, "abr", engine="simulation", slots=300, seed=3)(0.2, 0.1)
    b = Evaluator(small_cfg, "abr", engine="simulation", slots=300, seed=3)(0.2, 0.1)
    assert a == b
