"""Design problems over the harvest fraction omega and the source power P_S.

P1: smallest P_S (jointly over omega) whose ergodic capacity reaches a target.
P2: largest energy efficiency C / P_S subject to a success-probability target.

Objectives come from the analytic engine, or from the simulator with fixed seeds.
P_S is searched on a log axis between ``p_min`` and ``p_max``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import analytics
from .config import SystemConfig, w_to_dbm

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OptimizationResult:
    omega_star: float
    p_s_star: float            # W
    objective: float           # W for P1, bit/J for P2
    constraint_values: dict
    feasible: bool
    trace: list = field(default_factory=list)   # (omega, P_S, capacity, success)

    @property
    def evaluations(self) -> int:
        return len(self.trace)

    def to_json(self) -> dict:
        """Result document with the external field names."""
        return {"omega_star": self.omega_star,
                "p_s_star_dbm": w_to_dbm(self.p_s_star) if self.p_s_star > 0 else None,
                "objective": self.objective, "feasible": self.feasible,
                "constraint_slack": self.constraint_values.get("slack"),
                "constraint_values": self.constraint_values, "evaluations": self.evaluations}

    def to_dict(self) -> dict:
        return asdict(self)


def omega_bounds(cfg: SystemConfig, p_max: float, margin: float = 1e-3):
    """Admissible omega interval; the relay ceiling 2 rho_C/(1 - omega) must stay within p_max.

    Returns None when no omega satisfies the ceiling.
    """
    hi = 1.0 - margin
    if 2.0 * cfg.rho_c > 0.0:
        hi = min(hi, 1.0 - 2.0 * cfg.rho_c / p_max)
    lo = margin
    return (lo, hi) if hi > lo else None


class Evaluator:
    """Memoized (capacity, success) at (omega, P_S); records every distinct point."""

    def __init__(self, cfg: SystemConfig, protocol: str = "esap", engine: str = "analytic",
                 slots: int = 20_000, seed: int = 0):
        if engine not in ("analytic", "simulation"):
            raise ValueError("engine must be 'analytic' or 'simulation'")
        self.cfg, self.protocol, self.engine = cfg, protocol, engine
        self.slots, self.seed = slots, seed
        self.memo: dict = {}
        self.trace: list = []

    def __call__(self, omega: float, p_s: float):
        key = (float(omega), float(p_s))
        hit = self.memo.get(key)
        if hit is None:
            c = self.cfg.replace(harvest_fraction=key[0], source_power=key[1])
            if self.engine == "analytic":
                cap = analytics.capacity(c, self.protocol).value
                suc = analytics.success(c, self.protocol).value
            else:
                from .simulator import SimulationPlan, estimate
                rep = estimate(SimulationPlan(c, self.protocol, self.slots, self.seed))
                cap, suc = rep.capacity_bps, rep.success_probability
            hit = (cap, suc)
            self.memo[key] = hit
            self.trace.append((key[0], key[1], cap, suc))
        return hit

    def capacity(self, omega, p_s):
        return self(omega, p_s)[0]

    def success(self, omega, p_s):
        return self(omega, p_s)[1]


def golden_max(f, a: float, b: float, tol: float = 1e-3, seeds: int = 9):
    """Maximize f on [a, b]: coarse scan, then golden section around the best seed."""
    xs = np.linspace(a, b, seeds)
    fs = [f(x) for x in xs]
    k = int(np.argmax(fs))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, seeds - 1)]
    best_x, best_f = xs[k], fs[k]
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol * (b - a):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    for x, v in ((x1, f1), (x2, f2)):
        if v > best_f:
            best_x, best_f = x, v
    return float(best_x), float(best_f)


# ---------------------------------------------------------------- P1

def solve_p1(cfg: SystemConfig, c_target: float, p_max: float, protocol: str = "esap",
             p_min: float | None = None, rtol: float = 1e-3, evaluator: Evaluator | None = None,
             omega_tol: float = 1e-3) -> OptimizationResult:
    """Minimum source power meeting ``c_target`` (bit/s), jointly over omega."""
    if c_target < 0:
        raise ValueError("c_target must be nonnegative")
    ev = evaluator or Evaluator(cfg, protocol)
    p_min = p_max * 1e-3 if p_min is None else p_min
    ob = omega_bounds(cfg, p_max)
    if ob is None:
        return OptimizationResult(float("nan"), float("nan"), float("nan"),
                                  {"reason": "relay power ceiling exceeds p_max for every omega"},
                                  False, ev.trace)

    def best(p):
        return golden_max(lambda w: ev.capacity(w, p), *ob, tol=omega_tol)

    if c_target == 0:
        w, c = best(p_min)
        return OptimizationResult(w, p_min, p_min, {"capacity": c, "slack": c}, True, ev.trace)
    # monotonicity pre-scan of the best capacity along P_S
    scan = np.geomspace(p_min, p_max, 7)
    caps = [best(p) for p in scan]
    vals = [c for _, c in caps]
    monotone = all(b >= a * (1 - 1e-6) for a, b in zip(vals, vals[1:]))
    ok = [i for i, c in enumerate(vals) if c >= c_target]
    if not ok:
        return OptimizationResult(caps[-1][0], p_max, float("nan"),
                                  {"capacity": vals[-1], "slack": vals[-1] - c_target,
                                   "monotone_scan": monotone}, False, ev.trace)
    k = ok[0]
    if k == 0:
        w, c = caps[0]
        return OptimizationResult(w, p_min, p_min, {"capacity": c, "slack": c - c_target,
                                                    "monotone_scan": monotone}, True, ev.trace)
    # bisection in log P_S on the first bracket that crosses the target
    lo, hi = math.log(scan[k - 1]), math.log(scan[k])
    w_hi, c_hi = caps[k]
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        w, c = best(math.exp(mid))
        if c >= c_target:
            hi, w_hi, c_hi = mid, w, c
        else:
            lo = mid
    p = math.exp(hi)
    return OptimizationResult(w_hi, p, p, {"capacity": c_hi, "slack": c_hi - c_target,
                                           "monotone_scan": monotone}, True, ev.trace)


# ---------------------------------------------------------------- P2

def _ride_boundary(score, s_target, box, grid, tol):
    """Efficiency along the success boundary, maximized over the whole omega range.

    Success is nondecreasing in P_S at fixed omega (P_S only enters the S->R SINR), so
    the smallest feasible ln P_S is a root of S - s_target on the full axis.
    Returns (efficiency, omega, ln P_S) or None when no omega is feasible.
    """
    y0, y1 = box[1]

    def edge(w):
        if score(w, y1)[0] == -math.inf:
            return -math.inf, y1
        if score(w, y0)[0] > -math.inf:
            return score(w, y0)[0], y0
        root = brentq(lambda v: score(w, v)[2] - s_target, y0, y1, xtol=1e-7)
        while score(w, root)[0] == -math.inf:     # step onto the feasible side
            root = min(root + 1e-7, y1)
        return score(w, root)[0], root

    w, e = golden_max(lambda w: edge(w)[0], *box[0], tol=tol, seeds=grid)
    if e == -math.inf:
        return None
    return e, w, edge(w)[1]


def grid_values(ev: Evaluator, omegas, powers):
    """(capacity, success) arrays on the omega x P_S grid (rows follow omega)."""
    C = np.empty((len(omegas), len(powers)))
    S = np.empty_like(C)
    for i, w in enumerate(omegas):
        for j, p in enumerate(powers):
            C[i, j], S[i, j] = ev(float(w), float(p))
    return C, S


def solve_p2(cfg: SystemConfig, s_target: float, p_max: float, protocol: str = "esap",
             p_min: float | None = None, grid: int = 11, evaluator: Evaluator | None = None,
             step_tol: float = 1e-3, n_starts: int = 3) -> OptimizationResult:
    """Maximum energy efficiency C/P_S subject to success >= ``s_target``."""
    if not 0.0 <= s_target < 1.0:
        raise ValueError("s_target must lie in [0, 1)")
    ev = evaluator or Evaluator(cfg, protocol)
    p_min = p_max * 1e-3 if p_min is None else p_min
    ob = omega_bounds(cfg, p_max)
    if ob is None:
        return OptimizationResult(float("nan"), float("nan"), float("nan"),
                                  {"reason": "relay power ceiling exceeds p_max for every omega"},
                                  False, ev.trace)
    # search coordinates: x = omega, y = ln P_S
    box = np.array([[ob[0], ob[1]], [math.log(p_min), math.log(p_max)]])

    def score(x, y):
        c, s = ev(x, math.exp(y))
        feas = s >= s_target
        return (c / math.exp(y) if feas else -math.inf), c, s

    xs = np.linspace(*box[0], grid)
    ys = np.linspace(*box[1], grid)
    seeds = []
    for x in xs:
        for y in ys:
            e, _, _ = score(float(x), float(y))
            if e > -math.inf:
                seeds.append((e, float(x), float(y)))
    if not seeds:
        # no feasible seed: report the most reliable point seen
        w, p, c, s = max(ev.trace, key=lambda t: t[3])
        return OptimizationResult(w, p, float("nan"), {"success": s, "capacity": c,
                                                       "slack": s - s_target}, False, ev.trace)
    seeds.sort(reverse=True)
    best = None
    for e0, x0, y0 in seeds[:n_starts]:
        x, y, e = x0, y0, e0
        step = np.array([(box[0, 1] - box[0, 0]) / (grid - 1), (box[1, 1] - box[1, 0]) / (grid - 1)])
        while True:
            moved = False
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nx = min(max(x + dx * step[0], box[0, 0]), box[0, 1])
                ny = min(max(y + dy * step[1], box[1, 0]), box[1, 1])
                if (nx, ny) == (x, y):
                    continue
                ne, _, _ = score(nx, ny)
                if ne > e:
                    x, y, e, moved = nx, ny, ne, True
                    break
            if not moved:
                step = step / 2.0
                if np.all(step <= step_tol * (box[:, 1] - box[:, 0])):
                    break
        if best is None or e > best[0]:
            best = (e, x, y)
    e, x, y = best
    refined = _ride_boundary(score, s_target, box, grid, step_tol)
    if refined is not None and refined[0] > e:
        e, x, y = refined
    c, s = ev(x, math.exp(y))
    return OptimizationResult(x, math.exp(y), e, {"success": s, "capacity": c, "slack": s - s_target},
                              True, ev.trace)
