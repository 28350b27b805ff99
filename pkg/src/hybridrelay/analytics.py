"""Semi-analytical success probabilities, ergodic capacities and energy efficiency.

Everything reduces to three ingredients:

* the law of the received ambient power Q_R (:func:`fredholm.q_distribution`);
* J(A, B) = E prod_x [(1 + A |x|^-mu)(1 + B |x - x_D|^-mu)]^-1 over the interferer field,
  the probability that exponential fading on both hops beats the interference;
* one-dimensional integrals of the two against each other.

With A = kappa(v) P_T and B = ell(v, p) P_T,
chi(v, p) = exp(-ell(v, p) sigma^2) J(A, B). J is tabulated lazily on a lattice in
(log A, log B) and interpolated with 4 x 4 point Lagrange stencils.
"""
from __future__ import annotations

import atexit
import contextlib
import functools
import hashlib
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import comb, erf

from . import fredholm
from .config import SystemConfig, is_ppp
from .fredholm import KernelSpec, basis_laplace, interference_modulation, radial_laplace, ring_basis
from .model import delta, ell, kappa

PROTOCOLS = ("esap", "etcp", "abr", "wpr", "urms")

G_CUT = 40.0           # log J below -G_CUT is treated as exactly zero
LATTICE_VERSION = 1    # bump when node values would change
_LAGR_OFFSETS = np.arange(-1, 3)


@dataclass
class AnalyticResult:
    value: float
    breakdown: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------- interference field

def _lagrange4(t):
    """Cubic Lagrange weights for nodes at -1, 0, 1, 2 evaluated at t in [0, 1)."""
    t = np.asarray(t, dtype=float)
    return np.stack([-t * (t - 1) * (t - 2) / 6.0,
                     (t + 1) * (t - 1) * (t - 2) / 2.0,
                     -(t + 1) * t * (t - 2) / 2.0,
                     (t + 1) * t * (t - 1) / 6.0], axis=-1)


class InterferenceField:
    """Laplace functionals of the interferer field observed jointly at R (origin) and D."""

    def __init__(self, zeta: float, alpha, mu: float, d_rd: float, R: float,
                 exclusion: float = 0.0, step: float = 0.125, core=None):
        self.zeta, self.alpha, self.mu = float(zeta), alpha, float(mu)
        self.core = core   # (radius, matrix size) for the simulator's hybrid law, else None
        self.d_rd, self.R = float(d_rd), float(R)
        self.exclusion = float(exclusion)
        self.step = float(step)
        if self.exclusion > 0:
            br = {self.exclusion, self.d_rd - self.exclusion, self.d_rd + self.exclusion}
        else:
            br = {self.d_rd}
        self.breaks = tuple(sorted(br))
        self._nodes: dict = {}
        self._cut: dict = {}
        self._lock = threading.Lock()
        self.evaluations = 0
        self._saved = 0

    # -- persistence of lattice nodes
    def cache_key(self) -> str:
        desc = repr((LATTICE_VERSION, self.zeta, str(self.alpha), self.mu, self.d_rd, self.R,
                     self.exclusion, self.step, self.core))
        return hashlib.sha256(desc.encode()).hexdigest()[:20]

    def load(self, path) -> int:
        """Merge nodes stored at ``path``; returns how many were read."""
        with np.load(path) as z:
            ij, vals = z["ij"], z["vals"]
        with self._lock:
            for (i, j), v in zip(ij.tolist(), vals.tolist()):
                self._nodes[(i, j)] = v
                if v < -G_CUT and j < self._cut.get(i, 10 ** 9):
                    self._cut[i] = j
            self._saved = len(self._nodes)
        return len(vals)

    def save(self, path) -> None:
        with self._lock:
            items = sorted(self._nodes.items())
            self._saved = len(items)
        ij = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, 2)
        vals = np.array([v for _, v in items], dtype=float)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.tmp.npz")
        np.savez(tmp, ij=ij, vals=vals)
        os.replace(tmp, path)

    @property
    def dirty(self) -> bool:
        return len(self._nodes) > self._saved

    # -- direct evaluations
    def kernel(self, A: float, B: float) -> KernelSpec:
        centers = (0j, complex(self.d_rd))
        m = interference_modulation((A, B), centers, self.mu, self.exclusion)
        return KernelSpec(self.zeta, self.alpha, self.R, m, centers, self.breaks, 0.5 * self.exclusion)

    def joint_log(self, A: float, B: float) -> float:
        """log J(A, B) by the eigenbasis method (exclusion discs at R and D included)."""
        self.evaluations += 1
        if self.core is not None:
            return hybrid_joint_log(self, A, B, *self.core)
        return float(basis_laplace(self.kernel(A, B), log=True))

    def relay_log(self, A):
        """log J(A, 0) with only the exclusion disc at R (radial, vectorised over A)."""
        A = np.atleast_1d(np.asarray(A, dtype=float))
        R, n_max = (self.R, None) if self.core is None else self.core
        basis = ring_basis(self.zeta, R, (self.exclusion,) if self.exclusion > 0 else ())
        r = basis.r[:, None]
        m = np.where(r >= self.exclusion, A[None, :] / (r ** self.mu + A[None, :]), 0.0)
        out = np.real(radial_laplace(basis, self.alpha, m, log=True, n_max=n_max))
        if self.core is not None:
            t, w = fredholm.gl_panels(np.linspace(math.log(R), math.log(self.R), 41), 16)
            r = np.exp(t)[:, None]
            ma = A[None, :] / (r ** self.mu + A[None, :])
            out = out - self.zeta * 2 * np.pi * np.sum((w * np.exp(2 * t))[:, None] * ma, axis=0)
        return out

    # -- lattice
    def _node(self, i: int, j: int) -> float:
        key = (i, j)
        val = self._nodes.get(key)
        if val is None:
            A, B = 10.0 ** (i * self.step), 10.0 ** (j * self.step)
            val = self.joint_log(A, B) - float(self.relay_log(A)[0])
            with self._lock:
                self._nodes[key] = val
                if val < -G_CUT and j < self._cut.get(i, 10 ** 9):
                    self._cut[i] = j
        return val

    def _dead(self, i: int, j: int) -> bool:
        return j >= self._cut.get(i, 10 ** 9)

    def _values(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        """Node values for index arrays; -inf for nodes in or past a row's dead zone."""
        off, span = 1 << 20, 1 << 21
        codes = (ii.ravel().astype(np.int64) + off) * span + (jj.ravel() + off)
        keys, inv = np.unique(codes, return_inverse=True)   # sorted by row, then column
        vals = np.empty(keys.size)
        for k, code in enumerate(keys.tolist()):
            i, j = code // span - off, code % span - off
            if self._dead(i, j):
                vals[k] = -np.inf
                continue
            v = self._node(i, j)
            vals[k] = v if v >= -G_CUT else -np.inf
        return vals[inv.ravel()].reshape(ii.shape)

    def log_j(self, A, B):
        """Interpolated log J(A, B); -inf where J is below exp(-G_CUT)."""
        A, B = np.broadcast_arrays(np.asarray(A, dtype=float), np.asarray(B, dtype=float))
        shape = A.shape
        A, B = A.ravel(), B.ravel()
        ok_a = A > 0
        ua, ia = np.unique(np.where(ok_a, A, 1.0), return_inverse=True)
        base = np.where(ok_a, self.relay_log(ua)[ia.ravel()], 0.0)
        out = base.copy()
        live = np.nonzero(B > 0)[0]
        if live.size:
            x = np.log10(np.where(ok_a[live], A[live], 1.0)) / self.step
            y = np.log10(B[live]) / self.step
            i0, j0 = np.floor(x).astype(int), np.floor(y).astype(int)
            wx, wy = _lagrange4(x - i0), _lagrange4(y - j0)
            ii = i0[:, None, None] + _LAGR_OFFSETS[None, :, None]
            jj = j0[:, None, None] + _LAGR_OFFSETS[None, None, :]
            ii, jj = np.broadcast_arrays(ii, jj)
            V = self._values(ii, jj)
            dead = np.any(np.isinf(V), axis=(1, 2))
            V = np.where(np.isinf(V), 0.0, V)
            acc = np.einsum("ka,kb,kab->k", wx, wy, V)
            out[live] = np.where(dead, -np.inf, base[live] + acc)
        return out.reshape(shape)

    def relay_exact_log(self, A: float) -> float:
        """log J(A, 0) including the exclusion disc around D."""
        return self.joint_log(A, 0.0)


def cache_dir():
    """Directory for stored lattice nodes, or None when caching is switched off."""
    env = os.environ.get("HYBRIDRELAY_CACHE")
    if env is not None and env.strip().lower() in ("", "0", "off", "none"):
        return None
    return Path(env) if env else Path.home() / ".cache" / "hybridrelay"


_LIVE: list = []


@functools.lru_cache(maxsize=32)
def _field(key, core) -> InterferenceField:
    fld = InterferenceField(*key, core=core)
    d = cache_dir()
    if d is not None:
        f = d / f"lattice-{fld.cache_key()}.npz"
        if f.exists():
            try:
                fld.load(f)
            except (OSError, ValueError, KeyError):
                pass
    _LIVE.append(fld)
    return fld


def flush_cache() -> None:
    """Write lattice nodes computed in this process to the cache directory."""
    d = cache_dir()
    if d is None:
        return
    for fld in _LIVE:
        if fld.dirty:
            try:
                fld.save(d / f"lattice-{fld.cache_key()}.npz")
            except OSError:
                pass


atexit.register(flush_cache)


_CORE = threading.local()


@contextlib.contextmanager
def hybrid_field(core_radius: float, core_size: int):
    """Evaluate everything inside the block under the simulator's interferer law."""
    prev = getattr(_CORE, "value", None)
    _CORE.value = (float(core_radius), int(core_size))
    try:
        yield
    finally:
        _CORE.value = prev


def interference_field(cfg: SystemConfig) -> InterferenceField:
    core = getattr(_CORE, "value", None)
    if is_ppp(cfg.interferer_repulsion):
        core = None
    return _field((cfg.interferer_density, cfg.interferer_repulsion, cfg.pathloss_active,
                   cfg.d_rd, cfg.window_radius, cfg.exclusion_radius), core)


# ---------------------------------------------------------------- building blocks

def chi_joint(v, p, cfg: SystemConfig, exact: bool = False):
    """chi(v, p) = exp(-ell sigma^2) J(kappa(v) P_T, ell(v, p) P_T).

    ``exact=True`` evaluates the determinant directly instead of from the lattice.
    """
    fld = interference_field(cfg)
    A = kappa(v, cfg) * cfg.interferer_power
    lv = ell(v, p, cfg)
    B = lv * cfg.interferer_power
    if exact:
        A, B, lv = np.broadcast_arrays(A, B, lv)
        out = np.array([math.exp(-l * cfg.noise_active + fld.joint_log(a, b))
                        for a, b, l in zip(A.ravel(), B.ravel(), lv.ravel())])
        return out.reshape(A.shape) if A.ndim else float(out[0])
    val = np.exp(-lv * cfg.noise_active + fld.log_j(A, B))
    return val if np.ndim(val) else float(val)


def relay_success(v, cfg: SystemConfig) -> float:
    """P[nu_R > v] = exp(-kappa sigma^2) J(kappa P_T, 0) (exclusion discs at R and D)."""
    fld = interference_field(cfg)
    k = float(kappa(v, cfg))
    return math.exp(-k * cfg.noise_active + fld.relay_exact_log(k * cfg.interferer_power))


def _band_grid(cfg: SystemConfig, dist, order_per_efold: int = 24, span: float = 1e-12):
    """Fixed nodes over the middle energy band (in ln p), shared by every SINR level v.

    p = omega beta q - rho_W runs over (span * rho_C, rho_C); weights include dq/dp and f_Q,
    so sum w g(p) ~ int_{varrho_W}^{varrho_W+varrho_C} g f_Q dq. Below span * rho_C the
    destination gain ell P_T is so large that chi vanishes.
    """
    wb = cfg.harvest_fraction * cfg.conversion_efficiency
    a, b = math.log(cfg.rho_c * span), math.log(cfg.rho_c)
    t, w = fredholm.gl_panels(np.linspace(a, b, int(math.ceil(b - a)) + 1), order_per_efold)
    p = np.exp(t)
    return p, w * p / wb * dist.pdf((p + cfg.rho_w) / wb)


@dataclass
class _Pieces:
    pre: float        # exp(-kappa(tau_W) sigma^2)
    chi_cap: float    # chi(tau_W, rho_C)
    tail_cap: float   # 1 - F(varrho_W + varrho_C)
    dtail_cap: float  # int_{varrho_W+varrho_C}^inf delta f
    mid: float        # int_mid chi f
    mid_delta: float  # int_mid chi delta f
    det_r: float      # relay-only determinant at kappa(tau_W)
    dtail_a: float    # int_{varrho_A}^inf delta f
    numerics: dict


def _tail(dist, g, a):
    return dist.expect_fixed(g, a, math.inf, order=256)


def _pieces(cfg: SystemConfig) -> _Pieces:
    dist = fredholm.q_distribution(cfg)
    tw = cfg.tau_w
    fld = interference_field(cfg)
    pre = math.exp(-float(kappa(tw, cfg)) * cfg.noise_active)
    A = float(kappa(tw, cfg)) * cfg.interferer_power
    det_r = math.exp(fld.relay_exact_log(A))
    q_cap = cfg.varrho_w + cfg.varrho_c
    chi_cap = float(chi_joint(tw, cfg.rho_c, cfg))
    dl = lambda q: delta(q, cfg)
    tail_cap = 1.0 - float(dist.cdf(q_cap))
    dtail_cap = _tail(dist, dl, q_cap)
    dtail_a = _tail(dist, dl, cfg.varrho_a)
    p, w = _band_grid(cfg, dist)
    chis = chi_joint(tw, p, cfg)
    q = (p + cfg.rho_w) / (cfg.harvest_fraction * cfg.conversion_efficiency)
    mid = float(np.sum(w * chis))
    mid_delta = float(np.sum(w * chis * delta(q, cfg)))
    num = {"q_grid": [dist.q_lo, dist.q_hi], "mass_below": dist.mass_below,
           "mass_above": dist.mass_above, "band_nodes": int(p.size),
           "lattice_evaluations": fld.evaluations}
    return _Pieces(pre, chi_cap, tail_cap, dtail_cap, mid, mid_delta, det_r, dtail_a, num)


# ---------------------------------------------------------------- success probabilities

def success_wpr(cfg: SystemConfig) -> AnalyticResult:
    pc = _pieces(cfg)
    cap = pc.pre * pc.chi_cap * pc.tail_cap
    midt = pc.pre * pc.mid
    return AnalyticResult(cap + midt, {"capped": cap, "middle_band": midt}, pc.numerics)


def success_abr(cfg: SystemConfig) -> AnalyticResult:
    pc = _pieces(cfg)
    relay = pc.pre * pc.det_r
    return AnalyticResult(relay * pc.dtail_a, {"relay_hop": relay, "backscatter_hop": pc.dtail_a},
                          pc.numerics)


def _esap_parts(pc: _Pieces):
    s_w = pc.pre * (pc.chi_cap * pc.tail_cap + pc.mid)
    s_a = pc.pre * (pc.det_r * pc.dtail_a - pc.chi_cap * pc.dtail_cap - pc.mid_delta)
    headline = pc.pre * (pc.chi_cap * (pc.tail_cap - pc.dtail_cap) + (pc.mid - pc.mid_delta)
                         + pc.det_r * pc.dtail_a)
    return s_w, s_a, headline


def success_esap(cfg: SystemConfig) -> AnalyticResult:
    pc = _pieces(cfg)
    s_w, s_a, headline = _esap_parts(pc)
    return AnalyticResult(headline, {"S_W": s_w, "S_A": s_a}, pc.numerics)


def success_abr_ppp_closed(cfg: SystemConfig) -> AnalyticResult:
    """Closed form for Poisson emitters and interferers with both path-loss exponents 4.

    Infinite plane, no exclusion discs.
    """
    if not (is_ppp(cfg.emitter_repulsion) and is_ppp(cfg.interferer_repulsion)):
        raise ValueError("closed form needs Poisson emitters and interferers")
    if cfg.pathloss_active != 4 or cfg.pathloss_ambient != 4:
        raise ValueError("closed form needs both path-loss exponents equal to 4")
    zt, pt = cfg.emitter_density, cfg.emitter_power
    N = (cfg.d_rd ** 4 * cfg.noise_ambient * cfg.tau_a / (cfg.reflection_fraction * cfg.backscatter_efficiency)
         + math.pi ** 4 * zt * zt * pt / 16.0)
    relay = math.exp(-cfg.d_sr ** 4 * cfg.noise_active * cfg.tau_w / cfg.source_power
                     - math.pi ** 2 * cfg.interferer_density * cfg.d_sr ** 2 / 2.0
                     * math.sqrt(cfg.tau_w * cfg.interferer_power / cfg.source_power))
    val = math.pi ** 2 / 4.0 * zt * math.sqrt(pt / N) * relay * erf(math.sqrt(N / cfg.varrho_a))
    return AnalyticResult(val, {"N": N, "relay_hop": relay})


def commit_terms(x: float, n: int):
    """Per-i terms of the commit probabilities: b(i; n, x) for i = 0..n."""
    i = np.arange(n + 1)
    return comb(n, i) * x ** i * (1.0 - x) ** (n - i)


def phi_sum(x: float, y: float, n: int) -> float:
    """sum_{i>=1} b(i; n, x) sum_{j=1}^{i} b(i-j; n, y) = P[Bin(n,x) > Bin(n,y)]."""
    bx, by = commit_terms(x, n), commit_terms(y, n)
    below = np.concatenate([[0.0], np.cumsum(by)[:-1]])  # P[Bin(n,y) < i]
    return float(np.sum(bx[1:] * below[1:]))


def etcp_commit_probabilities(s_wpr: float, s_abr: float, n: int):
    """(P[N_WPR > N_ABR], P[N_ABR > N_WPR], P[tie]) after n exploration slots of each mode."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    for s in (s_wpr, s_abr):
        if not 0.0 <= s <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
    w = phi_sum(s_wpr, s_abr, n)
    a = phi_sum(s_abr, s_wpr, n)
    return w, a, 1.0 - w - a


def etcp_combine(x_wpr: float, x_abr: float, s_wpr: float, s_abr: float, n: int) -> float:
    w, a, _ = etcp_commit_probabilities(s_wpr, s_abr, n)
    return 0.5 * (x_wpr + x_abr) + 0.5 * (w - a) * (x_wpr - x_abr)


def success_etcp(cfg: SystemConfig) -> AnalyticResult:
    s_w = success_wpr(cfg).value
    s_a = success_abr(cfg).value
    w, a, t = etcp_commit_probabilities(s_w, s_a, cfg.etcp_n)
    val = etcp_combine(s_w, s_a, s_w, s_a, cfg.etcp_n)
    return AnalyticResult(val, {"S_WPR": s_w, "S_ABR": s_a, "P_commit_WPR": w + 0.5 * t,
                                "P_commit_ABR": a + 0.5 * t})


def success_urms(cfg: SystemConfig) -> AnalyticResult:
    s_w = success_wpr(cfg).value
    s_a = success_abr(cfg).value
    return AnalyticResult(0.5 * (s_w + s_a), {"S_WPR": s_w, "S_ABR": s_a})


def gains(cfg: SystemConfig) -> dict:
    """Improvement of ESAP over pure ABR and pure WPR, by formula and by difference."""
    pc = _pieces(cfg)
    s_w, s_a, headline = _esap_parts(pc)
    g_abr = pc.pre * (pc.chi_cap * (pc.tail_cap - pc.dtail_cap) + pc.mid - pc.mid_delta)
    g_wpr = pc.pre * (pc.det_r * pc.dtail_a - (pc.chi_cap * pc.dtail_cap + pc.mid_delta))
    s_abr = pc.pre * pc.det_r * pc.dtail_a
    return {"G_over_ABR": g_abr, "G_over_WPR": g_wpr,
            "G_over_ABR_diff": headline - s_abr, "G_over_WPR_diff": headline - s_w}


def success(cfg: SystemConfig, protocol: str) -> AnalyticResult:
    return {"esap": success_esap, "etcp": success_etcp, "abr": success_abr,
            "wpr": success_wpr, "urms": success_urms}[protocol](cfg)


# ---------------------------------------------------------------- capacities

def wpr_success_curve(v, cfg: SystemConfig, dist=None) -> np.ndarray:
    """S_W(v) = P[min(nu_R, nu_D^W) > v, E_R > E_W] for an array of v."""
    dist = dist or fredholm.q_distribution(cfg)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    pre = np.exp(-kappa(v, cfg) * cfg.noise_active)
    cap = chi_joint(v, cfg.rho_c, cfg) * (1.0 - float(dist.cdf(cfg.varrho_w + cfg.varrho_c)))
    p, w = _band_grid(cfg, dist)
    chis = chi_joint(v[:, None], p[None, :], cfg)
    return pre * (np.atleast_1d(cap) + chis @ w)


def wpr_success_at(v: float, cfg: SystemConfig, dist=None) -> float:
    return float(wpr_success_curve(v, cfg, dist)[0])


def _wpr_rate_integral(cfg: SystemConfig, order: int = 24, max_decades: int = 12):
    """(1/ln 2) int_{tau_W}^inf S_W(v)/(1+v) dv on a log axis, truncated once negligible.

    Gauss-Legendre in ln v, a decade at a time, stopping once the integrand at the end
    of a decade is below 1e-12 of the running total.
    """
    dist = fredholm.q_distribution(cfg)
    tw = cfg.tau_w
    s0 = wpr_success_at(tw, cfg, dist)
    if s0 == 0.0:
        return 0.0, s0, {"v_max": tw}
    x, wx = fredholm._gl(order)
    t = math.log(tw)
    total = 0.0
    dec = math.log(10.0)
    for k in range(max_decades):
        nodes = np.append(t + 0.5 * dec * (x + 1.0), t + dec)
        ev = np.exp(nodes)
        f = wpr_success_curve(ev, cfg, dist) * ev / (1.0 + ev)
        total += 0.5 * dec * float(np.dot(wx, f[:-1]))
        t += dec
        if f[-1] < 1e-12 * max(total, 1e-300):
            break
    return total / math.log(2.0), s0, {"v_max": math.exp(t), "decades": k + 1}


def capacity_wpr(cfg: SystemConfig) -> AnalyticResult:
    pre = (1.0 - cfg.harvest_fraction) / 2.0
    integral, s0, num = _wpr_rate_integral(cfg)
    above = cfg.bandwidth * integral
    floor = cfg.bandwidth * math.log2(1.0 + cfg.tau_w) * s0
    return AnalyticResult(pre * (above + floor), {"rate_above_threshold": pre * above,
                                                  "threshold_rate": pre * floor, "S_W": s0}, num)


def capacity_abr(cfg: SystemConfig) -> AnalyticResult:
    s = success_abr(cfg).value
    return AnalyticResult((1.0 - cfg.harvest_fraction) / 2.0 * cfg.backscatter_capacity * s, {"S_ABR": s})


def capacity_esap(cfg: SystemConfig) -> AnalyticResult:
    c_w = capacity_wpr(cfg)
    s_a = success_esap(cfg).breakdown["S_A"]
    c_a = (1.0 - cfg.harvest_fraction) / 2.0 * cfg.backscatter_capacity * s_a
    return AnalyticResult(c_w.value + c_a, {"WPR_mode": c_w.value, "ABR_mode": c_a, "S_A": s_a}, c_w.numerics)


def capacity_etcp(cfg: SystemConfig) -> AnalyticResult:
    s_w = success_wpr(cfg).value
    s_a = success_abr(cfg).value
    c_w = capacity_wpr(cfg).value
    c_a = capacity_abr(cfg).value
    return AnalyticResult(etcp_combine(c_w, c_a, s_w, s_a, cfg.etcp_n), {"C_WPR": c_w, "C_ABR": c_a})


def capacity_urms(cfg: SystemConfig) -> AnalyticResult:
    c_w = capacity_wpr(cfg).value
    c_a = capacity_abr(cfg).value
    return AnalyticResult(0.5 * (c_w + c_a), {"C_WPR": c_w, "C_ABR": c_a})


def capacity(cfg: SystemConfig, protocol: str) -> AnalyticResult:
    return {"esap": capacity_esap, "etcp": capacity_etcp, "abr": capacity_abr,
            "wpr": capacity_wpr, "urms": capacity_urms}[protocol](cfg)


def energy_efficiency(cfg: SystemConfig, protocol: str = "esap") -> float:
    """Ergodic capacity per watt of source power (bit/J)."""
    return capacity(cfg, protocol).value / cfg.source_power


def analyze(cfg: SystemConfig, protocols=PROTOCOLS) -> dict:
    """Every metric for every protocol, plus the ESAP breakdown and the gains."""
    out = {}
    for p in protocols:
        s = success(cfg, p)
        c = capacity(cfg, p)
        out[p] = {"success_probability": s.value, "ergodic_capacity_bps": c.value,
                  "energy_efficiency_bpj": c.value / cfg.source_power,
                  "success_breakdown": s.breakdown, "capacity_breakdown": c.breakdown}
    out["gains"] = gains(cfg)
    return out


# ---------------------------------------------------------------- simulator field law

def _annulus_mass(m, r_lo: float, r_hi: float, n_theta: int = 256) -> float:
    """int over r_lo < |z| < r_hi of m(z) dz, quadrature in ln r and theta."""
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    ring = np.exp(1j * theta)

    def g(t):
        r = math.exp(t)
        return r * r * 2 * np.pi * float(np.mean(m(r * ring)))

    val, _ = integrate.quad(g, math.log(r_lo), math.log(r_hi), epsrel=1e-10, epsabs=0.0, limit=200)
    return val


def hybrid_joint_log(fld: InterferenceField, A: float, B: float, core_radius: float, core_size: int) -> float:
    """log J(A, B) for the simulator's interferer law.

    Inside ``core_radius`` the field is the alpha-GPP built from ``core_size`` x ``core_size``
    Ginibre matrices; outside it is Poisson with the same intensity.
    """
    centers = (0j, complex(fld.d_rd))
    m = interference_modulation((A, B), centers, fld.mu, fld.exclusion)
    core = KernelSpec(fld.zeta, fld.alpha, core_radius, m, centers, fld.breaks, 0.5 * fld.exclusion)
    val = basis_laplace(core, log=True, n_max=core_size)
    return float(val) - fld.zeta * _annulus_mass(m, core_radius, fld.R)


def field_bias(cfg: SystemConfig, core_radius: float, core_size: int,
               protocols=("esap", "abr", "wpr")) -> dict:
    """Success probability under the hybrid simulator field minus the exact value."""
    exact = {p: success(cfg, p).value for p in protocols}
    with hybrid_field(core_radius, core_size):
        hyb = {p: success(cfg, p).value for p in protocols}
    return {p: hyb[p] - exact[p] for p in protocols}


def clear_caches() -> None:
    """Drop in-memory lattices and Q_R tables (the disk cache is left alone)."""
    flush_cache()
    _LIVE.clear()
    _field.cache_clear()
    fredholm._unit_q_distribution.cache_clear()
