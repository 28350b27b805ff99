"""Monte Carlo engine for the time-slot relaying protocol.

Every slot draws fresh emitter and interferer fields plus all fading gains from its own
random stream, derived from (seed, slot index). The per-slot physics is shared by all
protocols (common random numbers), so differences between protocols are estimated
with far less noise than their levels.

Field law
---------
* Emitters only enter through their distances to the relay, so alpha-GPP emitters
  with alpha = -1/k are drawn exactly from Kostlan's independent Gamma radii.
* Interferers are seen from both R and D. They are an exact alpha-GPP core of radius
  ``core_radius`` (eigenvalues of small Ginibre matrices) plus a Poisson annulus out
  to the window. ``analytics.field_bias`` gives the effect on the success probabilities.
* Points closer than ``cfg.exclusion_radius`` to R or D (interferers) or to R
  (emitters) are removed.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import SystemConfig, is_ppp
from .model import Mode, SlotOutcome, abr_transmit_power, harvest, wpr_transmit_power
from .sampler import FieldModel, core_matrix_size, sample_radii

PROTOCOLS = ("esap", "etcp", "abr", "wpr", "urms")
_MODE_CODE = {0: Mode.IDLE, 1: Mode.WPR, 2: Mode.ABR}
CHUNK = 512


def default_core_radius(cfg: SystemConfig) -> float:
    """d_RD plus two correlation lengths of the interferer field, within the window."""
    return min(cfg.window_radius, cfg.d_rd + 2.0 / math.sqrt(math.pi * cfg.interferer_density))


@dataclass(frozen=True)
class SimulationPlan:
    cfg: SystemConfig
    protocol: str = "esap"
    slots: int = 100_000
    seed: int = 0
    threads: int = 1
    session_length: int | None = None   # ETCP slots per session, exploration included
    include_exploration: bool = False   # ETCP: report over all slots of a session
    core_radius: float | None = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.protocol == "etcp":
            if self.session_len <= 2 * self.cfg.etcp_n:
                raise ValueError("ETCP sessions must be longer than the 2n exploration slots")
            if self.slots < self.session_len:
                raise ValueError("slots must cover at least one ETCP session")

    @property
    def session_len(self) -> int:
        if self.session_length is not None:
            return int(self.session_length)
        return 4 * self.cfg.etcp_n

    @property
    def core(self) -> float:
        return default_core_radius(self.cfg) if self.core_radius is None else float(self.core_radius)

    def field_model(self) -> FieldModel:
        cfg = self.cfg
        ex = cfg.exclusion_radius
        excl = ((0j, ex), (complex(cfg.d_rd), ex)) if ex > 0 else ()
        return FieldModel(cfg.interferer_density, cfg.interferer_repulsion, cfg.window_radius,
                          self.core, excl)


# ---------------------------------------------------------------- per-slot physics

def slot_rng(seed: int, slot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(slot,)))


@dataclass
class Physics:
    """Per-slot quantities for a run of consecutive slots (arrays indexed by slot)."""
    q: np.ndarray          # received ambient power at R
    i_r: np.ndarray        # interference at R
    i_d: np.ndarray        # interference at D
    h_sr: np.ndarray
    h_rd: np.ndarray
    h_bs: np.ndarray       # backscatter-link fading
    coin: np.ndarray       # URMS mode draw, True means WPR

    def __len__(self):
        return self.q.size

    @staticmethod
    def concat(parts):
        return Physics(*(np.concatenate([getattr(p, f) for p in parts])
                         for f in Physics.__dataclass_fields__))


def link_sums(cfg: SystemConfig, emitter_r, interferers, rng):
    """(Q_R, I_R, I_D) for one slot; fading gains are drawn from ``rng``."""
    h = rng.standard_exponential(emitter_r.size)
    q = cfg.emitter_power * float(np.sum(h * emitter_r ** -cfg.pathloss_ambient))
    g = rng.standard_exponential((2, interferers.size))
    mu = cfg.pathloss_active
    i_r = cfg.interferer_power * float(np.sum(g[0] * np.abs(interferers) ** -mu))
    i_d = cfg.interferer_power * float(np.sum(g[1] * np.abs(interferers - cfg.d_rd) ** -mu))
    return q, i_r, i_d


def draw_physics(plan: SimulationPlan, start: int, stop: int) -> Physics:
    """Physics of slots start..stop-1; identical whatever the chunking."""
    cfg = plan.cfg
    fm = plan.field_model()
    rngs = [slot_rng(plan.seed, s) for s in range(start, stop)]
    mats = [fm.draw_matrices(r) for r in rngs]
    if mats and mats[0].size:
        eigs = np.linalg.eigvals(np.stack(mats))
    else:
        eigs = [m for m in mats]
    n = stop - start
    out = np.zeros((7, n))
    for i, rng in enumerate(rngs):
        pts = fm.finish(rng, eigs[i])
        r_e = sample_radii(rng, cfg.emitter_density, cfg.emitter_repulsion, cfg.window_radius,
                           r_min=cfg.exclusion_radius)
        out[0:3, i] = link_sums(cfg, r_e, pts, rng)
        out[3:6, i] = rng.standard_exponential(3)
        out[6, i] = rng.uniform() < 0.5
    return Physics(out[0], out[1], out[2], out[3], out[4], out[5], out[6].astype(bool))


def fixed_field_physics(cfg: SystemConfig, emitters, interferers, slots: int, seed: int = 0) -> Physics:
    """Physics with emitter and interferer positions held fixed; only fading is random."""
    emitters = np.asarray(emitters, dtype=complex)
    interferers = np.asarray(interferers, dtype=complex)
    r_e = np.abs(emitters)
    out = np.zeros((7, slots))
    for i in range(slots):
        rng = slot_rng(seed, i)
        out[0:3, i] = link_sums(cfg, r_e, interferers, rng)
        out[3:6, i] = rng.standard_exponential(3)
        out[6, i] = rng.uniform() < 0.5
    return Physics(out[0], out[1], out[2], out[3], out[4], out[5], out[6].astype(bool))


def physics(plan: SimulationPlan, start: int = 0, stop: int | None = None) -> Physics:
    stop = plan.slots if stop is None else stop
    bounds = [(a, min(a + CHUNK, stop)) for a in range(start, stop, CHUNK)]
    if plan.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(plan.threads) as ex:
            parts = list(ex.map(lambda b: draw_physics(plan, *b), bounds))
    else:
        parts = [draw_physics(plan, *b) for b in bounds]
    return Physics.concat(parts)


# ---------------------------------------------------------------- protocol decisions

@dataclass
class Decisions:
    mode: np.ndarray        # 0 idle, 1 WPR, 2 ABR
    success: np.ndarray
    capacity: np.ndarray    # bit/s
    energy: np.ndarray      # harvested energy E_R
    nu_r: np.ndarray
    nu_d: np.ndarray        # SINR/SNR at D of the mode used (nan when idle)


def _links(cfg: SystemConfig, ph: Physics):
    mu = cfg.pathloss_active
    e = harvest(ph.q, cfg)
    nu_r = cfg.source_power * ph.h_sr * cfg.d_sr ** -mu / (ph.i_r + cfg.noise_active)
    nu_dw = wpr_transmit_power(ph.q, cfg) * ph.h_rd * cfg.d_rd ** -mu / (ph.i_d + cfg.noise_active)
    nu_da = abr_transmit_power(ph.q, cfg) * ph.h_bs * cfg.d_rd ** -mu / cfg.noise_ambient
    return e, nu_r, nu_dw, nu_da


def decide(cfg: SystemConfig, ph: Physics, protocol: str, forced=None) -> Decisions:
    """Mode choice and slot outcome for every slot of ``ph``.

    ``forced`` (ETCP) maps each slot to "wpr" or "abr" via a boolean array (True = WPR).
    """
    e, nu_r, nu_dw, nu_da = _links(cfg, ph)
    pre = (1.0 - cfg.harvest_fraction) / 2.0
    relay_ok = nu_r > cfg.tau_w
    w_gate = e > cfg.wpr_circuit_energy
    a_gate = e > cfg.abr_circuit_energy
    w_ok = relay_ok & w_gate & (nu_dw > cfg.tau_w)
    a_ok = relay_ok & a_gate & (nu_da > cfg.tau_a)
    if protocol == "esap":
        use_w = w_ok                       # preamble feedback confirms the active link
    elif protocol == "wpr":
        use_w = np.ones(len(ph), bool)
    elif protocol == "abr":
        use_w = np.zeros(len(ph), bool)
    elif protocol == "urms":
        use_w = ph.coin
    elif protocol == "etcp":
        if forced is None:
            raise ValueError("ETCP decisions need the committed mode per slot")
        use_w = np.asarray(forced, bool)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    mode = np.where(use_w, np.where(w_gate, 1, 0), np.where(a_gate, 2, 0))
    succ = np.where(use_w, w_ok, a_ok)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate_w = pre * cfg.bandwidth * np.log2(1.0 + np.minimum(nu_r, nu_dw))
    cap = np.where(succ, np.where(use_w, rate_w, pre * cfg.backscatter_capacity), 0.0)
    nu_d = np.where(mode == 1, nu_dw, np.where(mode == 2, nu_da, np.nan))
    return Decisions(mode, succ, cap, e, nu_r, nu_d)


def etcp_schedule(cfg: SystemConfig, ph: Physics, session_len: int, seed: int):
    """Per-slot forced mode (True = WPR), exploration mask and committed mode per session.

    Exploration alternates ABR, WPR for the first 2n slots of every session.
    """
    n = cfg.etcp_n
    n_sess = len(ph) // session_len
    wpr_all = decide(cfg, ph, "wpr").success
    abr_all = decide(cfg, ph, "abr").success
    forced = np.zeros(n_sess * session_len, bool)
    explore = np.zeros_like(forced)
    commits = np.zeros(n_sess, bool)
    for s in range(n_sess):
        a = s * session_len
        idx = np.arange(a, a + 2 * n)
        is_w = (idx - a) % 2 == 1
        n_w = int(np.sum(wpr_all[idx[is_w]]))
        n_a = int(np.sum(abr_all[idx[~is_w]]))
        if n_w == n_a:
            commit = bool(np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, s))).uniform() < 0.5)
        else:
            commit = n_w > n_a
        commits[s] = commit
        forced[idx] = is_w
        explore[idx] = True
        forced[a + 2 * n:a + session_len] = commit
    return forced, explore, commits


# ---------------------------------------------------------------- reports

def wilson_interval(k: int, n: int, z: float = 1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, c - h), min(1.0, c + h)


@dataclass
class PerformanceReport:
    protocol: str
    slots: int
    seed: int
    success_probability: float
    success_se: float
    success_ci95: tuple
    capacity_bps: float
    capacity_se: float
    energy_efficiency_bpj: float
    mode_fractions: dict
    core_radius_m: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["success_ci95"] = list(self.success_ci95)
        return d


def _se(x: np.ndarray, groups: int | None = None) -> float:
    """Standard error of the mean; with ``groups`` it is computed from group means."""
    if groups:
        x = x[:groups * (x.size // groups)].reshape(groups, -1).mean(axis=1)
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def summarize(plan: SimulationPlan, dec: Decisions, mask=None, groups=None, extra=None) -> PerformanceReport:
    sel = slice(None) if mask is None else mask
    s = dec.success[sel].astype(float)
    c = dec.capacity[sel]
    m = dec.mode[sel]
    k, n = int(s.sum()), s.size
    fr = {_MODE_CODE[i].value: float(np.mean(m == i)) for i in (1, 2, 0)}
    return PerformanceReport(plan.protocol, n, plan.seed, k / n, _se(s, groups), wilson_interval(k, n),
                             float(c.mean()), _se(c, groups), float(c.mean()) / plan.cfg.source_power,
                             fr, plan.core, extra or {})


def _etcp_report(plan: SimulationPlan, ph: Physics) -> tuple[PerformanceReport, Decisions]:
    L = plan.session_len
    forced, explore, commits = etcp_schedule(plan.cfg, ph, L, plan.seed)
    used = Physics(*(getattr(ph, f)[:forced.size] for f in Physics.__dataclass_fields__))
    dec = decide(plan.cfg, used, "etcp", forced)
    n_sess = commits.size
    mask = None if plan.include_exploration else ~explore
    extra = {"sessions": n_sess, "session_length": L,
             "commit_fraction_wpr": float(commits.mean()), "exploration_included": plan.include_exploration}
    return summarize(plan, dec, mask, groups=n_sess, extra=extra), dec


def estimate(plan: SimulationPlan) -> PerformanceReport:
    """Monte Carlo estimate of success probability, ergodic capacity and energy efficiency."""
    ph = physics(plan)
    if plan.protocol == "etcp":
        return _etcp_report(plan, ph)[0]
    return summarize(plan, decide(plan.cfg, ph, plan.protocol))


def estimate_all(plan: SimulationPlan, protocols=PROTOCOLS) -> dict:
    """Reports for several protocols over the same slot draws."""
    ph = physics(plan)
    out = {}
    for p in protocols:
        sub = SimulationPlan(plan.cfg, p, plan.slots, plan.seed, plan.threads, plan.session_length,
                             plan.include_exploration, plan.core_radius)
        out[p] = _etcp_report(sub, ph)[0] if p == "etcp" else summarize(sub, decide(plan.cfg, ph, p))
    return out


def run_etcp_session(plan: SimulationPlan, session: int = 0) -> PerformanceReport:
    """One ETCP session: 2n alternating exploration slots, then the committed mode."""
    L = plan.session_len
    sub = SimulationPlan(plan.cfg, "etcp", L, plan.seed, 1, L, plan.include_exploration, plan.core_radius)
    ph = physics(sub, session * L, (session + 1) * L)
    return _etcp_report(sub, ph)[0]


def run_slot(plan: SimulationPlan, slot: int) -> SlotOutcome:
    """Outcome of a single slot of ``plan`` (ETCP slots replay their session's exploration)."""
    if plan.protocol == "etcp":
        L = plan.session_len
        a = (slot // L) * L
        ph = physics(plan, a, a + L)
        s = slot - a
        forced, _, _ = etcp_schedule(plan.cfg, ph, L, plan.seed)
        dec = decide(plan.cfg, ph, "etcp", forced)
    else:
        ph = physics(plan, slot, slot + 1)
        dec = decide(plan.cfg, ph, plan.protocol)
        s = 0
    e, nu_r, nu_dw, nu_da = (x[s] for x in _links(plan.cfg, ph))
    return SlotOutcome(float(e), _MODE_CODE[int(dec.mode[s])], float(nu_r), float(nu_dw), float(nu_da),
                       bool(dec.success[s]), float(dec.capacity[s]))


def simulate(plan: SimulationPlan, log_path=None) -> PerformanceReport:
    """``estimate`` plus an optional per-slot CSV log."""
    ph = physics(plan)
    if plan.protocol == "etcp":
        rep, dec = _etcp_report(plan, ph)
    else:
        dec = decide(plan.cfg, ph, plan.protocol)
        rep = summarize(plan, dec)
    if log_path is not None:
        write_slot_log(dec, log_path)
    return rep


SLOT_LOG_COLUMNS = ["slot", "mode", "E_R_J", "nu_R", "nu_D", "success", "capacity_bps"]


def write_slot_log(dec: Decisions, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SLOT_LOG_COLUMNS)
        for i in range(dec.mode.size):
            w.writerow([i, _MODE_CODE[int(dec.mode[i])].value, repr(float(dec.energy[i])),
                        repr(float(dec.nu_r[i])), repr(float(dec.nu_d[i])), int(dec.success[i]),
                        repr(float(dec.capacity[i]))])
    return path


def sigma_distance(analytic: float, mc: float, se: float) -> float:
    """|analytic - MC| in units of the Monte Carlo SE."""
    if se == 0.0:
        return 0.0 if analytic == mc else math.inf
    return abs(analytic - mc) / se


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


__all__ = ["SimulationPlan", "PerformanceReport", "estimate", "estimate_all", "simulate", "run_slot",
           "run_etcp_session", "decide", "physics", "wilson_interval", "default_core_radius",
           "core_matrix_size"]
