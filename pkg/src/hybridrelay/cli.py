"""Command-line entry point: analyze, simulate, sweep, optimize and validate.

Exit codes: 0 success, 2 validation failure, 3 infeasible optimization under --strict,
4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, analytics
from .config import ConfigError, SystemConfig, dbm_to_w, default_config, is_ppp, load_config, resolve_field
from .simulator import PROTOCOLS, SimulationPlan, estimate_all, simulate

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 2, 3, 4
SCHEMA_VERSION = "1"
SWEEP_COLUMNS = ["manifest_hash", "point"]          # then the swept keys, then SWEEP_TAIL
SWEEP_TAIL = ["protocol", "metric", "value", "se"]
BREAKDOWN_COLUMNS = ["manifest_hash", "protocol", "quantity", "term", "value"]
VALIDATE_COLUMNS = ["manifest_hash", "protocol", "metric", "analytic", "monte_carlo", "se", "sigma", "pass"]


# ---------------------------------------------------------------- manifest

class Manifest:
    def __init__(self, command: str, cfg: SystemConfig, args: dict, seed=None):
        self.command, self.cfg, self.args, self.seed = command, cfg, args, seed
        self.outputs: list[str] = []
        self.start = time.time()
        self.versions = {"hybridrelay": __version__, "numpy": np.__version__, "scipy": scipy.__version__}
        ident = {"command": command, "args": args, "config": cfg.to_dict(), "seed": seed,
                 "versions": self.versions}
        self.hash = hashlib.sha256(json.dumps(ident, sort_keys=True, default=repr).encode()).hexdigest()[:16]

    def write(self, out: Path) -> Path:
        doc = {"manifest_hash": self.hash, "schema_version": SCHEMA_VERSION, "command": self.command,
               "args": self.args, "seed": self.seed, "config_si": self.cfg.to_dict(),
               "config_hash": self.cfg.digest(), "versions": self.versions,
               "outputs": self.outputs, "wall_clock_s": round(time.time() - self.start, 3)}
        path = out / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, default=repr))
        return path


def _write_json(path: Path, doc: dict, man: Manifest) -> Path:
    doc = {"manifest_hash": man.hash, **doc}
    path.write_text(json.dumps(doc, indent=2, default=_jsonable))
    man.outputs.append(path.name)
    return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    return repr(x)


def _write_csv(path: Path, header, rows, man: Manifest) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    man.outputs.append(path.name)
    return path


# ---------------------------------------------------------------- helpers

def _cfg(args) -> SystemConfig:
    return load_config(args.config) if args.config else default_config()


def _protocols(args):
    return PROTOCOLS if args.protocol in (None, "all") else (args.protocol,)


def parse_sweep(spec: str):
    """FIELD=START:STOP:POINTS[,...] -> list of (key, values)."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            key, rng = part.split("=")
            a, b, n = rng.split(":")
            vals = np.linspace(float(a), float(b), int(n))
        except ValueError as exc:
            raise ConfigError([f"bad sweep term '{part}' (want FIELD=START:STOP:POINTS)"]) from exc
        if int(n) < 1:
            raise ConfigError([f"sweep term '{part}' needs at least one point"])
        resolve_field(key.strip(), float(a))   # validates the key
        out.append((key.strip(), vals.tolist()))
    if not out:
        raise ConfigError(["empty --sweep"])
    return out


def _analytic_metrics(cfg: SystemConfig, protocol: str) -> dict:
    s = analytics.success(cfg, protocol).value
    c = analytics.capacity(cfg, protocol).value
    return {"success_probability": s, "ergodic_capacity_bps": c,
            "energy_efficiency_bpj": c / cfg.source_power}


def closed_form_applies(cfg: SystemConfig) -> bool:
    return (is_ppp(cfg.emitter_repulsion) and is_ppp(cfg.interferer_repulsion)
            and cfg.pathloss_active == 4 and cfg.pathloss_ambient == 4)


# ---------------------------------------------------------------- commands

def cmd_analyze(args) -> int:
    cfg = _cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest("analyze", cfg, {"protocol": args.protocol})
    res = analytics.analyze(cfg, _protocols(args))
    doc = {"config_hash": cfg.digest(), "protocols": {}, "gains": res.pop("gains")}
    rows = []
    for p, r in res.items():
        doc["protocols"][p] = {k: r[k] for k in ("success_probability", "ergodic_capacity_bps",
                                                 "energy_efficiency_bpj")}
        for q in ("success_breakdown", "capacity_breakdown"):
            for term, v in r[q].items():
                rows.append([man.hash, p, q.replace("_breakdown", ""), term, repr(float(v))])
    if closed_form_applies(cfg):
        cf = analytics.success_abr_ppp_closed(cfg).value
        gen = analytics.success_abr(cfg).value
        doc["abr_closed_form"] = {"closed_form": cf, "general": gen, "relative_difference": abs(cf - gen) / cf}
    _write_json(out / "metrics.json", doc, man)
    _write_csv(out / "breakdown.csv", BREAKDOWN_COLUMNS, rows, man)
    man.write(out)
    for p, m in doc["protocols"].items():
        print(f"{p:5s}  S = {m['success_probability']:.6f}  C = {m['ergodic_capacity_bps']:.2f} bit/s"
              f"  EE = {m['energy_efficiency_bpj']:.1f} bit/J")
    if "abr_closed_form" in doc:
        print(f"ABR closed form {doc['abr_closed_form']['closed_form']:.6f} "
              f"(relative difference {doc['abr_closed_form']['relative_difference']:.2e})")
    return EXIT_OK


def _plan(args, cfg, protocol) -> SimulationPlan:
    return SimulationPlan(cfg, protocol, args.slots, args.seed, args.threads,
                          args.session_length, args.include_exploration)


def cmd_simulate(args) -> int:
    cfg = _cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    protocol = args.protocol if args.protocol not in (None, "all") else "esap"
    man = Manifest("simulate", cfg, {"protocol": protocol, "slots": args.slots,
                                     "session_length": args.session_length,
                                     "include_exploration": args.include_exploration}, args.seed)
    log = out / "slots.csv" if args.log else None
    rep = simulate(_plan(args, cfg, protocol), log)
    if log is not None:
        man.outputs.append(log.name)
    _write_json(out / "report.json", rep.to_dict(), man)
    man.write(out)
    lo, hi = rep.success_ci95
    print(f"{protocol}: S = {rep.success_probability:.5f} [{lo:.5f}, {hi:.5f}]  "
          f"C = {rep.capacity_bps:.1f} +- {rep.capacity_se:.1f} bit/s over {rep.slots} slots")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _cfg(args)
    terms = parse_sweep(args.sweep)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest("sweep", base, {"sweep": args.sweep, "engine": args.engine, "protocol": args.protocol,
                                   "slots": args.slots}, args.seed)
    keys = [k for k, _ in terms]
    rows = []
    for point, combo in enumerate(itertools.product(*(v for _, v in terms))):
        changes = dict(resolve_field(k, v) for k, v in zip(keys, combo))
        cfg = base.replace(**changes).validate()
        if args.engine == "analytic":
            for p in _protocols(args):
                for metric, val in _analytic_metrics(cfg, p).items():
                    rows.append([man.hash, point, *combo, p, metric, repr(float(val)), ""])
        else:
            reps = estimate_all(_plan(args, cfg, "esap"), _protocols(args))
            for p, r in reps.items():
                for metric, val, se in (("success_probability", r.success_probability, r.success_se),
                                        ("ergodic_capacity_bps", r.capacity_bps, r.capacity_se),
                                        ("energy_efficiency_bpj", r.energy_efficiency_bpj,
                                         r.capacity_se / cfg.source_power)):
                    rows.append([man.hash, point, *combo, p, metric, repr(float(val)), repr(float(se))])
        print(f"point {point}: " + ", ".join(f"{k}={v:g}" for k, v in zip(keys, combo)), flush=True)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS + keys + SWEEP_TAIL, rows, man)
    man.write(out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    from .optimizer import Evaluator, solve_p1, solve_p2
    cfg = _cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    protocol = args.protocol if args.protocol not in (None, "all") else "esap"
    p_max = dbm_to_w(args.p_max_dbm)
    man = Manifest("optimize", cfg, {"problem": args.problem, "target": args.target, "p_max_dbm": args.p_max_dbm,
                                     "protocol": protocol, "engine": args.engine, "slots": args.slots}, args.seed)
    ev = Evaluator(cfg, protocol, args.engine, args.slots, args.seed)
    if args.problem == "p1":
        res = solve_p1(cfg, args.target, p_max, protocol, evaluator=ev)
    else:
        res = solve_p2(cfg, args.target, p_max, protocol, evaluator=ev)
    _write_json(out / "result.json", res.to_json(), man)
    man.write(out)
    print(json.dumps(res.to_json(), default=_jsonable))
    if not res.feasible and args.strict:
        return EXIT_INFEASIBLE
    return EXIT_OK


def validate_rows(cfg: SystemConfig, plan: SimulationPlan, threshold: float = 3.0):
    """(protocol, metric, analytic, mc, se, sigma, ok) for every protocol and metric."""
    reps = estimate_all(plan)
    rows = []
    for p in PROTOCOLS:
        a = _analytic_metrics(cfg, p)
        r = reps[p]
        for metric, mc, se in (("success_probability", r.success_probability, r.success_se),
                               ("ergodic_capacity_bps", r.capacity_bps, r.capacity_se)):
            an = a[metric]
            sig = abs(an - mc) / se if se > 0 else (0.0 if an == mc else math.inf)
            rows.append((p, metric, an, mc, se, sig, sig <= threshold))
    return rows


def cmd_validate(args) -> int:
    cfg = _cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest("validate", cfg, {"slots": args.slots, "session_length": args.session_length}, args.seed)
    rows = validate_rows(cfg, _plan(args, cfg, "esap"))
    print(f"{'protocol':8s} {'metric':22s} {'analytic':>14s} {'monte carlo':>14s} {'SE':>10s} {'|d|/SE':>7s}")
    for p, m, an, mc, se, sig, ok in rows:
        print(f"{p:8s} {m:22s} {an:14.6g} {mc:14.6g} {se:10.3g} {sig:7.2f}  {'pass' if ok else 'FAIL'}")
    _write_csv(out / "validate.csv", VALIDATE_COLUMNS,
               [[man.hash, p, m, repr(an), repr(mc), repr(se), f"{sig:.4f}", int(ok)]
                for p, m, an, mc, se, sig, ok in rows], man)
    man.write(out)
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_VALIDATION


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridrelay", description="Hybrid WPR/ABR relay analysis and simulation")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, slots=100_000):
        p.add_argument("--config", help="JSON profile with unit-suffixed fields (default: shipped table2)")
        p.add_argument("--protocol", choices=PROTOCOLS + ("all",), default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--slots", type=int, default=slots)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--strict", action="store_true", help="nonzero exit on infeasible optimization")
        p.add_argument("--session-length", type=int, default=None, help="ETCP slots per session")
        p.add_argument("--include-exploration", action="store_true",
                       help="ETCP: report over exploration slots too")

    common(sub.add_parser("analyze", help="semi-analytical metrics"))
    p = sub.add_parser("simulate", help="Monte Carlo estimate for one protocol")
    common(p)
    p.add_argument("--log", action="store_true", help="write the per-slot CSV log")
    p = sub.add_parser("sweep", help="long-format CSV over a grid of config fields")
    common(p, slots=20_000)
    p.add_argument("--sweep", required=True, help="FIELD=START:STOP:POINTS[,...] (cartesian product)")
    p.add_argument("--engine", choices=("analytic", "simulation"), default="analytic")
    p = sub.add_parser("optimize", help="P1 minimum power or P2 maximum energy efficiency")
    common(p, slots=20_000)
    p.add_argument("--problem", choices=("p1", "p2"), required=True)
    p.add_argument("--target", type=float, required=True, help="capacity (bit/s) for p1, success for p2")
    p.add_argument("--p-max-dbm", type=float, default=30.0)
    p.add_argument("--engine", choices=("analytic", "simulation"), default="analytic")
    common(sub.add_parser("validate", help="analytic vs Monte Carlo in SE units"))
    return ap


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "optimize": cmd_optimize, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        code = EXIT_CONFIG
    finally:
        analytics.flush_cache()
    return code


if __name__ == "__main__":
    sys.exit(main())
