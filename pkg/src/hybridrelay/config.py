"""System configuration: one frozen dataclass holding every model scalar in SI units.

JSON profiles carry explicit unit suffixes (``_dbm``, ``_per_km2``, ``_db`` ...);
:func:`load_config` converts them and validates the result.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

PPP = "ppp"
"""Repulsion marker for a Poisson field (the alpha -> 0 limit)."""


class ConfigError(ValueError):
    """Raised with every problem found in a configuration, not just the first."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


def is_ppp(alpha) -> bool:
    return isinstance(alpha, str) and alpha.lower() == PPP


def dbm_to_w(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


def w_to_dbm(x: float) -> float:
    return 10.0 * math.log10(x) + 30.0


def db_to_lin(x: float) -> float:
    return 10.0 ** (x / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    emitter_density: float            # zeta~, 1/m^2
    interferer_density: float         # zeta, 1/m^2
    emitter_repulsion: float | str    # alpha~ in [-1, 0) or PPP
    interferer_repulsion: float | str
    emitter_power: float              # W
    interferer_power: float           # W
    source_power: float               # W
    pathloss_ambient: float           # mu~
    pathloss_active: float            # mu
    noise_ambient: float              # W, backscatter receiver
    noise_active: float               # W, active receivers
    conversion_efficiency: float      # beta
    reflection_fraction: float        # eta
    backscatter_efficiency: float     # xi
    harvest_fraction: float           # omega
    slot_duration: float              # T, s
    capacitor_energy: float           # E_C, J
    wpr_circuit_energy: float         # E_W, J
    abr_circuit_energy: float         # E_A, J
    tau_w: float                      # linear
    tau_a: float                      # linear
    backscatter_capacity: float       # C_A, bit/s
    bandwidth: float                  # W, Hz
    d_sr: float
    d_rd: float
    window_radius: float
    etcp_n: int = 5
    exclusion_radius: float = 0.1     # m, field points this close to R or D are removed

    # rates (energy per slot duration)
    @property
    def rho_w(self) -> float:
        return self.wpr_circuit_energy / self.slot_duration

    @property
    def rho_a(self) -> float:
        return self.abr_circuit_energy / self.slot_duration

    @property
    def rho_c(self) -> float:
        return self.capacitor_energy / self.slot_duration

    # thresholds on Q_R
    @property
    def varrho_w(self) -> float:
        return self.rho_w / (self.harvest_fraction * self.conversion_efficiency)

    @property
    def varrho_a(self) -> float:
        return self.rho_a / (self.harvest_fraction * self.conversion_efficiency)

    @property
    def varrho_c(self) -> float:
        return self.rho_c / (self.harvest_fraction * self.conversion_efficiency)

    @property
    def relay_power_cap(self) -> float:
        """Ceiling of the active relay transmit power, 2 rho_C / (1 - omega)."""
        return 2.0 * self.rho_c / (1.0 - self.harvest_fraction)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def problems(self) -> list[str]:
        out = []

        def pos(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name} must be a positive finite number (got {v!r})")

        for name in ("emitter_density", "interferer_density", "emitter_power", "interferer_power",
                     "source_power", "noise_ambient", "noise_active", "slot_duration",
                     "capacitor_energy", "wpr_circuit_energy", "abr_circuit_energy", "tau_w",
                     "tau_a", "backscatter_capacity", "bandwidth", "d_sr", "d_rd", "window_radius"):
            pos(name)
        for name in ("pathloss_ambient", "pathloss_active"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 2):
                out.append(f"{name} must exceed 2 (got {v!r})")
        for name in ("conversion_efficiency", "reflection_fraction", "backscatter_efficiency"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0 < v <= 1):
                out.append(f"{name} must lie in (0, 1] (got {v!r})")
        w = self.harvest_fraction
        if not (isinstance(w, (int, float)) and 0 < w < 1):
            out.append(f"harvest_fraction (omega) violates 0 < omega < 1 (got {w!r})")
        for name in ("emitter_repulsion", "interferer_repulsion"):
            a = getattr(self, name)
            if is_ppp(a):
                continue
            if not (isinstance(a, (int, float)) and -1 <= a < 0):
                out.append(f"{name} must be '{PPP}' or lie in [-1, 0) (got {a!r})")
        ea, ew, ec = self.abr_circuit_energy, self.wpr_circuit_energy, self.capacitor_energy
        if all(isinstance(x, (int, float)) for x in (ea, ew, ec)) and not (ea <= ew <= ec):
            out.append(f"energies must satisfy E_A <= E_W <= E_C (got {ea}, {ew}, {ec})")
        x = self.exclusion_radius
        lim = min((v for v in (self.d_rd, self.window_radius) if isinstance(v, (int, float))),
                  default=math.inf)
        if not (isinstance(x, (int, float)) and 0 <= x < lim):
            out.append(f"exclusion_radius must lie in [0, min(d_rd, window_radius)) (got {x!r})")
        if not (isinstance(self.etcp_n, int) and self.etcp_n >= 1):
            out.append(f"etcp_n must be a positive integer (got {self.etcp_n!r})")
        return out

    def validate(self) -> "SystemConfig":
        p = self.problems()
        if p:
            raise ConfigError(p)
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------- JSON ingestion

_DIMLESS = {"emitter_repulsion", "interferer_repulsion", "pathloss_ambient", "pathloss_active",
            "conversion_efficiency", "reflection_fraction", "backscatter_efficiency",
            "harvest_fraction", "etcp_n"}

_UNITS: dict[str, dict[str, Any]] = {
    "density": {"per_m2": 1.0, "per_km2": 1e-6},
    "power": {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "dbm": dbm_to_w},
    "energy": {"j": 1.0, "mj": 1e-3, "uj": 1e-6},
    "ratio": {"linear": 1.0, "db": db_to_lin},
    "rate": {"bps": 1.0, "kbps": 1e3},
    "freq": {"hz": 1.0, "khz": 1e3, "mhz": 1e6},
    "length": {"m": 1.0, "km": 1e3},
    "time": {"s": 1.0, "ms": 1e-3},
}

_KIND = {
    "emitter_density": "density", "interferer_density": "density",
    "emitter_power": "power", "interferer_power": "power", "source_power": "power",
    "noise_ambient": "power", "noise_active": "power",
    "capacitor_energy": "energy", "wpr_circuit_energy": "energy", "abr_circuit_energy": "energy",
    "tau_w": "ratio", "tau_a": "ratio", "backscatter_capacity": "rate", "bandwidth": "freq",
    "d_sr": "length", "d_rd": "length", "window_radius": "length", "exclusion_radius": "length", "slot_duration": "time",
}

FIELDS = [f.name for f in dataclasses.fields(SystemConfig)]


def _convert(kind: str, unit: str, value):
    conv = _UNITS[kind][unit]
    return conv(value) if callable(conv) else value * conv


def _split_key(key: str) -> tuple[str, str | None]:
    if key in _DIMLESS or key in FIELDS and key not in _KIND:
        return key, None
    for name, kind in _KIND.items():
        for unit in _UNITS[kind]:
            if key == f"{name}_{unit}":
                return name, unit
    return key, ""


def config_from_dict(doc: Mapping[str, Any]) -> SystemConfig:
    """Build a config from a suffixed mapping; collects every problem before raising."""
    problems: list[str] = []
    values: dict[str, Any] = {}
    doc = dict(doc)
    # noise may be given as a PSD plus a band
    for which, band_default in (("noise_ambient", None), ("noise_active", "bandwidth")):
        psd_key = f"{which}_dbm_per_hz"
        if psd_key in doc:
            psd = doc.pop(psd_key)
            band_key = f"{which}_band_hz"
            band = doc.pop(band_key, None)
            if band is None and band_default is not None:
                for u, s in (("hz", 1.0), ("khz", 1e3), ("mhz", 1e6)):
                    if f"bandwidth_{u}" in doc:
                        band = doc[f"bandwidth_{u}"] * s
            if band is None:
                problems.append(f"{psd_key} needs {band_key}")
                continue
            values[which] = dbm_to_w(psd + 10 * math.log10(band))
    for key, raw in doc.items():
        if key.startswith("_") or key in ("description", "name"):
            continue
        name, unit = _split_key(key)
        if name not in FIELDS:
            problems.append(f"unknown field '{key}'")
            continue
        if unit == "":
            problems.append(f"field '{key}' lacks a recognised unit suffix "
                            f"(one of {sorted(_UNITS[_KIND[name]])})")
            continue
        if name in values:
            problems.append(f"field '{name}' given more than once")
            continue
        if name in ("emitter_repulsion", "interferer_repulsion") and isinstance(raw, str):
            if not is_ppp(raw):
                problems.append(f"{key} must be a number or '{PPP}' (got {raw!r})")
            values[name] = PPP
            continue
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            problems.append(f"field '{key}' must be numeric (got {raw!r})")
            continue
        values[name] = raw if unit is None else _convert(_KIND[name], unit, raw)
    if "etcp_n" in values:
        n = values["etcp_n"]
        if float(n).is_integer():
            values["etcp_n"] = int(n)
    missing = [f.name for f in dataclasses.fields(SystemConfig)
               if f.name not in values and f.default is dataclasses.MISSING]
    problems += [f"missing field '{m}'" for m in missing]
    if problems:
        # still report invariant violations among the fields that did parse
        partial = SystemConfig(**{**{m: None for m in missing}, **values})
        skip = set(missing) | {k for k in FIELDS if k not in values and k not in missing}
        problems += [p for p in partial.problems() if not any(m in p for m in skip)]
        raise ConfigError(problems)
    cfg = SystemConfig(**values)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return config_from_dict(doc)


def profile_path(name: str = "table2") -> Path:
    return Path(str(resources.files("hybridrelay.profiles").joinpath(f"{name}.json")))


def default_config() -> SystemConfig:
    """The shipped reference profile."""
    return load_config(profile_path("table2"))


def config_to_doc(cfg: SystemConfig) -> dict[str, Any]:
    """SI echo using the plain-SI suffixes, loadable by :func:`config_from_dict`."""
    suffix = {"density": "per_m2", "power": "w", "energy": "j", "ratio": "linear",
              "rate": "bps", "freq": "hz", "length": "m", "time": "s"}
    out: dict[str, Any] = {}
    for name in FIELDS:
        v = getattr(cfg, name)
        out[name if name not in _KIND else f"{name}_{suffix[_KIND[name]]}"] = v
    return out


def resolve_field(key: str, value):
    """(field name, SI value) for a possibly suffixed key such as ``interferer_density_per_km2``."""
    name, unit = _split_key(key)
    if name not in FIELDS:
        raise ConfigError([f"unknown field '{key}'"])
    if unit == "":
        if name in _KIND:   # bare SI name
            return name, value
        raise ConfigError([f"field '{key}' lacks a recognised unit suffix"])
    if name == "etcp_n":
        if not float(value).is_integer():
            raise ConfigError([f"etcp_n must be an integer (got {value!r})"])
        return name, int(value)
    return name, (value if unit is None else _convert(_KIND[name], unit, value))
