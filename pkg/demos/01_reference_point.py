"""Analytic metrics at the shipped reference parameters.

Prints success, capacity and energy efficiency for every protocol, then the
ESAP success split into its WPR and ABR parts and the gains over the pure modes.
"""
from hybridrelay import analytics, default_config

cfg = default_config()
print(f"omega={cfg.harvest_fraction}  P_S={cfg.source_power} W  tau_W={cfg.tau_w}  tau_A={cfg.tau_a}\n")
for p in ("esap", "etcp", "abr", "wpr", "urms"):
    s = analytics.success(cfg, p).value
    c = analytics.capacity(cfg, p).value
    print(f"{p:5s}  S={s:.4f}  C={c:8.1f} bit/s  EE={c / cfg.source_power:9.1f} bit/J")

r = analytics.success_esap(cfg)
print("\nESAP breakdown:", {k: round(float(v), 5) for k, v in r.breakdown.items() if k in ("S_W", "S_A")})
print("gains:", {k: round(float(v), 5) for k, v in analytics.gains(cfg).items()})
analytics.flush_cache()
