"""Monte Carlo against the semi-analytical engine on common random numbers.

Every protocol is decided on the same simulated slots, so the estimates are
directly comparable. Differences are reported in standard-error units.
"""
import sys

from hybridrelay import analytics, default_config
from hybridrelay.simulator import PROTOCOLS, SimulationPlan, estimate_all

slots = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
cfg = default_config()
reps = estimate_all(SimulationPlan(cfg, "esap", slots, seed=1))
print(f"{slots} slots, interferer core radius {reps['esap'].core_radius_m:.1f} m\n")
for p in PROTOCOLS:
    r = reps[p]
    s = analytics.success(cfg, p).value
    c = analytics.capacity(cfg, p).value
    print(f"{p:5s} S: analytic {s:.4f}  MC {r.success_probability:.4f} +- {r.success_se:.4f}"
          f"  ({abs(s - r.success_probability) / r.success_se:.2f} SE)   "
          f"C: {c:7.0f} vs {r.capacity_bps:7.0f} ({abs(c - r.capacity_bps) / r.capacity_se:.2f} SE)")
analytics.flush_cache()
