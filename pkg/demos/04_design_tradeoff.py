"""Energy-efficiency design: maximize C/P_S subject to a success target.

As the target tightens, the best efficiency falls and the optimal harvest
fraction moves up, since more harvested energy is needed to keep both hops alive.
"""
from hybridrelay import analytics, default_config
from hybridrelay.optimizer import Evaluator, solve_p1, solve_p2

cfg = default_config()
ev = Evaluator(cfg, "esap")
for target in (0.3, 0.4, 0.5, 0.55, 0.6):
    r = solve_p2(cfg, target, p_max=1.0, evaluator=ev)
    if r.feasible:
        print(f"S >= {target:.2f}: omega*={r.omega_star:.3f}  P_S*={r.p_s_star:.4f} W  EE={r.objective:9.0f} bit/J")
    else:
        print(f"S >= {target:.2f}: infeasible within 1 W")
r = solve_p1(cfg, 12_000.0, p_max=1.0, evaluator=ev)
print(f"\nminimum P_S for 12 kbit/s: {r.p_s_star:.4f} W at omega={r.omega_star:.3f} ({r.evaluations} evaluations)")
analytics.flush_cache()
