"""The headline experiment: surge pricing vs the saturated price.

A burst of unresponsive demand (K_U = 4 > mu* = 3) hits between t = 100
and t = 300.  Under surge pricing the price climbs with the queue and
holds the responsive population down for the whole burst.  The saturated
price rises, then retreats to its floor: responsive users keep queueing,
their admitted share stays near the population share, and once the burst
ends the system drains back to the uncongested equilibrium.
"""

from accessprice import bounceback_probe, fairness_gap, run_comparison, scenario_from_config
from accessprice.cli import load_config

cfg = load_config("configs/section5.json")
sc = scenario_from_config(cfg, h=0.02)
result = run_comparison(sc)

print(f"burst: K_U = {sc.burst.k_u} on [{sc.burst.t_start:.0f}, {sc.burst.t_end:.0f}], "
      f"x0 = {sc.x0}")
print()
print(f"{'t':>5} {'R_surge':>9} {'U_surge':>9} {'q_surge':>8} "
      f"{'R_sat':>9} {'U_sat':>9} {'q_sat':>8}")
for t in (0, 50, 100, 150, 200, 250, 300, 350, 400):
    s = result.surge.state_at(float(t))
    p = result.saturated.state_at(float(t))
    print(f"{t:5d} {s[0]:9.2f} {s[2]:9.2f} {s[1]:8.2f} "
          f"{p[0]:9.2f} {p[2]:9.2f} {p[1]:8.2f}")
print()

r_s = result.surge
r_p = result.saturated
print(f"surge:     R(300)/R(100) = {r_s.state_at(300)[0] / r_s.state_at(100)[0]:.2f} "
      "(responsive users priced out)")
print(f"saturated: R(300)/R(100) = {r_p.state_at(300)[0] / r_p.state_at(100)[0]:.2f} "
      "(responsive users keep queueing)")

gmin, gmean = fairness_gap(result.fairness_saturated, result.fairness_surge, (200, 300))
print(f"admittance-ratio gap over [200, 300]: min = {gmin:.3f}, mean = {gmean:.3f}")

probe = bounceback_probe(sc, result)
print(f"bounceback after the burst: converged = {probe.converged} at "
      f"t = {probe.settling_time:.0f} to (R, q, U) = "
      f"({probe.target[0]:.1f}, {probe.target[1]:.1f}, {probe.target[2]:.0f})")
print()
print("Export the full time series with:")
print("  accessprice scenario --config configs/section5.json --out-prefix out/s5")
