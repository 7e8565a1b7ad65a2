"""The admittance bound turns local stability into basin-wide convergence.

Without it the region where both R and q grow escapes to the capacity
wall.  Clamping queue admissions at min(alpha(q) R, mu_star) for
q >= q_ad creates a sliding surface on which qdot = 0 and Rdot < 0: the
trajectory rides the bound leftwards until it falls into the domain of
attraction of x1*.  Every start with q0 <= q_ad converges.
"""

import numpy as np

from accessprice.cli import load_config
from accessprice.dynamics import CHATTERING, NORMAL, converge, integrate

cfg = load_config("configs/ref.json")
print(f"admittance bound q_ad = {cfg.q_ad}")
print()

start = (250.0, 55.0)
plain = converge(cfg, NORMAL, start, tol=1e-3, t_cap=400.0, h=0.05)
print(f"normal mode from {start}: converged = {plain.converged}, "
      f"final = ({plain.final_state[0]:.1f}, {plain.final_state[1]:.1f})")

capped = converge(cfg, CHATTERING, start, tol=1e-3, t_cap=4000.0, h=0.05)
print(f"chattering from {start}:  converged = {capped.converged} at "
      f"t = {capped.settling_time:.0f}, final = "
      f"({capped.final_state[0]:.2f}, {capped.final_state[1]:.2f})")
print()

traj = integrate(cfg, CHATTERING, start, 0.0, 400.0, 0.01)
on_surface = np.isclose(traj.q, cfg.q_ad, atol=1e-9)
print(f"time spent sliding on q = q_ad: {on_surface.mean() * 400:.1f} of 400")
print(f"maximum q along the way: {traj.q.max():.12f} (never above the bound)")
print()
print("The same start under plain normal-mode dynamics drifts into the")
print("divergent wedge instead; compare the two final states above.")
