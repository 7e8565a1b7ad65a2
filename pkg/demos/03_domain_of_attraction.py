"""Build and verify an invariant polygon around the stable point.

The nullclines eta1 (qdot = 0) and eta2 (Rdot = 0) intersect exactly at
the two equilibria.  R-dagger is the hump of eta2 left of the price
peak, q-dagger its preimage under eta1; any corner choice inside the
admissible intervals yields a five-vertex polygon the flow cannot leave,
which therefore sits inside the domain of attraction of x1*.
"""

import numpy as np

from accessprice import (
    build_polygon,
    check_invariance,
    eta1,
    eta2,
    find_fixed_points,
    q_dagger,
    r_dagger,
)
from accessprice.cli import load_config
from accessprice.dynamics import NORMAL, final_states
from accessprice.regions import halfspaces

cfg = load_config("configs/ref.json")

rd, qd = r_dagger(cfg), q_dagger(cfg)
fps = find_fixed_points(cfg, "normal")
print(f"R-dagger = {rd:.4f}  (max of eta2 on [0, q_m])")
print(f"q-dagger = {qd:.4f}  (eta1 inverse of R-dagger)")
print(f"hypothesis R2* = {fps[1].r_star:.1f} > R-dagger: ok")
print()

q_choice, r_choice = 70.0, 58.0
print(f"corner choices: q = {q_choice} in ({qd:.2f}, {fps[1].q_star:.0f}), "
      f"R = {r_choice} in ({max(rd, eta2(cfg, q_choice)):.2f}, {eta1(cfg, q_choice):.2f}]")
poly = build_polygon(cfg, q_choice, r_choice)
names = "ABCDE"
for name, (r, q) in zip(names, poly.vertices):
    print(f"  {name} = (R = {r:7.3f}, q = {q:7.3f})")
print()

report = check_invariance(cfg, poly, NORMAL, 1000)
print("boundary check (1000 samples per edge):")
for face in report.faces:
    print(f"  {face.name}: worst = {face.worst:+.5f}  [{face.condition}]  "
          f"{'ok' if face.passed else 'VIOLATED'}")
print("invariant:", report.passed)
print()

# empirical trap probe: interior starts never leave and settle at x1*
A, b = halfspaces(poly)
rng = np.random.default_rng(0)
starts = []
while len(starts) < 25:
    cand = np.array([rng.uniform(0, r_choice), rng.uniform(0, q_choice), 0.0])
    if np.all(A @ cand - b < -0.5):
        starts.append(cand)
res = final_states(cfg, NORMAL, np.array(starts), 0.0, 2000.0, 0.05, region=(A, b))
print(f"25 interior trajectories, t = 2000: max boundary excess = "
      f"{res.region_excess.max():.2e}")
print(f"final spread around x1*: "
      f"{np.max(np.abs(res.states[:, :2] - [25.0, 40.0])):.2e}")
