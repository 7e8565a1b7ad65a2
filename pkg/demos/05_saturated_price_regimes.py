"""Fixed-point regimes of the saturated price as unresponsive load varies.

With the shipped cubic admission the burst-free system has a single
globally attracting equilibrium.  A moderate constant unresponsive load
K_U bends the balance equation until two additional fixed points appear:
the familiar saddle and a third stable point in the large-queue regime
where the price sits on its floor.  Past K_U near mu* only the congested
point survives, and at K_U >= mu* no equilibrium exists at all, which is
the burst regime of the comparison scenario.
"""

from accessprice import find_fixed_points
from accessprice.cli import load_config

cfg = load_config("configs/section5.json")

print(f"{'K_U':>5} {'count':>6}  fixed points (q*, R*, class)")
for k_u in (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.9, 3.0, 4.0):
    fps = find_fixed_points(cfg, "saturated", k_u)
    desc = "; ".join(
        f"({fp.q_star:.2f}, {fp.r_star:.1f}, {fp.classification})" for fp in fps
    )
    print(f"{k_u:5.2f} {len(fps):6d}  {desc or '-'}")

print()
print("Reading the table:")
print(" * K_U = 0: one stable point -> after any excursion the system")
print("   must return to the uncongested state (the bounceback).")
print(" * K_U ~ 0.5: saddle + high-queue stable point appear; the system")
print("   can park in a congested-but-fair regime while the load lasts.")
print(" * K_U >= mu* = 3: no equilibrium; the queue climbs to capacity")
print("   and stays there until the load ends.")
