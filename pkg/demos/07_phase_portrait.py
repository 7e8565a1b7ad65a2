"""Export a phase-portrait grid and read the flow structure off it.

The grid carries the vector field on cell centers plus overlay records
(nullcline samples and fixed points), so any plotting tool can redraw
the portrait without touching the model.  Here we print a coarse ASCII
rendition: arrows by flow direction, '*' where the field magnitude is
tiny (the equilibria).
"""

from accessprice import phase_grid
from accessprice.cli import load_config
from accessprice.dynamics import NORMAL

cfg = load_config("configs/ref.json")
grid = phase_grid(cfg, NORMAL, (0.0, 150.0), (0.0, 92.0), 24)

print("fixed points on the grid:")
for fp in grid.fixed_points:
    print(f"  q* = {fp.q_star:5.1f}, R* = {fp.r_star:6.1f}  ({fp.classification})")
print()

for i in range(len(grid.r)):
    row = []
    for j in range(len(grid.q)):
        dr, dq = grid.dr[i, j], grid.dq[i, j]
        near_fp = any(
            abs(grid.r[i] - fp.r_star) < 4 and abs(grid.q[j] - fp.q_star) < 3
            for fp in grid.fixed_points
        )
        if near_fp:
            row.append("*")
        elif dr >= 0 and dq >= 0:
            row.append("/")
        elif dr >= 0 > dq:
            row.append("-")
        elif dr < 0 <= dq:
            row.append("|")
        else:
            row.append("\\")
    print(f"R = {grid.r[i]:6.1f}  " + "".join(row))
print(" " * 10 + "q -> 0 .. 92 across columns")
print()
print("Legend: / both R and q growing, \\ both shrinking, - q draining,")
print("| R draining, * near a fixed point.  The '/' corner at low R is")
print("the benign refill toward x1*; the divergent wedge (also '/') needs")
print("R above eta1(q), around R > 800 near the capacity wall, far outside")
print("this window.  Demo 04 shows how the admittance bound removes it.")
print()
print("The same grid as CSV:")
print("  accessprice phase --config configs/ref.json --resolution 50 --out grid.csv")
print(f"eta1 samples: {len(grid.eta1_curve)}, eta2 samples: {len(grid.eta2_curve)}, "
      f"max field magnitude on the grid: {grid.magnitude.max():.2f}")
