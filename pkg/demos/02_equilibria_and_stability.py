"""Calibrate an admission rate from target prices and classify equilibria.

Given desired equilibrium prices p1 (low congestion) and p2 (high
congestion), the linear calibration places fixed points at q1* = p1/beta
and q2* = 2*q_m - p2/beta.  The low one is a stable node; the high one
is a saddle whenever beta*mu > (K_R - mu)|alpha'| + (f+alpha)*mu'.
"""

from accessprice import (
    CalibrationTargets,
    ModelConfig,
    PriceSpec,
    ServiceSpec,
    calibrate_linear_admission,
    find_fixed_points,
    saddle_criterion,
    validate_admissible,
)

price = PriceSpec(variant="triangular", beta=1e-3, q_m=45.0)
service = ServiceSpec(mu_star=3.0, q_c=35.0)
targets = CalibrationTargets(p1=0.04, p2=0.008)

admission = calibrate_linear_admission(targets, price, service, k_r=4.0)
c2, c1 = admission.coefficients
print(f"calibrated alpha(q) = max(0, {c1:.10f}*q + {c2:.10f})")
print(f"admission cutoff q_max = {admission.q_max}")

cfg = ModelConfig(
    k_r=4.0, k_u_schedule=(), price=price, admission=admission, service=service
)
report = validate_admissible(cfg)
print("admissibility:", "pass" if report.passed else "FAIL")
print()

for fp in find_fixed_points(cfg, "normal"):
    eigs = ", ".join(f"{z.real:+.5f}{z.imag:+.5f}j" for z in fp.eigen_data)
    print(
        f"fixed point q* = {fp.q_star:6.2f}  R* = {fp.r_star:7.2f}  "
        f"price = {fp.price_at:.4f}  {fp.classification:12s} eigs: {eigs}"
    )

high = find_fixed_points(cfg, "normal")[1]
lhs, rhs, is_saddle = saddle_criterion(cfg, high)
print()
print(f"saddle inequality at q2*: {lhs:.6f} > {rhs:.6f} -> saddle = {is_saddle}")
print()
print("Interpretation: below the saddle the price regulates demand back to")
print("the low-congestion point; beyond it the falling price stops pushing")
print("responsive users away faster than they arrive, and the queue escapes.")
