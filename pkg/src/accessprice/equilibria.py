"""Equilibrium calibration and fixed-point location.

Fixed points of every operating mode reduce to a scalar equation in the
active-queue length q:

    normal                f(q)/alpha(q) = (K_R - mu(q)) / mu(q)
    saturated/competitive f(q)/alpha(q) = (K_R + K_U - mu(q)) / (mu(q) - K_U)

The residual g(q) is scanned on a dense grid over its domain of
definition, sign changes are refined by bisection, and the remaining
coordinates are recovered by back-substitution:

    normal       R* = mu(q*)/alpha(q*),                 U* = 0
    saturated    R* = (mu(q*) - K_U)/alpha(q*),         U* = 0
    competitive  R* = (mu(q*) - K_U)/alpha(q*),         U* = K_U/alpha(q*)

Calibration runs the other way: given desired equilibrium prices p1, p2
it constructs an admission polynomial whose fixed points land at
q1* = p1/beta and q2* = 2*q_m - p2/beta.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import stability
from .model import (
    AdmissionSpec,
    ModelConfig,
    PriceSpec,
    ServiceSpec,
    eval_admission,
    eval_price,
    eval_service,
)

ANALYSIS_MODES = ("normal", "saturated", "competitive")

GRID_POINTS = 2000          # scan density for the residual
ROOT_MERGE_TOL = 1e-6       # roots closer than this collapse to one
DOMAIN_EPS = 1e-12          # guard band on mu(q) > K_U and alpha(q) > 0


class CalibrationError(ValueError):
    """Requested equilibrium targets admit no admissible admission rate."""


class ResidualUndefinedError(ValueError):
    """The fixed-point residual is not defined at the requested point."""


@dataclass(frozen=True)
class FixedPoint:
    """An equilibrium, its mode and its linearized character."""

    mode: str
    r_star: float
    q_star: float
    u_star: float
    price_at: float
    classification: str
    eigen_data: tuple[complex, ...]


@dataclass(frozen=True)
class CalibrationTargets:
    """Desired equilibrium prices for the low/high congestion regimes.

    alpha0 optionally pins the cubic's value at q = 0; if omitted the
    cubic calibration scans for it.
    """

    p1: float
    p2: float
    alpha0: float | None = None


def _mode_tag(mode) -> str:
    tag = getattr(mode, "tag", mode)
    if tag == "chattering":
        tag = "normal"  # same fixed points below the admittance bound
    if tag == "switched_full":
        tag = "competitive"
    if tag not in ANALYSIS_MODES:
        raise ValueError(f"unknown analysis mode {mode!r}")
    return tag


def fixed_point_residual(q: float, cfg: ModelConfig, mode="normal", k_u: float = 0.0) -> float:
    """Scalar residual g(q) whose roots are the mode's equilibria.

    Raises ResidualUndefinedError where the defining fractions blow up:
    alpha(q) = 0, mu(q) = 0, or mu(q) <= K_U in the K_U-fed modes.
    """
    tag = _mode_tag(mode)
    if tag == "normal":
        k_u = 0.0
    a = eval_admission(cfg.admission, q)
    m = eval_service(cfg.service, q)
    if a <= DOMAIN_EPS:
        raise ResidualUndefinedError(f"alpha({q:g}) vanishes")
    if m - k_u <= DOMAIN_EPS:
        raise ResidualUndefinedError(f"mu({q:g}) = {m:g} does not exceed K_U = {k_u:g}")
    f = eval_price(cfg.price, q)
    return f / a - (cfg.k_r + k_u - m) / (m - k_u)


def _scan_domain(cfg: ModelConfig, k_u: float):
    """Grid over {q : mu(q) > K_U, alpha(q) > 0} and masked residual."""
    q_max = cfg.admission.q_max
    hi = q_max - max(1e-9, abs(q_max) * 1e-12) if math.isfinite(q_max) else 4 * cfg.service.q_c + 400.0
    svc = cfg.service
    lo = 1e-9 if k_u <= 0 else (k_u + DOMAIN_EPS) * svc.q_c / svc.mu_star * (1 + 1e-12) + 1e-12
    if k_u >= svc.mu_star or lo >= hi:
        return None
    qs = np.linspace(lo, hi, GRID_POINTS)
    a = eval_admission(cfg.admission, qs)
    m = eval_service(cfg.service, qs)
    ok = (a > DOMAIN_EPS) & (m - k_u > DOMAIN_EPS)
    g = np.full_like(qs, np.nan)
    g[ok] = eval_price(cfg.price, qs[ok]) / a[ok] - (cfg.k_r + k_u - m[ok]) / (m[ok] - k_u)
    return qs, g, ok


def _bisect(cfg, tag, k_u, lo, hi, g_lo):
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        g_mid = fixed_point_residual(mid, cfg, tag, k_u)
        if g_mid == 0.0:
            return mid
        if (g_mid > 0) == (g_lo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_fixed_points(cfg: ModelConfig, mode="normal", k_u: float = 0.0) -> list[FixedPoint]:
    """Locate and classify every fixed point of the given mode.

    Grid scan of the residual over its domain, bisection on each sign
    change, merge of roots closer than 1e-6, back-substitution of the
    remaining coordinates, classification through the stability module.
    An empty list is a valid result (e.g. K_U >= mu_star).
    """
    tag = _mode_tag(mode)
    if k_u == 0.0:
        k_u = getattr(mode, "k_u", 0.0)
    if tag == "normal":
        k_u = 0.0
    dom = _scan_domain(cfg, k_u)
    if dom is None:
        return []
    qs, g, ok = dom
    roots: list[float] = []
    idx = np.nonzero(ok[:-1] & ok[1:] & (np.sign(g[:-1]) * np.sign(g[1:]) < 0))[0]
    for i in idx:
        roots.append(_bisect(cfg, tag, k_u, qs[i], qs[i + 1], g[i]))
    exact = np.nonzero(ok & (g == 0.0))[0]
    roots.extend(qs[j] for j in exact)
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if merged and abs(r - merged[-1]) < ROOT_MERGE_TOL:
            continue
        merged.append(r)

    out = []
    for q_star in merged:
        a = eval_admission(cfg.admission, q_star)
        m = eval_service(cfg.service, q_star)
        if tag == "normal":
            r_star, u_star = m / a, 0.0
        elif tag == "saturated":
            r_star, u_star = (m - k_u) / a, 0.0
        else:
            r_star, u_star = (m - k_u) / a, k_u / a
        try:
            jac = stability.jacobian(cfg, (r_star, q_star, u_star), tag)
            report = stability.classify(jac)
            cls, eig = report.classification, tuple(report.eigenvalues)
        except stability.KinkProximityError:
            cls, eig = "degenerate", ()
        out.append(
            FixedPoint(
                mode=tag,
                r_star=r_star,
                q_star=q_star,
                u_star=u_star,
                price_at=eval_price(cfg.price, q_star),
                classification=cls,
                eigen_data=eig,
            )
        )
    return out


def _target_queues(targets: CalibrationTargets, price: PriceSpec):
    """Implied q1*, q2* from the desired prices; validates intervals."""
    if price.variant == "surge":
        raise CalibrationError("calibration needs a price with a falling branch")
    beta, q_m = price.beta, price.q_m
    for name, p in (("p1", targets.p1), ("p2", targets.p2)):
        if not 0 < p < beta * q_m:
            raise CalibrationError(f"{name} must lie in (0, beta*q_m) = (0, {beta * q_m:g})")
    q1 = targets.p1 / beta
    q2 = 2 * q_m - targets.p2 / beta
    if price.variant == "saturated" and q2 >= price.q_n:
        raise CalibrationError(
            f"p2 = {targets.p2:g} sits at or below the saturation floor "
            f"{beta * (2 * q_m - price.q_n):g}; no point on the falling branch has that price"
        )
    return q1, q2


def _alpha_targets(q1, q2, price, service, k_r):
    out = []
    for q in (q1, q2):
        m = eval_service(service, q)
        if k_r <= m:
            raise CalibrationError(f"K_R = {k_r:g} must exceed mu({q:g}) = {m:g}")
        out.append(eval_price(price, q) * m / (k_r - m))
    return out


def _check_calibrated(admission, price, service, k_r, q1, q2) -> ModelConfig:
    from .model import validate_admissible

    cfg = ModelConfig(
        k_r=k_r, k_u_schedule=(), price=price, admission=admission, service=service
    )
    rep = validate_admissible(cfg)
    for name in ("alpha-positive-decreasing", "alpha-zero-beyond-qmax", "root-count"):
        cl = rep.clause(name)
        if not cl.passed:
            raise CalibrationError(f"calibrated admission fails {name}: {cl.detail}")
    found = [fp.q_star for fp in find_fixed_points(cfg, "normal")]
    for q in (q1, q2):
        if price.variant == "saturated" and not any(abs(q - f) < 1e-6 for f in found):
            raise CalibrationError(f"target equilibrium q* = {q:g} not recovered")
    if price.variant == "triangular":
        if len(found) != 2 or abs(found[0] - q1) > 1e-6 or abs(found[1] - q2) > 1e-6:
            raise CalibrationError(f"extra or missing roots: found {found}")
    return cfg


def calibrate_linear_admission(
    targets: CalibrationTargets,
    price: PriceSpec,
    service: ServiceSpec,
    k_r: float,
) -> AdmissionSpec:
    """Linear alpha through the two equilibrium conditions.

    Solves alpha(q_i*) = p_i * mu(q_i*) / (K_R - mu(q_i*)) for (c1, c2)
    and verifies the result is admissible (strictly decreasing, correct
    root count).
    """
    q1, q2 = _target_queues(targets, price)
    a1, a2 = _alpha_targets(q1, q2, price, service, k_r)
    if a1 <= a2:
        raise CalibrationError(
            f"monotonicity violation: alpha(q1*) = {a1:g} <= alpha(q2*) = {a2:g}"
        )
    c1 = (a2 - a1) / (q2 - q1)
    c2 = a1 - c1 * q1
    adm = AdmissionSpec(variant="linear", coefficients=(c2, c1))
    _check_calibrated(adm, price, service, k_r, q1, q2)
    return adm


def calibrate_cubic_admission(
    targets: CalibrationTargets,
    price: PriceSpec,
    service: ServiceSpec,
    k_r: float,
    q_max: float,
) -> AdmissionSpec:
    """Cubic alpha through the two equilibrium conditions.

    Four linear equations fix (a0..a3): the two alpha targets, alpha(q_max) = 0
    and alpha(0) = alpha0.  When targets.alpha0 is absent, alpha0 is scanned
    over [alpha(q1*), 4*alpha(q1*)] in 64 steps and the first solution whose
    derivative is nonpositive on all of [0, q_max] wins.
    """
    if not q_max > 2 * price.q_m:
        raise CalibrationError(f"q_max must exceed 2*q_m = {2 * price.q_m:g}")
    q1, q2 = _target_queues(targets, price)
    a1t, a2t = _alpha_targets(q1, q2, price, service, k_r)
    if a1t <= a2t:
        raise CalibrationError(
            f"monotonicity violation: alpha(q1*) = {a1t:g} <= alpha(q2*) = {a2t:g}"
        )

    def solve(alpha0):
        A = np.array([[1.0, q, q * q, q ** 3] for q in (0.0, q1, q2, q_max)])
        b = np.array([alpha0, a1t, a2t, 0.0])
        return tuple(np.linalg.solve(A, b))

    def monotone(coeffs):
        _, a1, a2, a3 = coeffs
        crit = [0.0, q_max]
        if a3 != 0:
            disc = (2 * a2) ** 2 - 12 * a3 * a1
            if disc >= 0:
                for sgn in (-1.0, 1.0):
                    r = (-2 * a2 + sgn * math.sqrt(disc)) / (6 * a3)
                    if 0 <= r <= q_max:
                        crit.append(r)
        elif a2 != 0:
            r = -a1 / (2 * a2)
            if 0 <= r <= q_max:
                crit.append(r)
        return max(a1 + q * (2 * a2 + 3 * a3 * q) for q in crit) <= 0

    if targets.alpha0 is not None:
        if targets.alpha0 < a1t:
            raise CalibrationError(
                f"alpha0 = {targets.alpha0:g} below alpha(q1*) = {a1t:g}; "
                "a decreasing cubic needs alpha(0) >= alpha(q1*)"
            )
        candidates = [targets.alpha0]
    else:
        candidates = list(np.linspace(a1t, 4 * a1t, 64))

    for alpha0 in candidates:
        coeffs = solve(alpha0)
        if not monotone(coeffs):
            continue
        adm = AdmissionSpec(variant="cubic", coefficients=coeffs, q_max=q_max)
        _check_calibrated(adm, price, service, k_r, q1, q2)
        return adm
    raise CalibrationError(
        "no monotone cubic found in the alpha0 scan range "
        f"[{a1t:g}, {4 * a1t:g}]"
    )
