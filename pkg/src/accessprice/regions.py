"""Invariant-region construction and verification.

The nullclines of the 2-state system are graphs over q:

    eta1(q) = mu(q)/alpha(q)          (qdot = 0)
    eta2(q) = K_R/(alpha(q) + f(q))   (Rdot = 0)

R_dagger is the maximum of eta2 over [0, q_m] and q_dagger its preimage
under eta1.  Whenever R2* > R_dagger, every choice of q_bar in
(q_dagger, q2*) and r_bar in (max{R_dagger, eta2(q_bar)}, eta1(q_bar)]
yields a forward-invariant polygon A=(0,0), B=(0,q_bar),
C=(eta2(q_bar),q_bar), D=(r_bar,eta1_inverse(r_bar)), E=(r_bar,0) that
is contained in the domain of attraction of the low-congestion point.
The 3-state analogue replaces eta1 by eta3(q) = eta1(q) - u_hat and
traps a cuboid spanned by the origin and (r_hat, q_hat, u_hat).

check_invariance verifies a region numerically: boundary samples
(vertices excluded by a 1e-6 margin), outward-normal inner products on
the non-axis faces, and the inward flow conditions on the axis faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import dynamics, equilibria
from .model import ModelConfig, eval_admission, eval_price, eval_service

VERTEX_MARGIN = 1e-6  # boundary samples keep this distance from vertices
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class FaceReport:
    name: str
    condition: str
    worst: float
    samples: int
    passed: bool


@dataclass
class InvarianceReport:
    faces: list[FaceReport] = field(default_factory=list)
    warning: str = ""

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.faces)


@dataclass
class RegionSpec:
    """An invariant candidate region.

    Polygon2D: vertices are the five (r, q) corners A..E, listed
    counterclockwise when q is drawn on the horizontal axis.  Cuboid3D:
    the two opposite corners (0,0,0) and (r_hat, q_hat, u_hat).
    """

    kind: str  # "polygon2d" | "cuboid3d"
    vertices: tuple[tuple[float, ...], ...]
    k_u: float = 0.0
    check_report: InvarianceReport | None = None


@dataclass
class PhaseGrid:
    """Cell-centered vector-field samples plus overlay records."""

    r: np.ndarray
    q: np.ndarray
    dr: np.ndarray          # (len(r), len(q))
    dq: np.ndarray
    magnitude: np.ndarray
    eta1_curve: np.ndarray  # rows (q, R)
    eta2_curve: np.ndarray
    fixed_points: tuple


def _alpha_checked(cfg, q):
    arr = np.asarray(q, dtype=float)
    a = eval_admission(cfg.admission, arr)
    if np.any(a <= 0):
        raise ValueError("alpha(q) vanishes at or beyond q_max; eta undefined")
    return a


def eta1(cfg: ModelConfig, q):
    """q-nullcline height mu(q)/alpha(q); increasing in q."""
    a = _alpha_checked(cfg, q)
    val = eval_service(cfg.service, q) / a
    return float(val) if np.isscalar(q) else val


def eta2(cfg: ModelConfig, q):
    """R-nullcline height K_R/(alpha(q) + f(q))."""
    a = _alpha_checked(cfg, q)
    tot = a + eval_price(cfg.price, q)
    if np.any(tot <= 0):
        raise ValueError("alpha + f vanishes; eta2 undefined")
    val = cfg.k_r / tot
    return float(val) if np.isscalar(q) else val


def eta3(cfg: ModelConfig, q, u_hat: float):
    """3-state analogue of eta1: (mu(q) - alpha(q)*u_hat)/alpha(q)."""
    a = _alpha_checked(cfg, q)
    val = (eval_service(cfg.service, q) - a * u_hat) / a
    return float(val) if np.isscalar(q) else val


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
        else:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
    return 0.5 * (a + b)


def r_dagger(cfg: ModelConfig) -> float:
    """max { eta2(q) : q in [0, q_m] } by grid scan plus local refinement.

    The maximum is not assumed to sit at q_m: for admissible alpha it can
    be interior or at either endpoint, so a 1000-point grid brackets it
    and a golden-section pass refines the bracket.
    """
    q_m = cfg.price.q_m
    if q_m is None:
        raise ValueError("r_dagger needs a price variant with a peak q_m")
    qs = np.linspace(0.0, q_m, 1000)
    vals = eta2(cfg, qs)
    i = int(np.argmax(vals))
    lo = qs[max(0, i - 1)]
    hi = qs[min(len(qs) - 1, i + 1)]
    q_best = _golden_max(lambda q: eta2(cfg, float(q)), lo, hi)
    return max(float(np.max(vals)), eta2(cfg, q_best))


def eta1_inverse(cfg: ModelConfig, r: float) -> float:
    """Solve eta1(q) = r by bisection; eta1 is strictly increasing."""
    if r < 0:
        raise ValueError("eta1 inverse needs r >= 0")
    if r == 0:
        return 0.0
    q_max = cfg.admission.q_max
    hi = q_max * (1 - 1e-12) - 1e-12 if math.isfinite(q_max) else cfg.service.q_c * 1e6
    if eta1(cfg, hi) < r:
        raise ValueError(f"eta1 stays below {r:g} on its domain")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if eta1(cfg, mid) < r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def q_dagger(cfg: ModelConfig) -> float:
    """eta1_inverse(R_dagger)."""
    return eta1_inverse(cfg, r_dagger(cfg))


def _two_normal_points(cfg):
    fps = equilibria.find_fixed_points(cfg, "normal")
    if len(fps) != 2:
        raise ValueError(
            f"region construction needs exactly two normal-mode fixed points, found {len(fps)}"
        )
    return fps


def build_polygon(cfg: ModelConfig, q_choice: float | None = None, r_choice: float | None = None) -> RegionSpec:
    """Invariant polygon A-B-C-D-E for the 2-state system.

    Defaults pick the midpoints of the admissible intervals.  Every
    hypothesis violation is reported by name.
    """
    fps = _two_normal_points(cfg)
    r2, q2 = fps[1].r_star, fps[1].q_star
    rd = r_dagger(cfg)
    if not r2 > rd:
        raise ValueError(f"hypothesis R2* > R_dagger violated: {r2:g} <= {rd:g}")
    qd = q_dagger(cfg)
    if q_choice is None:
        q_choice = 0.5 * (qd + q2)
    if not qd < q_choice < q2:
        raise ValueError(
            f"q_choice must lie in (q_dagger, q2*) = ({qd:g}, {q2:g}), got {q_choice:g}"
        )
    lo = max(rd, eta2(cfg, q_choice))
    hi = eta1(cfg, q_choice)
    if r_choice is None:
        r_choice = 0.5 * (lo + hi)
    if not (lo < r_choice <= hi):
        raise ValueError(
            f"r_choice must lie in (max(R_dagger, eta2(q)), eta1(q)] = ({lo:g}, {hi:g}], got {r_choice:g}"
        )
    vertices = (
        (0.0, 0.0),
        (0.0, q_choice),
        (eta2(cfg, q_choice), q_choice),
        (r_choice, eta1_inverse(cfg, r_choice)),
        (r_choice, 0.0),
    )
    return RegionSpec(kind="polygon2d", vertices=vertices)


def default_cuboid_params(cfg: ModelConfig, k_u: float = 0.0):
    """Midpoint (q_hat, u_hat, r_hat) for build_cuboid.

    u_hat is chosen inside the part of (K_U/alpha(q_hat), U2*) that
    leaves the r_hat interval (eta2, eta3) nonempty, i.e. below
    eta1(q_hat) - eta2(q_hat); with K_U = 0 the upper bound U2* = 0 is
    vacuous and only that feasibility bound applies.
    """
    fps = equilibria.find_fixed_points(cfg, "competitive", k_u)
    if len(fps) != 2:
        raise ValueError(
            f"cuboid construction needs exactly two competitive fixed points, found {len(fps)}"
        )
    q2, u2 = fps[1].q_star, fps[1].u_star
    qd = q_dagger(cfg)
    q_hat = 0.5 * (qd + q2)
    lo_u = k_u / eval_admission(cfg.admission, q_hat)
    room = eta1(cfg, q_hat) - eta2(cfg, q_hat)
    hi_u = min(u2, room) if k_u > 0 else room
    if not hi_u > lo_u:
        raise ValueError("no u_hat leaves the r_hat interval nonempty")
    u_hat = 0.5 * (lo_u + hi_u)
    r_hat = 0.5 * (eta2(cfg, q_hat) + eta3(cfg, q_hat, u_hat))
    return q_hat, u_hat, r_hat


def build_cuboid(
    cfg: ModelConfig,
    q_hat: float | None = None,
    u_hat: float | None = None,
    r_hat: float | None = None,
    k_u: float = 0.0,
) -> RegionSpec:
    """Absorbing cuboid spanned by (0,0,0) and (r_hat, q_hat, u_hat).

    Preconditions, each reported by name when violated: R2* > R_dagger,
    q_hat in (q_dagger, q2*), u_hat in (K_U/alpha(q_hat), U2*) (upper bound
    dropped when K_U = 0, where U2* = 0 says nothing), r_hat in
    (eta2(q_hat), eta3(q_hat, u_hat)).
    """
    fps = equilibria.find_fixed_points(cfg, "competitive", k_u)
    if len(fps) != 2:
        raise ValueError(
            f"cuboid construction needs exactly two competitive fixed points, found {len(fps)}"
        )
    r2, q2, u2 = fps[1].r_star, fps[1].q_star, fps[1].u_star
    rd = r_dagger(cfg)
    if not r2 > rd:
        raise ValueError(f"hypothesis R2* > R_dagger violated: {r2:g} <= {rd:g}")
    if q_hat is None or u_hat is None or r_hat is None:
        dq, du, dr = default_cuboid_params(cfg, k_u)
        q_hat = dq if q_hat is None else q_hat
        u_hat = du if u_hat is None else u_hat
        r_hat = dr if r_hat is None else r_hat
    qd = q_dagger(cfg)
    if not qd < q_hat < q2:
        raise ValueError(
            f"q_hat must lie in (q_dagger, q2*) = ({qd:g}, {q2:g}), got {q_hat:g}"
        )
    lo_u = k_u / eval_admission(cfg.admission, q_hat)
    if not u_hat > lo_u:
        raise ValueError(
            f"u_hat must exceed K_U/alpha(q_hat) = {lo_u:g}, got {u_hat:g}"
        )
    if k_u > 0 and not u_hat < u2:
        raise ValueError(f"u_hat must lie below U2* = {u2:g}, got {u_hat:g}")
    lo_r, hi_r = eta2(cfg, q_hat), eta3(cfg, q_hat, u_hat)
    if not (lo_r < r_hat < hi_r):
        raise ValueError(
            f"r_hat must lie in (eta2(q_hat), eta3(q_hat, u_hat)) = ({lo_r:g}, {hi_r:g}), got {r_hat:g}"
        )
    return RegionSpec(
        kind="cuboid3d",
        vertices=((0.0, 0.0, 0.0), (r_hat, q_hat, u_hat)),
        k_u=k_u,
    )


def _polygon_edges(vertices):
    n = len(vertices)
    return [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]


def _outward_normal(v1, v2, centroid):
    d = (v2[0] - v1[0], v2[1] - v1[1])
    n = np.array([d[1], -d[0]])
    n /= np.hypot(*n)
    mid = np.array([(v1[0] + v2[0]) / 2, (v1[1] + v2[1]) / 2])
    if n @ (np.asarray(centroid) - mid) > 0:
        n = -n
    return n


def halfspaces(region: RegionSpec):
    """(A, b) with the region = {x : A @ x <= b}, rows per face."""
    if region.kind == "polygon2d":
        verts = [np.array(v, dtype=float) for v in region.vertices]
        centroid = np.mean(verts, axis=0)
        rows, offs = [], []
        for v1, v2 in _polygon_edges(verts):
            n = _outward_normal(v1, v2, centroid)
            rows.append([n[0], n[1], 0.0])
            offs.append(float(n @ v1))
        return np.array(rows), np.array(offs)
    r_hat, q_hat, u_hat = region.vertices[1]
    A = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    )
    b = np.array([r_hat, q_hat, u_hat, 0.0, 0.0, 0.0])
    return A, b


def _edge_samples(v1, v2, n):
    v1, v2 = np.asarray(v1, dtype=float), np.asarray(v2, dtype=float)
    length = np.linalg.norm(v2 - v1)
    m = min(0.49, VERTEX_MARGIN / length) if length > 0 else 0.0
    ts = np.linspace(m, 1 - m, n)
    return v1[None, :] + ts[:, None] * (v2 - v1)[None, :]


def check_invariance(cfg: ModelConfig, region: RegionSpec, mode, n: int = 1000) -> InvarianceReport:
    """Sample the region boundary and test that the flow points inward.

    Non-axis faces must have a strictly negative worst inner product of
    the outward normal with the right-hand side; axis faces use the
    inward conditions dR/dt > 0 on R = 0, dq/dt >= 0 on q = 0 and dU/dt > 0 on
    U = 0 (>= 0 when K_U = 0).  Vertices and a 1e-6 margin around them
    are excluded.  n = 0 passes vacuously with a warning.
    """
    report = InvarianceReport()
    if n == 0:
        report.warning = "no samples requested; vacuous pass"
        region.check_report = report
        return report
    mode = dynamics.as_mode(mode)

    if region.kind == "polygon2d":
        verts = [np.array(v, dtype=float) for v in region.vertices]
        centroid = np.mean(verts, axis=0)
        names = ["AB", "BC", "CD", "DE", "EA"]
        for name, (v1, v2) in zip(names, _polygon_edges(verts)):
            pts = _edge_samples(v1, v2, n)
            states = np.column_stack([pts, np.zeros(len(pts))])
            F = dynamics.rhs(cfg, mode, 0.0, states)
            on_r_axis = abs(v1[0]) < 1e-12 and abs(v2[0]) < 1e-12
            on_q_axis = abs(v1[1]) < 1e-12 and abs(v2[1]) < 1e-12
            if on_r_axis:
                worst = float(F[:, 0].min())
                report.faces.append(
                    FaceReport(name, "dR/dt > 0 on R = 0", worst, n, worst > 0)
                )
            elif on_q_axis:
                worst = float(F[:, 1].min())
                report.faces.append(
                    FaceReport(name, "dq/dt >= 0 on q = 0", worst, n, worst >= 0)
                )
            else:
                nrm = _outward_normal(v1, v2, centroid)
                vals = F[:, 0] * nrm[0] + F[:, 1] * nrm[1]
                worst = float(vals.max())
                report.faces.append(
                    FaceReport(name, "<outward normal, F> < 0", worst, n, worst < 0)
                )
        region.check_report = report
        return report

    if region.kind != "cuboid3d":
        raise ValueError(f"unknown region kind {region.kind!r}")
    r_hat, q_hat, u_hat = region.vertices[1]
    side = max(2, math.ceil(math.sqrt(n)))

    def face_grid(fixed_axis, fixed_val, span_a, span_b):
        a = np.linspace(VERTEX_MARGIN, span_a - VERTEX_MARGIN, side)
        b = np.linspace(VERTEX_MARGIN, span_b - VERTEX_MARGIN, side)
        A, B = np.meshgrid(a, b)
        pts = np.empty((A.size, 3))
        axes = [i for i in range(3) if i != fixed_axis]
        pts[:, fixed_axis] = fixed_val
        pts[:, axes[0]] = A.ravel()
        pts[:, axes[1]] = B.ravel()
        return pts

    spans = (r_hat, q_hat, u_hat)
    axis_conditions = [
        ("R=0", 0, "dR/dt > 0", True),
        ("q=0", 1, "dq/dt >= 0", False),
        ("U=0", 2, "dU/dt > 0 (>= 0 when K_U = 0)", mode.k_u > 0),
    ]
    for name, axis, cond, strict in axis_conditions:
        others = [i for i in range(3) if i != axis]
        pts = face_grid(axis, 0.0, spans[others[0]], spans[others[1]])
        F = dynamics.rhs(cfg, mode, 0.0, pts)
        worst = float(F[:, axis].min())
        ok = worst > 0 if strict else worst >= 0
        report.faces.append(FaceReport(name, cond, worst, len(pts), ok))
    outer = [("R=r_hat", 0), ("q=q_hat", 1), ("U=u_hat", 2)]
    for name, axis in outer:
        others = [i for i in range(3) if i != axis]
        pts = face_grid(axis, spans[axis], spans[others[0]], spans[others[1]])
        F = dynamics.rhs(cfg, mode, 0.0, pts)
        worst = float(F[:, axis].max())
        report.faces.append(
            FaceReport(name, "<outward normal, F> < 0", worst, len(pts), worst < 0)
        )
    region.check_report = report
    return report


def phase_grid(cfg: ModelConfig, mode, r_range, q_range, resolution: int) -> PhaseGrid:
    """Vector-field samples on cell centers of the requested box (U = 0).

    Includes eta1/eta2 curve samples and the mode's fixed points as
    overlay records so plots need no recomputation.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    r0, r1 = map(float, r_range)
    q0, q1 = map(float, q_range)
    if not (r1 > r0 >= 0 and q1 > q0 >= 0):
        raise ValueError("ranges must be nonnegative and increasing")
    mode = dynamics.as_mode(mode)
    dr_cell = (r1 - r0) / resolution
    dq_cell = (q1 - q0) / resolution
    rs = r0 + dr_cell * (np.arange(resolution) + 0.5)
    qs = q0 + dq_cell * (np.arange(resolution) + 0.5)
    R, Q = np.meshgrid(rs, qs, indexing="ij")
    states = np.column_stack([R.ravel(), Q.ravel(), np.zeros(R.size)])
    F = dynamics.rhs(cfg, mode, 0.0, states)
    dr = F[:, 0].reshape(R.shape)
    dq = F[:, 1].reshape(R.shape)

    q_max = cfg.admission.q_max
    hi = min(q1, q_max * (1 - 1e-9)) if math.isfinite(q_max) else q1
    q_curve = np.linspace(max(q0, 0.0), hi, 200)
    ok = eval_admission(cfg.admission, q_curve) > 0
    q_curve = q_curve[ok]
    e1 = np.column_stack([q_curve, eta1(cfg, q_curve)])
    e2 = np.column_stack([q_curve, eta2(cfg, q_curve)])
    fps = tuple(equilibria.find_fixed_points(cfg, mode.tag, mode.k_u))
    return PhaseGrid(
        r=rs,
        q=qs,
        dr=dr,
        dq=dq,
        magnitude=np.hypot(dr, dq),
        eta1_curve=e1,
        eta2_curve=e2,
        fixed_points=fps,
    )
