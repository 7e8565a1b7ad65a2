"""Right-hand sides and trajectory integration for every operating mode.

Modes
-----
normal        2-state (R, q): inflow K_R, price-driven abandonment, no
              unresponsive traffic.
chattering    normal plus the admittance clamp: for q >= q_ad the flow
              into the active queue is min(alpha(q) R, mu_star), which
              freezes q on the bound while admission is saturated.
saturated     2-state with a constant unresponsive load K_U fed straight
              into the active queue (price expected saturated).
competitive   3-state (R, q, U) with its own U dynamics and constant K_U.
switched_full 3-state with K_U(t) taken piecewise-constant from the
              configuration schedule; realizes the bursty switching
              scenario.

Integration is classical fixed-step RK4 on the Caratheodory right-hand
side.  States are projected onto the nonnegative orthant before each
evaluation and clamped after each step (coordinates >= 0, q <= q_max;
in chattering mode q is also projected back to q_ad whenever a step that
started inside [0, q_ad] overshoots the bound, mirroring the invariance
of that set under the exact flow).  Schedule breakpoints and the final
time are snapped onto the step grid by shortening the last step of each
piece.  No event location is performed; the kink set has measure zero
and the O(h) local error there is absorbed by the acceptance tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .model import ModelConfig, eval_price, eval_service

MAX_STEP = 0.1
DEFAULT_STEP = 0.01
CLAMP_EPS = 1e-9
SETTLE_STREAK = 100  # consecutive in-tolerance steps deemed converged

MODE_TAGS = ("normal", "chattering", "saturated", "competitive", "switched_full")


@dataclass(frozen=True)
class SystemMode:
    """Operating mode tag plus the constant K_U it carries.

    k_u is the unresponsive arrival rate for the saturated and
    competitive modes; normal and chattering ignore it and
    switched_full reads K_U(t) from the configuration schedule instead.
    """

    tag: str
    k_u: float = 0.0

    def __post_init__(self):
        if self.tag not in MODE_TAGS:
            raise ValueError(f"unknown mode tag {self.tag!r}")
        if self.k_u < 0:
            raise ValueError("k_u must be >= 0")


NORMAL = SystemMode("normal")
CHATTERING = SystemMode("chattering")
SWITCHED_FULL = SystemMode("switched_full")


def saturated_mode(k_u: float) -> SystemMode:
    return SystemMode("saturated", k_u)


def competitive_mode(k_u: float) -> SystemMode:
    return SystemMode("competitive", k_u)


def as_mode(mode) -> SystemMode:
    if isinstance(mode, SystemMode):
        return mode
    return SystemMode(str(mode))


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed states plus the derived per-step series.

    states has one row (R, q, U) per time; U is zero and frozen in the
    2-state modes.  The derived series are consistent with the states
    under the model evaluators by construction.
    """

    mode: SystemMode
    times: np.ndarray
    states: np.ndarray
    price: np.ndarray
    flow_r: np.ndarray
    flow_u: np.ndarray
    mu: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def q(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def u(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t: float) -> np.ndarray:
        """State at the grid time nearest to t."""
        i = int(np.argmin(np.abs(self.times - t)))
        return self.states[i]


def _field_closures(cfg: ModelConfig):
    """Vectorized (f, alpha, mu) closing over plain floats."""
    p = cfg.price
    b = p.beta
    if p.variant == "triangular":
        qm = p.q_m

        def f(q):
            return b * np.maximum(0.0, np.minimum(q, 2 * qm - q))
    elif p.variant == "saturated":
        qm, qn = p.q_m, p.q_n

        def f(q):
            return b * np.minimum(q, np.maximum(2 * qm - q, 2 * qm - qn))
    else:

        def f(q):
            return b * q

    adm = cfg.admission
    if adm.variant == "linear":
        c2, c1 = adm.coefficients

        def alpha(q):
            return np.maximum(0.0, c1 * q + c2)
    else:
        a0, a1, a2, a3 = adm.coefficients
        q_max = adm.q_max

        def alpha(q):
            poly = a0 + q * (a1 + q * (a2 + q * a3))
            return np.where(q >= q_max, 0.0, np.maximum(0.0, poly))

    mu_star, q_c = cfg.service.mu_star, cfg.service.q_c
    ramp = mu_star / q_c

    def mu(q):
        return ramp * np.minimum(q, q_c)

    return f, alpha, mu


def _make_deriv(cfg: ModelConfig, tag: str, k_u: float):
    """(r, q, u) -> (dr, dq, du) on arrays, projecting onto the orthant."""
    f, alpha, mu = _field_closures(cfg)
    k_r = cfg.k_r
    if tag == "chattering":
        if cfg.q_ad is None:
            raise ValueError("chattering mode needs q_ad in the configuration")
        q_ad, mu_star = cfg.q_ad, cfg.service.mu_star

    def deriv(r, q, u):
        r = np.maximum(r, 0.0)
        q = np.maximum(q, 0.0)
        a = alpha(q)
        fq = f(q)
        m = mu(q)
        if tag == "normal":
            return k_r - (fq + a) * r, a * r - m, np.zeros_like(r)
        if tag == "chattering":
            adm = a * r
            adm = np.where(q >= q_ad, np.minimum(adm, mu_star), adm)
            return k_r - fq * r - adm, adm - m, np.zeros_like(r)
        if tag == "saturated":
            return k_r - (fq + a) * r, a * r - m + k_u, np.zeros_like(r)
        u = np.maximum(u, 0.0)
        return k_r - (fq + a) * r, a * (r + u) - m, k_u - a * u

    return deriv


def rhs(cfg: ModelConfig, mode, t: float, x) -> np.ndarray:
    """Right-hand side of the mode at time t and state x = (r, q[, u]).

    Accepts a single state or an array of states in the trailing-axis
    layout (..., 2 or 3); returns the matching shape.  States are
    projected onto the nonnegative orthant before evaluation, so RK4
    stage points that overshoot the axes remain well defined.
    """
    mode = as_mode(mode)
    k_u = cfg.schedule_rate(t) if mode.tag == "switched_full" else mode.k_u
    tag = "competitive" if mode.tag == "switched_full" else mode.tag
    deriv = _make_deriv(cfg, tag, k_u)
    arr = np.asarray(x, dtype=float)
    ncoord = arr.shape[-1]
    if ncoord == 2:
        r, q = arr[..., 0], arr[..., 1]
        u = np.zeros_like(r)
    elif ncoord == 3:
        r, q, u = arr[..., 0], arr[..., 1], arr[..., 2]
    else:
        raise ValueError("state must have 2 or 3 coordinates")
    dr, dq, du = deriv(r, q, u)
    out = np.stack([dr, dq, du], axis=-1)
    return out[..., :ncoord] if ncoord == 2 else out


def admitted_flows(cfg: ModelConfig, mode, x):
    """Admitted (responsive, unresponsive) flow at the state.

    Smooth modes: (alpha(q) R, alpha(q) U).  Chattering: the clamped
    total min(alpha(q) R, mu_star) for q >= q_ad, split pro rata R : U.
    """
    mode = as_mode(mode)
    arr = np.asarray(x, dtype=float)
    r = np.maximum(arr[..., 0], 0.0)
    q = np.maximum(arr[..., 1], 0.0)
    u = np.maximum(arr[..., 2], 0.0) if arr.shape[-1] == 3 else np.zeros_like(r)
    _, alpha, _ = _field_closures(cfg)
    a = alpha(q)
    if mode.tag == "chattering":
        if cfg.q_ad is None:
            raise ValueError("chattering mode needs q_ad in the configuration")
        total = a * r
        total = np.where(q >= cfg.q_ad, np.minimum(total, cfg.service.mu_star), total)
        pop = r + u
        share = np.divide(r, pop, out=np.ones_like(r), where=pop > 0)
        return total * share, total * (1.0 - share)
    if mode.tag in ("normal", "saturated"):
        return a * r, np.zeros_like(r)
    return a * r, a * u


def _pieces(cfg: ModelConfig, mode: SystemMode, t0: float, t1: float):
    """(start, end, k_u) integration pieces with constant K_U each."""
    if mode.tag != "switched_full":
        return [(t0, t1, mode.k_u)]
    edges = [t0] + cfg.schedule_breakpoints(t0, t1) + [t1]
    return [
        (a, b, cfg.schedule_rate(a)) for a, b in zip(edges[:-1], edges[1:])
    ]


def _rk4_batch(deriv, r, q, u, h):
    """One unclamped RK4 step on component arrays."""
    kr1, kq1, ku1 = deriv(r, q, u)
    kr2, kq2, ku2 = deriv(r + 0.5 * h * kr1, q + 0.5 * h * kq1, u + 0.5 * h * ku1)
    kr3, kq3, ku3 = deriv(r + 0.5 * h * kr2, q + 0.5 * h * kq2, u + 0.5 * h * ku2)
    kr4, kq4, ku4 = deriv(r + h * kr3, q + h * kq3, u + h * ku3)
    c = h / 6.0
    return (
        r + c * (kr1 + 2 * kr2 + 2 * kr3 + kr4),
        q + c * (kq1 + 2 * kq2 + 2 * kq3 + kq4),
        u + c * (ku1 + 2 * ku2 + 2 * ku3 + ku4),
    )


def _check_step(h: float):
    if not 0 < h <= MAX_STEP:
        raise ValueError(f"step h must lie in (0, {MAX_STEP}]")


def _substeps(a: float, b: float, h: float):
    """Step sizes covering [a, b]: h repeated, final step shortened."""
    span = b - a
    if span <= 0:
        return []
    n = max(1, math.ceil(span / h - 1e-9))
    last = span - (n - 1) * h
    return [h] * (n - 1) + [last]


def _as_state3(x0) -> np.ndarray:
    arr = np.asarray(x0, dtype=float).ravel()
    if arr.size == 2:
        arr = np.append(arr, 0.0)
    if arr.size != 3:
        raise ValueError("initial state must have 2 or 3 coordinates")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("initial state must be finite and nonnegative")
    return arr


def integrate(cfg: ModelConfig, mode, x0, t0: float, t1: float, h: float = DEFAULT_STEP) -> Trajectory:
    """Integrate one trajectory and record every step.

    t1 == t0 yields a length-1 trajectory.  Aborts with a diagnostic on
    NaN; rejects h outside (0, 0.1].
    """
    mode = as_mode(mode)
    _check_step(h)
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    x = _as_state3(x0)
    q_cap = cfg.admission.q_max
    chat_cap = cfg.q_ad if mode.tag == "chattering" else None

    times = [t0]
    rows = [x.copy()]
    for a, b, k_u in _pieces(cfg, mode, t0, t1):
        tag = "competitive" if mode.tag == "switched_full" else mode.tag
        deriv = _make_deriv(cfg, tag, k_u)
        steps = _substeps(a, b, h)
        for i, step in enumerate(steps):
            # piece ends land exactly on the breakpoint, no accumulated drift
            t = b if i == len(steps) - 1 else a + (i + 1) * h
            r, q, u = _rk4_batch(
                deriv, np.float64(x[0]), np.float64(x[1]), np.float64(x[2]), step
            )
            if math.isnan(r) or math.isnan(q) or math.isnan(u):
                raise FloatingPointError(
                    f"NaN state at t = {t:g} (mode {mode.tag}, h = {h:g})"
                )
            started_inside = chat_cap is not None and x[1] <= chat_cap + CLAMP_EPS
            x = np.array([max(r, 0.0), min(max(q, 0.0), q_cap), max(u, 0.0)])
            if started_inside and x[1] > chat_cap:
                x[1] = chat_cap
            times.append(t)
            rows.append(x.copy())

    states = np.vstack(rows)
    times_arr = np.asarray(times)
    fr, fu = admitted_flows(cfg, mode, states)
    return Trajectory(
        mode=mode,
        times=times_arr,
        states=states,
        price=np.asarray(eval_price(cfg.price, states[:, 1])),
        flow_r=np.asarray(fr),
        flow_u=np.asarray(fu),
        mu=np.asarray(eval_service(cfg.service, states[:, 1])),
    )


@dataclass
class BatchResult:
    """Final states of a batch run plus optional per-step diagnostics."""

    states: np.ndarray                 # (n, 3) at t1
    raw_min: np.ndarray | None = None  # (3,) min unclamped coordinates seen
    raw_max_q: float | None = None     # max unclamped q seen
    region_excess: np.ndarray | None = None  # (n,) max of A@x - b over steps


def _batch_setup(cfg, mode, x0s, h):
    mode = as_mode(mode)
    if mode.tag == "switched_full":
        raise ValueError("batch helpers run constant-K_U modes; split the schedule")
    _check_step(h)
    arr = np.asarray(x0s, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] == 2:
        arr = np.column_stack([arr, np.zeros(len(arr))])
    if np.any(arr < 0):
        raise ValueError("initial states must be nonnegative")
    deriv = _make_deriv(cfg, mode.tag, mode.k_u)
    return mode, arr.copy(), deriv


def final_states(
    cfg: ModelConfig,
    mode,
    x0s,
    t0: float,
    t1: float,
    h: float = DEFAULT_STEP,
    *,
    raw_bounds: bool = False,
    region=None,
) -> BatchResult:
    """March a batch of trajectories to t1 in lockstep.

    raw_bounds tracks the extreme unclamped RK4 results (the forward
    invariance probe).  region = (A, b) tracks, per trajectory, the
    largest violation of the half-space system A @ x <= b over all steps
    (the empirical trap probe).
    """
    mode, x, deriv = _batch_setup(cfg, mode, x0s, h)
    r, q, u = x[:, 0].copy(), x[:, 1].copy(), x[:, 2].copy()
    q_cap = cfg.admission.q_max
    chat_cap = cfg.q_ad if mode.tag == "chattering" else None

    raw_min = np.array([np.inf] * 3) if raw_bounds else None
    raw_max_q = -np.inf if raw_bounds else None
    if region is not None:
        A, b = np.asarray(region[0], dtype=float), np.asarray(region[1], dtype=float)
        excess = np.full(len(r), -np.inf)
    else:
        excess = None

    steps = _substeps(t0, t1, h)
    for i, step in enumerate(steps):
        rn, qn, un = _rk4_batch(deriv, r, q, u, step)
        if raw_bounds:
            raw_min = np.minimum(raw_min, [rn.min(), qn.min(), un.min()])
            raw_max_q = max(raw_max_q, float(qn.max()))
        if chat_cap is not None:
            inside = q <= chat_cap + CLAMP_EPS
            qn = np.where(inside, np.minimum(qn, chat_cap), qn)
        r = np.maximum(rn, 0.0)
        q = np.minimum(np.maximum(qn, 0.0), q_cap)
        u = np.maximum(un, 0.0)
        if excess is not None:
            vals = A[:, 0, None] * r + A[:, 1, None] * q + A[:, 2, None] * u - b[:, None]
            excess = np.maximum(excess, vals.max(axis=0))
        if i % 1000 == 999 and np.isnan(r).any():
            raise FloatingPointError(f"NaN state in batch at step {i}")

    return BatchResult(
        states=np.column_stack([r, q, u]),
        raw_min=raw_min,
        raw_max_q=raw_max_q,
        region_excess=excess,
    )


@dataclass
class SettleResult:
    settled: np.ndarray       # (n,) bool: streak of 100 in-tol steps seen
    states: np.ndarray        # (n, 3) at exit
    t_exit: float
    settle_times: np.ndarray  # (n,) first time of the completed streak, nan if none
    max_q: float              # largest trajectory q seen (post-clamp)


def settle_batch(
    cfg: ModelConfig,
    mode,
    x0s,
    target,
    tol: float,
    t_cap: float,
    h: float = DEFAULT_STEP,
    t0: float = 0.0,
    *,
    compare_u: bool | None = None,
) -> SettleResult:
    """March a batch until every run sits within tol of target.

    A run counts as settled after 100 consecutive steps with
    max-coordinate distance below tol (U compared only in the 3-state
    modes unless compare_u overrides).  Early exit once all runs settle;
    otherwise stops at t_cap.
    """
    mode, x, deriv = _batch_setup(cfg, mode, x0s, h)
    r, q, u = x[:, 0].copy(), x[:, 1].copy(), x[:, 2].copy()
    q_cap = cfg.admission.q_max
    chat_cap = cfg.q_ad if mode.tag == "chattering" else None
    tgt = _as_state3(target)
    if compare_u is None:
        compare_u = mode.tag == "competitive"

    n = len(r)
    streak = np.zeros(n, dtype=int)
    settled = np.zeros(n, dtype=bool)
    settle_t = np.full(n, np.nan)
    streak_t0 = np.full(n, np.nan)
    max_q = float(q.max())
    t = t0

    for step in _substeps(t0, t0 + t_cap, h):
        rn, qn, un = _rk4_batch(deriv, r, q, u, step)
        if chat_cap is not None:
            inside = q <= chat_cap + CLAMP_EPS
            qn = np.where(inside, np.minimum(qn, chat_cap), qn)
        r = np.maximum(rn, 0.0)
        q = np.minimum(np.maximum(qn, 0.0), q_cap)
        u = np.maximum(un, 0.0)
        max_q = max(max_q, float(q.max()))
        t += step
        dist = np.maximum(np.abs(r - tgt[0]), np.abs(q - tgt[1]))
        if compare_u:
            dist = np.maximum(dist, np.abs(u - tgt[2]))
        within = dist < tol
        starting = within & (streak == 0)
        streak_t0[starting] = t
        streak = np.where(within, streak + 1, 0)
        newly = (~settled) & (streak >= SETTLE_STREAK)
        settle_t[newly] = streak_t0[newly]
        settled |= newly
        if settled.all():
            break

    return SettleResult(
        settled=settled,
        states=np.column_stack([r, q, u]),
        t_exit=t,
        settle_times=settle_t,
        max_q=max_q,
    )


@dataclass
class ConvergeResult:
    final_state: np.ndarray
    converged: bool
    settling_time: float  # nan when not converged
    target: np.ndarray | None = None  # the fixed point reached, if any


def converge(
    cfg: ModelConfig,
    mode,
    x0,
    tol: float,
    t_cap: float,
    h: float = DEFAULT_STEP,
) -> ConvergeResult:
    """Empirical omega-limit probe.

    Integrates until the state has stayed within tol of one of the
    mode's fixed points for 100 consecutive steps, or until t_cap.
    Non-convergence is reported through the flag, never raised.
    """
    from . import equilibria  # deferred: equilibria imports stability imports this

    mode = as_mode(mode)
    if mode.tag == "switched_full":
        raise ValueError("converge needs a constant-K_U mode; probe pieces separately")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    fps = equilibria.find_fixed_points(cfg, mode.tag, mode.k_u)
    x = _as_state3(x0)
    if not fps:
        res = final_states(cfg, mode, x[None, :], 0.0, t_cap, h)
        return ConvergeResult(res.states[0], False, math.nan)

    targets = np.array([[fp.r_star, fp.q_star, fp.u_star] for fp in fps])
    compare_u = mode.tag == "competitive"
    deriv = _make_deriv(cfg, mode.tag, mode.k_u)
    q_cap = cfg.admission.q_max
    chat_cap = cfg.q_ad if mode.tag == "chattering" else None

    def dist(state):
        d = np.maximum(
            np.abs(state[0] - targets[:, 0]), np.abs(state[1] - targets[:, 1])
        )
        if compare_u:
            d = np.maximum(d, np.abs(state[2] - targets[:, 2]))
        return d.min(), int(d.argmin())

    t = 0.0
    streak = 0
    streak_start = math.nan
    d0, j = dist(x)
    if d0 < tol:
        streak, streak_start = 1, 0.0
        if np.max(np.abs(x - targets[j])) == 0.0:
            return ConvergeResult(x, True, 0.0, targets[j])
    for step in _substeps(0.0, t_cap, h):
        r, q, u = _rk4_batch(
            deriv, np.float64(x[0]), np.float64(x[1]), np.float64(x[2]), step
        )
        started_inside = chat_cap is not None and x[1] <= chat_cap + CLAMP_EPS
        x = np.array([max(r, 0.0), min(max(q, 0.0), q_cap), max(u, 0.0)])
        if started_inside and chat_cap is not None and x[1] > chat_cap:
            x[1] = chat_cap
        t += step
        d, j = dist(x)
        if d < tol:
            if streak == 0:
                streak_start = t
            streak += 1
            if streak >= SETTLE_STREAK:
                return ConvergeResult(x, True, streak_start, targets[j])
        else:
            streak = 0
    return ConvergeResult(x, False, math.nan)
