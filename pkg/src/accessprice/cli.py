"""Command-line interface.

Subcommands: validate, fixed-points, classify, simulate, phase, doa,
scenario.  Configurations are JSON files with a versioned schema; see
configs/ in the repository for the shipped references.  Exit codes:
0 success, 1 validation failure, 2 usage error.  Diagnostics go to
stderr; data goes to --out files (or stdout for tabular commands).

Outputs are byte-identical across repeated runs on the same inputs:
iteration orders are fixed, floats are printed at 12 significant digits
and no timestamps are embedded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import dynamics, equilibria, regions, scenarios, stability
from .model import (
    AdmissionSpec,
    ModelConfig,
    PriceSpec,
    ServiceSpec,
    validate_admissible,
)

SCHEMA_VERSION = 1
DEFAULT_MU_STAR = 3.0


class ConfigError(ValueError):
    """Configuration file problem, annotated with the offending key path."""


def _fmt(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), ".12g")


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def _notice(msg: str):
    print(f"notice: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- config


def _expect_keys(obj: dict, path: str, required: dict, optional: dict):
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for key, typ in required.items():
        if key not in obj:
            raise ConfigError(f"{path}.{key}: missing")
        if not isinstance(obj[key], typ) or isinstance(obj[key], bool):
            raise ConfigError(f"{path}.{key}: expected {typ}")
    for key, typ in optional.items():
        if key in obj and (not isinstance(obj[key], typ) or isinstance(obj[key], bool)):
            raise ConfigError(f"{path}.{key}: expected {typ}")


NUM = (int, float)


def config_from_dict(doc: dict, notices=None) -> ModelConfig:
    """Validate a parsed JSON document against the schema."""

    def note(msg):
        if notices is not None:
            notices.append(msg)

    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    _expect_keys(
        doc,
        "config",
        {"schema_version": int, "k_r": NUM, "price": dict, "admission": dict, "service": dict},
        {"k_u_schedule": list, "q_ad": NUM},
    )
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {doc['schema_version']}"
        )

    price = doc["price"]
    _expect_keys(price, "price", {"variant": str, "beta": NUM}, {"q_m": NUM, "q_n": NUM})
    adm = doc["admission"]
    _expect_keys(adm, "admission", {"variant": str, "coefficients": list}, {"q_max": NUM})
    if not all(isinstance(c, NUM) and not isinstance(c, bool) for c in adm["coefficients"]):
        raise ConfigError("admission.coefficients: expected numbers")
    svc = doc["service"]
    _expect_keys(svc, "service", {"q_c": NUM}, {"mu_star": NUM})
    mu_star = svc.get("mu_star")
    if mu_star is None:
        mu_star = DEFAULT_MU_STAR
        note(f"service.mu_star defaulted to {DEFAULT_MU_STAR:g}")

    sched = []
    for i, piece in enumerate(doc.get("k_u_schedule", [])):
        if (
            not isinstance(piece, list)
            or len(piece) != 3
            or not all(isinstance(v, NUM) and not isinstance(v, bool) for v in piece)
        ):
            raise ConfigError(f"k_u_schedule[{i}]: expected [t_start, t_end, rate]")
        sched.append(tuple(float(v) for v in piece))

    def build(path, ctor, **kwargs):
        try:
            return ctor(**kwargs)
        except ValueError as exc:
            msg = str(exc)
            first = msg.split(" ", 1)[0]
            if first in kwargs:  # "beta must be > 0" -> "price.beta: must be > 0"
                raise ConfigError(f"{path}.{first}: {msg.split(' ', 1)[1]}") from exc
            raise ConfigError(f"{path}: {msg}") from exc

    price_spec = build(
        "price",
        PriceSpec,
        variant=price["variant"],
        beta=float(price["beta"]),
        q_m=float(price["q_m"]) if "q_m" in price else None,
        q_n=float(price["q_n"]) if "q_n" in price else None,
    )
    adm_spec = build(
        "admission",
        AdmissionSpec,
        variant=adm["variant"],
        coefficients=tuple(float(c) for c in adm["coefficients"]),
        q_max=float(adm["q_max"]) if "q_max" in adm else None,
    )
    svc_spec = build("service", ServiceSpec, mu_star=float(mu_star), q_c=float(svc["q_c"]))
    return build(
        "config",
        ModelConfig,
        k_r=float(doc["k_r"]),
        k_u_schedule=tuple(sched),
        price=price_spec,
        admission=adm_spec,
        service=svc_spec,
        q_ad=float(doc["q_ad"]) if "q_ad" in doc else None,
    )


def load_config(path: str, overrides=()) -> ModelConfig:
    """Read, override and schema-validate a configuration file.

    Each applied default produces a notice on stderr.  Overrides are
    dotted key=value pairs type-checked against the schema.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    for item in overrides:
        doc = _apply_override(doc, item)
    notices: list[str] = []
    cfg = config_from_dict(doc, notices)
    for msg in notices:
        _notice(msg)
    return cfg


def _apply_override(doc: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"override {key!r}: unknown key path")
        node = node[p]
    if not isinstance(node, dict):
        raise ConfigError(f"override {key!r}: unknown key path")
    node[parts[-1]] = value
    return doc


# ---------------------------------------------------------------- output


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    _ensure_parent(path)
    return open(path, "w", encoding="utf-8", newline=""), True


def _write_csv(path, header, rows):
    fh, close = _open_out(path)
    try:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    finally:
        if close:
            fh.close()


def _mode_from_args(args) -> dynamics.SystemMode:
    tag = args.mode.replace("-", "_")
    k_u = getattr(args, "k_u", 0.0)
    if tag in ("saturated", "competitive"):
        return dynamics.SystemMode(tag, k_u)
    return dynamics.SystemMode(tag)


def _fp_rows(points, dim):
    rows = []
    for fp in points:
        row = [
            fp.mode,
            _fmt(fp.q_star),
            _fmt(fp.r_star),
            _fmt(fp.u_star),
            _fmt(fp.price_at),
            fp.classification,
        ]
        eig = list(fp.eigen_data) + [complex(math.nan, math.nan)] * (
            dim - len(fp.eigen_data)
        )
        for z in eig[:dim]:
            row.extend([_fmt(z.real), _fmt(z.imag)])
        rows.append(row)
    return rows


# ------------------------------------------------------------- commands


def _cmd_validate(args) -> int:
    cfg = load_config(args.config, args.set or ())
    report = validate_admissible(cfg, k_u=args.k_u)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def _cmd_fixed_points(args) -> int:
    cfg = load_config(args.config, args.set or ())
    mode = _mode_from_args(args)
    points = equilibria.find_fixed_points(cfg, mode.tag, mode.k_u)
    dim = 3 if mode.tag in ("competitive", "switched_full") else 2
    header = ["mode", "q_star", "r_star", "u_star", "price", "classification"]
    for i in range(1, dim + 1):
        header.extend([f"eig_re_{i}", f"eig_im_{i}"])
    _write_csv(args.out, header, _fp_rows(points, dim))
    return 0


def _cmd_classify(args) -> int:
    cfg = load_config(args.config, args.set or ())
    mode = _mode_from_args(args)
    points = equilibria.find_fixed_points(cfg, mode.tag, mode.k_u)
    header = [
        "mode", "q_star", "r_star", "u_star", "classification",
        "trace", "det", "hurwitz", "saddle_lhs", "saddle_rhs",
    ]
    rows = []
    for fp in points:
        try:
            rep = stability.classify(
                stability.jacobian(cfg, (fp.r_star, fp.q_star, fp.u_star), mode.tag)
            )
            trace, det = _fmt(rep.trace), _fmt(rep.determinant)
            hur = str(rep.hurwitz.get("hurwitz", "")).lower()
        except stability.KinkProximityError:
            trace = det = hur = ""
        lhs = rhs_ = ""
        if fp.mode == "normal" and cfg.price.q_m is not None and fp.q_star > cfg.price.q_m:
            l, r, _ = stability.saddle_criterion(cfg, fp)
            lhs, rhs_ = _fmt(l), _fmt(r)
        rows.append(
            [fp.mode, _fmt(fp.q_star), _fmt(fp.r_star), _fmt(fp.u_star),
             fp.classification, trace, det, hur, lhs, rhs_]
        )
    _write_csv(args.out, header, rows)
    return 0


def _parse_x0(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) not in (2, 3):
        raise ConfigError("--x0 expects r,q or r,q,u")
    return parts


def _traj_rows(traj):
    for i in range(len(traj.times)):
        yield [
            _fmt(traj.times[i]),
            _fmt(traj.states[i, 0]),
            _fmt(traj.states[i, 1]),
            _fmt(traj.states[i, 2]),
            _fmt(traj.price[i]),
            _fmt(traj.flow_r[i]),
            _fmt(traj.flow_u[i]),
            _fmt(traj.mu[i]),
        ]


TRAJ_HEADER = ["t", "R", "q", "U", "price", "flow_R", "flow_U", "mu"]


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set or ())
    mode = _mode_from_args(args)
    if args.step is None:
        args.step = dynamics.DEFAULT_STEP
        _notice(f"step defaulted to {dynamics.DEFAULT_STEP:g}")
    traj = dynamics.integrate(
        cfg, mode, _parse_x0(args.x0), args.t0, args.t1, args.step
    )
    rows = _traj_rows(traj)
    if args.every > 1:
        rows = (row for i, row in enumerate(rows) if i % args.every == 0)
    _write_csv(args.out, TRAJ_HEADER, rows)
    return 0


def _cmd_phase(args) -> int:
    cfg = load_config(args.config, args.set or ())
    mode = _mode_from_args(args)
    grid = regions.phase_grid(
        cfg, mode, (args.r_min, args.r_max), (args.q_min, args.q_max), args.resolution
    )
    rows = []
    for i, r in enumerate(grid.r):
        for j, q in enumerate(grid.q):
            rows.append(
                [_fmt(r), _fmt(q), _fmt(grid.dr[i, j]), _fmt(grid.dq[i, j]),
                 _fmt(grid.magnitude[i, j])]
            )
    _write_csv(args.out, ["r", "q", "dr", "dq", "magnitude"], rows)
    return 0


def _face_dict(face):
    return {
        "name": face.name,
        "condition": face.condition,
        "worst": float(face.worst),
        "samples": face.samples,
        "passed": face.passed,
    }


def _cmd_doa(args) -> int:
    cfg = load_config(args.config, args.set or ())
    region = regions.build_polygon(cfg, args.q_choice, args.r_choice)
    report = regions.check_invariance(cfg, region, dynamics.NORMAL, args.samples)
    doc = {
        "kind": region.kind,
        "vertices": [[float(v) for v in vert] for vert in region.vertices],
        "check": {
            "passed": report.passed,
            "warning": report.warning,
            "faces": [_face_dict(f) for f in report.faces],
        },
    }
    fh, close = _open_out(args.out)
    try:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return 0 if report.passed else 1


def _cmd_scenario(args) -> int:
    cfg = load_config(args.config, args.set or ())
    if args.step is None:
        args.step = dynamics.DEFAULT_STEP
        _notice(f"step defaulted to {dynamics.DEFAULT_STEP:g}")
    sc = scenarios.scenario_from_config(cfg, h=args.step)
    result = scenarios.run_comparison(sc)
    every = max(1, args.every)

    def downsample(rows):
        return (row for i, row in enumerate(rows) if i % every == 0)

    prefix = args.out_prefix
    _ensure_parent(prefix)
    _write_csv(f"{prefix}_surge.csv", TRAJ_HEADER, downsample(_traj_rows(result.surge)))
    _write_csv(
        f"{prefix}_saturated.csv", TRAJ_HEADER, downsample(_traj_rows(result.saturated))
    )
    for name, fs in (
        ("fairness_surge", result.fairness_surge),
        ("fairness_saturated", result.fairness_saturated),
    ):
        rows = (
            [_fmt(t), _fmt(x)] for t, x in zip(fs.times, fs.ratio)
        )
        _write_csv(f"{prefix}_{name}.csv", ["t", "ratio"], downsample(rows))

    w0 = max(args.window_start, sc.t0)
    w1 = min(args.window_end, sc.t1)
    gap_min, gap_mean = scenarios.fairness_gap(
        result.fairness_saturated, result.fairness_surge, (w0, w1)
    )
    probe = scenarios.bounceback_probe(sc, result)
    t100 = sc.burst.t_start
    t300 = sc.burst.t_end
    summary = {
        "fairness_gap": {"window": [w0, w1], "min": gap_min, "mean": gap_mean},
        "r_at_burst_edges": {
            "surge": {
                "start": float(result.surge.state_at(t100)[0]),
                "end": float(result.surge.state_at(t300)[0]),
            },
            "saturated": {
                "start": float(result.saturated.state_at(t100)[0]),
                "end": float(result.saturated.state_at(t300)[0]),
            },
        },
        "max_queue_gap": float(
            np.max(np.abs(result.surge.q - result.saturated.q))
        ),
        "bounceback": {
            "skipped": probe.skipped,
            "notice": probe.notice,
            "converged": probe.converged,
            "settling_time": None if math.isnan(probe.settling_time) else probe.settling_time,
            "target": probe.target,
            "reached_target": probe.reached_target,
        },
    }
    with open(f"{prefix}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accessprice",
        description="Dynamic access-pricing queue model analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, modes=True):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config entry (dotted path), repeatable",
        )
        if modes:
            p.add_argument(
                "--mode",
                default="normal",
                choices=["normal", "chattering", "saturated", "competitive", "switched-full"],
            )
            p.add_argument(
                "--k-u", type=float, default=0.0, dest="k_u",
                help="constant K_U for the saturated/competitive modes",
            )

    p = sub.add_parser("validate", help="admissibility report")
    common(p, modes=False)
    p.add_argument(
        "--k-u", type=float, default=None, dest="k_u",
        help="also check the competitive-mode root count at this K_U",
    )
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("fixed-points", help="equilibria as CSV")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_fixed_points)

    p = sub.add_parser("classify", help="stability reports as CSV")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("simulate", help="integrate one trajectory to CSV")
    common(p)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=100.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--x0", default="50,15,0", help="initial state r,q[,u]")
    p.add_argument("--every", type=int, default=1, help="write every Nth step")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("phase", help="vector-field grid as CSV")
    common(p)
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=150.0)
    p.add_argument("--q-min", type=float, default=0.0)
    p.add_argument("--q-max", type=float, default=100.0)
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_phase)

    p = sub.add_parser("doa", help="invariant polygon + check report (JSON)")
    common(p, modes=False)
    p.add_argument("--q-choice", type=float, default=None)
    p.add_argument("--r-choice", type=float, default=None)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_doa)

    p = sub.add_parser("scenario", help="surge-vs-saturated comparison")
    common(p, modes=False)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--every", type=int, default=1, help="write every Nth step")
    p.add_argument("--window-start", type=float, default=200.0)
    p.add_argument("--window-end", type=float, default=300.0)
    p.set_defaults(fn=_cmd_scenario)

    return parser


def run(argv) -> int:
    """Dispatch a CLI invocation; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        _err(str(exc))
        parser.print_usage(sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return 1
    except FloatingPointError as exc:
        _err(f"integration aborted: {exc}")
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
