"""Batch front-end: JSON config in, deterministic CSV and SVG files out.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4
layer-comparison mismatch. Floats are written with 17 significant digits
and files are written atomically (temp file plus rename), so identical
configs and seeds produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import relax, validate
from .errors import ConfigError, NumericError
from .euler_poisson import cluster_snapshot, eval_m_grid, eval_u, sample, speed_bound
from .instances import random_instance, sample_times_avoiding_events
from .measure import InitialData
from .oracle import oracle_cdf, simulate_drift, simulate_ep

ENV_PREFIX = "STICKYGAS_"

_CONFIG_KEYS = {
    "version",
    "atoms",
    "tau",
    "times",
    "x_grid",
    "t_end",
    "tau_sequence",
    "relax_time",
    "n_instances",
    "seed",
    "tolerances",
}
_ATOM_KEYS = {"position", "mass", "velocity"}
_GRID_KEYS = {"min", "max", "count"}
_TOL_KEYS = {"tie", "position", "compare"}


class RunConfig:
    """Validated run configuration."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if raw.get("version") != 1:
            raise ConfigError("config must declare \"version\": 1")
        atoms = raw.get("atoms")
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError("measure must be nonempty: provide at least one atom")
        pos, mass, vel = [], [], []
        for i, atom in enumerate(atoms):
            if not isinstance(atom, dict) or set(atom) - _ATOM_KEYS:
                raise ConfigError(f"atom {i} must be an object with keys {sorted(_ATOM_KEYS)}")
            try:
                pos.append(float(atom["position"]))
                mass.append(float(atom["mass"]))
                vel.append(float(atom["velocity"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"atom {i} is malformed: {exc}") from exc
            if mass[-1] <= 0.0:
                raise ConfigError(f"atom {i} mass must be positive")
        tau = raw.get("tau", 1.0)
        if not isinstance(tau, (int, float)) or not 0.0 < float(tau) <= 1.0:
            raise ConfigError("tau must be a number in (0, 1]")
        times = raw.get("times", [1.0])
        if not isinstance(times, list) or not times:
            raise ConfigError("times must be a nonempty list")
        for t in times:
            if not isinstance(t, (int, float)) or float(t) < 0.0:
                raise ConfigError("times must be nonnegative numbers (t=0 emits initial data)")
        grid = raw.get("x_grid", {"min": -10.0, "max": 10.0, "count": 101})
        if not isinstance(grid, dict) or set(grid) != _GRID_KEYS:
            raise ConfigError(f"x_grid must be an object with keys {sorted(_GRID_KEYS)}")
        if not (isinstance(grid["count"], int) and grid["count"] >= 2):
            raise ConfigError("x_grid.count must be an integer >= 2")
        if not float(grid["min"]) < float(grid["max"]):
            raise ConfigError("x_grid.min must be below x_grid.max")
        t_end = raw.get("t_end", max(float(t) for t in times) + 1.0)
        if not isinstance(t_end, (int, float)) or float(t_end) <= 0.0:
            raise ConfigError("t_end must be a positive number")
        tau_seq = raw.get("tau_sequence", [2.0 ** (-k) for k in range(1, 11)])
        if not isinstance(tau_seq, list) or not all(
            isinstance(v, (int, float)) and 0.0 < float(v) <= 1.0 for v in tau_seq
        ):
            raise ConfigError("tau_sequence must be a list of numbers in (0, 1]")
        relax_time = raw.get("relax_time", 1.0)
        if not isinstance(relax_time, (int, float)) or float(relax_time) <= 0.0:
            raise ConfigError("relax_time must be a positive number")
        n_instances = raw.get("n_instances", 0)
        if not isinstance(n_instances, int) or n_instances < 0:
            raise ConfigError("n_instances must be a nonnegative integer")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        tols = raw.get("tolerances", {})
        if not isinstance(tols, dict) or set(tols) - _TOL_KEYS:
            raise ConfigError(f"tolerances keys must be among {sorted(_TOL_KEYS)}")

        self.data = InitialData.from_atoms(pos, mass, vel, float(tau))
        self.times = [float(t) for t in times]
        self.x_grid = np.linspace(float(grid["min"]), float(grid["max"]), grid["count"])
        self.t_end = float(t_end)
        self.tau_sequence = [float(v) for v in tau_seq]
        self.relax_time = float(relax_time)
        self.n_instances = n_instances
        self.seed = seed
        self.tol_compare = float(tols.get("compare", 1e-9))
        self.tol_tie = tols.get("tie")
        self.tol_position = tols.get("position")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig(raw)


# -- deterministic file output ------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    write_atomic(path, "\n".join(lines) + "\n")


def _time_tag(t: float) -> str:
    return format(t, "g").replace("-", "m")


# -- commands ------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: str) -> list:
    written = []
    for t in cfg.times:
        rows = []
        for x in cfg.x_grid:
            s = sample(cfg.data, float(x), t)
            rows.append((s.x, s.m, s.q, s.u, s.E, s.branch.value))
        path = os.path.join(out, f"solution_t{_time_tag(t)}.csv")
        write_csv(path, ["x", "m", "q", "u", "E", "branch"], rows)
        written.append(path)
    return written


def cmd_oracle(cfg: RunConfig, out: str) -> list:
    traj = simulate_ep(cfg.data, cfg.t_end)
    written = []
    event_rows = [
        (e.time, e.position, e.merged[0][0], e.merged[0][1], e.merged[1][0], e.merged[1][1], e.result[0], e.result[1])
        for e in traj.events
    ]
    path = os.path.join(out, "oracle_events.csv")
    write_csv(
        path,
        ["time", "x", "left_lo", "left_hi", "right_lo", "right_hi", "merged_lo", "merged_hi"],
        event_rows,
    )
    written.append(path)
    for t in cfg.times:
        if t > cfg.t_end:
            continue
        state = traj.state_at(t)
        rows = [
            (c.position, c.mass, c.velocity, c.lo, c.hi) for c in state.clusters
        ]
        path = os.path.join(out, f"oracle_t{_time_tag(t)}.csv")
        write_csv(path, ["position", "mass", "velocity", "atom_lo", "atom_hi"], rows)
        written.append(path)
    return written


def _compare_one(data: InitialData, times, xs, tol) -> list:
    t_hi = max(times) * 1.01
    traj = simulate_ep(data, t_hi)
    rows = []
    for t in times:
        state = traj.state_at(t)
        dm = float(
            np.max(
                np.abs(
                    eval_m_grid(data, xs, t)
                    - np.array([oracle_cdf(state, float(x)) for x in xs])
                )
            )
        ) if len(xs) else 0.0
        du = 0.0
        for c in state.clusters:
            u, _ = eval_u(data, c.position, t)
            du = max(du, abs(u - c.velocity))
        rows.append((t, dm, du, bool(dm <= tol and du <= tol)))
    return rows


def cmd_compare(cfg: RunConfig, out: str, seed: int | None = None) -> tuple:
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    base_times = [t for t in cfg.times if t > 0.0]
    if base_times:
        for t, dm, du, passed in _compare_one(
            cfg.data, base_times, cfg.x_grid, cfg.tol_compare
        ):
            rows.append((0, t, dm, du, passed))
            ok = ok and passed
    for i in range(cfg.n_instances):
        inst = random_instance(rng, n_max=20)
        traj = simulate_ep(inst, 6.0)
        times = sample_times_avoiding_events(rng, 5, 0.1, 5.5, traj.event_times)
        lo = float(inst.measure.positions[0]) - 2.0
        hi = float(inst.measure.positions[-1]) + 2.0
        xs = rng.uniform(lo, hi, size=21)
        for t, dm, du, passed in _compare_one(inst, times, xs, cfg.tol_compare):
            rows.append((i + 1, t, dm, du, passed))
            ok = ok and passed
    path = os.path.join(out, "compare.csv")
    write_csv(path, ["instance", "time", "max_abs_dm", "max_abs_du", "pass"], rows)
    return [path], ok


def cmd_relax(cfg: RunConfig, out: str) -> list:
    report = relax.convergence_study(
        cfg.data, cfg.relax_time, cfg.x_grid, cfg.tau_sequence
    )
    rows = [(tau, em, eu) for tau, em, eu in report.rows()]
    path = os.path.join(out, "relax_report.csv")
    write_csv(path, ["tau", "err_m", "err_u"], rows)
    return [path]


def _stencil_candidates(cfg: RunConfig, h_max: float):
    """Grid points far enough from clusters for the identity stencils."""
    vmax = speed_bound(cfg.data)
    margin = 2.0 * h_max * (2.0 + vmax)
    points = []
    for t in cfg.times:
        if t - 2.0 * h_max <= 0.0:
            continue
        clusters = [c.position for c in cluster_snapshot(cfg.data, t)]
        kept = 0
        for x in cfg.x_grid:
            if all(abs(float(x) - p) >= margin for p in clusters):
                points.append((float(x), t))
                kept += 1
                if kept >= 5:
                    break
    return points


def cmd_validate(cfg: RunConfig, out: str) -> list:
    reports = []
    t_positive = [t for t in cfg.times if t > 0.0]
    window = (0.3 * cfg.t_end, 0.7 * cfg.t_end)
    reports.append(validate.check_weak_form(cfg.data, window, refinement_levels=5))
    pairs = [
        (float(a), float(b)) for a, b in zip(cfg.x_grid[:-1], cfg.x_grid[1:])
    ]
    reports.append(validate.check_oleinik(cfg.data, t_positive, pairs))
    reports.append(validate.check_initial_continuity(cfg.data))
    hs = [1e-2, 1e-3, 1e-4]
    stencils = _stencil_candidates(cfg, max(hs))
    if stencils:
        reports.append(validate.check_potential_identities(cfg.data, stencils, hs))
    rows = []
    for report in reports:
        for name, series, level, residual in report.rows():
            rows.append((name, series, level, residual, report.passed))
    path = os.path.join(out, "validate_report.csv")
    write_csv(path, ["check", "series", "level", "residual", "pass"], rows)
    return [path]


# -- svg ----------------------------------------------------------------------


def _svg_document(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        '<rect width="100%" height="100%" fill="white"/>\n' + body + "</svg>\n"
    )

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _polyline_svg(series, width=640, height=480, logx=False, logy=False, step=()):
    """Deterministic multi-series line plot; each series scaled to shared extents."""
    pad = 50.0
    xs_all, ys_all = [], []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if logx:
                x = math.log10(x) if x > 0 else None
            if logy:
                y = math.log10(y) if y > 0 else None
            if x is not None and y is not None:
                xs_all.append(x)
                ys_all.append(y)
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 - x0 == 0.0:
        x1 = x0 + 1.0
    if y1 - y0 == 0.0:
        y1 = y0 + 1.0

    def mapx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def mapy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    body = [
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black" stroke-width="1"/>'
    ]
    for idx, (label, xs, ys) in enumerate(series):
        pts = []
        prev = None
        for x, y in zip(xs, ys):
            if logx:
                if x <= 0:
                    continue
                x = math.log10(x)
            if logy:
                if y <= 0:
                    continue
                y = math.log10(y)
            if label in step and prev is not None:
                pts.append(f"{mapx(x):.3f},{mapy(prev):.3f}")
            pts.append(f"{mapx(x):.3f},{mapy(y):.3f}")
            prev = y
        color = _COLORS[idx % len(_COLORS)]
        body.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>'
        )
        body.append(
            f'<text x="{pad + 6}" y="{pad + 16 + 16 * idx}" font-size="12" fill="{color}">{label}</text>'
        )
    body.append(
        f'<text x="{pad}" y="{height - pad + 20}" font-size="11">x: [{x0:.6g}, {x1:.6g}]'
        f'{" (log10)" if logx else ""}</text>'
    )
    body.append(
        f'<text x="{pad}" y="{pad - 8}" font-size="11">y: [{y0:.6g}, {y1:.6g}]'
        f'{" (log10)" if logy else ""}</text>'
    )
    return _svg_document(width, height, "\n".join(body) + "\n")


def _read_csv(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def cmd_plot(cfg: RunConfig, out: str) -> list:
    written = []
    solution_files = sorted(
        f for f in os.listdir(out) if f.startswith("solution_t") and f.endswith(".csv")
    )
    relax_path = os.path.join(out, "relax_report.csv")
    if not solution_files and not os.path.exists(relax_path):
        raise ConfigError(f"no solution_t*.csv or relax_report.csv found in {out}")
    for fname in solution_files:
        header, rows = _read_csv(os.path.join(out, fname))
        xs = [float(r[0]) for r in rows]
        series = []
        for col in ("m", "q", "u", "E"):
            j = header.index(col)
            series.append((col, xs, [float(r[j]) for r in rows]))
        svg = _polyline_svg(series, step=("m",))
        path = os.path.join(out, fname[:-4] + ".svg")
        write_atomic(path, svg)
        written.append(path)
    if os.path.exists(relax_path):
        header, rows = _read_csv(relax_path)
        taus = [float(r[0]) for r in rows]
        series = [
            ("err_m", taus, [float(r[1]) for r in rows]),
            ("err_u", taus, [float(r[2]) for r in rows]),
        ]
        svg = _polyline_svg(series, logx=True, logy=True)
        path = os.path.join(out, "relax_report.svg")
        write_atomic(path, svg)
        written.append(path)
    return written


# -- entry point ----------------------------------------------------------------


def _env_default(name: str, fallback=None):
    return os.environ.get(ENV_PREFIX + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stickygas",
        description=(
            "Semi-analytic solver and verification harness for 1D pressureless "
            "self-gravitating gas dynamics with momentum relaxation. Flags may "
            f"be defaulted via environment variables prefixed {ENV_PREFIX} "
            "(e.g. STICKYGAS_OUT, STICKYGAS_SEED)."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "oracle", "compare", "relax", "validate", "plot"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument(
            "--out", default=_env_default("OUT", "."), help="output directory"
        )
        p.add_argument(
            "--seed",
            type=int,
            default=int(_env_default("SEED", "-1")),
            help="override the config seed (compare command)",
        )
        p.add_argument(
            "--tol-compare",
            type=float,
            default=None,
            help="override the layer-comparison tolerance",
        )
        p.add_argument(
            "--tol-tie",
            type=float,
            default=None,
            help="override the prefix-sum tie tolerance",
        )
        p.add_argument(
            "--tol-position",
            type=float,
            default=None,
            help="override the bisection position tolerance scale",
        )
    return parser


def _apply_tolerance_overrides(cfg, args) -> None:
    from . import euler_poisson, potentials

    tie = args.tol_tie if args.tol_tie is not None else cfg.tol_tie
    pos = args.tol_position if args.tol_position is not None else cfg.tol_position
    if tie is not None:
        potentials.DEFAULT_TIE_TOL = float(tie)
    if pos is not None:
        euler_poisson.DEFAULT_POS_TOL_SCALE = float(pos)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.tol_compare is not None:
            cfg.tol_compare = args.tol_compare
        _apply_tolerance_overrides(cfg, args)
        out = args.out
        os.makedirs(out, exist_ok=True)
        if args.command == "solve":
            cmd_solve(cfg, out)
        elif args.command == "oracle":
            cmd_oracle(cfg, out)
        elif args.command == "compare":
            seed = None if args.seed < 0 else args.seed
            _, ok = cmd_compare(cfg, out, seed)
            if not ok:
                print("compare: layers disagree beyond tolerance", file=sys.stderr)
                return 4
        elif args.command == "relax":
            cmd_relax(cfg, out)
        elif args.command == "validate":
            cmd_validate(cfg, out)
        elif args.command == "plot":
            cmd_plot(cfg, out)
    except ConfigError as exc:
        print(f"{args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"{args.command}: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
