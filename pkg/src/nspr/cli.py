"""Command-line front end: ``nspr <command> [options]``.

Exit codes: 0 pass, 1 usage or configuration error, 2 runtime/domain
error or a completed check that did not pass. Every command writes the
resolved configuration next to its outputs, and all files are written
atomically.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io as nio
from .diagnostics import (
    ThresholdConfig,
    boxcount_dimension,
    decay_profile,
    flag_map,
    scale_quantities,
)
from .diagnostics.flags import FLAG_PLAN, SUSPECT, FlagMap
from .errors import NsprError
from .field import (
    REFERENCE_PLAN,
    SamplingPlan,
    SpacetimePoint,
    VectorField,
    divergence,
    set_threads,
)
from .monotonicity import CSV_HEADER, HARNESS_PLAN, run_corpus
from .nse import SolverConfig, run
from .nse.checks import TestFunction, check_energy_inequality

log = logging.getLogger("nspr")

LEMMAS = {"harmonic": "harmonic", "inhom-a": "inhom_a", "inhom-b": "inhom_b",
          "interp": "interpolated"}
ENERGY_TOL = 1e-3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --- configuration -----------------------------------------------------------

def _section(cls, data, name):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise UsageError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    extra = sorted(set(data) - known)
    if extra:
        raise UsageError(f"unknown keys in {name!r}: {', '.join(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid {name!r} section: {exc}") from exc


@dataclass
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    sampling: SamplingPlan | None = None
    command: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        extra = sorted(set(data) - {"solver", "thresholds", "sampling", "command"})
        if extra:
            raise UsageError(f"unknown config keys: {', '.join(extra)}")
        return cls(
            solver=_section(SolverConfig, data.get("solver", {}), "solver"),
            thresholds=_section(ThresholdConfig, data.get("thresholds", {}), "thresholds"),
            sampling=_section(SamplingPlan, data.get("sampling"), "sampling"),
            command=dict(data.get("command", {})),
        )

    def plan(self, default: SamplingPlan) -> SamplingPlan:
        if self.sampling is None:
            self.sampling = default
        return self.sampling

    def resolved(self) -> dict:
        return {
            "solver": asdict(self.solver),
            "thresholds": asdict(self.thresholds),
            "sampling": None if self.sampling is None else asdict(self.sampling),
            "command": self.command,
        }


# --- output locations --------------------------------------------------------

@dataclass
class Outputs:
    """Where a command writes: a CSV path plus sidecar config and summary."""

    csv: Path
    config: Path
    summary: Path

    @classmethod
    def at(cls, out: str | None, default_name: str) -> "Outputs":
        if out is None:
            raise UsageError("--out is required")
        p = Path(out)
        if p.suffix == ".csv":
            return cls(p, p.with_name(p.stem + ".config.json"),
                       p.with_name(p.stem + ".summary.json"))
        return cls(p / default_name, p / "config.json", p / "summary.json")


def _finish(outputs: Outputs, cfg: RunConfig, summary: dict, quiet: bool) -> int:
    nio.write_json_atomic(outputs.config, cfg.resolved())
    nio.write_json_atomic(outputs.summary, summary)
    if not quiet:
        print(json.dumps(summary, sort_keys=True))
    return 0 if summary["pass"] else 2


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# --- argument helpers ---------------------------------------------------------

def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse numbers from {text!r}") from exc
    if count is not None and len(vals) != count:
        raise UsageError(f"expected {count} comma-separated numbers, got {text!r}")
    return vals


def _ladder(text: str) -> list[float]:
    """``r0:ratio:k`` -> [r0, r0 ratio, ..., r0 ratio^(k-1)]."""
    try:
        r0, ratio, k = text.split(":")
        r0, ratio, k = float(r0), float(ratio), int(k)
    except ValueError as exc:
        raise UsageError(f"radii must look like r0:ratio:k, got {text!r}") from exc
    if r0 <= 0 or ratio <= 0 or k < 1:
        raise UsageError("radii ladder needs r0 > 0, ratio > 0, k >= 1")
    return [r0 * ratio**j for j in range(k)]


def _load_traj(path):
    if path is None:
        raise UsageError("--traj is required")
    try:
        return nio.read_trajectory(path)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc


def _point(text: str) -> SpacetimePoint:
    x, y, z, t = _floats(text, 4)
    return SpacetimePoint((x, y, z), t)


# --- commands ----------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> int:
    solver = cfg.solver
    if args.seed is not None:
        solver = SolverConfig(**dict(asdict(solver), seed=args.seed))
        cfg.solver = solver
    if args.out is None:
        raise UsageError("--out is required")
    out = Path(args.out)
    traj = run(solver)
    nio.write_trajectory(out, traj)
    div = _max_divergence(traj)
    speed = traj.max_speed()
    summary = {
        "pass": bool(div <= 1e-8 * speed),
        "margins": {"divergence": 1e-8 * speed - div},
        "snapshots": len(traj),
        "config_hash": solver.digest(),
    }
    return _finish(Outputs(out / "index.json", out / "config.json", out / "summary.json"),
                   cfg, summary, args.quiet)


def _max_divergence(traj) -> float:
    return max(float(np.max(np.abs(divergence(VectorField(traj.grid, u)).values)))
               for u in traj.u)


def cmd_verify(args, cfg: RunConfig) -> int:
    if args.lemma not in LEMMAS:
        raise UsageError(f"--lemma must be one of {sorted(LEMMAS)}")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    seed = args.seed if args.seed is not None else 0
    lemma = LEMMAS[args.lemma]
    plan = cfg.plan(REFERENCE_PLAN if lemma == "harmonic" else HARNESS_PLAN)
    cfg.command = {"name": "verify", "lemma": lemma, "trials": args.trials, "seed": seed,
                   "n": args.n}
    outputs = Outputs.at(args.out, f"verify_{lemma}.csv")
    reports = run_corpus(lemma, args.trials, seed, args.n, plan)
    rows = [row for rep in reports for row in rep.csv_rows()]
    nio.write_csv(outputs.csv, CSV_HEADER, rows)
    margins = {f"{rep.seed}:{rep.p}": _jsonable(min((r.margin for r in rep.rows
                                                      if not r.flagged), default=0.0))
               for rep in reports}
    summary = {"pass": all(rep.passed for rep in reports), "margins": margins}
    return _finish(outputs, cfg, summary, args.quiet)


def cmd_diagnose(args, cfg: RunConfig) -> int:
    traj = _load_traj(args.traj)
    if args.point is None or args.radii is None:
        raise UsageError("--point and --radii are required")
    base = _point(args.point)
    radii = _ladder(args.radii)
    plan = cfg.plan(SamplingPlan())
    cfg.command = {"name": "diagnose", "traj": str(args.traj), "point": args.point,
                   "radii": args.radii}
    outputs = Outputs.at(args.out, "scales.csv")
    qs = [scale_quantities(traj, base, r, plan) for r in radii]
    rows = [[*base.x, base.t, q.r, q.C_r, q.N_r, q.E_r] for q in qs]
    nio.write_csv(outputs.csv, ["x", "y", "z", "t", "r", "C_r", "N_r", "E_r"], rows)
    summary = {"pass": all(np.isfinite([q.C_r, q.N_r, q.E_r]).all() for q in qs),
               "margins": {"max_E_r": max(q.E_r for q in qs)}}
    return _finish(outputs, cfg, summary, args.quiet)


def cmd_flag(args, cfg: RunConfig) -> int:
    traj = _load_traj(args.traj)
    plan = cfg.plan(FLAG_PLAN)
    radii = _floats(args.radii) if args.radii else None
    cfg.command = {"name": "flag", "traj": str(args.traj), "stride": args.stride,
                   "time_stride": args.time_stride, "radii": radii}
    outputs = Outputs.at(args.out, "flags.csv")
    fm = flag_map(traj, cfg.thresholds, args.stride, args.time_stride, radii, plan)
    nio.write_csv(outputs.csv, ["x", "y", "z", "t", "flag", "failing_r"], fm.csv_rows())
    finite = fm.max_E[np.isfinite(fm.max_E)]
    summary = {
        "pass": fm.count(SUSPECT) == 0,
        "margins": {"eps2_minus_max_E": _jsonable(
            float(cfg.thresholds.eps2 - finite.max()) if len(finite) else math.nan)},
        "counts": {s: fm.count(s) for s in ("regular", "suspect", "unknown")},
        "box_length": traj.grid.box_length,
    }
    return _finish(outputs, cfg, summary, args.quiet)


def _read_flags(path, box_length) -> FlagMap:
    if path is None:
        raise UsageError("--flags is required")
    try:
        rows = nio.read_csv(path)
    except FileNotFoundError as exc:
        raise UsageError(f"{path} not found") from exc
    pts = np.array([[float(r[k]) for k in ("x", "y", "z", "t")] for r in rows
                    if r["flag"] == SUSPECT]).reshape(-1, 4)
    return FlagMap.planted(pts, box_length)


def cmd_boxcount(args, cfg: RunConfig) -> int:
    if not args.radii:
        raise UsageError("--radii is required")
    radii = _floats(args.radii)
    box = args.box_length if args.box_length is not None else math.inf
    fm = _read_flags(args.flags, box)
    cfg.command = {"name": "boxcount", "flags": str(args.flags), "radii": radii,
                   "box_length": _jsonable(box)}
    outputs = Outputs.at(args.out, "boxcount.csv")
    try:
        bc = boxcount_dimension(fm, radii)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    nio.write_csv(outputs.csv, ["r", "N"], bc.csv_rows())
    summary = {"pass": bc.empty or bc.dimension <= 1.0,
               "margins": {"one_minus_d": _jsonable(1.0 - bc.dimension)},
               "dimension": _jsonable(bc.dimension), "empty": bc.empty}
    return _finish(outputs, cfg, summary, args.quiet)


def cmd_decay(args, cfg: RunConfig) -> int:
    traj = _load_traj(args.traj)
    if args.point is None:
        raise UsageError("--point is required")
    base = _point(args.point)
    plan = cfg.plan(SamplingPlan())
    lam = args.lam if args.lam is not None else cfg.thresholds.lam
    cfg.command = {"name": "decay", "traj": str(args.traj), "point": args.point, "lam": lam,
                   "k_max": args.k_max, "r_base": args.r_base}
    outputs = Outputs.at(args.out, "decay.csv")
    prof = decay_profile(traj, base, lam, args.k_max, args.r_base, plan)
    rows = [[row.k, row.radius, *row.V, row.C, row.drift] for row in prof.rows]
    nio.write_csv(outputs.csv, ["k", "lambda_k", "V1", "V2", "V3", "C_val", "drift"], rows)
    first = prof.rows[0].C
    margins = {str(row.k): first / 2**row.k - row.C for row in prof.rows}
    summary = {"pass": all(v >= 0 for v in margins.values()), "margins": margins,
               "holder_estimate": _jsonable(prof.holder_estimate),
               "truncated": prof.truncated}
    return _finish(outputs, cfg, summary, args.quiet)


def cmd_energy(args, cfg: RunConfig) -> int:
    traj = _load_traj(args.traj)
    seed = args.seed if args.seed is not None else 0
    if args.bumps < 1:
        raise UsageError("--bumps must be >= 1")
    cfg.command = {"name": "energy", "traj": str(args.traj), "bumps": args.bumps,
                   "seed": seed, "radius": args.radius, "tau": args.tau}
    outputs = Outputs.at(args.out, "energy.csv")
    rng = np.random.default_rng(seed)
    L = traj.grid.box_length
    t_lo = traj.t_min + args.tau
    if t_lo > traj.t_max:
        raise UsageError("trajectory is shorter than the bump duration")
    rows, rel = [], []
    for i in range(args.bumps):
        x = rng.uniform(0, L, 3)
        tc = float(rng.uniform(t_lo, traj.t_max))
        phi = TestFunction(SpacetimePoint(tuple(x), tc), args.radius, args.tau)
        chk = check_energy_inequality(traj, phi)
        rows.append([i, *x, tc, args.radius, args.tau, chk.t, chk.lhs, chk.rhs, chk.slack,
                     chk.scale, chk.relative_slack])
        rel.append(chk.relative_slack)
    nio.write_csv(outputs.csv, ["bump", "x", "y", "z", "t_center", "radius", "tau", "t",
                                "lhs", "rhs", "slack", "scale", "relative_slack"], rows)
    summary = {"pass": min(rel) >= -ENERGY_TOL,
               "margins": {str(i): r + ENERGY_TOL for i, r in enumerate(rel)}}
    return _finish(outputs, cfg, summary, args.quiet)


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory or .csv path")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--threads", type=int, help="FFT worker threads (else NSPR_THREADS)")
    common.add_argument("--quiet", action="store_true", help="do not print the summary")

    parser = _Parser(prog="nspr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="run the solver")

    p = sub.add_parser("verify", parents=[common], help="monotonicity harness")
    p.add_argument("--lemma", required=True, choices=sorted(LEMMAS))
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--n", type=int, default=32)

    p = sub.add_parser("diagnose", parents=[common], help="scale quantities at a point")
    p.add_argument("--traj")
    p.add_argument("--point", help="x,y,z,t")
    p.add_argument("--radii", help="r0:ratio:k")

    p = sub.add_parser("flag", parents=[common], help="regularity flags on a probe lattice")
    p.add_argument("--traj")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--time-stride", type=int, default=4)
    p.add_argument("--radii", help="comma-separated probe radii (default R/2^j)")

    p = sub.add_parser("boxcount", parents=[common], help="parabolic box counting")
    p.add_argument("--flags", help="flags.csv from the flag command")
    p.add_argument("--radii", help="comma-separated radii")
    p.add_argument("--box-length", type=float, help="periodic box side (default: none)")

    p = sub.add_parser("decay", parents=[common], help="oscillation decay profile")
    p.add_argument("--traj")
    p.add_argument("--point", help="x,y,z,t")
    p.add_argument("--lam", type=float)
    p.add_argument("--k-max", type=int, default=3)
    p.add_argument("--r-base", type=float, default=1.0)

    p = sub.add_parser("energy", parents=[common], help="local energy inequality")
    p.add_argument("--traj")
    p.add_argument("--bumps", type=int, default=5)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--tau", type=float, default=0.05)
    return parser


COMMANDS = {
    "simulate": cmd_simulate, "verify": cmd_verify, "diagnose": cmd_diagnose,
    "flag": cmd_flag, "boxcount": cmd_boxcount, "decay": cmd_decay, "energy": cmd_energy,
}


def _threads(arg) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("NSPR_THREADS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"NSPR_THREADS must be an integer, got {env!r}") from exc
    return None


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        threads = _threads(args.threads)
        if threads is not None and threads < 1:
            raise UsageError("--threads must be >= 1")
        set_threads(threads)
        cfg = RunConfig.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ValueError) as exc:
        print(f"nspr: error: {exc}", file=sys.stderr)
        return 1
    except NsprError as exc:
        print(f"nspr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
