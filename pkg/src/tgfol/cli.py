"""Command-line front end: ``tgfol gallery|classify|geodesic``.

Exit codes: 0 success, 1 verification mismatch, 2 usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import gallery as Ga
from . import geodesy as Gd
from .atlas import DEFAULT_SEED
from .errors import InvalidParameter, TGFolError
from .io import canonical_json, csv_text, svg_lines, write_csv, write_json, write_svg, atomic_write
from .topology import CAUSAL_CLASSES, classification_table, classify_tg_foliations, lightlike_obstruction, milnor_wood

OUTPUT_ENV = "TGFOL_OUTPUT_DIR"
FORMATS = ("json", "csv", "svg")
EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    entry: str | None = None
    input: str | None = None
    seed: int = DEFAULT_SEED
    samples: int = 10_000
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "tgfol-output"
    formats: tuple[str, ...] = ("json",)

    def __post_init__(self):
        if self.seed <= 0 or self.samples <= 0:
            raise InvalidParameter("seed and samples must be positive")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise InvalidParameter(f"unknown formats {sorted(bad)}")
        probe = Path(self.output_dir).absolute()
        while not probe.exists():
            probe = probe.parent
        if not (probe.is_dir() and os.access(probe, os.W_OK)):
            raise InvalidParameter(f"output directory {self.output_dir} is not writable")

    def to_json(self) -> dict:
        d = asdict(self)
        d["formats"] = list(self.formats)
        return d


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as JSON on stderr."""

    def error(self, message):
        _failure(UsageError(message), "usage")
        raise SystemExit(EXIT_USAGE)


def _emit(obj) -> None:
    sys.stdout.write(canonical_json(obj))


def _out(cfg: RunConfig, *parts) -> Path:
    return Path(cfg.output_dir, *parts)


# gallery -----------------------------------------------------------------------------------------
def cmd_gallery(args, cfg: RunConfig) -> int:
    if args.action == "list":
        _emit({"entries": list(Ga.ENTRY_NAMES), "models": list(Ga.MODEL_NAMES)})
        return EXIT_OK
    if args.action == "build":
        name = _entry_name(args.name)
        entry = Ga.build_entry(name, cfg.samples)
        report = {"config": cfg.to_json(), "entry": name, "recipe": entry.recipe,
                  "leaves": [l.to_json() for l in entry.foliation.tangency_leaves],
                  "compatibility": entry.compatibility,
                  "atlas": entry.atlas.to_json(), "foliation": entry.foliation.to_json(),
                  "flow": entry.flow.to_json(),
                  "metric": entry.metric.to_json() if entry.metric is not None else None}
        if "json" in cfg.formats:
            write_json(_out(cfg, name, "entry.json"), report)
        if "svg" in cfg.formats:
            _b_profile_svg(entry, _out(cfg, name, "b_profile.svg"))
        _emit({"entry": name, "built": True, "compatibility": entry.compatibility.get("verdict"),
               "metric": entry.metric is not None})
        return EXIT_OK
    # verify
    names = list(Ga.ENTRY_NAMES) if args.all else [_entry_name(args.name)]
    results, status = [], EXIT_OK
    for name in names:
        res = Ga.verify_entry(name, cfg.samples, cfg.seed, regenerate=args.regenerate,
                              tolerances=cfg.tolerances)
        obs = res["observed"]
        summary = {"entry": name, "passed": res["passed"], "mismatches": res["mismatches"],
                   "verdict": obs.get("compatibility")}
        if "max_II" in obs:
            summary["max_II"] = obs["max_II"]
            summary["leaf_types"] = obs["leaf_types"]
        results.append(summary)
        if "json" in cfg.formats:
            write_json(_out(cfg, name, "verify.json"), {"config": cfg.to_json(), **res})
        if "csv" in cfg.formats and "leaf_types" in obs:
            write_csv(_out(cfg, name, "leaf_types.csv"), ["region", "type"], sorted(obs["leaf_types"].items()))
        if "svg" in cfg.formats and obs.get("leaf_types"):
            _b_profile_svg(Ga.build_entry(name, cfg.samples), _out(cfg, name, "b_profile.svg"))
        if not res["passed"]:
            status = EXIT_MISMATCH
    _emit(results[0] if len(results) == 1 else {"results": results,
                                                "passed": all(r["passed"] for r in results)})
    return status


def _entry_name(name: str | None) -> str:
    if name not in Ga.ENTRY_NAMES:
        raise UsageError(f"unknown entry {name!r}; known: {', '.join(Ga.ENTRY_NAMES)}")
    return name


def _b_profile_svg(entry: Ga.GalleryEntry, path: Path) -> None:
    """b against the level offset across each tangency leaf."""
    series = {}
    rng = np.random.default_rng(DEFAULT_SEED)
    for name, leaf in sorted(entry.leaves.items()):
        fr = entry.frames[leaf.chart]
        chart = entry.atlas.chart(leaf.chart)
        base = leaf.project(chart.domain.random(1, rng, inset=0.1))
        ds, bs = [], []
        for d in np.linspace(-0.15, 0.15, 121):
            p = leaf.offset(base, d)
            if chart.contains(p)[0]:
                ds.append(d)
                bs.append(float(fr.values(p)["b"][0]))
        series[name] = (ds, bs)
    write_svg(path, series, f"{entry.name}: b across tangency leaves")


# classify ------------------------------------------------------------------------------------------
def cmd_classify(args, cfg: RunConfig) -> int:
    if args.table:
        gmax, emax = args.table
        if gmax < 0 or emax < 0:
            raise UsageError("table bounds must be non-negative")
        rows = classification_table(gmax, emax)
    else:
        if args.genus is None or args.euler is None:
            raise UsageError("give --genus and --euler, or --table GMAX EMAX")
        if args.genus < 0:
            raise UsageError("genus must be non-negative")
        v = classify_tg_foliations(args.genus, args.euler)
        rows = [{"genus": args.genus, "euler": args.euler, "milnor_wood": milnor_wood(args.genus, args.euler),
                 "lightlike_obstruction": lightlike_obstruction(args.genus, args.euler),
                 **{k: v[k].status for k in CAUSAL_CLASSES},
                 "reasons": {k: v[k].reason for k in CAUSAL_CLASSES}}]
    header = ["genus", "euler", "milnor_wood", "lightlike_obstruction", *CAUSAL_CLASSES]
    if "json" in cfg.formats:
        write_json(_out(cfg, "classification.json"), {"config": cfg.to_json(), "rows": rows})
    if "csv" in cfg.formats:
        write_csv(_out(cfg, "classification.csv"), header, [[r[h] for h in header] for r in rows])
    if args.csv:
        sys.stdout.write(csv_text(header, [[r[h] for h in header] for r in rows]))
    else:
        _emit(rows[0] if len(rows) == 1 else {"rows": rows})
    return EXIT_OK


# geodesic --------------------------------------------------------------------------------------------
def _geodesic_target(name: str):
    if name in Ga.ENTRY_NAMES:
        entry = Ga.build_entry(name)
        if entry.metric is None:
            raise UsageError(f"entry {name!r} carries no metric")
        return entry
    if name in Ga.MODEL_NAMES:
        return Ga.build_model(name)
    raise UsageError(f"unknown entry {name!r}; known: {', '.join(Ga.ENTRY_NAMES + Ga.MODEL_NAMES)}")


def _default_init(target, seed: int) -> Gd.GeodesicState:
    if isinstance(target, Ga.LeafModel):
        return Gd.GeodesicState(target.leaf.chart, target.start, target.velocity)
    reg = target.regions[0]
    x = 0.5 * (np.array(reg.box.lower) + np.array(reg.box.upper))
    v = Gd.leaf_tangent_velocity(target.foliation, reg.chart, x, np.random.default_rng(seed))
    return Gd.GeodesicState(reg.chart, x, v)


def _read_init(path: str) -> Gd.GeodesicState:
    try:
        d = json.loads(Path(path).read_text())
        return Gd.GeodesicState(str(d["chart"]), np.array(d["position"], float), np.array(d["velocity"], float),
                                float(d.get("t0", 0.0)))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read initial condition from {path}: {exc}") from exc


def cmd_geodesic(args, cfg: RunConfig) -> int:
    target = _geodesic_target(args.entry)
    name = args.entry
    if args.completeness:
        if isinstance(target, Ga.LeafModel):
            verdict = Gd.null_completeness(target.metric, target.foliation, target.leaf, target.loop,
                                           x0=target.start, v0=target.velocity, tol=args.tol, loops=3)
        else:
            if not target.completeness:
                raise UsageError(f"entry {name!r} declares no completeness probe")
            p = target.completeness[0]
            verdict = Gd.null_completeness(target.metric, target.foliation, target.leaves[p.leaf], p.loop,
                                           tol=args.tol, loops=1, t_max=p.t_max, flow=target.flow)
        out = {"entry": name, **verdict.to_json()}
        if "json" in cfg.formats:
            write_json(_out(cfg, name, "completeness.json"), {"config": cfg.to_json(), **out})
        _emit(out)
        return EXIT_OK
    s0 = _read_init(args.init) if args.init else _default_init(target, cfg.seed)
    traj = Gd.integrate_geodesic(target.metric, s0, s0.affine_parameter + args.t, args.tol, target.atlas)
    summary = {"entry": name, **traj.summary(), "leaf_drift": Gd.transverse_drift(traj, target.foliation)}
    header = ["t", "chart", "x0", "x1", "x2", "v0", "v1", "v2", "g_norm"]
    if "json" in cfg.formats:
        write_json(_out(cfg, name, "geodesic_summary.json"), {"config": cfg.to_json(), **summary})
    if "csv" in cfg.formats:
        write_csv(_out(cfg, name, "trajectory.csv"), header, traj.rows())
    if "svg" in cfg.formats:
        xs = np.array(traj.x)
        write_svg(_out(cfg, name, "trajectory.svg"),
                  {f"x{k}": (traj.t, xs[:, k]) for k in range(3)}, f"{name}: geodesic coordinates")
    _emit(summary)
    return EXIT_OK


# parser -------------------------------------------------------------------------------------------------
def _formats(text: str) -> tuple[str, ...]:
    out = tuple(sorted({f.strip() for f in text.split(",") if f.strip()}))
    if not out or set(out) - set(FORMATS):
        raise argparse.ArgumentTypeError(f"formats must be a comma list from {FORMATS}")
    return out


def _tolerance(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep or key not in Ga.TOLERANCES:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE with KEY in {sorted(Ga.TOLERANCES)}")
    try:
        v = float(val)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad tolerance value {val!r}") from exc
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerances must be positive")
    return key, v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--samples", type=int, default=10_000)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./tgfol-output)")
    common.add_argument("--format", type=_formats, default=("csv", "json", "svg"), dest="formats")
    common.add_argument("--tolerance", type=_tolerance, action="append", default=[], dest="tolerances",
                        metavar="KEY=VALUE", help=f"override a verification tolerance ({', '.join(Ga.TOLERANCES)})")

    p = _Parser(prog="tgfol", description="Totally geodesic foliations: build, verify, classify.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gallery", parents=[common], help="list, build or verify gallery entries")
    g.add_argument("action", choices=("list", "build", "verify"))
    g.add_argument("name", nargs="?")
    g.add_argument("--all", action="store_true", help="verify every entry")
    g.add_argument("--regenerate", action="store_true", help="rewrite the golden records before comparing")

    c = sub.add_parser("classify", parents=[common], help="causal classes of circle bundles")
    c.add_argument("--genus", type=int)
    c.add_argument("--euler", type=int)
    c.add_argument("--table", type=int, nargs=2, metavar=("GMAX", "EMAX"))
    c.add_argument("--csv", action="store_true", help="print CSV instead of JSON")

    q = sub.add_parser("geodesic", parents=[common], help="integrate a geodesic of an entry or model")
    q.add_argument("--entry", required=True)
    q.add_argument("--init", help="JSON file with chart, position, velocity")
    q.add_argument("--t", type=float, default=10.0)
    q.add_argument("--tol", type=float, default=1e-10)
    q.add_argument("--completeness", action="store_true", help="run the null completeness check instead")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    out_dir = args.out or os.environ.get(OUTPUT_ENV) or "tgfol-output"
    try:
        cfg = RunConfig(args.command, getattr(args, "name", None) or getattr(args, "entry", None),
                        getattr(args, "init", None), args.seed, args.samples, dict(args.tolerances), out_dir,
                        args.formats)
        handler = {"gallery": cmd_gallery, "classify": cmd_classify, "geodesic": cmd_geodesic}[args.command]
        if args.command == "gallery" and args.action == "verify" and not args.all and not args.name:
            raise UsageError("verify needs an entry name or --all")
        if args.command == "gallery" and args.action == "build" and not args.name:
            raise UsageError("build needs an entry name")
        if args.command == "geodesic" and (args.tol <= 0):
            raise UsageError("--tol must be positive")
        return handler(args, cfg)
    except (UsageError, InvalidParameter) as exc:
        _failure(exc, "usage")
        return EXIT_USAGE
    except TGFolError as exc:
        _failure(exc, "runtime")
        return EXIT_RUNTIME


def _failure(exc: Exception, kind: str) -> None:
    info = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
    if isinstance(exc, TGFolError):
        if exc.witness is not None:
            info["witness"] = exc.witness
        if getattr(exc, "stage", ""):
            info["stage"] = exc.stage
        info.update({k: v for k, v in exc.info.items() if k not in info})
    sys.stderr.write(canonical_json(info))


if __name__ == "__main__":
    sys.exit(main())
