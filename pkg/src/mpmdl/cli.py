"""Command-line front end: ``gen``, ``solve``, ``compare``, ``adjust`` and ``replay``.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .analytics import ParetoArchive, summarize
from .baselines import ALGORITHMS, BASELINE_PRESETS, BaselineConfig, run_algorithm
from .codec import Schedule, VisitLedger
from .dynamics import AVAILABLE_S_PER_MONTH, plan_months, stage1_replan
from .errors import MPMDLError, ParseError, ValidationError
from .evolve import run_insga3
from .model import (
    DEFAULT_TAKT,
    SIZE_TASKS,
    GeneratorConfig,
    Instance,
    LineSpec,
    VehicleModel,
    generate_instance,
    instance_stats,
    read_instance,
    validate_instance,
    write_instance,
)

log = logging.getLogger("mpmdl")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4

PRESETS = dict(BASELINE_PRESETS)
PRESETS["default"] = dict(pop_size=200, iterations=20, pc=0.8, pm=0.1, c1=1.5, c2=1.5, inertia=0.8)

FRONT_HEADER = ["id", "f1", "f2", "f3"]
GANTT_HEADER = ["row", "station", "line", "task", "start_s", "end_s"]


# --------------------------------------------------------------------------
# artifact writers


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def front_csv(archive: ParetoArchive) -> str:
    return _csv_text(FRONT_HEADER, ([i, *e.vector] for i, e in enumerate(archive.entries, start=1)))


def gantt_rows(schedule: Schedule, inst: Instance) -> list[list]:
    """One row per task; start times are prefix sums within each station."""
    rows = []
    for n, d, st in schedule.stations():
        clock = 0
        for o, task in st.tasks:
            t = inst.line(o).tasks[task - 1].time
            rows.append([n, d, o, task, clock, clock + t])
            clock += t
    return rows


def gantt_csv(schedule: Schedule, inst: Instance) -> str:
    return _csv_text(GANTT_HEADER, gantt_rows(schedule, inst))


def _write_manifest(path: Path, command: str, argv: list[str], payload: dict, started: float) -> None:
    doc = {
        "tool": "mpmdl",
        "version": __version__,
        "command": command,
        "argv": argv,
        **payload,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=False) + "\n")


# --------------------------------------------------------------------------
# argument helpers


def parse_seeds(text: str) -> list[int]:
    """``"0-9"``, ``"1,4,7"`` or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("no seeds given")
    return out


def _models(text: str) -> tuple[VehicleModel, VehicleModel, VehicleModel]:
    parts = [p.strip() for p in text.split(",")]
    try:
        models = tuple(VehicleModel(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown vehicle model in {text!r}") from None
    if len(models) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated models")
    return models


def _config(args, seed: int | None = None) -> BaselineConfig:
    params = dict(PRESETS[args.preset])
    for flag, key in (("pop", "pop_size"), ("gens", "iterations"), ("pc", "pc"), ("pm", "pm"), ("divisions", "divisions")):
        value = getattr(args, flag, None)
        if value is not None:
            params[key] = value
    params["seed"] = args.seed if seed is None else seed
    return BaselineConfig(**params)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default="default", help="parameter preset; default is pop 200, 20 generations, pc 0.8, pm 0.1")
    p.add_argument("--pop", type=int, help="population / swarm size")
    p.add_argument("--gens", type=int, help="generations / iterations")
    p.add_argument("--pc", type=float, help="crossover probability")
    p.add_argument("--pm", type=float, help="mutation probability")
    p.add_argument("--divisions", type=int, help="reference-point divisions")


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    started = time.perf_counter()
    spec = GeneratorConfig.preset(args.size, takt=args.takt)
    if args.tasks is not None:
        spec = GeneratorConfig(**{**spec.__dict__, "tasks_per_line": (args.tasks,) * 3})
    if args.density is not None:
        spec = GeneratorConfig(**{**spec.__dict__, "edge_density": args.density})
    if args.models is not None:
        spec = GeneratorConfig(**{**spec.__dict__, "models": args.models})
    inst = generate_instance(spec, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_instance(inst, out)
    stats = instance_stats(inst)
    print(f"instance  {out}  sha256 {inst.digest()[:16]}")
    print(f"takt      {inst.takt} s")
    for o in range(3):
        print(f"line {o + 1}    {stats.task_counts[o]} tasks, {stats.work_content[o]} s work")
    print(f"bounds    rows {stats.row_lower_bounds}, total {stats.total_lower_bound} stations")
    manifest = out.with_name(out.name + ".manifest.json")
    _write_manifest(
        manifest,
        "gen",
        args.argv,
        {"instance_hash": inst.digest(), "seed": args.seed, "config": _jsonable(spec.__dict__), "artifacts": [out.name]},
        started,
    )
    return EXIT_OK


def _solve_artifacts(archive: ParetoArchive, inst: Instance) -> dict[str, str]:
    files = {"front.csv": front_csv(archive)}
    if len(archive):
        for j in range(3):
            files[f"gantt_f{j + 1}.csv"] = gantt_csv(archive.best(j).schedule, inst)
    return files


def cmd_solve(args) -> int:
    started = time.perf_counter()
    inst = read_instance(args.instance)
    cfg = _config(args)
    archive = run_algorithm(args.algo, inst, cfg)
    out = Path(args.out_dir)
    files = _solve_artifacts(archive, inst)
    for name, text in files.items():
        _atomic_write(out / name, text)
    print(f"{args.algo}: {len(archive)} non-dominated solutions -> {out}")
    for i, e in enumerate(archive.entries, start=1):
        print(f"  {i:3d}  f1={e.vector.f1}  f2={e.vector.f2:.6g}  f3={e.vector.f3:.6g}")
    _write_manifest(
        out / "manifest.json",
        "solve",
        args.argv,
        {
            "instance": str(args.instance),
            "instance_hash": inst.digest(),
            "algorithm": args.algo,
            "seed": cfg.seed,
            "config": asdict(cfg),
            "artifacts": sorted(files),
        },
        started,
    )
    return EXIT_OK


def _compare_job(job):
    alg, seed, inst, cfg = job
    return alg, seed, run_algorithm(alg, inst, cfg, seed=seed)


def cmd_compare(args) -> int:
    started = time.perf_counter()
    inst = read_instance(args.instance)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        print(f"error: unknown algorithm(s) {bad}; choose from {list(ALGORITHMS)}", file=sys.stderr)
        return EXIT_USAGE
    seeds = parse_seeds(args.seeds)
    jobs = [(alg, s, inst, _config(args, s)) for alg in algos for s in seeds]
    out = Path(args.out_dir)
    results: list[tuple[str, int, ParetoArchive]] = []
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for res in pool.map(_compare_job, jobs):
                    results.append(res)
        else:
            for job in jobs:
                results.append(_compare_job(job))
    except Exception:
        done = ", ".join(f"{a}/seed{s}" for a, s, _ in results) or "none"
        print(f"error: compare aborted; completed runs: {done}", file=sys.stderr)
        raise
    files: dict[str, str] = {}
    for alg, seed, archive in results:
        files[f"fronts/{alg}_seed{seed}.csv"] = front_csv(archive)
    report = summarize([a for _, _, a in results])
    files["indicators.csv"] = _csv_text(
        ["algorithm", "seed", "hv", "igd", "n_points"],
        ([r.algorithm, r.seed, r.hv, r.igd, r.n_points] for r in report.runs),
    )
    table = []
    for alg in algos:
        for obj in ("f1", "f2", "f3"):
            if (alg, obj) in report.objective_stats:
                mx, mn, ave = report.objective_stats[(alg, obj)]
                table.append([alg, obj, mx, mn, ave])
    files["table.csv"] = _csv_text(["algorithm", "metric", "max", "min", "ave"], table)
    files["boxplot.csv"] = _csv_text(
        ["algorithm", "indicator", "seed", "value"],
        [[r.algorithm, ind, r.seed, getattr(r, ind)] for ind in ("hv", "igd") for r in report.runs],
    )
    files["reference_front.csv"] = _csv_text(
        FRONT_HEADER, ([i, *v] for i, v in enumerate(report.reference_front, start=1))
    )
    for name, text in files.items():
        _atomic_write(out / name, text)
    norm = report.normalization
    for alg in algos:
        hv = report.hv_values(alg)
        ig = report.igd_values(alg)
        print(f"{alg:8s} HV mean {sum(hv) / len(hv):.6f}  IGD mean {sum(ig) / len(ig):.6f}  ({len(hv)} runs)")
    _write_manifest(
        out / "manifest.json",
        "compare",
        args.argv,
        {
            "instance": str(args.instance),
            "instance_hash": inst.digest(),
            "algorithms": algos,
            "seeds": seeds,
            "config": asdict(_config(args, 0)) | {"seed": None},
            "hv_reference_point": list(norm.ref_point) if norm else None,
            "normalization": {"lower": list(norm.lower), "upper": list(norm.upper)} if norm else None,
            "points_beyond_reference": report.excluded_points,
            "artifacts": sorted(files),
        },
        started,
    )
    return EXIT_OK


_SCENARIO_KEYS = {"da_sl", "months"}
_SCENARIO_OPTIONAL = {"available_s"}
_MONTH_KEYS = {"month", "da_fv", "da_pev"}


def read_scenario(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("scenario: expected an object")
    missing = _SCENARIO_KEYS - doc.keys()
    extra = doc.keys() - _SCENARIO_KEYS - _SCENARIO_OPTIONAL
    if missing or extra:
        raise ParseError(f"scenario: missing {sorted(missing)} / unknown {sorted(extra)} fields")
    months = []
    for i, m in enumerate(doc["months"]):
        if not isinstance(m, dict) or m.keys() != _MONTH_KEYS:
            raise ParseError(f"months[{i}]: expected fields {sorted(_MONTH_KEYS)}")
        for k in _MONTH_KEYS:
            if isinstance(m[k], bool) or not isinstance(m[k], (int, float)) or m[k] < 0:
                raise ParseError(f"months[{i}].{k}: expected a non-negative number")
        months.append((m["month"], m["da_fv"], m["da_pev"]))
    return {"da_sl": doc["da_sl"], "available_s": doc.get("available_s", AVAILABLE_S_PER_MONTH), "months": months}


def _line_library(instances: list[Instance]) -> dict[VehicleModel, LineSpec]:
    lib: dict[VehicleModel, LineSpec] = {}
    for inst in instances:
        for ln in inst.lines:
            if ln.n_tasks:
                lib.setdefault(ln.vehicle_model, ln)
    return lib


def _month_instance(lib: dict[VehicleModel, LineSpec], models, takt: int, rates) -> Instance:
    lines = []
    for o, model in enumerate(models, start=1):
        if model not in lib:
            raise ValidationError(f"no task data for vehicle model {model.value!r} (needed on line {o})")
        src = lib[model]
        lines.append(LineSpec(o, model, src.tasks, src.precedence))
    return validate_instance(Instance(tuple(lines), takt, rates))


def cmd_adjust(args) -> int:
    started = time.perf_counter()
    scenario = read_scenario(args.scenario)
    plans = plan_months(scenario["months"], scenario["da_sl"], scenario["available_s"])
    instances = [read_instance(p) for p in (args.instance or [])]
    lib = _line_library(instances)
    rates = instances[0].rates if instances else None
    files: dict[str, str] = {}
    rows = []
    ledger: VisitLedger | None = None
    prev_volumes = None
    for plan in plans:
        a = plan.assignment
        rows.append(
            [
                plan.month,
                plan.volumes.da_fv,
                plan.volumes.da_pev,
                plan.volumes.da_sl,
                plan.stage if plan.stage is not None else "",
                a.side1.value if a else "",
                a.middle.value if a else "",
                a.side3.value if a else "",
                plan.takt if plan.takt is not None else "",
                plan.replan,
                plan.status,
            ]
        )
        if plan.status != "ok" or not instances:
            continue
        cfg = _config(args)
        inst = _month_instance(lib, a.models(), plan.takt, rates)
        if plan.replan == "warm" and ledger is not None:
            result = stage1_replan(prev_volumes, plan.volumes, inst, cfg.evo(), ledger=ledger, available_s=scenario["available_s"])
            archive, ledger = result.archive, result.ledger
        else:
            ledger = VisitLedger.for_instance(inst)
            archive = run_insga3(inst, cfg.evo(), ledger=ledger)
        prev_volumes = plan.volumes
        files[f"month{plan.month}/front.csv"] = front_csv(archive)
        if len(archive):
            files[f"month{plan.month}/gantt_f1.csv"] = gantt_csv(archive.best(0).schedule, inst)
    files["timeline.csv"] = _csv_text(
        ["month", "da_fv", "da_pev", "da_sl", "stage", "side1", "middle", "side3", "takt_s", "replan", "status"], rows
    )
    out = Path(args.out_dir)
    for name, text in files.items():
        _atomic_write(out / name, text)
    for r in rows:
        print("month {0}: stage {4} sides {5}/{7} takt {8} replan {9} [{10}]".format(*r))
    _write_manifest(
        out / "manifest.json",
        "adjust",
        args.argv,
        {
            "scenario": str(args.scenario),
            "instances": [str(p) for p in (args.instance or [])],
            "instance_hashes": [i.digest() for i in instances],
            "seed": args.seed,
            "config": asdict(_config(args)),
            "artifacts": sorted(files),
        },
        started,
    )
    bad = [p.month for p in plans if p.status != "ok"]
    if bad:
        print(f"error: months {bad} fall outside the assignment rules", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_replay(args) -> int:
    """Re-run the command recorded in a manifest, optionally into another directory."""
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    argv = list(doc["argv"])
    if args.out_dir is not None:
        flag = "--out" if doc["command"] == "gen" else "--out-dir"
        i = argv.index(flag)
        if flag == "--out":
            argv[i + 1] = str(Path(args.out_dir) / Path(argv[i + 1]).name)
        else:
            argv[i + 1] = args.out_dir
    return main(argv)


# --------------------------------------------------------------------------
# entry point


def _jsonable(d: dict) -> dict:
    return json.loads(json.dumps(d, default=lambda o: o.value if hasattr(o, "value") else o.__dict__))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpmdl", description="Multi-parallel mixed-model disassembly line balancing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded synthetic instance")
    g.add_argument("--size", choices=sorted(SIZE_TASKS), default="small")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--takt", type=float, default=DEFAULT_TAKT, help="takt time in seconds (default: 650)")
    g.add_argument("--tasks", type=int, help="override tasks per line")
    g.add_argument("--density", type=float, help="override precedence edge density")
    g.add_argument(
        "--models",
        type=_models,
        help="vehicle models of lines 1,2,3, e.g. pev,mixed,pev (default: fuel,mixed,fuel)",
    )
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one optimiser and export front, Gantt data and manifest")
    s.add_argument("--instance", required=True)
    s.add_argument("--algo", choices=ALGORITHMS, default="insga3")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    _add_run_flags(s)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("compare", help="run several optimisers over several seeds and report HV/IGD")
    c.add_argument("--instance", required=True)
    c.add_argument("--algos", default=",".join(ALGORITHMS))
    c.add_argument("--seeds", default="0-9")
    c.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    c.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    c.add_argument("--out-dir", required=True)
    _add_run_flags(c)
    c.set_defaults(func=cmd_compare, preset="small")

    a = sub.add_parser("adjust", help="walk a monthly volume scenario through the two-stage adjustment")
    a.add_argument("--scenario", required=True)
    a.add_argument("--instance", action="append", help="task data per vehicle model; repeatable")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out-dir", required=True)
    _add_run_flags(a)
    a.set_defaults(func=cmd_adjust)

    r = sub.add_parser("replay", help="re-run a command from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.argv = argv
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MPMDLError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
