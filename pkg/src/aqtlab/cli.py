"""Command-line entry point binding all modules, with reproducible run records.

Binary-stable outputs: CSV floats carry 17 significant digits, rows are
written in a canonical sort order, and every run leaves a ``<output>.run.json``
record with parameter and output digests.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, ed, gadgets, mps, scan
from .compiler import CircuitParseError, compile_circuit, parse_circuit
from .model import TwistedGraph, spec_from_graph

SCHEMA_VERSION = 1


class DomainError(RuntimeError):
    """Input or solver failure: exit code 1."""


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def _out_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get("AQT_OUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def write_csv(path: Path, rows: list[dict], columns: list[str]):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, params: dict, results):
    payload = {"schema_version": SCHEMA_VERSION, "params": params,
               "results": results}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_run_record(outputs: list[Path], argv: list[str], params: dict,
                     seed, started: float):
    record = {
        "schema_version": SCHEMA_VERSION,
        "command": argv,
        "params": params,
        "config_hash": hashlib.sha256(
            json.dumps(params, sort_keys=True).encode()).hexdigest(),
        "seed": seed,
        "started": started,
        "finished": time.time(),
        "outputs": {str(p): _digest(p) for p in outputs},
        "version": __version__,
    }
    rec_path = outputs[0].with_suffix(outputs[0].suffix + ".run.json")
    rec_path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")


def load_config(path: str | None) -> dict:
    """Flat ``key = value`` config; values parsed as JSON scalars/lists."""
    if not path:
        return {}
    cfg = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line not key = value: {raw!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        try:
            cfg[key] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key] = val
    return cfg


def resolve(args, cfg: dict, key: str, default):
    """Precedence: command-line flag > config file > built-in default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def parse_grid(text: str) -> np.ndarray:
    try:
        a, b, steps = text.split(":")
        grid = np.linspace(float(a), float(b), int(steps))
    except ValueError as exc:
        raise DomainError(f"bad grid spec {text!r}; expected a:b:steps") from exc
    if len(grid) < 2:
        raise DomainError("grid needs at least 2 points")
    return grid


def _load_graph(path: str) -> TwistedGraph:
    p = Path(path)
    if not p.exists():
        raise DomainError(f"graph file not found: {path}")
    return TwistedGraph.from_json(p.read_text())


# ----------------------------------------------------------------- commands


def cmd_compile(args, cfg, argv):
    src = Path(args.file)
    if not src.exists():
        raise DomainError(f"circuit file not found: {args.file}")
    try:
        ir = parse_circuit(src.read_text())
    except CircuitParseError as exc:
        raise DomainError(str(exc)) from exc
    graph = compile_circuit(ir)
    out = _out_path(args.output)
    out.write_text(graph.to_json() + "\n")
    write_run_record([out], argv, {"file": args.file}, None, args._started)
    return 0


def cmd_gap_scan(args, cfg, argv):
    graph = _load_graph(args.graph)
    spec = spec_from_graph(graph)
    grid = parse_grid(resolve(args, cfg, "s_grid", "0:1:21"))
    curve = ed.gap_curve(spec, grid, refine=bool(args.refine))
    rows = []
    for sl in curve.slices:
        row = {"s": sl.s, "gap": sl.gap}
        for i, e in enumerate(sl.eigenvalues[:6]):
            row[f"e{i}"] = float(e)
        rows.append(row)
    out = _out_path(args.output)
    cols = ["s"] + [f"e{i}" for i in range(6)] + ["gap"]
    write_csv(out, rows, cols)
    params = {"graph": args.graph, "s_grid": resolve(args, cfg, "s_grid", "0:1:21"),
              "refine": bool(args.refine), "min_gap": curve.min_gap,
              "argmin_s": curve.argmin_s, "refined_s": curve.refined_s}
    write_run_record([out], argv, params, None, args._started)
    return 0


def cmd_wire_spectrum(args, cfg, argv):
    n = int(resolve(args, cfg, "n", 20))
    grid = parse_grid(resolve(args, cfg, "s_grid", "0:1:51"))
    lam = float(resolve(args, cfg, "lambda", 0.0))
    n_seeds = int(resolve(args, cfg, "seeds", 0))
    master = int(resolve(args, cfg, "seed", 7))
    seeds = [scan.derive_seed(master, "wire-spectrum", k) for k in range(n_seeds)]
    rows = scan.wire_mode_rows(n, grid, lam, seeds)
    out = _out_path(args.output)
    cols = ["n", "s", "k", "omega"] + (["seed"] if lam > 0 and seeds else [])
    write_csv(out, rows, cols)
    write_run_record([out], argv, {"n": n, "lambda": lam, "seeds": n_seeds},
                     master, args._started)
    return 0


def cmd_scaling(args, cfg, argv):
    sizes = [int(t) for t in str(resolve(args, cfg, "sizes", "8,16,24,32,48,64")).split(",")]
    samples = int(resolve(args, cfg, "samples", 20))
    master = int(resolve(args, cfg, "seed", 7))
    family = resolve(args, cfg, "family", "random1d")
    chi = resolve(args, cfg, "chi", None)
    if family != "random1d":
        raise DomainError(f"unknown scaling family {family!r}")
    rows = scan.scaling_scan(sizes, samples, master, family=family,
                             chi=int(chi) if chi else None)
    rows.sort(key=lambda r: (r["n"], r["seed"]))
    out = _out_path(args.output)
    write_csv(out, rows, ["family", "n", "seed", "s", "gap", "chi", "variance"])
    write_run_record([out], argv, {"sizes": sizes, "samples": samples,
                                   "family": family}, master, args._started)
    return 0


def cmd_fit(args, cfg, argv):
    src = Path(args.input)
    if not src.exists():
        raise DomainError(f"input file not found: {args.input}")
    xcol = resolve(args, cfg, "x", "n")
    ycol = resolve(args, cfg, "y", "gap")
    lines = src.read_text().splitlines()
    header = lines[0].split(",")
    try:
        xi, yi = header.index(xcol), header.index(ycol)
    except ValueError as exc:
        raise DomainError(f"columns {xcol}/{ycol} not in {args.input}") from exc
    pts = [(float(parts[xi]), float(parts[yi]))
           for parts in (l.split(",") for l in lines[1:] if l.strip())]
    try:
        fit = analysis.fit_power_law(pts)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    out = _out_path(args.output)
    write_json(out, {"input": args.input, "x": xcol, "y": ycol}, {
        "exponent": fit.exponent,
        "coefficient": fit.coefficient,
        "stderr_exponent": fit.stderr_exponent,
        "stderr_coefficient": fit.stderr_coefficient,
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
    })
    write_run_record([out], argv, {"input": args.input}, None, args._started)
    return 0


def cmd_schedule(args, cfg, argv):
    l = int(resolve(args, cfg, "l", 40))
    eps = float(resolve(args, cfg, "eps", 0.01))
    sched = analysis.schedule_closed_form(l, eps)
    rows = [{"t": t, "s": s} for t, s in sched.samples[:: max(1, len(sched.samples) // 501)]]
    out = _out_path(args.output)
    write_csv(out, rows, ["t", "s"])
    eta = l ** -0.5
    params = {"l": l, "eps": eps, "total_time": sched.total_time,
              "window_eta": eta,
              "window_time_integrated": analysis.window_time(l, eps, eta),
              "window_time_printed_form": analysis.window_time_printed(l, eps, eta)}
    write_run_record([out], argv, params, None, args._started)
    return 0


def cmd_correlations(args, cfg, argv):
    grid = parse_grid(resolve(args, cfg, "s_grid", "0:1:101"))
    rows = []
    for s in grid:
        r = analysis.xx_correlation(float(s), method="elliptic")
        rows.append({"s": r.s, "alpha": r.alpha if math.isfinite(r.alpha) else "inf",
                     "xx": r.value})
    out = _out_path(args.output)
    write_csv(out, rows, ["s", "alpha", "xx"])
    write_run_record([out], argv, {"s_grid": len(grid)}, None, args._started)
    return 0


def cmd_evolve(args, cfg, argv):
    graph = _load_graph(args.graph)
    circ_path = Path(args.check)
    if not circ_path.exists():
        raise DomainError(f"circuit file not found: {args.check}")
    try:
        ir = parse_circuit(circ_path.read_text())
    except CircuitParseError as exc:
        raise DomainError(str(exc)) from exc
    T = float(resolve(args, cfg, "T", 200.0))
    fids = ed.logical_fidelity(graph, ir, T=T)
    out = _out_path(args.output)
    write_json(out, {"graph": args.graph, "circuit": args.check, "T": T}, fids)
    write_run_record([out], argv, {"T": T}, None, args._started)
    return 0


def cmd_gadget(args, cfg, argv):
    out = _out_path(args.output)
    if args.kind == "amplifier":
        levels = int(resolve(args, cfg, "levels", 1))
        gadget = gadgets.build_amplifier(levels)
        report = {"levels": levels, "n_qubits": gadget.graph.n,
                  "leaves": list(gadget.leaves)}
        if args.verify:
            exact = gadget.graph.n <= 14
            rep = gadgets.verify_amplifier(gadget, exact=exact)
            report.update(rep)
        write_json(out, {"gadget": "amplifier", "levels": levels}, report)
    else:
        final = resolve(args, cfg, "final", "f")
        if final not in ("f", "fp"):
            raise DomainError("--final must be f or fp")
        T = float(resolve(args, cfg, "T", 200.0))
        rep = gadgets.verify_router(final, T=T)
        write_json(out, {"gadget": "router", "final": final, "T": T}, rep)
    write_run_record([out], argv, {"kind": args.kind}, None, args._started)
    return 0


def cmd_reproduce(args, cfg, argv):
    master = int(resolve(args, cfg, "seed", 7))
    outdir = Path(resolve(args, cfg, "output", "."))
    base = os.environ.get("AQT_OUT_DIR")
    if base and not outdir.is_absolute():
        outdir = Path(base) / outdir
    outdir.mkdir(parents=True, exist_ok=True)
    desk = bool(args.desk)
    name = args.figure
    outputs = []
    if name == "fig4":
        sizes = [8, 16, 24, 32, 48, 64] if desk else [8, 16, 24, 32, 48, 64, 96]
        samples = 20 if desk else 50
        rows = scan.scaling_scan(sizes, samples, master)
        rows.sort(key=lambda r: (r["n"], r["seed"]))
        csv_path = outdir / "scaling.csv"
        write_csv(csv_path, rows, ["family", "n", "seed", "s", "gap", "chi", "variance"])
        fit = analysis.fit_power_law([(r["n"], r["gap"]) for r in rows])
        fit_path = outdir / "fit.json"
        write_json(fit_path, {"recipe": "fig4", "sizes": sizes, "samples": samples},
                   {"exponent": fit.exponent, "coefficient": fit.coefficient,
                    "stderr_exponent": fit.stderr_exponent,
                    "r_squared": fit.r_squared})
        outputs = [csv_path, fit_path]
    elif name == "fig5":
        sizes = [2, 3, 4]
        samples = 4 if desk else 10
        rows = scan.lattice_scan(sizes, samples, master)
        rows.sort(key=lambda r: (r["L"], r["seed"]))
        csv_path = outdir / "scaling2d.csv"
        write_csv(csv_path, rows,
                  ["L", "n", "seed", "s", "gap", "e0", "ground_degeneracy", "twisted"])
        twisted = [(r["n"], r["gap"]) for r in rows if r["twisted"]]
        fit = analysis.fit_power_law(twisted)
        untw = {r["L"]: r["gap"] for r in rows if not r["twisted"]}
        fit_path = outdir / "fit2d.json"
        write_json(fit_path, {"recipe": "fig5", "sizes": sizes, "samples": samples},
                   {"exponent": fit.exponent, "coefficient": fit.coefficient,
                    "stderr_exponent": fit.stderr_exponent,
                    "untwisted_gaps_even_odd": untw})
        outputs = [csv_path, fit_path]
    elif name == "fig6":
        rows = scan.wire_mode_rows(80, np.linspace(0, 1, 101))
        csv_path = outdir / "wire_modes.csv"
        write_csv(csv_path, rows, ["n", "s", "k", "omega"])
        thermal = {
            "kbt": 0.2,
            "fraction_l20": analysis.thermal_fraction(20, 0.2),
            "fraction_l60": analysis.thermal_fraction(60, 0.2),
            "fraction_limit": analysis.thermal_fraction_limit(0.2),
        }
        th_path = outdir / "thermal.json"
        write_json(th_path, {"recipe": "fig6"}, thermal)
        outputs = [csv_path, th_path]
    elif name == "fig8":
        seeds = [scan.derive_seed(master, "fig8", k) for k in range(3 if desk else 10)]
        rows = scan.wire_mode_rows(20, np.linspace(0, 1, 51), 0.1, seeds)
        rows += scan.wire_mode_rows(20, np.linspace(0, 1, 51))
        csv_path = outdir / "perturbed_modes.csv"
        write_csv(csv_path, rows, ["n", "s", "k", "omega", "seed"])
        outputs = [csv_path]
    else:
        raise DomainError(f"unknown reproduction recipe {name!r}")
    write_run_record(outputs, argv, {"recipe": name, "desk": desk}, master,
                     args._started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aqt",
        description="Adiabatic quantum transistor lab: compile circuits to "
                    "twisted cluster graphs, compute gaps and schedules, and "
                    "verify gadgets.")
    ap.add_argument("--config", help="key = value config file (flags win)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="circuit text -> graph JSON")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("gap-scan", help="gap curve of a graph's interpolation")
    p.add_argument("--graph", required=True)
    p.add_argument("--s-grid", dest="s_grid")
    p.add_argument("--refine", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_gap_scan)

    p = sub.add_parser("wire-spectrum", help="free-fermion wire modes")
    p.add_argument("--n", type=int)
    p.add_argument("--s-grid", dest="s_grid")
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--seeds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_wire_spectrum)

    p = sub.add_parser("scaling", help="random twisted-chain gap scaling (MPS)")
    p.add_argument("--family")
    p.add_argument("--sizes")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--chi", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_scaling)

    p = sub.add_parser("fit", help="power-law fit of a CSV column pair")
    p.add_argument("--input", required=True)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("schedule", help="adiabatic schedule for a chain")
    p.add_argument("--l", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_schedule)

    p = sub.add_parser("correlations", help="nearest-neighbor XX correlations")
    p.add_argument("--s-grid", dest="s_grid")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_correlations)

    p = sub.add_parser("evolve", help="adiabatic sweep checked against a circuit")
    p.add_argument("--graph", required=True)
    p.add_argument("--T", type=float)
    p.add_argument("--check", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("gadget", help="amplifier / router verification")
    p.add_argument("kind", choices=["amplifier", "router"])
    p.add_argument("--levels", type=int)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--final")
    p.add_argument("--T", type=float)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_gadget)

    p = sub.add_parser("reproduce", help="named desk-scale reproduction recipes")
    p.add_argument("figure", choices=["fig4", "fig5", "fig6", "fig8"])
    p.add_argument("--desk", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    args._started = time.time()
    try:
        cfg = load_config(args.config)
        return args.fn(args, cfg, argv)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
