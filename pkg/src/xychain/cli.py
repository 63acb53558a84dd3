"""Command-line interface: ``xychain <subcommand> [flags]``.

Every subcommand writes one table (CSV) or one document (JSON) to
``--out`` or stdout.  Floats are printed with 12 significant digits so
repeated runs produce byte-identical files.

Exit status: 0 on success, 1 on usage or numeric errors, 2 when
``validate`` finds a mismatch beyond ``--tol``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import exact_oracle, free_fermion, phase_diagram, vqe
from .model import ModelParams, build_ising_terms

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2

SIG_DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(value: float) -> str:
    return format(float(value), f".{SIG_DIGITS}g")


def _round(obj):
    """Round every float in a JSON-ready structure to 12 significant digits."""
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(document) -> str:
    return json.dumps(_round(document), indent=2, sort_keys=True) + "\n"


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _params(args) -> ModelParams:
    return ModelParams(args.n, args.j, args.gamma, args.h)


# subcommands -------------------------------------------------------------


def cmd_solve(args) -> int:
    gs = free_fermion.ground_state(_params(args), rtol=args.tol)
    record = {
        "n": args.n, "j": args.j, "gamma": args.gamma, "h": args.h,
        "energy": gs.energy,
        "sector": gs.sector,
        "parity": gs.parity,
        "degeneracy": gs.degeneracy,
        "signature": phase_diagram.format_signature(gs.signature()),
        "sector_gap": gs.sector_gap,
    }
    if args.format == "json":
        _emit(args, _json_text(record))
    else:
        _emit(args, _csv_text(list(record), [list(record.values())]))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec = free_fermion.full_spectrum(_params(args))
    order = np.argsort(spec.energies, kind="stable")
    rows = []
    for idx, i in enumerate(order):
        sector = spec.sectors[i]
        grid = free_fermion.momentum_grid(args.n, sector)
        occupied = [k for k in grid.mode_indices if (int(spec.codes[i]) >> k) & 1]
        rows.append((idx, float(spec.energies[i]), sector, " ".join(map(str, occupied))))
    if args.format == "json":
        doc = [dict(index=r[0], energy=r[1], sector=r[2], occupied=r[3]) for r in rows]
        _emit(args, _json_text(doc))
    else:
        _emit(args, _csv_text(["index", "energy", "sector", "occupied"], rows))
    return EXIT_OK


def cmd_validate(args) -> int:
    params = _params(args)
    ff = np.sort(free_fermion.full_spectrum(params).energies)
    blocks = exact_oracle.sector_eigenvalues(exact_oracle.model_terms(params), args.n)
    dense = np.sort(np.concatenate([blocks[1], blocks[-1]]))
    scale = max(1.0, float(np.max(np.abs(dense))))
    diff = float(np.max(np.abs(ff - dense)))
    passed = diff <= args.tol * scale
    record = {
        "n": args.n, "j": args.j, "gamma": args.gamma, "h": args.h,
        "levels": int(ff.size), "max_abs_diff": diff, "tolerance": args.tol * scale, "passed": passed,
    }
    if args.format == "json":
        _emit(args, _json_text(record))
    else:
        _emit(args, _csv_text(list(record), [list(record.values())]))
    return EXIT_OK if passed else EXIT_MISMATCH


def _grid(args) -> phase_diagram.SweepGrid:
    return phase_diagram.SweepGrid(
        args.h_min, args.h_max, args.h_steps, args.gamma_min, args.gamma_max, args.gamma_steps
    )


def cmd_sweep(args) -> int:
    cells = phase_diagram.sweep(args.n, args.j, _grid(args), rtol=args.tol)
    header = ["h", "gamma", "sector", "parity", "degeneracy", "signature", "energy"]
    rows = [
        (c.h, c.gamma, c.sector, c.parity, c.degeneracy, phase_diagram.format_signature(c.signature), c.energy)
        for c in cells
    ]
    if args.format == "json":
        _emit(args, _json_text([dict(zip(header, r)) for r in rows]))
    else:
        _emit(args, _csv_text(header, rows))
    return EXIT_OK


def cmd_crossings(args) -> int:
    curves = phase_diagram.trace_crossings(args.n, args.j, _grid(args), tol=args.tol)
    if args.format == "json":
        doc = [
            {
                "curve_id": c.curve_id,
                "points": [
                    {"h": p.h, "gamma": p.gamma, "kind": p.kind, "residual": p.residual, "flagged": p.flagged}
                    for p in c.points
                ],
            }
            for c in curves
        ]
        _emit(args, _json_text(doc))
    else:
        rows = [(c.curve_id, p.h, p.gamma) for c in curves for p in c.points]
        _emit(args, _csv_text(["curve_id", "h", "gamma"], rows))
    return EXIT_OK


def cmd_taylor(args) -> int:
    fit = phase_diagram.taylor_fit(
        args.n, args.j, args.target, half_width=args.half_width, nodes=args.nodes, degree=args.degree
    )
    if args.format == "json":
        doc = {
            "target": fit.target, "n": fit.N, "j": fit.J,
            "coefficients": fit.coefficients,
            "leading": {"name": fit.leading[0], "value": fit.leading[1]},
            "residual": fit.residual_norm,
            "condition_number": fit.condition_number,
            "window": {"center": [0.0, 1.0], "half_width": fit.half_width, "nodes": fit.nodes, "degree": fit.degree},
        }
        _emit(args, _json_text(doc))
    else:
        _emit(args, _csv_text(["name", "value"], sorted(fit.coefficients.items())))
    return EXIT_OK


def cmd_jump(args) -> int:
    params = ModelParams(args.n, args.j, args.gamma, 0.0)
    result = phase_diagram.slope_jump(params, deltas=args.deltas)
    record = {
        "n": args.n, "j": args.j, "gamma": args.gamma,
        "left": result.left, "right": result.right, "jump": result.jump,
        "order": result.order, "warning": result.warning,
    }
    if args.format == "json":
        _emit(args, _json_text(record))
    else:
        _emit(args, _csv_text(list(record), [list(record.values())]))
    return EXIT_OK


def _spsa_config(args, seed: int) -> vqe.SPSAConfig:
    return vqe.SPSAConfig(
        iterations=args.iterations, c=args.c, target_magnitude=args.target_magnitude,
        seed=seed, shots=args.shots,
    )


def cmd_vqe(args) -> int:
    params = ModelParams(args.n, args.j, 1.0, args.h)
    spec = vqe.AnsatzSpec(args.n, layers=args.layers)
    run = vqe.spsa_minimize(spec, build_ising_terms(params), _spsa_config(args, args.seed))
    summary = {
        "n": args.n, "j": args.j, "h": args.h, "seed": args.seed,
        "best_energy": run.best_energy,
        "exact_energy": exact_oracle.ground_energy(params, "ising"),
        "iterations": args.iterations,
    }
    if args.summary:
        Path(args.summary).write_text(_json_text(summary))
    if args.format == "json":
        _emit(args, _json_text(summary))
    else:
        _emit(args, _csv_text(["iteration", "energy"], ((k, float(e)) for k, e in enumerate(run.trace))))
    return EXIT_OK


def cmd_derivative_diff(args) -> int:
    spec = vqe.AnsatzSpec(args.n, layers=args.layers)
    seeds = list(range(args.seed, args.seed + args.seeds))
    values = [
        vqe.derivative_difference(args.n, args.j, spec, _spsa_config(args, s), delta=args.delta) for s in seeds
    ]
    exact = vqe.exact_derivative_difference(args.n, args.j, args.delta)
    if args.format == "json":
        doc = {
            "n": args.n, "j": args.j, "delta": args.delta, "seeds": seeds, "values": values,
            "median": statistics.median(values), "exact": exact,
        }
        _emit(args, _json_text(doc))
    else:
        _emit(args, _csv_text(["seed", "derivative_difference"], zip(seeds, values)))
    return EXIT_OK


# parser ------------------------------------------------------------------

COMMANDS = {
    "solve": (cmd_solve, "ground energy, sector and degeneracy at one point", 1e-9),
    "spectrum": (cmd_spectrum, "full free-fermion spectrum", 1e-9),
    "validate": (cmd_validate, "compare the free-fermion spectrum with dense diagonalization", 1e-9),
    "sweep": (cmd_sweep, "ground-state cells on an (h, gamma) grid", 1e-9),
    "crossings": (cmd_crossings, "trace ground-state crossing curves on a grid", 1e-10),
    "taylor": (cmd_taylor, "polynomial fit around (h, gamma) = (0, 1)", 1e-9),
    "jump": (cmd_jump, "one-sided field derivatives of the ground energy at h = 0", 1e-9),
    "vqe": (cmd_vqe, "SPSA-optimized VQE on the Ising chain J sum(XX + hZ)", 1e-9),
    "derivative-diff": (cmd_derivative_diff, "VQE derivative difference at h = 0 over several seeds", 1e-9),
}


def _model_flags(p, need_gamma=True, need_h=True):
    p.add_argument("--n", type=int, required=True, help="number of sites")
    p.add_argument("--j", type=float, required=True, help="coupling J")
    if need_gamma:
        p.add_argument("--gamma", type=float, required=True, help="anisotropy gamma")
    if need_h:
        p.add_argument("--h", type=float, required=True, help="transverse field h")


def _grid_flags(p):
    p.add_argument("--h-min", type=float, default=0.0)
    p.add_argument("--h-max", type=float, default=2.0)
    p.add_argument("--h-steps", type=int, default=101)
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=2.0)
    p.add_argument("--gamma-steps", type=int, default=101)


def _vqe_flags(p):
    p.add_argument("--layers", type=int, default=2, help="entangling blocks in the ansatz")
    p.add_argument("--iterations", type=int, default=2000, help="SPSA iterations")
    p.add_argument("--shots", type=int, default=None, help="sample energies with this many shots per term")
    p.add_argument("--c", type=float, default=0.1, help="SPSA perturbation size")
    p.add_argument("--target-magnitude", type=float, default=0.1, help="calibrated first-step size")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xychain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (func, help_text, tol) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0, help="random seed (first seed for multi-seed runs)")
        p.add_argument("--tol", type=float, default=tol, help=f"numeric tolerance (default {tol:g})")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--config", default=None, help="key=value file; command-line flags take precedence")
        if name in ("solve", "spectrum", "validate"):
            _model_flags(p)
        elif name in ("sweep", "crossings"):
            _model_flags(p, need_gamma=False, need_h=False)
            _grid_flags(p)
        elif name == "taylor":
            _model_flags(p, need_gamma=False, need_h=False)
            p.add_argument("--target", choices=("sector_difference", "gamma1_line", "region_energies"), required=True)
            p.add_argument("--half-width", type=float, default=0.05)
            p.add_argument("--nodes", type=int, default=11)
            p.add_argument("--degree", type=int, default=None)
        elif name == "jump":
            _model_flags(p, need_h=False)
            p.add_argument(
                "--deltas", type=_floats, default=list(phase_diagram.DEFAULT_DELTAS),
                help="decreasing step ladder, comma separated",
            )
        elif name == "vqe":
            _model_flags(p, need_gamma=False)
            _vqe_flags(p)
            p.add_argument("--summary", default=None, help="also write the JSON summary to this file")
        elif name == "derivative-diff":
            _model_flags(p, need_gamma=False, need_h=False)
            _vqe_flags(p)
            p.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
            p.add_argument("--delta", type=float, default=0.3)
    return parser


def read_config(path: str) -> Dict[str, str]:
    """Parse a plain ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: List[str]) -> List[str]:
    """Turn config-file entries into flags placed before the user's own flags."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not argv:
        return argv
    try:
        entries = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    command, rest = argv[0], argv[1:]
    extra = []
    for key, value in entries.items():
        extra += [f"--{key.replace('_', '-')}", value]
    return [command] + extra + rest


def _validate(args) -> None:
    for name in ("n", "h_steps", "gamma_steps", "nodes", "iterations", "layers", "seeds"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    if getattr(args, "shots", None) is not None and args.shots < 1:
        raise UsageError("--shots must be positive")
    if args.tol <= 0:
        raise UsageError("--tol must be positive")


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(parser, argv))
        _validate(args)
        if hasattr(args, "gamma") and hasattr(args, "h"):
            _params(args)
    except UsageError as exc:
        text = str(exc)
        print(text if ": error: " in text else f"xychain: error: {text}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"xychain: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValueError, vqe.SPSADivergenceError) as exc:
        module = type(exc).__module__ if isinstance(exc, vqe.SPSADivergenceError) else _origin(exc)
        print(f"xychain: error: {module}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _origin(exc: BaseException) -> str:
    """Module of the innermost frame that raised ``exc``."""
    tb = exc.__traceback__
    name = "xychain"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", name)
        tb = tb.tb_next
    return name


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
