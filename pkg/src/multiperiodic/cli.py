"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 a requested tolerance was not met.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigurationError, InvalidArgumentError, MultiperiodicError, SolverError, StageError
from .experiments import (RunConfig, reference_config, rows_to_csv, rows_to_json, run_convergence, run_example,
                          run_oracle_check, run_pipeline)
from .greens import HalfSpaceSource, green_half_space
from .mesh import write_mesh
from .solver import relative_trace_error, trapezoid_weights

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TOLERANCE = 0, 2, 3, 4


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    return data


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _format_rows(rows, meta, fmt):
    return rows_to_json(rows, meta) if fmt == "json" else rows_to_csv(rows, meta)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiperiodic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def output_opts(p):
        p.add_argument("--output", "-o", help="write results here instead of stdout")
        p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")

    p = sub.add_parser("example", help="run one example (1-8) at one (N, h)")
    p.add_argument("id", type=int)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--config", help="JSON file of RunConfig overrides")
    p.add_argument("--max-error", type=float, help="exit with code 4 if the error exceeds this")
    output_opts(p)

    p = sub.add_parser("converge", help="sweep N and h for one example and fit rates")
    p.add_argument("--example", type=int, required=True)
    p.add_argument("--N-list", type=_ints, required=True, help="e.g. '10,20,40,80'")
    p.add_argument("--h-list", type=_floats, required=True, help="e.g. '0.64,0.32,0.16'")
    p.add_argument("--config", help="JSON file of RunConfig overrides")
    p.add_argument("--max-rate-N", type=float, help="exit 4 unless rate_N is at most this")
    p.add_argument("--min-rate-h", type=float, help="exit 4 unless rate_h is at least this")
    output_opts(p)

    p = sub.add_parser("oracle", help="compare with a brute-force supercell solve")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--example", type=int, default=1)
    p.add_argument("--group", help="override the example's index group")
    p.add_argument("--basis", choices=("bloch", "nodal"), default="bloch")
    p.add_argument("--tolerance", type=float, help="exit 4 if the difference exceeds this")

    p = sub.add_parser("solve", help="run a configuration given as a JSON file")
    p.add_argument("--config", required=True)
    p.add_argument("--dump-mesh", help="write the cell mesh listing here")
    output_opts(p)
    return parser


def _cmd_example(args):
    overrides = _load_config(args.config)
    fmt = "json" if args.json else overrides.pop("output_format", "csv")
    overrides.pop("output", None)
    reference = None
    meta = {}
    cfg = RunConfig.for_example(args.id, args.N, args.h, **overrides)
    if cfg.source_kind == "incident":
        ref_cfg = reference_config(args.id, [args.N], [args.h], **overrides)
        reference = run_pipeline(ref_cfg)
        meta.update(reference_N=ref_cfg.N, reference_h=ref_cfg.h)
    row = run_example(args.id, args.N, args.h, reference, **overrides)
    meta["config"] = cfg.echo()
    meta["trace_quadrature"] = "trapezoid on top nodes"
    _emit(_format_rows([row], meta, fmt), args.output)
    if args.max_error is not None and not row.error <= args.max_error:
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_converge(args):
    overrides = _load_config(args.config)
    overrides.pop("output", None)
    fmt = "json" if args.json else overrides.pop("output_format", "csv")
    table = run_convergence(args.example, args.N_list, args.h_list, **overrides)
    meta = dict(table.metadata, example=args.example, rate_N=table.rate_N, rate_h=table.rate_h)
    _emit(_format_rows(table.rows, meta, fmt), args.output)
    if args.max_rate_N is not None and (table.rate_N is None or table.rate_N > args.max_rate_N):
        return EXIT_TOLERANCE
    if args.min_rate_h is not None and (table.rate_h is None or table.rate_h < args.min_rate_h):
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_oracle(args):
    rec = run_oracle_check(args.N, args.h, args.example, args.group, args.basis)
    print(f"N={rec.N} h={rec.h} example={rec.example} basis={args.basis}")
    print(f"relative difference: {rec.difference:.3e}")
    print(f"assembly operations: block {rec.bloch_operations} (expected {rec.expected_bloch}), "
          f"supercell {rec.supercell_operations} (expected {rec.expected_supercell})")
    if args.tolerance is not None and not rec.difference <= args.tolerance:
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_solve(args):
    data = _load_config(args.config)
    cfg = RunConfig.from_mapping(data)
    res = run_pipeline(cfg)
    if args.dump_mesh:
        write_mesh(res.mesh, args.dump_mesh)
    meta = {"config": cfg.echo(), "method": res.report.method, "iterations": res.report.iterations,
            "residual": res.report.residual}
    if cfg.source_kind == "volume":
        src = HalfSpaceSource(cfg.source_point, cfg.k, "volume", cfg.h0, cfg.H)
        exact = green_half_space(res.trace_x1, cfg.H + 0 * res.trace_x1, src)
        meta["error_vs_green"] = relative_trace_error(res.trace, exact, trapezoid_weights(res.mesh))
    lines = [f"# {k}: {json.dumps(v)}" for k, v in meta.items()]
    if args.json or cfg.output_format == "json":
        text = json.dumps({"metadata": meta, "x1": res.trace_x1.tolist(),
                           "real": res.trace.real.tolist(), "imag": res.trace.imag.tolist()}, indent=2)
    else:
        lines.append("x1,real,imag")
        lines += [f"{x!r},{v.real!r},{v.imag!r}" for x, v in zip(res.trace_x1.tolist(), res.trace.tolist())]
        text = "\n".join(lines) + "\n"
    _emit(text, args.output or cfg.output)
    return EXIT_OK


COMMANDS = {"example": _cmd_example, "converge": _cmd_converge, "oracle": _cmd_oracle, "solve": _cmd_solve}


def _is_solver_failure(exc):
    if isinstance(exc, StageError):
        return exc.stage == "solve" or isinstance(exc.cause, SolverError)
    return isinstance(exc, SolverError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, InvalidArgumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MultiperiodicError as exc:
        if _is_solver_failure(exc):
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
