"""Command-line interface.

Subcommands:
    run       execute an experiment spec (file and/or flag overrides) and
              write rows to CSV/JSON
    trace     single-run convergence trace (iteration, wsr, gap, step)
    codebook  dump a codebook as CSV (index, theta, phi, x, y, z)
    topology  dump one seeded topology as JSON

Exit codes: 0 success, 2 invalid spec/arguments, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import discrete, harness
from .scene import generate_topology

INVALID_SPEC = 2
RUNTIME_FAILURE = 1


def _load_spec(args) -> harness.ExperimentSpec:
    mapping = {}
    if args.spec:
        try:
            mapping = harness.parse_spec_file(args.spec)
        except OSError as exc:
            raise ValueError(f"cannot read spec file: {exc}") from exc
    if getattr(args, "scheme", None):
        mapping["scheme"] = args.scheme
    if getattr(args, "sweep", None):
        mapping["sweep"] = args.sweep
    if getattr(args, "values", None):
        mapping["values"] = args.values
    if getattr(args, "trials", None) is not None:
        mapping["trials"] = str(args.trials)
    if getattr(args, "seed", None) is not None:
        mapping["seed"] = str(args.seed)
    if getattr(args, "timing", False):
        mapping["timing"] = "true"
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    spec = harness.spec_from_mapping(mapping)
    spec.validate()
    return spec


def _cmd_run(args) -> int:
    spec = _load_spec(args)
    rows, summary = harness.run_experiment(spec)
    harness.emit(rows, args.format, args.out)
    for (scheme, value), (mean, std) in summary.items():
        print(f"{scheme} @ {value:g}: mean wsr {mean:.6f} bps/Hz (std {std:.6f})")
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_trace(args) -> int:
    spec = _load_spec(args)
    if len(spec.schemes) != 1:
        raise ValueError("trace runs exactly one scheme")
    rows = harness.convergence_trace(spec.schemes[0], spec.base, spec.params)
    lines = ["iteration,wsr,gap,step"]
    for iteration, wsr, gap, step in rows:
        lines.append(f"{iteration},{wsr:.9f},{gap:.9f},{step:.9f}")
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    print(f"wrote {len(rows)} trace rows to {args.out}")
    return 0


def _cmd_codebook(args) -> int:
    if args.kind == "fibonacci":
        book = discrete.fibonacci_codebook(args.n_dir, args.theta_max)
    else:
        book = discrete.uniform_grid_codebook(args.n_theta, args.n_phi, args.theta_max)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(discrete.codebook_csv(book))
    print(f"wrote {len(book)} codewords to {args.out}")
    return 0


def _cmd_topology(args) -> int:
    spec = _load_spec(args)
    topology = generate_topology(spec.base)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(topology.to_json() + "\n")
    print(f"wrote topology (seed {spec.base.seed}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rabeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec_flags(p):
        p.add_argument("--spec", help="flat key = value spec file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any spec key (repeatable)")
        p.add_argument("--seed", type=int, help="base RNG seed")

    run = sub.add_parser("run", help="run an experiment grid")
    add_spec_flags(run)
    run.add_argument("--scheme", help="comma-separated scheme names")
    run.add_argument("--sweep", help="swept variable name")
    run.add_argument("--values", help="comma-separated sweep values")
    run.add_argument("--trials", type=int)
    run.add_argument("--timing", action="store_true", help="record wall-clock seconds")
    run.add_argument("--out", required=True)
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    trace = sub.add_parser("trace", help="single-run convergence trace")
    add_spec_flags(trace)
    trace.add_argument("--scheme", default="wmmse_ra")
    trace.add_argument("--out", required=True)

    codebook = sub.add_parser("codebook", help="emit a codebook CSV")
    codebook.add_argument("--kind", choices=("fibonacci", "uniform-grid"),
                          default="fibonacci")
    codebook.add_argument("--n-dir", dest="n_dir", type=int, default=25)
    codebook.add_argument("--n-theta", dest="n_theta", type=int, default=5)
    codebook.add_argument("--n-phi", dest="n_phi", type=int, default=5)
    codebook.add_argument("--theta-max", dest="theta_max", type=float,
                          default=1.0471975511965976)
    codebook.add_argument("--out", required=True)

    topology = sub.add_parser("topology", help="emit a topology JSON")
    add_spec_flags(topology)
    topology.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "trace": _cmd_trace,
        "codebook": _cmd_codebook,
        "topology": _cmd_topology,
    }
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return INVALID_SPEC
    except Exception as exc:  # CLI boundary: surface anything else as a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return RUNTIME_FAILURE


if __name__ == "__main__":
    sys.exit(main())
