"""Command-line interface: ``topomap <codes|map|charges|decode|threshold> ...``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from topomap import clifford, codes
from topomap.anyons import charge_table, name_subsystem_fermions
from topomap.decoder import NoiseChannel, Pipeline, Syndrome, sample_errors, trial_labels
from topomap.pauli import PauliOperator, to_text
from topomap.threshold import THRESHOLD_CODES, emit_csv, estimate_threshold, parse_grid, parse_sizes, scan

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _code(name: str, L: int) -> codes.CodeDef:
    try:
        return codes.get_code(name, L)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _copies(target_name: str) -> int:
    if target_name == "ktc":
        return 1
    if target_name.startswith("ktc-stack:"):
        return int(target_name.split(":", 1)[1])
    raise UsageError(f"map target {target_name!r} is not a toric-code stack")


def _target_for(source: codes.CodeDef, name: str, L: int) -> tuple[codes.CodeDef, str | None]:
    target = _code(name, L)
    if target.sites * 2 == source.sites:
        return codes.block_checkerboard(target), "checkerboard"
    return target, None


# ---------------------------------------------------------------------------
# subcommands


def cmd_codes(args) -> int:
    if args.action == "list":
        for name in codes.CODE_NAMES:
            print(name)
        return EXIT_OK
    if not args.code:
        raise UsageError("codes export needs --code")
    code = _code(args.code, args.L)
    print(f"# code: {code.name}")
    print(f"# L: {code.L}")
    print(f"# sites: {code.sites}")
    print("# stabilizers")
    for op in code.stabilizers():
        print(to_text(op))
    if code.gauge_templates:
        print("# gauges")
        for op in code.gauges():
            print(to_text(op))
    return EXIT_OK


def cmd_map(args) -> int:
    if args.action == "find":
        if not (args.source and args.target):
            raise UsageError("map find needs --source and --target")
        if args.source in ("tscc48", "tscc48-sz") and args.target == "ktc-stack:2":
            cmap = clifford.tscc_to_ktc_map()
        else:
            source = _code(args.source, 3)
            target, blocking = _target_for(source, args.target, 3)
            try:
                cmap = clifford.find_map(source, target, args.radius, blocking=blocking)
            except clifford.MapNotFound as exc:
                print(f"no map: {exc}", file=sys.stderr)
                return EXIT_FAIL
            cmap = replace(cmap, target_name=args.target)
        text = clifford.to_text(cmap)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        print(f"found map with v = {cmap.v}", file=sys.stderr)
        return EXIT_OK
    if not args.map:
        raise UsageError("map verify needs --map")
    cmap = clifford.from_text(Path(args.map).read_text())
    source = _code(cmap.source_name, args.L)
    target = _code(cmap.target_name, args.L)
    report = clifford.verify_code_map(cmap, source, target, args.L)
    print(f"symplectic: {'ok' if report.symplectic_ok else 'FAIL'}")
    print(f"group map: {'ok' if report.group_map_ok else 'FAIL'}")
    print(f"v: {report.v}")
    for failure in report.failures:
        print(f"failure: {failure}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_charges(args) -> int:
    if args.L < 4:
        raise UsageError("charge tables need --L 4 or larger")
    code_name = "tscc48-sz" if args.code == "tscc48" else args.code
    code = _code(code_name, args.L)
    if args.map:
        cmap = clifford.from_text(Path(args.map).read_text())
        table = charge_table(code, args.L, cmap, _copies(cmap.target_name))
    else:
        table = charge_table(args.code, args.L)
    if table.proper is not None:
        name_subsystem_fermions(table)
    for line in table.lines():
        print(line)
    return EXIT_OK


def cmd_decode(args) -> int:
    if args.code not in THRESHOLD_CODES:
        raise UsageError(f"decode supports {', '.join(THRESHOLD_CODES)}")
    channel = NoiseChannel(args.channel, args.p)
    pipe = Pipeline(args.code, args.L)
    pipe.configure(channel)
    src = pipe.mc.source
    errors = sample_errors(channel, pipe.n, args.seed, 0, args.trials, trial_labels(args.code, args.L, channel))
    failures = 0
    for t, error in enumerate(errors):
        syn, corr, outcome = pipe.decode_one(error)
        failures += outcome.verdict != "success"
        print(f"trial {t}")
        print(f"error: {to_text(PauliOperator.from_vector(args.L, src.sites, error))}")
        violations = sorted(Syndrome.from_bits(syn, args.L).violations)
        print("syndrome: " + " ".join(f"{g},{x},{y}" for g, x, y in violations))
        print(f"correction: {to_text(outcome.correction)}")
        print(f"verdict: {outcome.verdict}")
        print("residual class: " + " ".join(str(c) for c in outcome.residual_class))
    print(f"# failures {failures}/{args.trials}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    if args.code not in THRESHOLD_CODES:
        raise UsageError(f"threshold supports {', '.join(THRESHOLD_CODES)}")
    try:
        grid = parse_grid(args.p)
        sizes = parse_sizes(args.L)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        with open(args.out, "w", newline="") as stream:
            points = scan(args.code, args.channel, grid, sizes, args.trials, args.seed, out=stream)
    else:
        points = scan(args.code, args.channel, grid, sizes, args.trials, args.seed)
    estimate = estimate_threshold(points) if len(sizes) >= 2 and len(grid) >= 3 else None
    text = emit_csv(points, estimate)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topomap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codes", help="list or export codes")
    p.add_argument("action", choices=["list", "export"])
    p.add_argument("--code")
    p.add_argument("--L", type=int, default=4)
    p.set_defaults(func=cmd_codes)

    p = sub.add_parser("map", help="find or verify local Clifford maps")
    p.add_argument("action", choices=["find", "verify"])
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--map")
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("charges", help="print a code's charge table")
    p.add_argument("--code", required=True)
    p.add_argument("--L", type=int, default=6)
    p.add_argument("--map")
    p.set_defaults(func=cmd_charges)

    p = sub.add_parser("decode", help="sample errors and decode them")
    p.add_argument("--code", required=True)
    p.add_argument("--channel", choices=["bit_flip", "depolarizing"], required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("threshold", help="failure-rate scan and threshold estimate")
    p.add_argument("--code", required=True)
    p.add_argument("--channel", choices=["bit_flip", "depolarizing"], required=True)
    p.add_argument("--p", required=True, help="start:stop:step or comma list")
    p.add_argument("--L", required=True, help="comma list of sizes")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
