"""``gapower`` command line: run | validate | list-scenarios | emit-waveforms | dump."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import scenario as scenario_mod
from .errors import GapowerError, NumericFailure, ScenarioError
from .report import FORMATS, THEORIES, analyze, emit_waveforms, render_text, write_report

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

OUT_ENV = "GAPOWER_OUT_DIR"


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "gapower-out")


def _run_one(ref: str, theory: str, out: str, fmt: str, sampled: int | None, waveforms: int | None, quiet: bool):
    """Analyze one scenario; returns ``(exit_code, stdout_text, stderr_text)``."""
    try:
        sc = scenario_mod.load(ref)
        report = analyze(sc, theory, sampled)
        write_report(report, out, fmt)
        if waveforms:
            emit_waveforms(report, out, waveforms)
    except ScenarioError as exc:
        return EXIT_VALIDATION, "", str(exc)
    except NumericFailure as exc:
        return EXIT_NUMERIC, "", f"{ref}: numeric failure: {exc}"
    except GapowerError as exc:
        return EXIT_VALIDATION, "", f"{ref}: {exc}"
    return EXIT_OK, "" if quiet else render_text(report), ""


def cmd_run(args) -> int:
    jobs = max(1, args.jobs)
    calls = [(ref, args.theory, args.out, args.format, args.sampled, args.waveforms, args.quiet) for ref in args.scenarios]
    if jobs > 1 and len(calls) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, *zip(*calls)))
    else:
        results = [_run_one(*c) for c in calls]
    code = EXIT_OK
    for status, out, err in results:
        if out:
            print(out)
        if err:
            print(err, file=sys.stderr)
        code = max(code, status)
    return code


def cmd_validate(args) -> int:
    code = EXIT_OK
    for ref in args.scenarios:
        issues = scenario_mod.validate(ref)
        if issues:
            code = EXIT_VALIDATION
            for issue in issues:
                print(issue, file=sys.stderr)
        else:
            print(f"{ref}: ok")
    return code


def cmd_list(args) -> int:
    for name in scenario_mod.builtin_names():
        sc = scenario_mod.load(name)
        print(f"{name}\t{sc.description}" if args.verbose else name)
    return EXIT_OK


def cmd_emit(args) -> int:
    try:
        sc = scenario_mod.load(args.scenario)
        report = analyze(sc, args.theory, args.sampled)
        paths = emit_waveforms(report, args.out, args.samples_per_period)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GapowerError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_dump(args) -> int:
    try:
        sc = scenario_mod.load(args.scenario)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(sc.dumps())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapower", description="Geometric algebra power theory analyses")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="analyze scenarios and write report tables")
    run.add_argument("scenarios", nargs="+", help="scenario file or built-in name")
    run.add_argument("--theory", choices=THEORIES, default="gapot")
    run.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./gapower-out)")
    run.add_argument("--format", choices=FORMATS, default="csv")
    run.add_argument("--sampled", type=int, default=None, metavar="N", help="use the sampled pipeline, N samples/period")
    run.add_argument("--waveforms", type=int, default=None, metavar="N", help="also emit waveform CSVs, N samples/period")
    run.add_argument("--jobs", type=int, default=1, help="scenarios analyzed in parallel")
    run.add_argument("--quiet", action="store_true")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check scenario files, reporting every problem")
    val.add_argument("scenarios", nargs="+")
    val.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.add_argument("-v", "--verbose", action="store_true")
    ls.set_defaults(func=cmd_list)

    emit = sub.add_parser("emit-waveforms", help="write one CSV per current component")
    emit.add_argument("scenario")
    emit.add_argument("--theory", choices=THEORIES, default="gapot")
    emit.add_argument("--out", default=None)
    emit.add_argument("--samples-per-period", type=int, default=1024)
    emit.add_argument("--sampled", type=int, default=None, metavar="N")
    emit.set_defaults(func=cmd_emit)

    dump = sub.add_parser("dump", help="print a scenario in canonical form (use as a template)")
    dump.add_argument("scenario")
    dump.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "out", "unset") is None:
        args.out = _default_out()
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
