"""Command-line front end: ``wmrecon run | analyze | corpus``.

Exit codes: 0 terminated, 2 timed out, 3 script error or aborted run,
1 unreadable input / bad configuration / corrupt trace, 4 golden mismatch.
"""

import argparse
import difflib
import io
import sys
from dataclasses import replace
from pathlib import Path

from wmrecon import primitives
from wmrecon.config import RunConfig, layout_with, load_config
from wmrecon.memory_model import ConfigurationError
from wmrecon.recon import AnnotationError, analyze, analyze_events, annotate
from wmrecon.report import write_report
from wmrecon.script_vm import ScriptSyntaxError, load
from wmrecon.script_vm.interpreter import TERMINATED, TIMED_OUT
from wmrecon.trace import TraceError, replay

EXIT_OK, EXIT_INPUT, EXIT_TIMEOUT, EXIT_SCRIPT, EXIT_GOLDEN = 0, 1, 2, 3, 4

CORPUS_DIR = Path(__file__).resolve().parent / "corpus"
CORPUS_CASES = ("spray", "uaf", "pivot")
LABEL_WIDTH = 60


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="JSON configuration file")
    p.add_argument("--layout", metavar="KEY=VAL", nargs="+", action="append", default=[],
                   help="address-space override, e.g. heap_base=0x00800000")
    p.add_argument("--aware-custom-alloc", action="store_true", default=None,
                   help="monitor system plus custom-arena heap bytes")
    p.add_argument("--compress-labels", action="store_true", default=None,
                   help="render label runs as memalloc×N[info]")
    p.add_argument("--timeout-events", type=int, metavar="N",
                   help="stop after N trace events (default 5000000)")
    p.add_argument("--report", metavar="PATH", help="write the JSON report")
    p.add_argument("--annotate", metavar="PATH", help="write the annotated script")
    p.add_argument("--quiet", "-q", action="store_true", help="no summary table")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wmrecon", description="Reconstruct weird-machine bytecode maps from marked exploit scripts.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute and analyze a .wms script")
    run_p.add_argument("script", help="script path (.wms)")
    _add_common(run_p)
    run_p.add_argument("--trace", metavar="PATH", help="write the event trace (.wmt)")
    run_p.add_argument("--auto-candidates", nargs="?", const=1, type=int, metavar="DEPTH",
                       help="replace markers with one candidate per statement up to DEPTH (default 1)")

    an_p = sub.add_parser("analyze", help="analyze a recorded .wmt trace")
    an_p.add_argument("trace_file", metavar="trace", help="trace path (.wmt)")
    an_p.add_argument("--source", metavar="PATH",
                      help="script the trace came from (for the report hash and --annotate)")
    _add_common(an_p)

    co_p = sub.add_parser("corpus", help="check the bundled case studies against golden reports")
    co_p.add_argument("--aware-custom-alloc", action="store_true",
                      help="use the custom-allocator-aware golden set")
    co_p.add_argument("--golden-dir", metavar="DIR", help="golden root (default: bundled)")
    co_p.add_argument("--update", action="store_true", help="rewrite the golden files")
    co_p.add_argument("--case", action="append", choices=CORPUS_CASES,
                      help="restrict to one case (repeatable)")
    return parser


def resolve_config(args):
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    layout = cfg.layout
    for group in args.layout:
        for item in group:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigurationError(f"--layout expects KEY=VAL, got {item!r}")
            layout = layout_with(layout, key.strip(), value.strip())
    changes = {"layout": layout}
    if args.aware_custom_alloc:
        changes["aware_custom_alloc"] = True
    if args.compress_labels:
        changes["compress_labels"] = True
    if args.timeout_events is not None:
        changes["timeout_events"] = args.timeout_events
    if getattr(args, "auto_candidates", None) is not None:
        changes["auto_candidates"] = args.auto_candidates
    for flag, attr in (("report", "report_path"), ("trace", "trace_path"),
                       ("annotate", "annotate_path")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[attr] = value
    return replace(cfg, **changes)


def _shorten(text, width=LABEL_WIDTH):
    return text if len(text) <= width else text[:width - 3] + "..."


def print_summary(report, out=None):
    out = out or sys.stdout
    rows = []
    for e in report.entries:
        if e.is_epsilon:
            label = "ε   <-- unlabelled"
        else:
            label = _shorten(primitives.compress(primitives.LabelString(
                tuple(primitives.PrimitiveLabel(n, i) for n, i in zip(e.label.split("+"), e.info)))))
        rows.append((e.name, e.kind, label))
    name_w = max([len("candidate")] + [len(r[0]) for r in rows])
    print(f"{'candidate':<{name_w}}  {'kind':<8}  label", file=out)
    print(f"{'-' * name_w}  {'-' * 8}  {'-' * 5}", file=out)
    for name, kind, label in rows:
        print(f"{name:<{name_w}}  {kind:<8}  {label}", file=out)
    s = report.summary()
    print(f"\noutcome: {report.outcome}   events: {report.event_count}   "
          f"candidates: {s['candidates']}   labelled: {s['labelled']}   ε: {s['epsilon']}", file=out)
    eps = [e.name for e in report.entries if e.is_epsilon]
    if eps:
        shown = ", ".join(eps[:10]) + (" ..." if len(eps) > 10 else "")
        print(f"unlabelled candidates: {shown}", file=out)
    for w in report.warnings:
        print(f"warning: {w}", file=out)
    if report.error:
        print(f"error: {report.error}", file=out)


def _exit_for(outcome):
    if outcome == TERMINATED:
        return EXIT_OK
    if outcome == TIMED_OUT:
        return EXIT_TIMEOUT
    return EXIT_SCRIPT


def _read(path):
    with open(path, encoding="utf-8") as fp:
        return fp.read()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(text)


def _emit_outputs(report, source, cfg, quiet):
    if cfg.report_path:
        write_report(cfg.report_path, report)
    if cfg.annotate_path:
        if source is None:
            raise AnnotationError("--annotate needs the script source (use --source)")
        _write(cfg.annotate_path, annotate(source, report))
    if not quiet:
        print_summary(report)


def cmd_run(args):
    try:
        cfg = resolve_config(args)
        source = _read(args.script)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"wmrecon: cannot read input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigurationError, ValueError) as exc:
        print(f"wmrecon: configuration error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        script = load(source)
    except ScriptSyntaxError as exc:
        for issue in exc.issues:
            print(f"{args.script}:{issue}", file=sys.stderr)
        return EXIT_SCRIPT
    try:
        report = analyze(script, cfg)
        _emit_outputs(report, source, cfg, args.quiet)
    except OSError as exc:
        print(f"wmrecon: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return _exit_for(report.outcome)


def cmd_analyze(args):
    try:
        cfg = resolve_config(args)
        source = _read(args.source) if args.source else None
    except (OSError, UnicodeDecodeError) as exc:
        print(f"wmrecon: cannot read source: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigurationError, ValueError) as exc:
        print(f"wmrecon: configuration error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        report = analyze_events(replay(args.trace_file), cfg, source=source)
    except OSError as exc:
        print(f"wmrecon: cannot read {args.trace_file}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TraceError as exc:
        print(f"wmrecon: {args.trace_file}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        _emit_outputs(report, source, cfg, args.quiet)
    except AnnotationError as exc:
        print(f"wmrecon: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"wmrecon: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return _exit_for(report.outcome)


def corpus_outputs(case, aware):
    """Golden-relative path to expected text for one bundled case.

    The event trace does not depend on the analysis mode, so it lives next
    to the mode directories and is checked in both modes.
    """
    mode = "aware" if aware else "default"
    source = _read(CORPUS_DIR / f"{case}.wms")
    stream = io.StringIO()
    report = analyze(source, RunConfig(aware_custom_alloc=aware), trace_stream=stream)
    return {f"{mode}/{case}.report.json": report.to_json(),
            f"{mode}/{case}.annotated.wms": annotate(source, report),
            f"{case}.wmt": stream.getvalue()}


def _diff(expected, actual, name, limit=200):
    lines = list(difflib.unified_diff(expected.splitlines(keepends=True), actual.splitlines(keepends=True),
                                      f"golden/{name}", f"actual/{name}"))
    if len(lines) > limit:
        lines = lines[:limit] + [f"... ({len(lines) - limit} more diff lines)\n"]
    return "".join(lines)


def cmd_corpus(args):
    mode = "aware" if args.aware_custom_alloc else "default"
    golden = Path(args.golden_dir) if args.golden_dir else CORPUS_DIR / "golden"
    failed = False
    for case in args.case or CORPUS_CASES:
        outputs = corpus_outputs(case, args.aware_custom_alloc)
        if args.update:
            for name, text in outputs.items():
                (golden / name).parent.mkdir(parents=True, exist_ok=True)
                _write(golden / name, text)
            print(f"UPDATED {case} ({mode})")
            continue
        problems = []
        for name, text in outputs.items():
            try:
                expected = _read(golden / name)
            except OSError:
                problems.append(f"missing golden file {golden / name}\n")
                continue
            if expected != text:
                problems.append(_diff(expected, text, name))
        if problems:
            failed = True
            print(f"FAIL {case} ({mode})")
            sys.stdout.write("".join(problems))
        else:
            print(f"PASS {case} ({mode})")
    return EXIT_GOLDEN if failed else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "analyze":
        return cmd_analyze(args)
    return cmd_corpus(args)


if __name__ == "__main__":
    sys.exit(main())
