"""Candidate tracking, label assignment and script annotation.

The analyzer consumes trace events only, so a live run and a replayed trace
produce the same report.  Open candidates form a stack; a candidate's nesting
level is the number of statements open when its marker fired.  It is
Simple when it directly covers exactly one non-compound statement and
Compound otherwise.  A marker at
level ``d`` first closes every open candidate at level ``d`` or deeper (the
sibling rule), then opens a new one.  ``resetMarker`` closes candidates deeper
than its own level and then the innermost remaining one.  After every heap or
control-flow event each open candidate receives a fresh state snapshot; at
close, the snapshot list is labelled by the detector registry.
"""

import re
from dataclasses import replace

from wmrecon import primitives
from wmrecon.config import RunConfig
from wmrecon.memory_model import StateTracker, init_address_space
from wmrecon.report import ReportEntry, WMReport, source_digest
from wmrecon.script_vm import Script, ast as A, load
from wmrecon.script_vm.interpreter import TERMINATED, TIMED_OUT, run
from wmrecon.trace import STATE_KINDS, EventLog, TraceWriter


class AnnotationError(ValueError):
    pass


class Candidate:
    __slots__ = ("name", "span", "level", "open_event", "close_event", "snapshots",
                 "compound", "direct", "label")

    def __init__(self, name, span, level, open_event, first):
        self.name = name
        self.span = span
        self.level = level
        self.open_event = open_event
        self.close_event = None
        self.snapshots = [first]
        self.compound = False
        self.direct = 0           # statements begun at the candidate's own level
        self.label = None

    @property
    def kind(self):
        return "Simple" if self.direct == 1 and not self.compound else "Compound"


class Analyzer:
    """Event listener implementing the marker stack and snapshot collection."""

    def __init__(self, layout=None, registry=None, aware=False):
        self.tracker = StateTracker(layout)
        self.registry = registry or primitives.stock_registry()
        self.aware = aware
        self.level = 0
        self.gamma = []
        self.candidates = []
        self.warnings = []
        self.events = 0
        self._names = {}

    def __call__(self, ev):
        kind = ev.kind
        self.events = ev.index + 1
        if kind == "StmtBegin":
            for c in self.gamma:
                if c.level == self.level:
                    c.direct += 1
                    c.compound = c.compound or ev.payload["compound"]
            self.level += 1
        elif kind == "StmtEnd":
            self.level -= 1
        elif kind in STATE_KINDS:
            self.tracker.apply(ev)
            if self.gamma:
                snap = self.tracker.snapshot(ev.index + 1)
                for c in self.gamma:
                    c.snapshots.append(snap)
        elif kind == "MarkerSet":
            self._close_while(lambda c: c.level >= self.level, ev.index)
            self._open(ev)
        elif kind == "MarkerReset":
            self._close_while(lambda c: c.level > self.level, ev.index)
            if self.gamma:
                self._close(self.gamma.pop(), ev.index)
            else:
                line, col = ev.payload["span"][:2]
                self.warnings.append(f"resetMarker at {line}:{col} with no open candidate")

    def _unique(self, name):
        n = self._names.get(name, 0) + 1
        self._names[name] = n
        if n == 1:
            return name
        while True:
            alias = f"{name}#{n}"
            if alias not in self._names:
                self._names[alias] = 1
                return alias
            n += 1

    def _open(self, ev):
        snap = self.tracker.snapshot(ev.index + 1)
        c = Candidate(self._unique(ev.payload["name"]), tuple(ev.payload["span"]),
                      self.level, ev.index, snap)
        self.gamma.append(c)
        self.candidates.append(c)

    def _close_while(self, pred, index):
        while self.gamma and pred(self.gamma[-1]):
            self._close(self.gamma.pop(), index)

    def _close(self, c, index):
        end = self.tracker.snapshot(index + 1)
        if end.event_index > c.snapshots[-1].event_index:
            c.snapshots.append(end)
        c.close_event = index
        c.label = primitives.transitions_identify(self.registry, c.snapshots, self.aware)

    def finish(self):
        """Close whatever is still open at end of stream."""
        while self.gamma:
            c = self.gamma.pop()
            end = self.tracker.snapshot(self.events)
            if end.event_index > c.snapshots[-1].event_index:
                c.snapshots.append(end)
            c.close_event = self.events
            c.label = primitives.transitions_identify(self.registry, c.snapshots, self.aware)
        return self.candidates


def _entries(candidates, config):
    out = []
    for c in candidates:
        lab = c.label
        out.append(ReportEntry(
            c.name, c.span, c.kind, lab.text, tuple(lab.infos), c.open_event,
            c.close_event, config.auto_candidates is not None,
            primitives.compress(lab) if config.compress_labels else None))
    return tuple(out)


def build_report(analyzer, outcome, error, config, source_hash):
    candidates = analyzer.finish()
    return WMReport(source_hash, outcome, error, analyzer.events, config.echo(),
                    _entries(candidates, config), tuple(analyzer.warnings))


def _as_script(script):
    if isinstance(script, Script):
        return script
    return load(script)


class Session:
    """A finished analysis: the report plus the analyzer's candidates."""

    def __init__(self, report, candidates, outcome):
        self.report = report
        self.candidates = candidates
        self.outcome = outcome


def analyze_session(script, config=None, registry=None, trace_path=None, trace_stream=None):
    """Like :func:`analyze` but also returns candidates with their snapshots."""
    config = config or RunConfig()
    script = _as_script(script)
    source = strip_annotations(script.source)
    if source != script.source:
        # spans must refer to the canonical text that annotate() rewrites
        script = load(source)
    program = script.ast
    if config.auto_candidates is not None:
        program = auto_candidates(program, config.auto_candidates)
    log = EventLog(limit=config.timeout_events)
    model = init_address_space(config.layout, log)
    model.capture_baselines()
    analyzer = Analyzer(config.layout, registry, config.aware_custom_alloc)
    log.subscribe(analyzer)
    fp = None
    trace_path = trace_path or config.trace_path
    if trace_stream is None and trace_path:
        fp = trace_stream = open(trace_path, "w", encoding="utf-8", newline="\n")
    try:
        if trace_stream is not None:
            log.subscribe(TraceWriter(trace_stream))
        outcome = run(program, model, element_size=config.element_size)
    finally:
        if fp is not None:
            fp.close()
    report = build_report(analyzer, outcome.status, outcome.error, config, source_digest(source))
    return Session(report, analyzer.candidates, outcome)


def analyze(script, config=None, registry=None, trace_path=None, trace_stream=None):
    """Run ``script`` under ``config`` and return its :class:`WMReport`.

    ``script`` is a :class:`Script` or source text.  A trace is written when
    ``trace_path`` (or an open text ``trace_stream``) is given.
    """
    return analyze_session(script, config, registry, trace_path, trace_stream).report


def analyze_events(events, config=None, registry=None, source=None):
    """Report for an already recorded event stream (trace replay)."""
    config = config or RunConfig()
    analyzer = Analyzer(config.layout, registry, config.aware_custom_alloc)
    for ev in events:
        analyzer(ev)
    status = TIMED_OUT if analyzer.events >= config.timeout_events else TERMINATED
    digest = source_digest(strip_annotations(source)) if source is not None else None
    return build_report(analyzer, status, None, config, digest)


# -- candidate generation ---------------------------------------------------

def _strip_markers(stmts):
    out = []
    for s in stmts:
        if isinstance(s, A.MarkerStmt) or A.marker_call(s):
            continue
        out.append(_map_children(s, _strip_markers))
    return out


def _as_block(stmt, fn):
    body = stmt.body if isinstance(stmt, A.Block) else [stmt]
    return A.Block(fn(body), span=stmt.span)


def _map_children(s, fn):
    """Copy of ``s`` with each nested statement list passed through ``fn``."""
    if isinstance(s, A.Block):
        return replace(s, body=fn(s.body))
    if isinstance(s, (A.While, A.For)):
        return replace(s, body=_as_block(s.body, fn))
    if isinstance(s, A.If):
        other = None if s.other is None else _as_block(s.other, fn)
        return replace(s, then=_as_block(s.then, fn), other=other)
    if isinstance(s, A.FunctionDecl):
        return replace(s, body=replace(s.body, body=fn(s.body.body)))
    return s


def _synthetic_name(s):
    return f"stmt@{s.span[0]}:{s.span[1]}"


def _wrap(stmts, level, depth):
    out = []
    for s in stmts:
        if level < depth:
            s = _map_children(s, lambda body: _wrap(body, level + 1, depth))
        if not isinstance(s, A.FunctionDecl):
            out.append(A.MarkerStmt(_synthetic_name(s), span=s.span))
        out.append(s)
    return out


def auto_candidates(program, depth=1):
    """Copy of ``program`` with hand markers removed and a synthetic marker
    before every statement nested at most ``depth`` levels deep.

    Level 1 is the top level; function declarations are not candidates
    themselves but their bodies count as one level down.  A final reset
    closes the last candidate.  Depth 0 yields no candidates.
    """
    body = _strip_markers(program.body)
    if depth <= 0:
        return replace(program, body=body)
    body = _wrap(body, 1, depth)
    if body:
        last = program.body[-1].span
        body.append(A.MarkerStmt(None, span=last))
    return replace(program, body=body)


# -- annotation -------------------------------------------------------------

_INFO_LINE = re.compile(r"^[ \t]*//\[Info:.*\][ \t]*$")
_LABEL_LINE = re.compile(r"^[ \t]*//[^\s:][^\n]*?::[A-Za-z0-9_+.×\[\]]*[ \t]*$")
_SYNTH_LINE = re.compile(r"^[ \t]*//stmt@\d+:\d+(#\d+)?::")
_SET_MARKER = re.compile(r"\bsetMarker\s*\(")


def strip_annotations(source):
    """Remove annotation comments previously inserted by :func:`annotate`."""
    lines = source.split("\n")
    out = []
    after_marker = False
    for line in lines:
        if after_marker and (_LABEL_LINE.match(line) or _INFO_LINE.match(line)):
            continue
        if _SYNTH_LINE.match(line):
            after_marker = True
            continue
        if after_marker and _INFO_LINE.match(line):
            continue
        after_marker = bool(_SET_MARKER.search(line))
        out.append(line)
    return "\n".join(out)


def _annotation_lines(entry, indent):
    if entry.compressed is not None:
        return [f"{indent}//{entry.name}::{entry.compressed}"]
    lines = [f"{indent}//{entry.name}::{entry.label}"]
    if not entry.is_epsilon:
        lines.append(f"{indent}//[Info:{'+'.join(entry.info)}]")
    return lines


def annotate(source, report):
    """Insert ``//name::l*`` and ``//[Info:...]`` lines for every candidate.

    Hand-marker annotations go right after the ``setMarker`` line; synthetic
    ones right before the statement they stand for.  Re-annotating replaces
    earlier annotations.
    """
    canonical = strip_annotations(source)
    if report.source_sha256 != source_digest(canonical):
        raise AnnotationError("report was produced from a different script "
                              "(source hash mismatch)")
    lines = canonical.split("\n")
    after, before = {}, {}
    for e in report.entries:
        (before if e.synthetic else after).setdefault(e.span[0], []).append(e)
    out = []
    for no, line in enumerate(lines, start=1):
        indent = line[:len(line) - len(line.lstrip(" \t"))]
        for e in before.get(no, ()):
            out.extend(_annotation_lines(e, indent))
        out.append(line)
        for e in after.get(no, ()):
            out.extend(_annotation_lines(e, indent))
    return "\n".join(out)
