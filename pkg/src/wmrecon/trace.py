"""Observable target-side events and the ``.wmt`` line-delimited trace format.

Each line of a trace file is one compact JSON object::

    {"v":1,"i":0,"ev":"Alloc","allocator":"System","addr":"0x00600000","size":88}

Keys appear in a fixed order: ``v`` (format version, always 1), ``i`` (event
index, gap-free from 0), ``ev`` (event kind), then the kind's fields in the
order listed in :data:`FIELDS`.  Addresses (``addr``, ``pc``, ``sp``) are
rendered as ``0x`` plus eight lowercase hex digits; sizes are decimal byte
counts; spans are ``[line, column, length]`` with 1-based line and column.
"""

import json
import re
from typing import NamedTuple

FORMAT_VERSION = 1

FIELDS = {
    "Alloc": ("allocator", "addr", "size"),
    "Free": ("allocator", "addr", "size"),
    "ExecTransfer": ("pc",),
    "StackPivot": ("sp",),
    "Fault": ("kind", "addr"),
    "MarkerSet": ("name", "span"),
    "MarkerReset": ("span",),
    "StmtBegin": ("span", "compound"),
    "StmtEnd": ("span",),
}

HEAP_KINDS = frozenset(("Alloc", "Free"))
CONTROL_KINDS = frozenset(("ExecTransfer", "StackPivot"))
STATE_KINDS = HEAP_KINDS | CONTROL_KINDS

ALLOCATORS = ("System", "Custom")
FAULT_KINDS = ("double_free", "invalid_free", "overflow", "access")

_ADDRESS_FIELDS = frozenset(("addr", "pc", "sp"))
_HEX = re.compile(r"0x[0-9a-f]{8}\Z")


class TraceEvent(NamedTuple):
    index: int
    kind: str
    payload: dict


class TraceError(Exception):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TraceFormatError(TraceError):
    """A line that is not a well-formed trace record."""


class TraceIntegrityError(TraceError):
    """Well-formed records that violate index continuity or event pairing."""


class EventLimitReached(Exception):
    pass


class EventLog:
    """Assigns indices to events and fans them out to listeners.

    Events are not retained.  Emitting once ``limit`` events exist raises
    :class:`EventLimitReached`, which is how runs time out.
    """

    def __init__(self, limit=None):
        self.count = 0
        self.limit = limit
        self.listeners = []

    def subscribe(self, listener):
        self.listeners.append(listener)

    def emit(self, kind, /, **payload):
        if self.limit is not None and self.count >= self.limit:
            raise EventLimitReached(self.count)
        ev = TraceEvent(self.count, kind, payload)
        self.count += 1
        for fn in self.listeners:
            fn(ev)
        return ev


def format_address(value):
    return f"0x{value:08x}"


def encode(event):
    rec = {"v": FORMAT_VERSION, "i": event.index, "ev": event.kind}
    for name in FIELDS[event.kind]:
        value = event.payload[name]
        if name in _ADDRESS_FIELDS:
            value = format_address(value)
        elif name == "span":
            value = list(value)
        rec[name] = value
    return json.dumps(rec, separators=(",", ":"), ensure_ascii=False)


class TraceWriter:
    """Appends events to an open text stream, enforcing index continuity."""

    def __init__(self, stream):
        self.stream = stream
        self.expected = 0

    def record(self, event):
        if event.index != self.expected:
            raise TraceIntegrityError(
                self.expected + 1,
                f"event index {event.index}, expected {self.expected}")
        self.stream.write(encode(event))
        self.stream.write("\n")
        self.expected += 1

    __call__ = record


def record(sink, event):
    sink.record(event)


def _decode_field(name, value, kind, line):
    bad = TraceFormatError
    if name in _ADDRESS_FIELDS:
        if not isinstance(value, str) or not _HEX.match(value):
            raise bad(line, f"{kind}.{name} is not a 0x-prefixed 8-digit hex address")
        return int(value, 16)
    if name == "span":
        if (not isinstance(value, list) or len(value) != 3
                or not all(type(x) is int and x >= 0 for x in value)):
            raise bad(line, f"{kind}.span must be [line, column, length]")
        return tuple(value)
    if name == "size":
        if type(value) is not int or value <= 0:
            raise bad(line, f"{kind}.size must be a positive integer")
        return value
    if name == "allocator":
        if value not in ALLOCATORS:
            raise bad(line, f"unknown allocator {value!r}")
        return value
    if name == "compound":
        if type(value) is not bool:
            raise bad(line, "StmtBegin.compound must be a boolean")
        return value
    if name == "kind":
        if value not in FAULT_KINDS:
            raise bad(line, f"unknown fault kind {value!r}")
        return value
    if name == "name":
        if not isinstance(value, str):
            raise bad(line, "MarkerSet.name must be a string")
        return value
    raise AssertionError(name)


def decode(text, line=1):
    """Parse one trace line into a :class:`TraceEvent` (no continuity checks)."""
    try:
        rec = json.loads(text)
    except ValueError as exc:
        raise TraceFormatError(line, f"malformed record: {exc}") from None
    if not isinstance(rec, dict):
        raise TraceFormatError(line, "record is not an object")
    if rec.get("v") != FORMAT_VERSION:
        raise TraceFormatError(line, f"unsupported version {rec.get('v')!r}")
    index, kind = rec.get("i"), rec.get("ev")
    if type(index) is not int or index < 0:
        raise TraceFormatError(line, "missing or invalid index")
    if kind not in FIELDS:
        raise TraceFormatError(line, f"unknown event kind {kind!r}")
    names = FIELDS[kind]
    extra = set(rec) - {"v", "i", "ev", *names}
    if extra:
        raise TraceFormatError(line, f"unexpected fields {sorted(extra)}")
    payload = {}
    for name in names:
        if name not in rec:
            raise TraceFormatError(line, f"{kind} record lacks {name!r}")
        payload[name] = _decode_field(name, rec[name], kind, line)
    return TraceEvent(index, kind, payload)


def replay(source):
    """Yield events from a trace file path or an iterable of lines.

    Raises :class:`TraceFormatError` for malformed lines and
    :class:`TraceIntegrityError` for index gaps, mismatched statement nesting
    or frees that do not match a live allocation.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8") as fp:
            yield from replay(fp)
        return
    expected = 0
    open_spans = []
    live = {}
    for line_no, text in enumerate(source, start=1):
        if not text.strip():
            raise TraceFormatError(line_no, "blank line")
        ev = decode(text, line_no)
        if ev.index != expected:
            raise TraceIntegrityError(
                line_no, f"event index {ev.index}, expected {expected}")
        expected += 1
        p = ev.payload
        if ev.kind == "StmtBegin":
            open_spans.append(p["span"])
        elif ev.kind == "StmtEnd":
            if not open_spans or open_spans[-1] != p["span"]:
                raise TraceIntegrityError(line_no, "StmtEnd does not match the innermost StmtBegin")
            open_spans.pop()
        elif ev.kind == "Alloc":
            live[(p["allocator"], p["addr"])] = p["size"]
        elif ev.kind == "Free":
            size = live.pop((p["allocator"], p["addr"]), None)
            if size != p["size"]:
                raise TraceIntegrityError(line_no, "Free does not match a live Alloc of the same size")
        yield ev


def write_trace(path, events):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        writer = TraceWriter(fp)
        for ev in events:
            writer.record(ev)
