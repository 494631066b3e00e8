"""Exploit-primitive detectors over ordered abstract-state pairs.

Each detector takes ``(W, W2, aware)`` and returns a :class:`PrimitiveLabel`
or None.  ``aware`` switches the monitored heap counter from the system heap
alone to system plus custom arena.
"""

from typing import Callable, List, NamedTuple

from wmrecon import kernels

KiB = 1024
MiB = 1024 * 1024

MEMALLOC = "memalloc"
MEMFREE = "memfree"
EXEC_CRAFTED = "execCrafted"
CALL_STACK_REPLACE = "callStackReplace"

EPSILON = ""


class PrimitiveLabel(NamedTuple):
    name: str
    info: str


def render_size(n):
    """Byte count as printed in Info lines: ``88B``, ``511KB``, ``1.5MB``."""
    if n < KiB:
        return f"{n}B"
    if n < MiB:
        return f"{n // KiB}KB"
    tenths = n * 10 // MiB
    whole, frac = divmod(tenths, 10)
    return f"{whole}MB" if frac == 0 else f"{whole}.{frac}MB"


def render_address(a):
    return f"0x{a:08x}"


def _in_regions(addr, regions):
    return any(r.base <= addr < r.base + r.size for r in regions)


def detect_memalloc(w, w2, aware=False):
    a, b = w.heap_bytes(aware), w2.heap_bytes(aware)
    if b > a:
        return PrimitiveLabel(MEMALLOC, render_size(b - a))
    return None


def detect_memfree(w, w2, aware=False):
    a, b = w.heap_bytes(aware), w2.heap_bytes(aware)
    if b < a:
        return PrimitiveLabel(MEMFREE, render_size(a - b))
    return None


def detect_exec_crafted(w, w2, aware=False):
    if w2.pc != w.pc and not _in_regions(w2.pc, w2.code_baseline):
        return PrimitiveLabel(EXEC_CRAFTED, render_address(w2.pc))
    return None


def detect_call_stack_replace(w, w2, aware=False):
    if w2.sp != w.sp and not _in_regions(w2.sp, w2.stack_baseline):
        return PrimitiveLabel(CALL_STACK_REPLACE, render_address(w2.sp))
    return None


# camelCase aliases matching the label names
detect_execCrafted = detect_exec_crafted
detect_callStackReplace = detect_call_stack_replace


class Detector(NamedTuple):
    name: str
    fn: Callable


class DetectorRegistry:
    """Ordered, name-unique detector list (evaluation order is list order)."""

    def __init__(self, detectors=()):
        self._detectors: List[Detector] = []
        for name, fn in detectors:
            self.register(name, fn)

    def register(self, name, fn):
        if any(d.name == name for d in self._detectors):
            raise ValueError(f"detector {name!r} already registered")
        self._detectors.append(Detector(name, fn))

    @property
    def names(self):
        return [d.name for d in self._detectors]

    def __iter__(self):
        return iter(self._detectors)

    def __len__(self):
        return len(self._detectors)

    def is_stock(self):
        return self.names == STOCK_ORDER and all(
            d.fn is _STOCK_FNS[d.name] for d in self._detectors)


STOCK_ORDER = [EXEC_CRAFTED, CALL_STACK_REPLACE, MEMFREE, MEMALLOC]
_STOCK_FNS = {
    EXEC_CRAFTED: detect_exec_crafted,
    CALL_STACK_REPLACE: detect_call_stack_replace,
    MEMFREE: detect_memfree,
    MEMALLOC: detect_memalloc,
}


def stock_registry():
    return DetectorRegistry((n, _STOCK_FNS[n]) for n in STOCK_ORDER)


class LabelString(NamedTuple):
    """The label sequence l* for one candidate."""

    labels: tuple

    @property
    def text(self):
        return "+".join(l.name for l in self.labels)

    @property
    def infos(self):
        return [l.info for l in self.labels]

    @property
    def is_epsilon(self):
        return not self.labels

    def __str__(self):
        return self.text


_KERNEL_NAMES = {
    kernels.EXEC_CRAFTED: EXEC_CRAFTED,
    kernels.CALL_STACK_REPLACE: CALL_STACK_REPLACE,
    kernels.MEMFREE: MEMFREE,
    kernels.MEMALLOC: MEMALLOC,
}


def _stock_scan(snapshots, aware):
    first = snapshots[0]
    code = [(r.base, r.base + r.size) for r in first.code_baseline]
    stack = [(r.base, r.base + r.size) for r in first.stack_baseline]
    hits = kernels.scan_transitions(
        [s.sys_heap_bytes for s in snapshots],
        [s.custom_heap_bytes for s in snapshots],
        [s.pc for s in snapshots],
        [s.sp for s in snapshots],
        code, stack, aware)
    out = []
    for code_, value in hits:
        name = _KERNEL_NAMES[code_]
        info = render_address(value) if code_ <= kernels.CALL_STACK_REPLACE else render_size(value)
        out.append(PrimitiveLabel(name, info))
    return out


def transitions_identify(registry, snapshots, aware=False):
    """Label every consecutive snapshot pair; all matches are appended in
    registry order under their registered names.  Fewer than two snapshots
    give the empty label."""
    if len(snapshots) < 2:
        return LabelString(())
    if registry.is_stock():
        return LabelString(tuple(_stock_scan(snapshots, aware)))
    out = []
    for w, w2 in zip(snapshots, snapshots[1:]):
        for det in registry:
            hit = det.fn(w, w2, aware)
            if hit is not None:
                # the registered name wins, so one function can back two labels
                out.append(PrimitiveLabel(det.name, hit.info))
    return LabelString(tuple(out))


def compress(labels: LabelString) -> str:
    """Run-length form of a label string, e.g. ``memalloc×500[511KB]``.

    Runs group equal consecutive names; the bracket holds the shared Info or
    ``first..last`` when Infos differ.
    """
    parts = []
    items = list(labels.labels)
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j].name == items[i].name:
            j += 1
        run = items[i:j]
        infos = {l.info for l in run}
        info = run[0].info if len(infos) == 1 else f"{run[0].info}..{run[-1].info}"
        count = f"×{len(run)}" if len(run) > 1 else ""
        parts.append(f"{run[0].name}{count}[{info}]")
        i = j
    return "+".join(parts)


def register_from_spec(registry, spec: str):
    """Register ``name=module:function`` from configuration."""
    import importlib
    name, _, target = spec.partition("=")
    mod, _, attr = target.partition(":")
    if not name or not mod or not attr:
        raise ValueError(f"detector spec must be name=module:function, got {spec!r}")
    fn = getattr(importlib.import_module(mod), attr)
    registry.register(name, fn)
    return registry
