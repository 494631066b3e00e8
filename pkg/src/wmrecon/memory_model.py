"""Deterministic 32-bit process address space with an instrumented heap.

A single system heap window is managed first-fit with 16-byte alignment.  A
custom arena allocator sits on top of it: small requests are carved from
arena chunks that are themselves system allocations, and custom frees go back
to the arena only.  Every observable operation is emitted as a trace event.
"""

import random
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from wmrecon import kernels
from wmrecon.script_vm import text as _text
from wmrecon.trace import EventLog

ADDRESS_LIMIT = 1 << 32
ALIGN = 16
KiB = 1024
MiB = 1024 * 1024


class RegionKind(str, Enum):
    CODE = "Code"
    STACK = "Stack"
    SYSTEM_HEAP = "SystemHeap"
    CUSTOM_ARENA = "CustomArena"


class MemoryRegion(NamedTuple):
    base: int
    size: int
    kind: RegionKind
    label: str

    @property
    def end(self):
        return self.base + self.size

    def contains(self, addr):
        return self.base <= addr < self.base + self.size


class AllocationRecord(NamedTuple):
    addr: int
    size: int
    allocator: str
    live: bool = True


class ConfigurationError(ValueError):
    pass


class StateError(RuntimeError):
    pass


class OutOfMemory(MemoryError):
    pass


@dataclass(frozen=True)
class AddressSpaceConfig:
    """Region layout plus allocator tuning.

    ``code`` and ``stack`` are sequences of ``(base, size, label)``; the
    first entry of each supplies the entry point and the initial stack
    pointer respectively.
    """

    code: tuple = ((0x00401000, 0x000FF000, "image"),)
    stack: tuple = ((0x0012F000, 0x00001000, "main-thread"),)
    heap_base: int = 0x00600000
    heap_size: int = 0x3FA00000
    arena_chunk_size: int = 1 * MiB
    bypass_threshold: int = 16 * KiB
    aslr_seed: Optional[int] = None


@dataclass(frozen=True)
class AbstractState:
    sys_heap_bytes: int
    custom_heap_bytes: int
    pc: int
    sp: int
    code_baseline: frozenset
    stack_baseline: frozenset
    event_index: int

    def heap_bytes(self, aware=False):
        if aware:
            return self.sys_heap_bytes + self.custom_heap_bytes
        return self.sys_heap_bytes


SLIDE_UNIT = 0x10000
MAX_SLIDE = 63


def _slide(windows, rng):
    """Move each window up by a random multiple of 64 KiB.  A window never
    slides past the gap below its upper neighbour, so a valid layout stays
    valid; draws happen in base order so the result depends on the seed only."""
    order = sorted(range(len(windows)), key=lambda i: windows[i][1])
    out = list(windows)
    for pos, i in enumerate(order):
        _, base, size, label = windows[i]
        limit = windows[order[pos + 1]][1] if pos + 1 < len(order) else ADDRESS_LIMIT
        room = max(0, (limit - base - size) // SLIDE_UNIT)
        out[i] = (windows[i][0], base + rng.randrange(0, min(room, MAX_SLIDE) + 1) * SLIDE_UNIT,
                  size, label)
    return out


def build_regions(layout):
    """Validate ``layout`` and return its regions sorted by base."""
    if not layout.code:
        raise ConfigurationError("layout needs at least one Code window")
    if not layout.stack:
        raise ConfigurationError("layout needs at least one Stack window")
    code, stack = list(layout.code), list(layout.stack)
    heap = [(layout.heap_base, layout.heap_size, "process-heap")]
    windows = [(kind, base, size, label)
               for kind, group in ((RegionKind.CODE, code), (RegionKind.STACK, stack),
                                   (RegionKind.SYSTEM_HEAP, heap))
               for base, size, label in group]
    for kind, base, size, label in windows:
        if size <= 0 or base <= 0:
            raise ConfigurationError(f"{kind.value} window {label!r} has non-positive base or size")
        if base + size > ADDRESS_LIMIT:
            raise ConfigurationError(f"{kind.value} window {label!r} wraps the address space")
    ordered = sorted(windows, key=lambda w: w[1])
    for a, b in zip(ordered, ordered[1:]):
        if a[1] + a[2] > b[1]:
            raise ConfigurationError(f"windows {a[3]!r} and {b[3]!r} overlap")
    if layout.aslr_seed is not None:
        windows = _slide(windows, random.Random(layout.aslr_seed))
    regions = sorted((MemoryRegion(base, size, kind, label) for kind, base, size, label in windows),
                     key=lambda r: r.base)
    if layout.arena_chunk_size <= 0 or layout.bypass_threshold <= 0:
        raise ConfigurationError("arena_chunk_size and bypass_threshold must be positive")
    if layout.bypass_threshold > layout.arena_chunk_size:
        raise ConfigurationError("bypass_threshold cannot exceed arena_chunk_size")
    return regions


def initial_registers(regions):
    """Entry pc and initial sp implied by a validated layout."""
    code = next(r for r in regions if r.kind is RegionKind.CODE)
    stack = next(r for r in regions if r.kind is RegionKind.STACK)
    top = stack.end - min(0x80, stack.size // 2)
    return code.base, top & ~3


def baselines_of(regions):
    code = frozenset(r for r in regions if r.kind is RegionKind.CODE)
    stack = frozenset(r for r in regions if r.kind is RegionKind.STACK)
    return code, stack


class _Arena:
    """Free-list allocator over a growing set of arena chunks."""

    def __init__(self):
        self.chunks = []      # (base, size), address order
        self.lists = []       # one FreeList per chunk, same order

    def add_chunk(self, base, size):
        fl = kernels.FreeList(ALIGN)
        fl.add(base, size)
        i = 0
        while i < len(self.chunks) and self.chunks[i][0] < base:
            i += 1
        self.chunks.insert(i, (base, size))
        self.lists.insert(i, fl)

    def alloc(self, size):
        for fl in self.lists:
            addr = fl.alloc(size)
            if addr >= 0:
                return addr
        return -1

    def release(self, addr, size):
        for (base, csize), fl in zip(self.chunks, self.lists):
            if base <= addr < base + csize:
                fl.release(addr, size)
                return
        raise AssertionError("custom block outside every arena chunk")

    def capacity(self):
        return sum(s for _, s in self.chunks)


class MemoryModel:
    """Simulated target process memory.  Use :func:`init_address_space`."""

    def __init__(self, layout=None, log=None):
        self.layout = layout or AddressSpaceConfig()
        self.regions = build_regions(self.layout)
        self.log = log if log is not None else EventLog()
        self.pc, self.sp = initial_registers(self.regions)
        heap = next(r for r in self.regions if r.kind is RegionKind.SYSTEM_HEAP)
        self.heap_region = heap
        self._sys = kernels.FreeList(ALIGN)
        self._sys.add(heap.base, heap.size)
        self._arena = _Arena()
        self.records = {}          # addr -> AllocationRecord, live only
        self._freed = set()        # addresses freed and not reallocated
        self.sys_heap_bytes = 0
        self.custom_heap_bytes = 0
        self._baselines = None
        self._touched = False
        # Content extents: start -> [(end, seq, source)].  ``source`` is bytes
        # or script text; freed memory keeps its stale content.
        self._extents = {}
        self._seq = 0

    # -- baselines -----------------------------------------------------

    def capture_baselines(self):
        if self._baselines is not None:
            raise StateError("baselines already captured")
        if self._touched:
            raise StateError("baselines must be captured before the first allocation")
        self._baselines = baselines_of(self.regions)
        return self._baselines

    @property
    def baselines(self):
        if self._baselines is None:
            raise StateError("baselines not captured")
        return self._baselines

    # -- allocation ----------------------------------------------------

    def _emit(self, event_kind, /, **payload):
        self.log.emit(event_kind, **payload)

    def _sys_alloc(self, size):
        addr = self._sys.alloc(size)
        if addr < 0:
            raise OutOfMemory(f"system heap exhausted allocating {size} bytes")
        self.records[addr] = AllocationRecord(addr, size, "System")
        self._freed.discard(addr)
        self.sys_heap_bytes += size
        self._emit("Alloc", allocator="System", addr=addr, size=size)
        return addr

    def allocate(self, allocator, size):
        if size <= 0:
            raise ValueError("allocation size must be positive")
        self._touched = True
        if allocator == "System" or size >= self.layout.bypass_threshold:
            return self._sys_alloc(size)
        if allocator != "Custom":
            raise ValueError(f"unknown allocator {allocator!r}")
        addr = self._arena.alloc(size)
        if addr < 0:
            chunk = self._sys_alloc(self.layout.arena_chunk_size)
            self._arena.add_chunk(chunk, self.layout.arena_chunk_size)
            addr = self._arena.alloc(size)
        self.records[addr] = AllocationRecord(addr, size, "Custom")
        self._freed.discard(addr)
        self.custom_heap_bytes += size
        self._emit("Alloc", allocator="Custom", addr=addr, size=size)
        return addr

    def free(self, allocator, addr):
        rec = self.records.get(addr)
        if rec is None or rec.allocator != allocator:
            kind = "double_free" if addr in self._freed else "invalid_free"
            self._emit("Fault", kind=kind, addr=addr)
            return
        del self.records[addr]
        self._freed.add(addr)
        if allocator == "System":
            self._sys.release(addr, rec.size)
            self.sys_heap_bytes -= rec.size
        else:
            self._arena.release(addr, rec.size)
            self.custom_heap_bytes -= rec.size
        self._emit("Free", allocator=allocator, addr=addr, size=rec.size)

    def record_at(self, addr):
        """Live record containing ``addr``, or None."""
        rec = self.records.get(addr)
        if rec is not None:
            return rec
        for r in self.records.values():
            if r.addr <= addr < r.addr + r.size:
                return r
        return None

    # -- content -------------------------------------------------------

    def is_mapped(self, addr, length=1):
        end = addr + length
        for r in self.regions:
            if r.base <= addr and end <= r.end:
                return True
        return False

    def _bind(self, addr, length, source):
        end = addr + length
        self._seq += 1
        older = [e for e in self._extents.get(addr, ()) if e[0] > end]
        older.append((end, self._seq, source))
        self._extents[addr] = older

    def bind_text(self, addr, text):
        """Back the allocation at ``addr`` with the UTF-16 bytes of ``text``."""
        self._bind(addr, 2 * _text.length(text), text)

    def write_bytes(self, addr, data):
        data = bytes(data)
        if not data:
            return
        if not self.is_mapped(addr, len(data)):
            self._emit("Fault", kind="access", addr=addr)
            return
        rec = self.record_at(addr)
        if rec is not None and addr + len(data) > rec.addr + rec.size:
            self._emit("Fault", kind="overflow", addr=rec.addr + rec.size)
        self._bind(addr, len(data), data)

    def read_bytes(self, addr, length):
        if not self.is_mapped(addr, length):
            self._emit("Fault", kind="access", addr=addr)
            return bytes(length)
        out = bytearray(length)
        hi = addr + length
        hits = sorted(((seq, start, end, src)
                       for start, group in self._extents.items() if start < hi
                       for end, seq, src in group if end > addr), reverse=True)
        pending = [(addr, hi)]
        for _, start, end, source in hits:
            if not pending:
                break
            rest = []
            for lo, hi in pending:
                a, b = max(lo, start), min(hi, end)
                if a >= b:
                    rest.append((lo, hi))
                    continue
                if isinstance(source, bytes):
                    chunk = source[a - start:b - start]
                else:
                    chunk = _text.to_bytes(source, a - start, b - start)
                out[a - addr:b - addr] = chunk
                if lo < a:
                    rest.append((lo, a))
                if b < hi:
                    rest.append((b, hi))
            pending = rest
        return bytes(out)

    def read_u32(self, addr):
        return int.from_bytes(self.read_bytes(addr, 4), "little")

    # -- registers -----------------------------------------------------

    def set_pc(self, addr):
        self.pc = addr & (ADDRESS_LIMIT - 1)
        self._emit("ExecTransfer", pc=self.pc)

    def set_sp(self, addr):
        self.sp = addr & (ADDRESS_LIMIT - 1)
        self._emit("StackPivot", sp=self.sp)

    # -- introspection -------------------------------------------------

    def derive_state(self):
        code, stack = self.baselines
        return AbstractState(self.sys_heap_bytes, self.custom_heap_bytes,
                             self.pc, self.sp, code, stack, self.log.count)

    def arena_chunks(self):
        return list(self._arena.chunks)

    def enumerate_regions(self):
        """Mapped regions sorted by base; the heap window is split around
        arena chunks so that no two listed regions overlap."""
        out = [r for r in self.regions if r.kind is not RegionKind.SYSTEM_HEAP]
        heap = self.heap_region
        cursor = heap.base
        for i, (base, size) in enumerate(self._arena.chunks):
            if base > cursor:
                out.append(MemoryRegion(cursor, base - cursor, RegionKind.SYSTEM_HEAP, heap.label))
            out.append(MemoryRegion(base, size, RegionKind.CUSTOM_ARENA, f"arena-{i}"))
            cursor = base + size
        if cursor < heap.end:
            out.append(MemoryRegion(cursor, heap.end - cursor, RegionKind.SYSTEM_HEAP, heap.label))
        out.sort(key=lambda r: r.base)
        return out


def init_address_space(layout=None, log=None):
    return MemoryModel(layout, log)


class StateTracker:
    """Rebuilds :class:`AbstractState` from the event stream alone.

    This is what the analyzer consults, so live runs and trace replays
    derive identical states.
    """

    def __init__(self, layout=None):
        regions = build_regions(layout or AddressSpaceConfig())
        self.pc, self.sp = initial_registers(regions)
        self.code_baseline, self.stack_baseline = baselines_of(regions)
        self.sys_heap_bytes = 0
        self.custom_heap_bytes = 0
        self.event_index = 0

    def apply(self, ev):
        kind = ev.kind
        if kind == "Alloc":
            if ev.payload["allocator"] == "System":
                self.sys_heap_bytes += ev.payload["size"]
            else:
                self.custom_heap_bytes += ev.payload["size"]
        elif kind == "Free":
            if ev.payload["allocator"] == "System":
                self.sys_heap_bytes -= ev.payload["size"]
            else:
                self.custom_heap_bytes -= ev.payload["size"]
        elif kind == "ExecTransfer":
            self.pc = ev.payload["pc"]
        elif kind == "StackPivot":
            self.sp = ev.payload["sp"]
        self.event_index = ev.index + 1

    def snapshot(self, index=None):
        return AbstractState(self.sys_heap_bytes, self.custom_heap_bytes,
                             self.pc, self.sp, self.code_baseline,
                             self.stack_baseline,
                             self.event_index if index is None else index)
