import pytest
from hypothesis import given, settings, strategies as st

from oracles import AllocatorOracle, ledger_counts
from wmrecon.memory_model import (
    AddressSpaceConfig, ConfigurationError, MemoryModel, OutOfMemory, RegionKind,
    StateError, StateTracker, init_address_space,
)
from wmrecon.trace import EventLog

MiB = 1024 * 1024


def model(layout=None):
    events = []
    log = EventLog()
    log.subscribe(events.append)
    m = init_address_space(layout or AddressSpaceConfig(), log)
    m.capture_baselines()
    return m, events


def test_default_layout_regions():
    m, _ = model()
    regions = m.enumerate_regions()
    assert [(r.base, r.kind) for r in regions] == [
        (0x0012F000, RegionKind.STACK), (0x00401000, RegionKind.CODE),
        (0x00600000, RegionKind.SYSTEM_HEAP)]
    assert m.pc == 0x00401000
    assert regions[0].contains(m.sp)


def test_overlapping_code_windows_rejected():
    lay = AddressSpaceConfig(code=((0x00401000, 0x1000, "a"), (0x00401800, 0x1000, "b")))
    with pytest.raises(ConfigurationError):
        init_address_space(lay)


def test_wrapping_region_rejected():
    with pytest.raises(ConfigurationError):
        init_address_space(AddressSpaceConfig(heap_base=0xFFFFF000, heap_size=0x2000))


def test_empty_stack_rejected():
    with pytest.raises(ConfigurationError):
        init_address_space(AddressSpaceConfig(stack=()))


def test_baselines():
    m, _ = model()
    code, stack = m.baselines
    assert {(r.base, r.size) for r in code} == {(0x00401000, 0x000FF000)}
    assert {(r.base, r.size) for r in stack} == {(0x0012F000, 0x1000)}
    with pytest.raises(StateError):
        m.capture_baselines()


def test_jit_window_in_baseline():
    lay = AddressSpaceConfig(code=((0x00401000, 0x000FF000, "image"), (0x00500000, 0x100000, "jit")))
    m, _ = model(lay)
    assert {r.label for r in m.baselines[0]} == {"image", "jit"}


def test_baselines_after_allocation_rejected():
    m = init_address_space()
    m.allocate("System", 16)
    with pytest.raises(StateError):
        m.capture_baselines()


def test_five_one_mib_allocations():
    m, _ = model()
    for _ in range(5):
        m.allocate("System", MiB)
    assert m.derive_state().sys_heap_bytes == 5 * MiB


def test_custom_spill_matches_oracle():
    m, events = model()
    oracle = AllocatorOracle(0x00600000, 0x3FA00000, MiB, 16 * 1024)
    assert m.allocate("Custom", 0x58) == oracle.allocate("Custom", 0x58)
    got = [(e.kind, e.payload["allocator"], e.payload["addr"], e.payload["size"]) for e in events]
    assert got == oracle.events
    assert [g[1] for g in got] == ["System", "Custom"]
    w = m.derive_state()
    assert (w.sys_heap_bytes, w.custom_heap_bytes) == (MiB, 0x58)


def test_large_custom_bypasses_arena():
    m, events = model()
    m.allocate("Custom", 64 * 1024)
    assert [e.payload["allocator"] for e in events] == ["System"]
    assert m.arena_chunks() == []


def test_system_free_decreases():
    m, _ = model()
    a = m.allocate("System", 511 * 1024)
    m.free("System", a)
    assert m.sys_heap_bytes == 0


def test_custom_free_is_invisible_to_system_counter():
    m, _ = model()
    b = m.allocate("Custom", 0x58)
    before = m.sys_heap_bytes
    m.free("Custom", b)
    assert m.sys_heap_bytes == before
    assert m.custom_heap_bytes == 0


def test_double_free_faults():
    m, events = model()
    a = m.allocate("System", 32)
    m.free("System", a)
    m.free("System", a)
    assert events[-1].kind == "Fault" and events[-1].payload["kind"] == "double_free"
    m.free("System", 0x00700000)
    assert events[-1].payload["kind"] == "invalid_free"


def test_write_read_roundtrip():
    m, _ = model()
    a = m.allocate("System", 64)
    m.write_bytes(a, b"\x01\x02\x03\x04" * 4)
    assert m.read_bytes(a, 16) == b"\x01\x02\x03\x04" * 4
    assert m.read_u32(a) == 0x04030201


def test_overflow_into_neighbour():
    m, events = model()
    oracle = AllocatorOracle(0x00600000, 0x3FA00000, MiB, 16 * 1024)
    a = m.allocate("System", 16)
    b = m.allocate("System", 16)
    assert (a, b) == (oracle.allocate("System", 16), oracle.allocate("System", 16))
    assert b == a + 16
    m.write_bytes(b, b"B" * 16)
    m.write_bytes(a, b"A" * 20)
    assert events[-1].kind == "Fault" and events[-1].payload == {"kind": "overflow", "addr": b}
    assert m.read_bytes(b, 4) == b"AAAA"
    assert m.read_bytes(b + 4, 12) == b"B" * 12


def test_unmapped_access_faults():
    m, events = model()
    assert m.read_bytes(0x10, 4) == bytes(4)
    assert events[-1].payload == {"kind": "access", "addr": 0x10}
    m.write_bytes(0x10, b"x")
    assert events[-1].payload["kind"] == "access"


def test_registers_emit_events():
    m, events = model()
    m.set_pc(0x0c0d0c0d)
    m.set_sp(0x046ae04c)
    assert [(e.kind, e.payload) for e in events] == [
        ("ExecTransfer", {"pc": 0x0c0d0c0d}), ("StackPivot", {"sp": 0x046ae04c})]
    w = m.derive_state()
    assert (w.pc, w.sp, w.event_index) == (0x0c0d0c0d, 0x046ae04c, 2)


def test_fresh_state():
    m, events = model()
    w = m.derive_state()
    assert (w.sys_heap_bytes, w.custom_heap_bytes, w.pc, w.event_index) == (0, 0, 0x00401000, 0)
    assert events == []


def test_enumerate_after_spill():
    m, _ = model()
    m.allocate("Custom", 0x58)
    regions = m.enumerate_regions()
    arena = [r for r in regions if r.kind is RegionKind.CUSTOM_ARENA]
    assert [(r.base, r.size) for r in arena] == [(0x00600000, MiB)]
    heap = [r for r in regions if r.kind is RegionKind.SYSTEM_HEAP]
    assert sum(r.size for r in heap) + MiB == 0x3FA00000


def test_out_of_memory():
    m, _ = model(AddressSpaceConfig(heap_size=0x1000))
    with pytest.raises(OutOfMemory):
        m.allocate("System", 0x2000)


# -- properties ------------------------------------------------------------

SMALL = AddressSpaceConfig(heap_size=0x40000, arena_chunk_size=0x1000, bypass_threshold=0x400)

ops = st.lists(st.one_of(
    st.tuples(st.just("alloc"), st.sampled_from(["System", "Custom"]), st.integers(1, 0x900)),
    st.tuples(st.just("free"), st.integers(0, 1 << 16)),
    st.tuples(st.just("pc"), st.integers(0, (1 << 32) - 1)),
), max_size=80)


def drive(seq, layout=SMALL):
    m, events = model(layout)
    oracle = AllocatorOracle(layout.heap_base, layout.heap_size,
                             layout.arena_chunk_size, layout.bypass_threshold)
    live = []
    chunk_history = []
    for op in seq:
        if op[0] == "alloc":
            _, allocator, size = op
            addr = m.allocate(allocator, size)
            assert addr == oracle.allocate(allocator, size)
            real = "System" if allocator == "System" or size >= layout.bypass_threshold else "Custom"
            live.append((real, addr, size))
        elif op[0] == "free" and live:
            real, addr, _ = live.pop(op[1] % len(live))
            m.free(real, addr)
            oracle.free(real, addr)
        elif op[0] == "pc":
            m.set_pc(op[1])
        chunk_history.append(list(m.arena_chunks()))
        spans = sorted((a, a + s) for _, a, s in live)
        assert all(x[1] <= y[0] for x, y in zip(spans, spans[1:]))
    return m, events, oracle, chunk_history


@settings(max_examples=150, deadline=None)
@given(ops)
def test_allocator_matches_oracle(seq):
    m, events, oracle, _ = drive(seq)
    heap = [(e.kind, e.payload["allocator"], e.payload["addr"], e.payload["size"])
            for e in events if e.kind in ("Alloc", "Free")]
    assert heap == oracle.events
    assert m.sys_heap_bytes == oracle.sys_bytes()
    assert m.custom_heap_bytes == oracle.custom_bytes()


@settings(max_examples=150, deadline=None)
@given(ops)
def test_conservation(seq):
    _, events, _, _ = drive(seq)
    tracker = StateTracker(SMALL)
    for (index, sys_b, cus_b), ev in zip(ledger_counts(events), events):
        tracker.apply(ev)
        assert (tracker.sys_heap_bytes, tracker.custom_heap_bytes) == (sys_b, cus_b)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 0x3ff), min_size=1, max_size=40))
def test_blind_spot(sizes):
    m, _ = model(SMALL)
    m.free("Custom", m.allocate("Custom", 1))   # materialise the first chunk
    base = m.sys_heap_bytes
    for size in sizes:
        if m.custom_heap_bytes + 0x400 > SMALL.arena_chunk_size:
            break
        m.free("Custom", m.allocate("Custom", size))
        assert m.sys_heap_bytes == base
    assert len(m.arena_chunks()) == 1


@settings(max_examples=100, deadline=None)
@given(ops)
def test_chunks_never_shrink(seq):
    _, _, _, history = drive(seq)
    for before, after in zip(history, history[1:]):
        assert set(before) <= set(after)


@settings(max_examples=60, deadline=None)
@given(ops)
def test_determinism(seq):
    m1, e1, _, _ = drive(seq)
    m2, e2, _, _ = drive(seq)
    assert e1 == e2
    assert m1.derive_state() == m2.derive_state()


@settings(max_examples=60, deadline=None)
@given(ops)
def test_regions_sorted_disjoint(seq):
    m, _, _, _ = drive(seq)
    regions = m.enumerate_regions()
    assert all(a.end <= b.base for a, b in zip(regions, regions[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_aslr_is_deterministic(seed):
    lay = AddressSpaceConfig(aslr_seed=seed)
    regions = MemoryModel(lay).regions
    assert regions == MemoryModel(lay).regions
    assert all(a.end <= b.base for a, b in zip(regions, regions[1:]))
