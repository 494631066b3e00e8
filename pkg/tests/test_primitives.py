import copy

import pytest
from hypothesis import given, settings, strategies as st

from wmrecon import primitives as P
from wmrecon.memory_model import AbstractState, MemoryModel

KiB, MiB = 1024, 1024 * 1024
CODE, STACK = (lambda m: m.baselines if m.capture_baselines() else None)(MemoryModel())
ENTRY, SP0 = 0x00401000, 0x0012FF80


def W(sys=0, custom=0, pc=ENTRY, sp=SP0, i=0):
    return AbstractState(sys, custom, pc, sp, CODE, STACK, i)


def test_memalloc_one_mib():
    assert P.detect_memalloc(W(0), W(MiB, i=1)) == P.PrimitiveLabel("memalloc", "1MB")


def test_memalloc_equal_is_none():
    assert P.detect_memalloc(W(100), W(100, i=1)) is None


def test_custom_growth_depends_on_mode():
    assert P.detect_memalloc(W(custom=0), W(custom=0x58, i=1)) is None
    assert P.detect_memalloc(W(custom=0), W(custom=0x58, i=1), aware=True) == ("memalloc", "88B")


def test_memfree_examples():
    assert P.detect_memfree(W(511 * KiB), W(0, i=1)) == ("memfree", "511KB")
    assert P.detect_memfree(W(0), W(0, i=1)) is None
    assert P.detect_memfree(W(custom=0x58), W(custom=0, i=1)) is None
    assert P.detect_memfree(W(custom=0x58), W(custom=0, i=1), aware=True) == ("memfree", "88B")


def test_exec_crafted_examples():
    assert P.detect_execCrafted(W(), W(pc=0x0c0d0c0d, i=1)) == ("execCrafted", "0x0c0d0c0d")
    assert P.detect_execCrafted(W(), W(pc=0x00401234, i=1)) is None
    assert P.detect_execCrafted(W(), W(pc=0x046ae1ad, i=1)) == ("execCrafted", "0x046ae1ad")


def test_call_stack_replace_examples():
    assert P.detect_callStackReplace(W(), W(sp=0x046ae04c, i=1)) == ("callStackReplace", "0x046ae04c")
    assert P.detect_callStackReplace(W(), W(sp=0x0012F100, i=1)) is None
    assert P.detect_callStackReplace(W(sp=0x046ae04c), W(sp=0x046ae04c, i=1)) is None


@pytest.mark.parametrize("n,text", [
    (0, "0B"), (88, "88B"), (1023, "1023B"), (1024, "1KB"), (511 * KiB + 1000, "511KB"),
    (MiB, "1MB"), (MiB + MiB // 2, "1.5MB"), (MiB + MiB // 10 - 1, "1MB"), (5 * MiB, "5MB"),
])
def test_render_size(n, text):
    assert P.render_size(n) == text


def test_transitions_identify_spray_like():
    snaps = [W(k * 511 * KiB, i=k) for k in range(501)]
    lab = P.transitions_identify(P.stock_registry(), snaps)
    assert lab.text == "+".join(["memalloc"] * 500)
    assert set(lab.infos) == {"511KB"}


def test_transitions_identify_pivot_then_jump():
    snaps = [W(0), W(MiB, i=1), W(MiB, sp=0x046ae04c, i=2), W(MiB, sp=0x046ae04c, pc=0x046ae1ad, i=3)]
    lab = P.transitions_identify(P.stock_registry(), snaps)
    assert lab.text == "memalloc+callStackReplace+execCrafted"
    assert lab.infos == ["1MB", "0x046ae04c", "0x046ae1ad"]


def test_single_snapshot_is_epsilon():
    assert P.transitions_identify(P.stock_registry(), [W()]).is_epsilon


def test_registry_order_within_pair():
    lab = P.transitions_identify(P.stock_registry(), [W(), W(64, pc=0x0c0c0c0c, sp=0x0c0c0000, i=1)])
    assert lab.text == "execCrafted+callStackReplace+memalloc"


def test_registry_rejects_duplicates():
    reg = P.stock_registry()
    with pytest.raises(ValueError):
        reg.register("memalloc", P.detect_memalloc)


def test_custom_detector_via_spec():
    reg = P.register_from_spec(P.stock_registry(), "grow=wmrecon.primitives:detect_memalloc")
    assert not reg.is_stock()
    lab = P.transitions_identify(reg, [W(), W(32, i=1)])
    assert lab.text == "memalloc+grow"


def test_compress():
    labels = P.LabelString(tuple([P.PrimitiveLabel("memalloc", "511KB")] * 500
                                 + [P.PrimitiveLabel("memfree", "1KB"), P.PrimitiveLabel("memfree", "2KB")]
                                 + [P.PrimitiveLabel("execCrafted", "0x0c0d0c0d")]))
    assert P.compress(labels) == "memalloc×500[511KB]+memfree×2[1KB..2KB]+execCrafted[0x0c0d0c0d]"
    assert P.compress(P.LabelString(())) == ""


# -- properties ------------------------------------------------------------

u32 = st.integers(0, (1 << 32) - 1)
counts = st.integers(0, 1 << 30)
states = st.builds(lambda s, c, pc, sp, i: W(s, c, pc, sp, i), counts, counts,
                   st.one_of(u32, st.integers(0x00401000, 0x004FFFFF)),
                   st.one_of(u32, st.integers(0x0012F000, 0x0012FFFF)), st.integers(0, 100))


@settings(max_examples=500)
@given(states, states, st.booleans())
def test_mutual_exclusion(w, w2, aware):
    assert not (P.detect_memalloc(w, w2, aware) and P.detect_memfree(w, w2, aware))


@settings(max_examples=200)
@given(states, st.integers(2, 20), st.booleans())
def test_epsilon_soundness(w, n, aware):
    snaps = [w] * n
    assert P.transitions_identify(P.stock_registry(), snaps, aware).is_epsilon


@settings(max_examples=300)
@given(states, states, st.booleans())
def test_detectors_do_not_modify_inputs(w, w2, aware):
    before = (copy.deepcopy(w), copy.deepcopy(w2))
    for det in P.stock_registry():
        det.fn(w, w2, aware)
    assert (w, w2) == before
    assert w.code_baseline is CODE and w2.stack_baseline is STACK


@settings(max_examples=300)
@given(st.lists(states, min_size=2, max_size=12), st.booleans())
def test_kernel_path_matches_generic_path(snaps, aware):
    stock = P.stock_registry()
    generic = P.DetectorRegistry((d.name, lambda w, w2, a, f=d.fn: f(w, w2, a)) for d in stock)
    assert not generic.is_stock()
    assert P.transitions_identify(stock, snaps, aware) == P.transitions_identify(generic, snaps, aware)
