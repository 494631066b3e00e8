"""Pure-Python kernels.  Behaviour must match ``_kernels.pyx`` exactly."""

from bisect import bisect_left

# Label codes returned by scan_transitions, in detector evaluation order.
EXEC_CRAFTED = 0
CALL_STACK_REPLACE = 1
MEMFREE = 2
MEMALLOC = 3


class FreeList:
    """Address-ordered first-fit free list with coalescing.

    Blocks are kept as two parallel sorted lists.  Sizes handed to
    :meth:`alloc` and :meth:`release` are rounded up to ``align``.
    """

    def __init__(self, align=16):
        if align <= 0 or align & (align - 1):
            raise ValueError("alignment must be a power of two")
        self.align = align
        self._addrs = []
        self._sizes = []

    def _round(self, size):
        a = self.align
        return (size + a - 1) & ~(a - 1)

    def add(self, base, size):
        """Donate ``[base, base+size)``; must not overlap any free block."""
        self.release(base, size)

    def alloc(self, size):
        need = self._round(size)
        addrs, sizes = self._addrs, self._sizes
        for i in range(len(sizes)):
            if sizes[i] >= need:
                addr = addrs[i]
                if sizes[i] == need:
                    del addrs[i]
                    del sizes[i]
                else:
                    addrs[i] = addr + need
                    sizes[i] -= need
                return addr
        return -1

    def release(self, addr, size):
        size = self._round(size)
        addrs, sizes = self._addrs, self._sizes
        i = bisect_left(addrs, addr)
        if i < len(addrs) and addrs[i] < addr + size:
            raise ValueError("release overlaps a free block")
        if i > 0 and addrs[i - 1] + sizes[i - 1] > addr:
            raise ValueError("release overlaps a free block")
        merge_prev = i > 0 and addrs[i - 1] + sizes[i - 1] == addr
        merge_next = i < len(addrs) and addr + size == addrs[i]
        if merge_prev and merge_next:
            sizes[i - 1] += size + sizes[i]
            del addrs[i]
            del sizes[i]
        elif merge_prev:
            sizes[i - 1] += size
        elif merge_next:
            addrs[i] = addr
            sizes[i] += size
        else:
            addrs.insert(i, addr)
            sizes.insert(i, size)

    def blocks(self):
        return list(zip(self._addrs, self._sizes))

    def free_bytes(self):
        return sum(self._sizes)

    def __len__(self):
        return len(self._addrs)


def _inside(value, ranges):
    for lo, hi in ranges:
        if lo <= value < hi:
            return True
    return False


def scan_transitions(sys_bytes, custom_bytes, pcs, sps, code_ranges,
                     stack_ranges, aware):
    """Evaluate the four stock detectors over consecutive snapshot pairs.

    Columns are equal-length sequences, one entry per snapshot.  Returns a
    list of ``(label_code, value)`` where value is the new register for the
    control-flow labels and the absolute heap delta for the heap labels.
    """
    out = []
    n = len(pcs)
    if n < 2:
        return out
    prev_heap = sys_bytes[0] + custom_bytes[0] if aware else sys_bytes[0]
    for k in range(1, n):
        heap = sys_bytes[k] + custom_bytes[k] if aware else sys_bytes[k]
        pc = pcs[k]
        if pc != pcs[k - 1] and not _inside(pc, code_ranges):
            out.append((EXEC_CRAFTED, pc))
        sp = sps[k]
        if sp != sps[k - 1] and not _inside(sp, stack_ranges):
            out.append((CALL_STACK_REPLACE, sp))
        if heap < prev_heap:
            out.append((MEMFREE, prev_heap - heap))
        elif heap > prev_heap:
            out.append((MEMALLOC, heap - prev_heap))
        prev_heap = heap
    return out
