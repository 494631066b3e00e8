# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels.  Behaviour must match ``_kernels_py.py`` exactly."""

from libcpp.vector cimport vector

ctypedef long long i64

cdef int EXEC_CRAFTED = 0
cdef int CALL_STACK_REPLACE = 1
cdef int MEMFREE = 2
cdef int MEMALLOC = 3


cdef class FreeList:
    """Address-ordered first-fit free list with coalescing."""

    cdef vector[i64] _addrs
    cdef vector[i64] _sizes
    cdef readonly i64 align

    def __init__(self, align=16):
        if align <= 0 or align & (align - 1):
            raise ValueError("alignment must be a power of two")
        self.align = align

    cdef inline i64 _round(self, i64 size):
        return (size + self.align - 1) & ~(self.align - 1)

    def add(self, i64 base, i64 size):
        self.release(base, size)

    def alloc(self, i64 size):
        cdef i64 need = self._round(size)
        cdef size_t i, n = self._sizes.size()
        cdef i64 addr
        for i in range(n):
            if self._sizes[i] >= need:
                addr = self._addrs[i]
                if self._sizes[i] == need:
                    self._addrs.erase(self._addrs.begin() + i)
                    self._sizes.erase(self._sizes.begin() + i)
                else:
                    self._addrs[i] = addr + need
                    self._sizes[i] -= need
                return addr
        return -1

    cdef size_t _bisect(self, i64 addr):
        cdef size_t lo = 0, hi = self._addrs.size(), mid
        while lo < hi:
            mid = (lo + hi) // 2
            if self._addrs[mid] < addr:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def release(self, i64 addr, i64 size):
        size = self._round(size)
        cdef size_t i = self._bisect(addr)
        cdef size_t n = self._addrs.size()
        if i < n and self._addrs[i] < addr + size:
            raise ValueError("release overlaps a free block")
        if i > 0 and self._addrs[i - 1] + self._sizes[i - 1] > addr:
            raise ValueError("release overlaps a free block")
        cdef bint merge_prev = i > 0 and self._addrs[i - 1] + self._sizes[i - 1] == addr
        cdef bint merge_next = i < n and addr + size == self._addrs[i]
        if merge_prev and merge_next:
            self._sizes[i - 1] += size + self._sizes[i]
            self._addrs.erase(self._addrs.begin() + i)
            self._sizes.erase(self._sizes.begin() + i)
        elif merge_prev:
            self._sizes[i - 1] += size
        elif merge_next:
            self._addrs[i] = addr
            self._sizes[i] += size
        else:
            self._addrs.insert(self._addrs.begin() + i, addr)
            self._sizes.insert(self._sizes.begin() + i, size)

    def blocks(self):
        return [(self._addrs[i], self._sizes[i]) for i in range(self._addrs.size())]

    def free_bytes(self):
        cdef i64 total = 0
        for s in self._sizes:
            total += s
        return total

    def __len__(self):
        return self._addrs.size()


cdef bint _inside(i64 value, vector[i64]& lo, vector[i64]& hi):
    cdef size_t j
    for j in range(lo.size()):
        if lo[j] <= value < hi[j]:
            return True
    return False


def scan_transitions(sys_bytes, custom_bytes, pcs, sps, code_ranges,
                     stack_ranges, bint aware):
    cdef vector[i64] clo, chi, slo, shi
    for a, b in code_ranges:
        clo.push_back(a)
        chi.push_back(b)
    for a, b in stack_ranges:
        slo.push_back(a)
        shi.push_back(b)
    cdef Py_ssize_t n = len(pcs), k
    out = []
    if n < 2:
        return out
    cdef vector[i64] sysv, cusv, pcv, spv
    sysv.reserve(n); cusv.reserve(n); pcv.reserve(n); spv.reserve(n)
    for k in range(n):
        sysv.push_back(sys_bytes[k])
        cusv.push_back(custom_bytes[k])
        pcv.push_back(pcs[k])
        spv.push_back(sps[k])
    cdef i64 prev_heap = sysv[0] + cusv[0] if aware else sysv[0]
    cdef i64 heap, pc, sp
    for k in range(1, n):
        heap = sysv[k] + cusv[k] if aware else sysv[k]
        pc = pcv[k]
        if pc != pcv[k - 1] and not _inside(pc, clo, chi):
            out.append((EXEC_CRAFTED, pc))
        sp = spv[k]
        if sp != spv[k - 1] and not _inside(sp, slo, shi):
            out.append((CALL_STACK_REPLACE, sp))
        if heap < prev_heap:
            out.append((MEMFREE, prev_heap - heap))
        elif heap > prev_heap:
            out.append((MEMALLOC, heap - prev_heap))
        prev_heap = heap
    return out
