"""Immutable script text as ropes.

Script strings are sequences of 16-bit code units.  Sprays build hundreds of
half-megabyte strings out of a handful of distinct pieces, so long values are
kept as concatenation/slice trees and only flattened on demand.  Plain ``str``
is the leaf representation; one Python character is one code unit.
"""

FLAT_LIMIT = 4096
MAX_DEPTH = 48


class Rope:
    __slots__ = ("left", "right", "left_len", "length", "depth")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.left_len = length(left)
        self.length = self.left_len + length(right)
        self.depth = max(depth(left), depth(right)) + 1


class Slice:
    __slots__ = ("base", "start", "length", "depth")

    def __init__(self, base, start, size):
        self.base = base
        self.start = start
        self.length = size
        self.depth = depth(base) + 1


def length(t):
    return len(t) if isinstance(t, str) else t.length


def depth(t):
    return 0 if isinstance(t, str) else t.depth


def _collect(t, start, end, out):
    while True:
        if isinstance(t, str):
            out.append(t[start:end])
            return
        if isinstance(t, Slice):
            t, start, end = t.base, t.start + start, t.start + end
            continue
        ll = t.left_len
        if end <= ll:
            t = t.left
        elif start >= ll:
            t, start, end = t.right, start - ll, end - ll
        else:
            _collect(t.left, start, ll, out)
            t, start, end = t.right, 0, end - ll


def extract(t, start, end):
    """Flat ``str`` for code units ``[start, end)`` of ``t``."""
    if isinstance(t, str):
        return t[start:end]
    out = []
    _collect(t, start, end, out)
    return "".join(out)


def flatten(t):
    if isinstance(t, str):
        return t
    return extract(t, 0, t.length)


def concat(a, b):
    la, lb = length(a), length(b)
    if la == 0:
        return b
    if lb == 0:
        return a
    if la + lb <= FLAT_LIMIT:
        return flatten(a) + flatten(b)
    node = Rope(a, b)
    if node.depth > MAX_DEPTH:
        return flatten(node)
    return node


def substring(t, start, end):
    n = length(t)
    start = max(0, min(start, n))
    end = max(start, min(end, n))
    size = end - start
    if size == n:
        return t
    if size <= FLAT_LIMIT:
        return extract(t, start, end)
    if isinstance(t, Slice):
        return Slice(t.base, t.start + start, size)
    node = Slice(t, start, size)
    if node.depth > MAX_DEPTH:
        return extract(t, start, end)
    return node


def code_unit(t, i):
    return ord(extract(t, i, i + 1))


def to_bytes(t, start, end):
    """UTF-16LE bytes of byte range ``[start, end)`` of the text's storage."""
    first = start // 2
    last = min((end + 1) // 2, length(t))
    raw = extract(t, first, last).encode("utf-16-le", "surrogatepass")
    off = start - first * 2
    return raw[off:off + (end - start)]
