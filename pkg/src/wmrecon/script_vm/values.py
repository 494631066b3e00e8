"""Script runtime values and their conversions."""

import math

from wmrecon.script_vm import text as T


class _Undefined:
    __slots__ = ()

    def __repr__(self):
        return "undefined"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


class JSString:
    """A string value.

    ``addr`` is the backing System heap allocation, or None for literals,
    empty strings, marker arguments and strings whose memory was released.
    """

    __slots__ = ("text", "addr", "refs")

    def __init__(self, text, addr=None):
        self.text = text
        self.addr = addr
        self.refs = 0

    def __len__(self):
        return T.length(self.text)

    def flat(self):
        return T.flatten(self.text)

    def __repr__(self):
        s = T.extract(self.text, 0, min(24, len(self)))
        return f"JSString({s!r}, len={len(self)}, addr={self.addr})"


class JSArray:
    __slots__ = ("items", "refs", "dead")

    def __init__(self, items=None):
        self.items = items if items is not None else []
        self.refs = 0
        self.dead = False


class JSObject:
    __slots__ = ("props", "refs", "dead")

    def __init__(self, props=None):
        self.props = props if props is not None else {}
        self.refs = 0
        self.dead = False


class PropCopy:
    """Element-owned copy of a string property value."""

    __slots__ = ("text", "addr", "allocator")

    def __init__(self, text, addr, allocator):
        self.text = text
        self.addr = addr
        self.allocator = allocator


class Element:
    """DOM-analog element.  ``record`` is its Custom-heap record address;
    the document root has none."""

    __slots__ = ("kind", "record", "props", "children", "parent", "alive", "serial")

    def __init__(self, kind, record, serial):
        self.kind = kind
        self.record = record
        self.props = {}
        self.children = []
        self.parent = None
        self.alive = True
        self.serial = serial

    def __repr__(self):
        state = "" if self.alive else " freed"
        return f"<{self.kind}#{self.serial}{state}>"


class Function:
    __slots__ = ("decl", "locals")

    def __init__(self, decl, local_names):
        self.decl = decl
        self.locals = local_names


class Builtin:
    __slots__ = ("name", "fn", "quiet_args")

    def __init__(self, name, fn, quiet_args=False):
        self.name = name
        self.fn = fn
        self.quiet_args = quiet_args


class BoundMethod:
    __slots__ = ("name", "this", "fn")

    def __init__(self, name, this, fn):
        self.name = name
        self.this = this
        self.fn = fn


def type_name(v):
    if v is UNDEFINED:
        return "undefined"
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, JSString):
        return "string"
    if isinstance(v, (Function, Builtin, BoundMethod)):
        return "function"
    if isinstance(v, Element):
        return "element"
    if isinstance(v, JSArray):
        return "array"
    return "object"


def number_to_string(n):
    if isinstance(n, bool):
        return "true" if n else "false"
    if isinstance(n, int):
        return str(n)
    if math.isnan(n):
        return "NaN"
    if math.isinf(n):
        return "Infinity" if n > 0 else "-Infinity"
    if n.is_integer() and abs(n) < 1e21:
        return str(int(n))
    return repr(n)


def to_text(v):
    """ToString, as script text (may be a rope)."""
    if isinstance(v, JSString):
        return v.text
    if v is UNDEFINED:
        return "undefined"
    if v is None:
        return "null"
    if isinstance(v, (bool, int, float)):
        return number_to_string(v)
    if isinstance(v, JSArray):
        return ",".join("" if x is UNDEFINED or x is None else T.flatten(to_text(x))
                        for x in v.items)
    if isinstance(v, Element):
        return f"[object {v.kind}]"
    if isinstance(v, (Function, Builtin, BoundMethod)):
        return "function"
    return "[object Object]"


def to_number(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, (int, float)):
        return v
    if v is None:
        return 0
    if isinstance(v, JSString):
        s = v.flat().strip()
        if not s:
            return 0
        try:
            if s[:2].lower() == "0x":
                return int(s[2:], 16)
            f = float(s)
            return int(f) if f.is_integer() and "." not in s and "e" not in s.lower() else f
        except ValueError:
            return math.nan
    return math.nan


def to_int32(v):
    n = to_number(v)
    if isinstance(n, float):
        if math.isnan(n) or math.isinf(n):
            return 0
        n = int(n)
    n &= 0xFFFFFFFF
    return n - (1 << 32) if n & 0x80000000 else n


def to_uint32(v):
    return to_int32(v) & 0xFFFFFFFF


def truthy(v):
    if v is UNDEFINED or v is None or v is False:
        return False
    if v is True:
        return True
    if isinstance(v, (int, float)):
        return not (v == 0 or v != v)
    if isinstance(v, JSString):
        return len(v) > 0
    return True


def strict_equals(a, b):
    if isinstance(a, JSString) and isinstance(b, JSString):
        return len(a) == len(b) and a.flat() == b.flat()
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    return a is b


def loose_equals(a, b):
    if (a is None or a is UNDEFINED) and (b is None or b is UNDEFINED):
        return True
    if a is None or a is UNDEFINED or b is None or b is UNDEFINED:
        return False
    prim = (bool, int, float, JSString)
    if isinstance(a, prim) and isinstance(b, prim):
        if isinstance(a, JSString) and isinstance(b, JSString):
            return strict_equals(a, b)
        return to_number(a) == to_number(b)
    return a is b
