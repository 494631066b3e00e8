"""Tree-walking interpreter with memory-model side effects.

Memory semantics of script values:

* Strings produced at runtime (concatenation, ``unescape``, ``substring``,
  element property reads) are System heap allocations of two bytes per code
  unit.  Literals and empty strings own no heap memory.
* Strings, arrays and objects are reference counted by script-level slots
  (variables, array items, object properties).  A value created during a
  statement and never stored is released when that statement ends.
* Elements are owned by the document tree, not by script references.  Each
  holds a fixed-size Custom allocation; string properties are copied into
  Custom allocations (System ones above the bypass threshold).
* Arguments of ``setMarker``/``resetMarker`` are evaluated without touching
  memory, and a bare marker call emits no statement events.
* ``setTimeout``/``setInterval`` callbacks run once, in registration order,
  just before the next marker event or at the end of the script, so their
  effects land in the candidate that was open when they were registered.
"""

import math
import re
import zlib
from typing import NamedTuple, Optional

from wmrecon.memory_model import OutOfMemory, RegionKind
from wmrecon.script_vm import ast as A
from wmrecon.script_vm import text as T
from wmrecon.script_vm.values import (
    UNDEFINED, BoundMethod, Builtin, Element, Function, JSArray, JSObject,
    JSString, PropCopy, loose_equals, strict_equals, to_int32, to_number,
    to_text, to_uint32, truthy, type_name,
)
from wmrecon.trace import EventLimitReached

TERMINATED = "Terminated"
TIMED_OUT = "TimedOut"
SCRIPT_ERROR = "ScriptError"
ABORTED = "Aborted"

DEFAULT_ELEMENT_SIZE = 0x58
MAX_ARRAY_INDEX = 1 << 24


class ScriptError(Exception):
    def __init__(self, message, span=None):
        self.message = message
        self.span = span
        where = f"{span[0]}:{span[1]}: " if span else ""
        super().__init__(where + message)


class RunOutcome(NamedTuple):
    status: str
    event_count: int
    error: Optional[str] = None


class ExecutionHooks:
    """Callbacks invoked synchronously while a script runs."""

    def on_event(self, event):
        pass

    def before_statement(self, stmt):
        pass

    def after_statement(self, stmt):
        pass


class _Flow(Exception):
    pass


class _Break(_Flow):
    pass


class _Continue(_Flow):
    pass


class _Return(_Flow):
    def __init__(self, value):
        self.value = value


_UNESCAPE = re.compile(r"%u([0-9a-fA-F]{4})|%([0-9a-fA-F]{2})")


def _local_names(decl):
    names = list(decl.params)
    for node in A.walk(decl.body):
        if isinstance(node, A.VarDecl):
            names.extend(d.name for d in node.decls)
    return list(dict.fromkeys(names))


def _top_level_vars(program):
    names = []
    stack = list(program.body)
    while stack:
        node = stack.pop()
        if isinstance(node, A.FunctionDecl):
            continue
        if isinstance(node, A.VarDecl):
            names.extend(d.name for d in node.decls)
        stack.extend(A.children(node))
    return names


def _index_key(v):
    """Array index for ``v`` or None if it is not a valid index."""
    if isinstance(v, bool):
        return None
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if isinstance(v, int) and 0 <= v:
        return v
    if isinstance(v, JSString):
        s = v.flat()
        if s.isdigit() and (s == "0" or s[0] != "0"):
            return int(s)
    return None


class Interpreter:
    def __init__(self, program, model, hooks=None,
                 element_size=DEFAULT_ELEMENT_SIZE, max_call_depth=128):
        self.program = program
        self.model = model
        self.emit = model.log.emit
        self.element_size = element_size
        self.max_call_depth = max_call_depth
        self.hooks = hooks
        self._before = self._after = None
        if hooks is not None:
            if type(hooks).before_statement is not ExecutionHooks.before_statement:
                self._before = hooks.before_statement
            if type(hooks).after_statement is not ExecutionHooks.after_statement:
                self._after = hooks.after_statement
        self.globals = {}
        self.frames = []
        self.locals = None
        self.temps = []
        self.quiet = 0
        self.deferred = []
        self._flushing = False
        self.strings = {}          # addr -> live heap-backed JSString
        self.elements = {}         # serial -> live Element, creation order
        self._serial = 0
        self.root = Element("document", None, 0)
        self._code = next(r for r in model.regions if r.kind is RegionKind.CODE)
        self.builtins = self._make_builtins()
        self._exec = {
            A.VarDecl: self._exec_var, A.ExprStmt: self._exec_expr,
            A.Empty: self._exec_nothing, A.Block: self._exec_block,
            A.If: self._exec_if, A.While: self._exec_while, A.For: self._exec_for,
            A.Return: self._exec_return, A.Break: self._exec_break,
            A.Continue: self._exec_continue, A.FunctionDecl: self._exec_nothing,
        }
        self._ev = {
            A.Num: self._ev_num, A.Str: self._ev_str, A.Const: self._ev_const,
            A.Ident: self._ev_ident, A.ArrayLit: self._ev_array,
            A.ObjectLit: self._ev_object, A.Member: self._ev_member,
            A.Index: self._ev_index, A.Call: self._ev_call, A.New: self._ev_new,
            A.Unary: self._ev_unary, A.Update: self._ev_update,
            A.Binary: self._ev_binary, A.Logical: self._ev_logical,
            A.Conditional: self._ev_conditional, A.Assign: self._ev_assign,
        }

    # -- driver ----------------------------------------------------------

    def run(self):
        self.model.baselines  # raises StateError if not captured
        log = self.model.log
        listener = None
        if self.hooks is not None and type(self.hooks).on_event is not ExecutionHooks.on_event:
            listener = self.hooks.on_event
            log.subscribe(listener)
        try:
            for name in _top_level_vars(self.program):
                self.globals.setdefault(name, UNDEFINED)
            for stmt in self.program.body:
                if isinstance(stmt, A.FunctionDecl):
                    self.globals[stmt.name] = Function(stmt, _local_names(stmt))
            for stmt in self.program.body:
                self._stmt(stmt)
            self._flush_deferred()
            outcome = RunOutcome(TERMINATED, log.count)
        except EventLimitReached:
            outcome = RunOutcome(TIMED_OUT, log.count)
        except ScriptError as exc:
            outcome = RunOutcome(SCRIPT_ERROR, log.count, str(exc))
        except RecursionError:
            outcome = RunOutcome(SCRIPT_ERROR, log.count, "maximum recursion depth exceeded")
        except OutOfMemory as exc:
            outcome = RunOutcome(ABORTED, log.count, str(exc))
        finally:
            if listener is not None:
                log.listeners.remove(listener)
        return outcome

    # -- reference counting ----------------------------------------------

    def _incref(self, v):
        t = type(v)
        if t is JSString:
            if v.addr is not None:
                v.refs += 1
        elif t is JSArray or t is JSObject:
            v.refs += 1

    def _decref(self, v):
        t = type(v)
        if t is JSString:
            if v.addr is not None:
                v.refs -= 1
                if v.refs <= 0:
                    self._free_string(v)
        elif t is JSArray or t is JSObject:
            v.refs -= 1
            if v.refs <= 0:
                self._release_container(v)

    def _free_string(self, s):
        addr = s.addr
        s.addr = None
        del self.strings[addr]
        self.model.free("System", addr)

    def _release_container(self, c):
        if c.dead:
            return
        c.dead = True
        values = c.items if type(c) is JSArray else list(c.props.values())
        for v in values:
            self._decref(v)

    def _sweep(self, mark):
        temps = self.temps
        if len(temps) > mark:
            pending = temps[mark:]
            del temps[mark:]
            for v in pending:
                if v.refs <= 0:
                    if type(v) is JSString:
                        if v.addr is not None:
                            self._free_string(v)
                    else:
                        self._release_container(v)

    def _unpin(self, v):
        t = type(v)
        if (t is JSString and v.addr is not None) or t is JSArray or t is JSObject:
            v.refs -= 1
            if v.refs <= 0:
                self.temps.append(v)

    # -- value construction ----------------------------------------------

    def new_string(self, text):
        s = JSString(text)
        n = T.length(text)
        if n and not self.quiet:
            addr = self.model.allocate("System", 2 * n)
            self.model.bind_text(addr, text)
            s.addr = addr
            self.strings[addr] = s
            self.temps.append(s)
        return s

    def _new_array(self, items):
        a = JSArray(items)
        for v in items:
            self._incref(v)
        self.temps.append(a)
        return a

    def _new_object(self, props):
        o = JSObject(props)
        for v in props.values():
            self._incref(v)
        self.temps.append(o)
        return o

    # -- statements ------------------------------------------------------

    def _stmt(self, node):
        t = type(node)
        if t is A.ExprStmt and A.marker_call(node):
            self._eval(node.expr)
            return
        if t is A.MarkerStmt:
            self._flush_deferred()
            if node.name is None:
                self.emit("MarkerReset", span=node.span)
            else:
                self.emit("MarkerSet", name=node.name, span=node.span)
            return
        span = node.span
        self.emit("StmtBegin", span=span, compound=node.COMPOUND)
        if self._before is not None:
            self._before(node)
        mark = len(self.temps)
        try:
            self._exec[t](node)
        except _Flow:
            self._sweep(mark)
            if self._after is not None:
                self._after(node)
            self.emit("StmtEnd", span=span)
            raise
        self._sweep(mark)
        if self._after is not None:
            self._after(node)
        self.emit("StmtEnd", span=span)

    def _exec_nothing(self, node):
        pass

    def _declare(self, name, value):
        scope = self.locals if self.locals is not None else self.globals
        old = scope.get(name, UNDEFINED)
        self._incref(value)
        scope[name] = value
        self._decref(old)

    def _exec_var(self, node):
        for d in node.decls:
            if d.init is not None:
                self._declare(d.name, self._eval(d.init))

    def _exec_expr(self, node):
        self._eval(node.expr)

    def _exec_block(self, node):
        stmt = self._stmt
        for s in node.body:
            stmt(s)

    def _exec_if(self, node):
        if truthy(self._eval(node.test)):
            self._stmt(node.then)
        elif node.other is not None:
            self._stmt(node.other)

    def _exec_while(self, node):
        mark = len(self.temps)
        test, body, ev, stmt = node.test, node.body, self._eval, self._stmt
        while truthy(ev(test)):
            self._sweep(mark)
            try:
                stmt(body)
            except _Break:
                break
            except _Continue:
                pass
        self._sweep(mark)

    def _exec_for(self, node):
        mark = len(self.temps)
        init = node.init
        if isinstance(init, A.VarDecl):
            self._exec_var(init)
        elif init is not None:
            self._eval(init)
        self._sweep(mark)
        test, update, body = node.test, node.update, node.body
        while test is None or truthy(self._eval(test)):
            self._sweep(mark)
            try:
                self._stmt(body)
            except _Break:
                break
            except _Continue:
                pass
            if update is not None:
                self._eval(update)
            self._sweep(mark)
        self._sweep(mark)

    def _exec_return(self, node):
        value = UNDEFINED if node.value is None else self._eval(node.value)
        self._incref(value)
        raise _Return(value)

    def _exec_break(self, node):
        raise _Break()

    def _exec_continue(self, node):
        raise _Continue()

    # -- functions -------------------------------------------------------

    def _call_function(self, fn, args, span):
        if len(self.frames) >= self.max_call_depth:
            raise ScriptError("maximum call depth exceeded", span)
        decl = fn.decl
        frame = dict.fromkeys(fn.locals, UNDEFINED)
        for i, p in enumerate(decl.params):
            v = args[i] if i < len(args) else UNDEFINED
            self._incref(v)
            self._decref(frame[p])
            frame[p] = v
        saved = self.locals
        self.frames.append(frame)
        self.locals = frame
        result = UNDEFINED
        try:
            self._stmt(decl.body)
        except _Return as r:
            result = r.value
        finally:
            self.locals = saved
            self.frames.pop()
        for v in frame.values():
            self._decref(v)
        self._unpin(result)
        return result

    def _invoke(self, fn, args, span):
        t = type(fn)
        if t is Function:
            return self._call_function(fn, args, span)
        if t is Builtin:
            return fn.fn(args, span)
        if t is BoundMethod:
            return fn.fn(fn.this, args, span)
        raise ScriptError(f"{type_name(fn)} is not a function", span)

    def _flush_deferred(self):
        if self._flushing:
            return
        self._flushing = True
        try:
            while self.deferred:
                fn, args = self.deferred.pop(0)
                mark = len(self.temps)
                self._invoke(fn, args, fn.decl.span if type(fn) is Function else None)
                self._sweep(mark)
                for a in args:
                    self._decref(a)
        finally:
            self._flushing = False

    # -- expressions -----------------------------------------------------

    def _eval(self, node):
        return self._ev[type(node)](node)

    def _ev_num(self, node):
        return node.value

    def _ev_str(self, node):
        return JSString(node.value)

    def _ev_const(self, node):
        return {"true": True, "false": False, "null": None}.get(node.name, UNDEFINED)

    def _lookup(self, name, span):
        loc = self.locals
        if loc is not None and name in loc:
            return loc[name]
        g = self.globals
        if name in g:
            return g[name]
        b = self.builtins.get(name)
        if b is not None:
            return b
        raise ScriptError(f"{name} is not defined", span)

    def _ev_ident(self, node):
        return self._lookup(node.name, node.span)

    def _ev_array(self, node):
        return self._new_array([self._eval(i) for i in node.items])

    def _ev_object(self, node):
        props = {}
        for k, v in node.props:
            props[k] = self._eval(v)
        return self._new_object(props)

    def _ev_member(self, node):
        return self._get(self._eval(node.obj), node.name, node.span)

    def _ev_index(self, node):
        obj = self._eval(node.obj)
        key = self._eval(node.index)
        return self._get_index(obj, key, node.span)

    def _ev_call(self, node):
        callee = node.callee
        if type(callee) is A.Member:
            fn = self._get(self._eval(callee.obj), callee.name, callee.span)
        else:
            fn = self._eval(callee)
        quiet = type(fn) is Builtin and fn.quiet_args
        if quiet:
            self.quiet += 1
        try:
            args = [self._eval(a) for a in node.args]
        finally:
            if quiet:
                self.quiet -= 1
        return self._invoke(fn, args, node.span)

    def _ev_new(self, node):
        args = [self._eval(a) for a in node.args]
        if node.name == "Array":
            return self._bi_array(args, node.span)
        if node.name == "Object":
            return self._new_object({})
        raise ScriptError(f"{node.name} is not a constructor", node.span)

    def _ev_unary(self, node):
        v = self._eval(node.operand)
        op = node.op
        if op == "!":
            return not truthy(v)
        if op == "-":
            return -to_number(v)
        if op == "+":
            return to_number(v)
        return ~to_int32(v)

    def _ev_update(self, node):
        target = node.target
        ref = self._reference(target)
        old = to_number(self._read_ref(ref, target.span))
        new = old + 1 if node.op == "++" else old - 1
        self._write_ref(ref, new, target.span)
        return new if node.prefix else old

    def _ev_binary(self, node):
        return self.binop(node.op, self._eval(node.left), self._eval(node.right), node.span)

    def _ev_logical(self, node):
        left = self._eval(node.left)
        if node.op == "&&":
            return self._eval(node.right) if truthy(left) else left
        return left if truthy(left) else self._eval(node.right)

    def _ev_conditional(self, node):
        return self._eval(node.then if truthy(self._eval(node.test)) else node.other)

    def _ev_assign(self, node):
        target = node.target
        ref = self._reference(target)
        if node.op == "=":
            value = self._eval(node.value)
        else:
            current = self._read_ref(ref, target.span)
            value = self.binop(node.op[:-1], current, self._eval(node.value), node.span)
        self._write_ref(ref, value, target.span)
        return value

    # references are (kind, holder, key) with the holder already evaluated
    def _reference(self, target):
        t = type(target)
        if t is A.Ident:
            return ("var", None, target.name)
        if t is A.Member:
            return ("prop", self._eval(target.obj), target.name)
        return ("index", self._eval(target.obj), self._eval(target.index))

    def _read_ref(self, ref, span):
        kind, holder, key = ref
        if kind == "var":
            return self._lookup(key, span)
        if kind == "prop":
            return self._get(holder, key, span)
        return self._get_index(holder, key, span)

    def _write_ref(self, ref, value, span):
        kind, holder, key = ref
        if kind == "var":
            loc = self.locals
            scope = loc if loc is not None and key in loc else self.globals
            old = scope.get(key, UNDEFINED)
            self._incref(value)
            scope[key] = value
            self._decref(old)
        elif kind == "prop":
            self._set(holder, key, value, span)
        else:
            self._set_index(holder, key, value, span)

    # -- operators -------------------------------------------------------

    def binop(self, op, a, b, span=None):
        if op == "+":
            ta, tb = type(a), type(b)
            if ta in (int, float, bool) and tb in (int, float, bool):
                return a + b if ta is not bool and tb is not bool else int(a) + int(b)
            if ta is JSString or tb is JSString or ta in _OBJECTISH or tb in _OBJECTISH:
                return self.new_string(T.concat(to_text(a), to_text(b)))
            return _num_add(to_number(a), to_number(b))
        if op in ("==", "!="):
            r = loose_equals(a, b)
            return r if op == "==" else not r
        if op in ("===", "!=="):
            r = strict_equals(a, b)
            return r if op == "===" else not r
        if op in ("<", ">", "<=", ">="):
            if type(a) is JSString and type(b) is JSString:
                x, y = a.flat(), b.flat()
            else:
                x, y = to_number(a), to_number(b)
                if x != x or y != y:
                    return False
            if op == "<":
                return x < y
            if op == ">":
                return x > y
            if op == "<=":
                return x <= y
            return x >= y
        if op in ("&", "|", "^", "<<", ">>", ">>>"):
            x, y = to_int32(a), to_int32(b)
            if op == "&":
                return x & y
            if op == "|":
                return x | y
            if op == "^":
                return x ^ y
            shift = y & 31
            if op == "<<":
                return to_int32((x << shift) & 0xFFFFFFFF)
            if op == ">>":
                return x >> shift
            return (x & 0xFFFFFFFF) >> shift
        x, y = to_number(a), to_number(b)
        if op == "-":
            return x - y
        if op == "*":
            return x * y
        if op == "/":
            if y == 0:
                if x == 0 or x != x:
                    return math.nan
                return math.inf if (x > 0) == (math.copysign(1, y) > 0) else -math.inf
            r = x / y
            return int(r) if isinstance(x, int) and isinstance(y, int) and x % y == 0 else r
        if op == "%":
            if y == 0 or x != x or y != y or math.isinf(x):
                return math.nan
            r = math.fmod(x, y)
            return int(r) if isinstance(x, int) and isinstance(y, int) else r
        raise ScriptError(f"unsupported operator {op}", span)

    # -- property access -------------------------------------------------

    def _get(self, obj, name, span):
        t = type(obj)
        if t is JSString:
            if name == "length":
                return len(obj)
            fn = _STRING_METHODS.get(name)
            if fn is None:
                return UNDEFINED
            return BoundMethod(name, obj, getattr(self, fn))
        if t is JSArray:
            if name == "length":
                return len(obj.items)
            if name == "push":
                return BoundMethod(name, obj, self._m_push)
            return UNDEFINED
        if t is JSObject:
            return obj.props.get(name, UNDEFINED)
        if t is Element:
            return self._element_get(obj, name, span)
        if obj is UNDEFINED or obj is None:
            raise ScriptError(f"cannot read property {name!r} of {type_name(obj)}", span)
        return UNDEFINED

    def _get_index(self, obj, key, span):
        t = type(obj)
        if t is JSArray:
            k = _index_key(key)
            if k is not None:
                return obj.items[k] if k < len(obj.items) else UNDEFINED
        elif t is JSString:
            k = _index_key(key)
            if k is not None:
                return JSString(T.extract(obj.text, k, k + 1)) if k < len(obj) else UNDEFINED
        return self._get(obj, T.flatten(to_text(key)), span)

    def _set(self, obj, name, value, span):
        t = type(obj)
        if t is JSObject:
            old = obj.props.get(name, UNDEFINED)
            self._incref(value)
            obj.props[name] = value
            self._decref(old)
        elif t is Element:
            self._element_set(obj, name, value, span)
        elif t is JSArray and name == "length":
            n = _index_key(value)
            if n is None or n > MAX_ARRAY_INDEX:
                raise ScriptError("invalid array length", span)
            items = obj.items
            while len(items) > n:
                self._decref(items.pop())
            items.extend([UNDEFINED] * (n - len(items)))
        else:
            raise ScriptError(f"cannot set property {name!r} on {type_name(obj)}", span)

    def _set_index(self, obj, key, value, span):
        if type(obj) is JSArray:
            k = _index_key(key)
            if k is None:
                raise ScriptError("array index must be a non-negative integer", span)
            if k > MAX_ARRAY_INDEX:
                raise ScriptError("array index too large", span)
            items = obj.items
            if k >= len(items):
                items.extend([UNDEFINED] * (k + 1 - len(items)))
            old = items[k]
            self._incref(value)
            items[k] = value
            self._decref(old)
            return
        self._set(obj, T.flatten(to_text(key)), value, span)

    # -- elements --------------------------------------------------------

    def vtable_address(self, kind):
        code = self._code
        slots = max(1, (code.size - 0x100) // 16)
        return code.base + min(0x100, code.size // 2) + (zlib.crc32(kind.encode()) % slots) * 16 % code.size

    def create_element(self, kind):
        record = self.model.allocate("Custom", self.element_size)
        self.model.write_bytes(record, self.vtable_address(kind).to_bytes(4, "little"))
        self._serial += 1
        el = Element(kind, record, self._serial)
        self.elements[el.serial] = el
        return el

    def _element_get(self, el, name, span):
        if name == "appendChild":
            return BoundMethod(name, el, self._m_append_child)
        if name == "firstChild":
            return el.children[0] if el.children else None
        if name == "parentNode":
            return el.parent
        if name == "tagName":
            return JSString(el.kind)
        v = el.props.get(name, UNDEFINED)
        if type(v) is PropCopy:
            return self.new_string(v.text)
        return v

    def _drop_prop(self, v):
        if type(v) is PropCopy:
            if v.addr is not None:
                addr, v.addr = v.addr, None
                self.model.free(v.allocator, addr)
        else:
            self._decref(v)

    def _element_set(self, el, name, value, span):
        if name == "innerHTML":
            if T.length(to_text(value)):
                raise ScriptError("only innerHTML = '' is supported", span)
            self.dom_clear(el)
            return
        if name in ("appendChild", "firstChild", "parentNode", "tagName"):
            raise ScriptError(f"{name} is read-only", span)
        old = el.props.get(name, UNDEFINED)
        if type(value) is JSString:
            n = len(value)
            if n:
                addr = self.model.allocate("Custom", 2 * n)
                self.model.bind_text(addr, value.text)
                new = PropCopy(value.text, addr, self.model.records[addr].allocator)
            else:
                new = PropCopy("", None, None)
        else:
            self._incref(value)
            new = value
        el.props[name] = new
        self._drop_prop(old)

    def free_element(self, el):
        if el.record is None:
            return
        if not el.alive:
            self.model.free("Custom", el.record)   # recorded as a double free
            return
        el.alive = False
        del self.elements[el.serial]
        self.model.free("Custom", el.record)
        props, el.props = el.props, {}
        for v in props.values():
            self._drop_prop(v)

    def _detach(self, el):
        if el.parent is not None:
            el.parent.children.remove(el)
            el.parent = None

    def dom_clear(self, container):
        kids, container.children = container.children, []
        for kid in kids:
            kid.parent = None
            self._free_subtree(kid)

    def _free_subtree(self, el):
        self.free_element(el)
        kids, el.children = el.children, []
        for kid in kids:
            kid.parent = None
            self._free_subtree(kid)

    def collect_garbage(self):
        seen = set()
        stack = [self.root, *self.globals.values(), *self.temps]
        for frame in self.frames:
            stack.extend(frame.values())
        for fn, args in self.deferred:
            stack.extend(args)
        while stack:
            v = stack.pop()
            t = type(v)
            if t not in _TRACED or id(v) in seen:
                continue
            seen.add(id(v))
            if t is JSArray:
                stack.extend(v.items)
            elif t is JSObject:
                stack.extend(v.props.values())
            elif t is Element:
                stack.extend(v.children)
                stack.extend(x for x in v.props.values() if type(x) is not PropCopy)
        for el in list(self.elements.values()):
            if el.alive and id(el) not in seen:
                self._detach(el)
                self.free_element(el)
        for addr in sorted(self.strings):
            s = self.strings.get(addr)
            if s is not None and id(s) not in seen:
                self._free_string(s)

    # -- builtins --------------------------------------------------------

    def _make_builtins(self):
        table = {
            "setMarker": (self._bi_set_marker, True),
            "resetMarker": (self._bi_reset_marker, True),
            "unescape": (self._bi_unescape, False),
            "domCreate": (self._bi_dom_create, False),
            "domRoot": (self._bi_dom_root, False),
            "domClear": (self._bi_dom_clear, False),
            "collectGarbage": (self._bi_collect_garbage, False),
            "CollectGarbage": (self._bi_collect_garbage, False),
            "plantUAF": (self._bi_plant_uaf, False),
            "triggerVirtualCall": (self._bi_trigger_virtual_call, False),
            "pivotGadget": (self._bi_pivot_gadget, False),
            "setTimeout": (self._bi_defer, False),
            "setInterval": (self._bi_defer, False),
            "parseInt": (self._bi_parse_int, False),
            "Array": (self._bi_array, False),
        }
        return {name: Builtin(name, fn, quiet) for name, (fn, quiet) in table.items()}

    def _arity(self, name, args, lo, hi, span):
        if not lo <= len(args) <= hi:
            want = str(lo) if lo == hi else f"{lo}..{hi}"
            raise ScriptError(f"{name} expects {want} argument(s), got {len(args)}", span)

    def _element_arg(self, name, v, span):
        if type(v) is not Element:
            raise ScriptError(f"{name} expects an element, got {type_name(v)}", span)
        return v

    def _bi_set_marker(self, args, span):
        self._arity("setMarker", args, 1, 1, span)
        name = T.flatten(to_text(args[0]))
        self._flush_deferred()
        self.emit("MarkerSet", name=name, span=span)
        return UNDEFINED

    def _bi_reset_marker(self, args, span):
        self._arity("resetMarker", args, 0, 0, span)
        self._flush_deferred()
        self.emit("MarkerReset", span=span)
        return UNDEFINED

    def _bi_unescape(self, args, span):
        self._arity("unescape", args, 1, 1, span)
        src = T.flatten(to_text(args[0]))
        out = _UNESCAPE.sub(lambda m: chr(int(m.group(1) or m.group(2), 16)), src)
        return self.new_string(out)

    def _bi_dom_create(self, args, span):
        self._arity("domCreate", args, 1, 1, span)
        return self.create_element(T.flatten(to_text(args[0])))

    def _bi_dom_root(self, args, span):
        self._arity("domRoot", args, 0, 0, span)
        return self.root

    def _bi_dom_clear(self, args, span):
        self._arity("domClear", args, 1, 1, span)
        self.dom_clear(self._element_arg("domClear", args[0], span))
        return UNDEFINED

    def _bi_collect_garbage(self, args, span):
        self._arity("collectGarbage", args, 0, 0, span)
        self.collect_garbage()
        return UNDEFINED

    def _bi_plant_uaf(self, args, span):
        self._arity("plantUAF", args, 1, 1, span)
        el = self._element_arg("plantUAF", args[0], span)
        if el.record is None:
            raise ScriptError("the document root cannot be freed", span)
        self._detach(el)
        self.free_element(el)
        return UNDEFINED

    def _bi_trigger_virtual_call(self, args, span):
        self._arity("triggerVirtualCall", args, 1, 1, span)
        el = self._element_arg("triggerVirtualCall", args[0], span)
        if el.record is None:
            target = self.vtable_address(el.kind)
        else:
            target = self.model.read_u32(el.record)
        self.model.set_pc(target)
        return UNDEFINED

    def _bi_pivot_gadget(self, args, span):
        self._arity("pivotGadget", args, 1, 1, span)
        addr = to_uint32(args[0])
        self.model.set_sp(addr)
        self.model.set_pc(self.model.read_u32(addr))
        return UNDEFINED

    def _bi_defer(self, args, span):
        self._arity("setTimeout", args, 1, 16, span)
        fn = args[0]
        if type(fn) not in (Function, Builtin):
            raise ScriptError(f"callback must be a function, got {type_name(fn)}", span)
        extra = list(args[2:])
        for a in extra:
            self._incref(a)
        self.deferred.append((fn, extra))
        return len(self.deferred)

    def _bi_parse_int(self, args, span):
        self._arity("parseInt", args, 1, 2, span)
        s = T.flatten(to_text(args[0])).strip()
        radix = int(to_number(args[1])) if len(args) > 1 else 10
        if radix == 16 or (len(args) == 1 and s[:2].lower() == "0x"):
            radix = 16
            if s[:2].lower() == "0x":
                s = s[2:]
        digits = "0123456789abcdefghijklmnopqrstuvwxyz"[:radix]
        n = 0
        for i, ch in enumerate(s.lower()):
            if ch not in digits:
                s = s[:i]
                break
            n = n * radix + digits.index(ch)
        return n if s else math.nan

    def _bi_array(self, args, span):
        if len(args) == 1 and isinstance(args[0], (int, float)) and not isinstance(args[0], bool):
            n = _index_key(args[0])
            if n is None or n > MAX_ARRAY_INDEX:
                raise ScriptError("invalid array length", span)
            return self._new_array([UNDEFINED] * n)
        return self._new_array(list(args))

    # -- methods ---------------------------------------------------------

    def _m_push(self, arr, args, span):
        for v in args:
            self._incref(v)
            arr.items.append(v)
        return len(arr.items)

    def _m_append_child(self, parent, args, span):
        self._arity("appendChild", args, 1, 1, span)
        child = self._element_arg("appendChild", args[0], span)
        if child is self.root:
            raise ScriptError("cannot append the document root", span)
        node = parent
        while node is not None:
            if node is child:
                raise ScriptError("cannot append an element to its own subtree", span)
            node = node.parent
        self._detach(child)
        child.parent = parent
        parent.children.append(child)
        return child

    def _m_substring(self, s, args, span):
        self._arity("substring", args, 1, 2, span)
        n = len(s)

        def clamp(v):
            x = to_number(v)
            if x != x:
                return 0
            return int(max(0, min(n, x)))

        a = clamp(args[0])
        b = clamp(args[1]) if len(args) > 1 and args[1] is not UNDEFINED else n
        if a > b:
            a, b = b, a
        return self.new_string(T.substring(s.text, a, b))

    def _m_char_code_at(self, s, args, span):
        i = to_number(args[0]) if args else 0
        if i != i:
            i = 0
        i = int(i)
        if not 0 <= i < len(s):
            return math.nan
        return T.code_unit(s.text, i)

    def _m_char_at(self, s, args, span):
        i = int(to_number(args[0])) if args else 0
        if not 0 <= i < len(s):
            return JSString("")
        return JSString(T.extract(s.text, i, i + 1))

    def _m_index_of(self, s, args, span):
        self._arity("indexOf", args, 1, 2, span)
        needle = T.flatten(to_text(args[0]))
        start = int(to_number(args[1])) if len(args) > 1 else 0
        return s.flat().find(needle, max(0, start))


_OBJECTISH = (JSArray, JSObject, Element, Function, Builtin, BoundMethod)
_TRACED = (JSArray, JSObject, Element, JSString)
_STRING_METHODS = {
    "substring": "_m_substring",
    "charCodeAt": "_m_char_code_at",
    "charAt": "_m_char_at",
    "indexOf": "_m_index_of",
}


def _num_add(x, y):
    return x + y


def run(script, model, hooks=None, timeout_events=None,
        element_size=DEFAULT_ELEMENT_SIZE):
    """Interpret ``script`` against ``model`` and report how it ended.

    ``model`` must already have captured its baselines.  ``timeout_events``
    caps the total number of trace events; reaching it yields ``TimedOut``.
    """
    if timeout_events is not None:
        model.log.limit = timeout_events
    program = getattr(script, "program", script)
    return Interpreter(program, model, hooks, element_size).run()
