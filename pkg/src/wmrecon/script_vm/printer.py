"""Render a syntax tree back to canonical script text."""

import math
import re

from wmrecon.script_vm import ast as A

_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6, "===": 6, "!==": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7,
    "<<": 8, ">>": 8, ">>>": 8,
    "+": 9, "-": 9, "*": 10, "/": 10, "%": 10,
}
_ASSIGN, _COND, _UNARY, _POSTFIX, _CALL = -1, 0, 11, 12, 13
_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*\Z")


def quote(s):
    out = ["'"]
    for ch in s:
        o = ord(ch)
        if ch == "'":
            out.append("\\'")
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif o < 0x20 or 0x7F <= o < 0xA0 or 0xD800 <= o < 0xE000 or o > 0xFFFF:
            out.append(f"\\u{o:04x}" if o <= 0xFFFF else ch)
        else:
            out.append(ch)
    out.append("'")
    return "".join(out)


def _number(v):
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            raise ValueError("non-finite literal")
        return repr(v)
    return str(v)


def _prec(e):
    if isinstance(e, A.Assign):
        return _ASSIGN
    if isinstance(e, A.Conditional):
        return _COND
    if isinstance(e, (A.Binary, A.Logical)):
        return _PREC[e.op]
    if isinstance(e, A.Unary) or (isinstance(e, A.Update) and e.prefix):
        return _UNARY
    if isinstance(e, A.Update):
        return _POSTFIX
    return _CALL


def expr(e, need=_ASSIGN):
    s = _expr(e)
    return f"({s})" if _prec(e) < need else s


def _expr(e):
    if isinstance(e, A.Num):
        return _number(e.value)
    if isinstance(e, A.Str):
        return quote(e.value)
    if isinstance(e, A.Const):
        return e.name
    if isinstance(e, A.Ident):
        return e.name
    if isinstance(e, A.ArrayLit):
        return "[" + ", ".join(expr(i) for i in e.items) + "]"
    if isinstance(e, A.ObjectLit):
        parts = []
        for k, v in e.props:
            key = k if _IDENT.match(k) else quote(k)
            parts.append(f"{key}: {expr(v)}")
        return "{" + ", ".join(parts) + "}"
    if isinstance(e, A.Member):
        obj = expr(e.obj, _CALL)
        if isinstance(e.obj, A.Num):
            obj = f"({obj})"    # 0.length would lex as a number
        return f"{obj}.{e.name}"
    if isinstance(e, A.Index):
        return f"{expr(e.obj, _CALL)}[{expr(e.index)}]"
    if isinstance(e, A.Call):
        return f"{expr(e.callee, _CALL)}(" + ", ".join(expr(a) for a in e.args) + ")"
    if isinstance(e, A.New):
        return f"new {e.name}(" + ", ".join(expr(a) for a in e.args) + ")"
    if isinstance(e, A.Unary):
        inner = expr(e.operand, _UNARY)
        # keep "- -x" and "+ +x" from fusing into "--x" / "++x"
        sep = " " if inner[:1] in "+-" else ""
        return f"{e.op}{sep}{inner}"
    if isinstance(e, A.Update):
        if e.prefix:
            return f"{e.op}{expr(e.target, _UNARY)}"
        return f"{expr(e.target, _POSTFIX + 1)}{e.op}"
    if isinstance(e, (A.Binary, A.Logical)):
        p = _PREC[e.op]
        return f"{expr(e.left, p)} {e.op} {expr(e.right, p + 1)}"
    if isinstance(e, A.Conditional):
        return f"{expr(e.test, 1)} ? {expr(e.then)} : {expr(e.other)}"
    if isinstance(e, A.Assign):
        return f"{expr(e.target, _CALL)} {e.op} {expr(e.value)}"
    raise TypeError(f"cannot print {type(e).__name__}")


def _decls(d):
    return ", ".join(x.name if x.init is None else f"{x.name} = {expr(x.init)}"
                     for x in d.decls)


def _stmt(s, ind, out):
    pad = "  " * ind
    if isinstance(s, A.Block):
        out.append(pad + "{")
        for c in s.body:
            _stmt(c, ind + 1, out)
        out.append(pad + "}")
    elif isinstance(s, A.VarDecl):
        out.append(f"{pad}var {_decls(s)};")
    elif isinstance(s, A.ExprStmt):
        text = expr(s.expr)
        if text.startswith("{"):
            text = f"({text})"
        out.append(f"{pad}{text};")
    elif isinstance(s, A.Empty):
        out.append(pad + ";")
    elif isinstance(s, A.If):
        out.append(f"{pad}if ({expr(s.test)})")
        _stmt(s.then, ind + 1, out)
        if s.other is not None:
            out.append(pad + "else")
            _stmt(s.other, ind + 1, out)
    elif isinstance(s, A.While):
        out.append(f"{pad}while ({expr(s.test)})")
        _stmt(s.body, ind + 1, out)
    elif isinstance(s, A.For):
        if s.init is None:
            init = ""
        elif isinstance(s.init, A.VarDecl):
            init = "var " + _decls(s.init)
        else:
            init = expr(s.init)
        test = "" if s.test is None else expr(s.test)
        update = "" if s.update is None else expr(s.update)
        out.append(f"{pad}for ({init}; {test}; {update})")
        _stmt(s.body, ind + 1, out)
    elif isinstance(s, A.Return):
        out.append(pad + ("return;" if s.value is None else f"return {expr(s.value)};"))
    elif isinstance(s, A.Break):
        out.append(pad + "break;")
    elif isinstance(s, A.Continue):
        out.append(pad + "continue;")
    elif isinstance(s, A.FunctionDecl):
        out.append(f"{pad}function {s.name}({', '.join(s.params)})")
        _stmt(s.body, ind, out)
    elif isinstance(s, A.MarkerStmt):
        out.append(pad + ("resetMarker();" if s.name is None else f"setMarker({quote(s.name)});"))
    else:
        raise TypeError(f"cannot print {type(s).__name__}")


def to_source(program):
    out = []
    for s in program.body:
        _stmt(s, 0, out)
    return "\n".join(out) + "\n"
