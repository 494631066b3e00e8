"""Syntax tree for the exploit-scripting language.

Every node carries ``span = (line, column, length)`` into the source it was
parsed from.  Spans are excluded from equality so that trees parsed from
differently formatted text compare structurally.
"""

from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

Span = Tuple[int, int, int]


def _span():
    return field(default=(0, 0, 0), compare=False, repr=False)


class Node:
    __slots__ = ()


class Stmt(Node):
    __slots__ = ()
    COMPOUND = False


class Expr(Node):
    __slots__ = ()


# -- expressions --------------------------------------------------------

@dataclass(eq=True)
class Num(Expr):
    value: Any
    text: Optional[str] = field(default=None, compare=False, repr=False)
    span: Span = _span()


@dataclass(eq=True)
class Str(Expr):
    value: str
    span: Span = _span()


@dataclass(eq=True)
class Const(Expr):
    """``true``, ``false``, ``null`` or ``undefined``."""
    name: str
    span: Span = _span()


@dataclass(eq=True)
class Ident(Expr):
    name: str
    span: Span = _span()


@dataclass(eq=True)
class ArrayLit(Expr):
    items: List[Expr]
    span: Span = _span()


@dataclass(eq=True)
class ObjectLit(Expr):
    props: List[Tuple[str, Expr]]
    span: Span = _span()


@dataclass(eq=True)
class Member(Expr):
    obj: Expr
    name: str
    span: Span = _span()


@dataclass(eq=True)
class Index(Expr):
    obj: Expr
    index: Expr
    span: Span = _span()


@dataclass(eq=True)
class Call(Expr):
    callee: Expr
    args: List[Expr]
    span: Span = _span()


@dataclass(eq=True)
class New(Expr):
    name: str
    args: List[Expr]
    span: Span = _span()


@dataclass(eq=True)
class Unary(Expr):
    op: str
    operand: Expr
    span: Span = _span()


@dataclass(eq=True)
class Update(Expr):
    op: str          # "++" or "--"
    prefix: bool
    target: Expr
    span: Span = _span()


@dataclass(eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    span: Span = _span()


@dataclass(eq=True)
class Logical(Expr):
    op: str          # "&&" or "||"
    left: Expr
    right: Expr
    span: Span = _span()


@dataclass(eq=True)
class Conditional(Expr):
    test: Expr
    then: Expr
    other: Expr
    span: Span = _span()


@dataclass(eq=True)
class Assign(Expr):
    op: str          # "=", "+=", "-=", ...
    target: Expr
    value: Expr
    span: Span = _span()


# -- statements ---------------------------------------------------------

@dataclass(eq=True)
class Declarator(Node):
    name: str
    init: Optional[Expr]
    span: Span = _span()


@dataclass(eq=True)
class VarDecl(Stmt):
    decls: List[Declarator]
    span: Span = _span()


@dataclass(eq=True)
class ExprStmt(Stmt):
    expr: Expr
    span: Span = _span()


@dataclass(eq=True)
class Empty(Stmt):
    span: Span = _span()


@dataclass(eq=True)
class Block(Stmt):
    body: List[Stmt]
    span: Span = _span()
    COMPOUND = True


@dataclass(eq=True)
class If(Stmt):
    test: Expr
    then: Stmt
    other: Optional[Stmt]
    span: Span = _span()
    COMPOUND = True


@dataclass(eq=True)
class While(Stmt):
    test: Expr
    body: Stmt
    span: Span = _span()
    COMPOUND = True


@dataclass(eq=True)
class For(Stmt):
    init: Optional[Node]     # VarDecl or Expr
    test: Optional[Expr]
    update: Optional[Expr]
    body: Stmt
    span: Span = _span()
    COMPOUND = True


@dataclass(eq=True)
class Return(Stmt):
    value: Optional[Expr]
    span: Span = _span()


@dataclass(eq=True)
class Break(Stmt):
    span: Span = _span()


@dataclass(eq=True)
class Continue(Stmt):
    span: Span = _span()


@dataclass(eq=True)
class FunctionDecl(Stmt):
    name: str
    params: List[str]
    body: Block
    span: Span = _span()
    COMPOUND = True


@dataclass(eq=True)
class MarkerStmt(Stmt):
    """Synthetic marker inserted by candidate generation; ``name`` None
    means reset.  ``span`` is that of the statement it stands for."""
    name: Optional[str]
    span: Span = _span()


@dataclass(eq=True)
class Program(Node):
    body: List[Stmt]
    span: Span = _span()


MARKER_BUILTINS = ("setMarker", "resetMarker")


def marker_call(stmt):
    """The marker builtin name if ``stmt`` is a bare marker call, else None."""
    if type(stmt) is ExprStmt:
        e = stmt.expr
        if type(e) is Call and type(e.callee) is Ident and e.callee.name in MARKER_BUILTINS:
            return e.callee.name
    return None


def children(node):
    """Direct child nodes, in source order."""
    if isinstance(node, (Program, Block)):
        return list(node.body)
    if isinstance(node, VarDecl):
        return list(node.decls)
    if isinstance(node, Declarator):
        return [node.init] if node.init is not None else []
    if isinstance(node, ExprStmt):
        return [node.expr]
    if isinstance(node, If):
        return [n for n in (node.test, node.then, node.other) if n is not None]
    if isinstance(node, While):
        return [node.test, node.body]
    if isinstance(node, For):
        return [n for n in (node.init, node.test, node.update, node.body) if n is not None]
    if isinstance(node, Return):
        return [node.value] if node.value is not None else []
    if isinstance(node, FunctionDecl):
        return [node.body]
    if isinstance(node, ArrayLit):
        return list(node.items)
    if isinstance(node, ObjectLit):
        return [v for _, v in node.props]
    if isinstance(node, Member):
        return [node.obj]
    if isinstance(node, Index):
        return [node.obj, node.index]
    if isinstance(node, (Call,)):
        return [node.callee, *node.args]
    if isinstance(node, New):
        return list(node.args)
    if isinstance(node, Unary):
        return [node.operand]
    if isinstance(node, Update):
        return [node.target]
    if isinstance(node, (Binary, Logical)):
        return [node.left, node.right]
    if isinstance(node, Conditional):
        return [node.test, node.then, node.other]
    if isinstance(node, Assign):
        return [node.target, node.value]
    return []


def walk(node):
    yield node
    for c in children(node):
        yield from walk(c)


def statements(node):
    return [n for n in walk(node) if isinstance(n, Stmt)]
