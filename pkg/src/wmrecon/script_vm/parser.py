"""Tokenizer and recursive-descent parser for ``.wms`` scripts."""

from typing import NamedTuple

from wmrecon.script_vm import ast as A

KEYWORDS = frozenset((
    "var", "function", "if", "else", "while", "for", "return", "break",
    "continue", "new", "true", "false", "null", "undefined",
))

# Longest first so that maximal munch works with a linear scan.
PUNCTUATORS = sorted((
    ">>>", "===", "!==", "<<", ">>", "==", "!=", "<=", ">=", "&&", "||",
    "++", "--", "+=", "-=", "*=", "/=", "%=", "+", "-", "*", "/", "%", "<",
    ">", "=", "!", "~", "&", "|", "^", "(", ")", "{", "}", "[", "]", ";",
    ",", ".", ":", "?",
), key=len, reverse=True)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f",
            "v": "\v", "0": "\0", "'": "'", '"': '"', "\\": "\\"}


class SyntaxIssue(NamedTuple):
    line: int
    column: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}"


class ScriptSyntaxError(Exception):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class Token(NamedTuple):
    type: str        # num, str, name, kw, op, eof
    value: object
    line: int
    col: int
    start: int
    end: int


def _bmp(s):
    """Expand non-BMP characters into UTF-16 surrogate pairs."""
    if all(ord(c) < 0x10000 for c in s):
        return s
    out = []
    for c in s:
        o = ord(c)
        if o < 0x10000:
            out.append(c)
        else:
            o -= 0x10000
            out.append(chr(0xD800 + (o >> 10)))
            out.append(chr(0xDC00 + (o & 0x3FF)))
    return "".join(out)


def tokenize(source):
    toks = []
    i, n = 0, len(source)
    line, line_start = 1, 0

    def fail(msg, at):
        raise ScriptSyntaxError([SyntaxIssue(line, at - line_start + 1, msg)])

    while True:
        while i < n:
            c = source[i]
            if c == "\n":
                line += 1
                line_start = i + 1
                i += 1
            elif c in " \t\r\f\v﻿":
                i += 1
            elif source.startswith("//", i):
                j = source.find("\n", i)
                i = n if j < 0 else j
            elif source.startswith("/*", i):
                j = source.find("*/", i + 2)
                if j < 0:
                    fail("unterminated comment", i)
                line += source.count("\n", i, j)
                k = source.rfind("\n", i, j)
                if k >= 0:
                    line_start = k + 1
                i = j + 2
            else:
                break
        col = i - line_start + 1
        if i >= n:
            toks.append(Token("eof", None, line, col, n, n))
            return toks
        c = source[i]
        start = i
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            if source.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and source[j] in "0123456789abcdefABCDEF":
                    j += 1
                if j == i + 2:
                    fail("malformed hex literal", i)
                value = int(source[i + 2:j], 16)
            else:
                j = i
                while j < n and source[j].isdigit():
                    j += 1
                is_float = False
                if j < n and source[j] == ".":
                    is_float = True
                    j += 1
                    while j < n and source[j].isdigit():
                        j += 1
                if j < n and source[j] in "eE":
                    k = j + 1
                    if k < n and source[k] in "+-":
                        k += 1
                    if k < n and source[k].isdigit():
                        is_float = True
                        j = k
                        while j < n and source[j].isdigit():
                            j += 1
                text = source[i:j]
                value = float(text) if is_float else int(text)
            if j < n and (source[j].isalnum() or source[j] == "_"):
                fail("identifier starts immediately after numeric literal", j)
            toks.append(Token("num", value, line, col, start, j))
            i = j
        elif c.isalpha() or c in "_$":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            word = source[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "name", word, line, col, start, j))
            i = j
        elif c in "'\"":
            quote = c
            j = i + 1
            out = []
            while True:
                if j >= n or source[j] == "\n":
                    fail("unterminated string literal", i)
                ch = source[j]
                if ch == quote:
                    j += 1
                    break
                if ch == "\\":
                    j += 1
                    if j >= n:
                        fail("unterminated string literal", i)
                    e = source[j]
                    if e == "u":
                        hexd = source[j + 1:j + 5]
                        if len(hexd) != 4 or any(h not in "0123456789abcdefABCDEF" for h in hexd):
                            fail("malformed \\u escape", j - 1)
                        out.append(chr(int(hexd, 16)))
                        j += 5
                    elif e == "x":
                        hexd = source[j + 1:j + 3]
                        if len(hexd) != 2 or any(h not in "0123456789abcdefABCDEF" for h in hexd):
                            fail("malformed \\x escape", j - 1)
                        out.append(chr(int(hexd, 16)))
                        j += 3
                    elif e == "\n":
                        line += 1
                        line_start = j + 1
                        j += 1
                    else:
                        out.append(_ESCAPES.get(e, e))
                        j += 1
                else:
                    out.append(ch)
                    j += 1
            toks.append(Token("str", _bmp("".join(out)), line, col, start, j))
            i = j
        else:
            for p in PUNCTUATORS:
                if source.startswith(p, i):
                    toks.append(Token("op", p, line, col, start, i + len(p)))
                    i += len(p)
                    break
            else:
                fail(f"unexpected character {c!r}", i)


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!=", "===", "!=="),
    ("<", ">", "<=", ">="),
    ("<<", ">>", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
]

ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=")


class Parser:
    def __init__(self, source):
        self.source = source
        self.toks = tokenize(source)
        self.pos = 0
        self.fn_depth = 0
        self.loop_depth = 0

    # -- helpers -------------------------------------------------------

    @property
    def tok(self):
        return self.toks[self.pos]

    def _describe(self, tok):
        if tok.type == "eof":
            return "end of input"
        return repr(self.source[tok.start:tok.end])

    def fail(self, message, tok=None):
        tok = tok or self.tok
        raise ScriptSyntaxError([SyntaxIssue(tok.line, tok.col, message)])

    def at(self, value, type_="op"):
        t = self.tok
        return t.type == type_ and t.value == value

    def accept(self, value, type_="op"):
        if self.at(value, type_):
            self.pos += 1
            return True
        return False

    def expect(self, value, type_="op"):
        if not self.at(value, type_):
            self.fail(f"expected {value!r}, found {self._describe(self.tok)}")
        t = self.tok
        self.pos += 1
        return t

    def span_from(self, first):
        last = self.toks[self.pos - 1]
        return (first.line, first.col, last.end - first.start)

    # -- statements ----------------------------------------------------

    def parse_program(self):
        first = self.tok
        body = []
        while self.tok.type != "eof":
            body.append(self.statement())
        return A.Program(body, (first.line, first.col, len(self.source) - first.start))

    def statement(self):
        t = self.tok
        if t.type == "kw":
            handler = {
                "var": self.var_statement, "function": self.function_decl,
                "if": self.if_statement, "while": self.while_statement,
                "for": self.for_statement, "return": self.return_statement,
                "break": self.break_statement, "continue": self.continue_statement,
            }.get(t.value)
            if handler:
                return handler()
        if self.at("{"):
            return self.block()
        if self.at(";"):
            self.pos += 1
            return A.Empty(self.span_from(t))
        expr = self.expression()
        self.expect(";")
        return A.ExprStmt(expr, self.span_from(t))

    def block(self):
        first = self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.type == "eof":
                self.fail("expected '}', found end of input")
            body.append(self.statement())
        self.pos += 1
        return A.Block(body, self.span_from(first))

    def _declarators(self):
        decls = []
        while True:
            t = self.tok
            if t.type != "name":
                self.fail(f"expected variable name, found {self._describe(t)}")
            self.pos += 1
            init = self.assignment() if self.accept("=") else None
            decls.append(A.Declarator(t.value, init, self.span_from(t)))
            if not self.accept(","):
                return decls

    def var_statement(self):
        first = self.expect("var", "kw")
        decls = self._declarators()
        self.expect(";")
        return A.VarDecl(decls, self.span_from(first))

    def function_decl(self):
        first = self.expect("function", "kw")
        if self.fn_depth:
            self.fail("functions may only be declared at top level", first)
        name = self.tok
        if name.type != "name":
            self.fail(f"expected function name, found {self._describe(name)}")
        self.pos += 1
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                p = self.tok
                if p.type != "name":
                    self.fail(f"expected parameter name, found {self._describe(p)}")
                self.pos += 1
                params.append(p.value)
                if not self.accept(","):
                    break
        self.expect(")")
        self.fn_depth += 1
        saved, self.loop_depth = self.loop_depth, 0
        body = self.block()
        self.fn_depth -= 1
        self.loop_depth = saved
        return A.FunctionDecl(name.value, params, body, self.span_from(first))

    def if_statement(self):
        first = self.expect("if", "kw")
        self.expect("(")
        test = self.expression()
        self.expect(")")
        then = self.statement()
        other = self.statement() if self.accept("else", "kw") else None
        return A.If(test, then, other, self.span_from(first))

    def _loop_body(self):
        self.loop_depth += 1
        body = self.statement()
        self.loop_depth -= 1
        return body

    def while_statement(self):
        first = self.expect("while", "kw")
        self.expect("(")
        test = self.expression()
        self.expect(")")
        return A.While(test, self._loop_body(), self.span_from(first))

    def for_statement(self):
        first = self.expect("for", "kw")
        self.expect("(")
        init = None
        if self.at("var", "kw"):
            t = self.tok
            self.pos += 1
            init = A.VarDecl(self._declarators(), self.span_from(t))
        elif not self.at(";"):
            init = self.expression()
        self.expect(";")
        test = None if self.at(";") else self.expression()
        self.expect(";")
        update = None if self.at(")") else self.expression()
        self.expect(")")
        return A.For(init, test, update, self._loop_body(), self.span_from(first))

    def return_statement(self):
        first = self.expect("return", "kw")
        if not self.fn_depth:
            self.fail("'return' outside of a function", first)
        value = None if self.at(";") else self.expression()
        self.expect(";")
        return A.Return(value, self.span_from(first))

    def break_statement(self):
        first = self.expect("break", "kw")
        if not self.loop_depth:
            self.fail("'break' outside of a loop", first)
        self.expect(";")
        return A.Break(self.span_from(first))

    def continue_statement(self):
        first = self.expect("continue", "kw")
        if not self.loop_depth:
            self.fail("'continue' outside of a loop", first)
        self.expect(";")
        return A.Continue(self.span_from(first))

    # -- expressions ---------------------------------------------------

    def expression(self):
        return self.assignment()

    def assignment(self):
        first = self.tok
        left = self.conditional()
        t = self.tok
        if t.type == "op" and t.value in ASSIGN_OPS:
            if not isinstance(left, (A.Ident, A.Member, A.Index)):
                self.fail("invalid assignment target", t)
            self.pos += 1
            value = self.assignment()
            return A.Assign(t.value, left, value, self.span_from(first))
        return left

    def conditional(self):
        first = self.tok
        test = self.binary(0)
        if self.accept("?"):
            then = self.assignment()
            self.expect(":")
            other = self.assignment()
            return A.Conditional(test, then, other, self.span_from(first))
        return test

    def binary(self, level):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        first = self.tok
        left = self.binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.type == "op" and self.tok.value in ops:
            op = self.tok.value
            self.pos += 1
            right = self.binary(level + 1)
            cls = A.Logical if op in ("&&", "||") else A.Binary
            left = cls(op, left, right, self.span_from(first))
        return left

    def unary(self):
        t = self.tok
        if t.type == "op" and t.value in ("!", "-", "+", "~"):
            self.pos += 1
            return A.Unary(t.value, self.unary(), self.span_from(t))
        if t.type == "op" and t.value in ("++", "--"):
            self.pos += 1
            target = self.unary()
            if not isinstance(target, (A.Ident, A.Member, A.Index)):
                self.fail("invalid increment target", t)
            return A.Update(t.value, True, target, self.span_from(t))
        return self.postfix()

    def postfix(self):
        first = self.tok
        expr = self.call_member()
        t = self.tok
        if t.type == "op" and t.value in ("++", "--"):
            if not isinstance(expr, (A.Ident, A.Member, A.Index)):
                self.fail("invalid increment target", t)
            self.pos += 1
            return A.Update(t.value, False, expr, self.span_from(first))
        return expr

    def _arguments(self):
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.assignment())
                if not self.accept(","):
                    break
        self.expect(")")
        return args

    def call_member(self):
        first = self.tok
        expr = self.primary()
        while True:
            if self.accept("."):
                t = self.tok
                if t.type not in ("name", "kw"):
                    self.fail(f"expected property name, found {self._describe(t)}")
                self.pos += 1
                expr = A.Member(expr, t.value, self.span_from(first))
            elif self.accept("["):
                index = self.expression()
                self.expect("]")
                expr = A.Index(expr, index, self.span_from(first))
            elif self.at("("):
                expr = A.Call(expr, self._arguments(), self.span_from(first))
            else:
                return expr

    def primary(self):
        t = self.tok
        if t.type == "num":
            self.pos += 1
            return A.Num(t.value, self.source[t.start:t.end], self.span_from(t))
        if t.type == "str":
            self.pos += 1
            return A.Str(t.value, self.span_from(t))
        if t.type == "name":
            self.pos += 1
            return A.Ident(t.value, self.span_from(t))
        if t.type == "kw":
            if t.value in ("true", "false", "null", "undefined"):
                self.pos += 1
                return A.Const(t.value, self.span_from(t))
            if t.value == "new":
                self.pos += 1
                name = self.tok
                if name.type != "name":
                    self.fail(f"expected constructor name, found {self._describe(name)}")
                self.pos += 1
                args = self._arguments() if self.at("(") else []
                return A.New(name.value, args, self.span_from(t))
        if self.accept("("):
            expr = self.expression()
            self.expect(")")
            return expr
        if self.accept("["):
            items = []
            if not self.at("]"):
                while True:
                    items.append(self.assignment())
                    if not self.accept(","):
                        break
            self.expect("]")
            return A.ArrayLit(items, self.span_from(t))
        if self.accept("{"):
            props = []
            if not self.at("}"):
                while True:
                    k = self.tok
                    if k.type in ("name", "kw", "str"):
                        key = k.value
                    elif k.type == "num":
                        key = self.source[k.start:k.end]
                    else:
                        self.fail(f"expected property key, found {self._describe(k)}")
                    self.pos += 1
                    self.expect(":")
                    props.append((key, self.assignment()))
                    if not self.accept(","):
                        break
            self.expect("}")
            return A.ObjectLit(props, self.span_from(t))
        self.fail(f"unexpected {self._describe(t)}")


def parse(source):
    """Parse ``source`` into a :class:`~wmrecon.script_vm.ast.Program`.

    Raises :class:`ScriptSyntaxError` carrying located issues; no partial
    tree is returned.
    """
    return Parser(source).parse_program()
