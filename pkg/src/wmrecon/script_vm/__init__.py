"""The ``.wms`` exploit-scripting language: parser, printer and interpreter."""

from dataclasses import dataclass

from wmrecon.script_vm import ast
from wmrecon.script_vm.parser import ScriptSyntaxError, SyntaxIssue, parse
from wmrecon.script_vm.printer import to_source


@dataclass(frozen=True)
class Script:
    source: str
    ast: ast.Program

    @property
    def program(self):
        return self.ast


def load(source):
    """Parse ``source`` and keep it alongside its tree."""
    return Script(source, parse(source))


__all__ = ["Script", "ScriptSyntaxError", "SyntaxIssue", "ast", "load", "parse", "to_source"]
