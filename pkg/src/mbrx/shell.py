"""Shell command tokenization with light grammar validation.

Shell candidates are never executed: their token stream stands in for an
execution result, and a command the grammar rejects counts as inexecutable.
"""

from __future__ import annotations

import shlex

PARSER_VERSION = "mbrx-shell-1"

CONTROL_OPERATORS = {"|", "||", "&&", ";", ";;", "&", "|&"}
REDIRECT_OPERATORS = {"<", ">", ">>", "<<", "<<<", "<>", ">|", ">&", "<&"}


class ShellParseError(ValueError):
    """Raised when a command fails to lex or violates the command grammar."""


def tokenize_command(command: str) -> list[str]:
    """Split a shell command into tokens, operators included.

    Rejects unbalanced quoting, empty commands, dangling pipes or logical
    operators, redirections without a target, and unbalanced parentheses.
    """
    if not command.strip():
        raise ShellParseError("empty command")
    lexer = shlex.shlex(command, posix=True, punctuation_chars=True)
    lexer.whitespace_split = True
    try:
        tokens = list(lexer)
    except ValueError as e:
        raise ShellParseError(f"lexing failed: {e}") from e
    _check_grammar(tokens)
    return tokens


def _check_grammar(tokens: list[str]) -> None:
    depth = 0
    prev_op: str | None = "start"
    known = CONTROL_OPERATORS | REDIRECT_OPERATORS | {"(", ")"}
    for tok in tokens:
        if tok not in known and tok and set(tok) <= set("();<>|&"):
            raise ShellParseError(f"unrecognized operator sequence {tok!r}")
        if tok == "(":
            depth += 1
            prev_op = "start"
            continue
        if tok == ")":
            depth -= 1
            if depth < 0:
                raise ShellParseError("unbalanced closing parenthesis")
            if prev_op is not None:
                raise ShellParseError("empty group or dangling operator before ')'")
            prev_op = None
            continue
        if tok in CONTROL_OPERATORS or tok in REDIRECT_OPERATORS:
            if prev_op is not None and prev_op != "start":
                raise ShellParseError(f"operator {tok!r} follows operator {prev_op!r}")
            if prev_op == "start" and tok not in REDIRECT_OPERATORS:
                raise ShellParseError(f"command starts with operator {tok!r}")
            prev_op = tok
            continue
        prev_op = None
    if depth != 0:
        raise ShellParseError("unbalanced opening parenthesis")
    if prev_op is not None and prev_op not in (";", "&", "start"):
        raise ShellParseError(f"command ends with dangling operator {prev_op!r}")
    if prev_op == "start":
        raise ShellParseError("empty command")
