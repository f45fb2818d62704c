"""S-expression text grammar for process terms (CLI input format).

Grammar (whitespace-separated tokens, parens group)::

    proc  := 0 | nil
           | (out CH (NAME*) PROC)        -- send, then continue
           | (in CH (IDENT*) PROC)        -- receive, binding the idents
           | (par PROC PROC+)             -- parallel composition
           | (sum PROC PROC+)             -- choice
           | (new (IDENT+) PROC)          -- restriction chain
           | (bang PROC)                  -- replication
           | (apply FN (NAME*) IDENT PROC) -- IDENT = FN(names...), continue
           | (ref IDENT)                  -- process identifier
    file  := (defs (IDENT PROC)*)? PROC

    NAME  := IDENT | INTEGER | FLOAT | true | false

Integer/float/boolean tokens are literal value names.  Compute functions
for ``apply`` come from BUILTIN_COMPUTES.
"""

from __future__ import annotations

from ..errors import UsageError
from .process import NIL, FunctionApply, Name, PiProcess, ProcessId, choice
from .process import inp as _inp
from .process import lit, name, nu, out as _out, par, bang

BUILTIN_COMPUTES = {
    "add": lambda *a: sum(a),
    "sub": lambda x, y: x - y,
    "mul": lambda x, y: x * y,
    "neg": lambda x: -x,
    "min": lambda *a: min(a),
    "max": lambda *a: max(a),
    "identity": lambda x: x,
}


def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    token = []
    for ch in text:
        if ch in "()":
            if token:
                out.append("".join(token))
                token = []
            out.append(ch)
        elif ch.isspace():
            if token:
                out.append("".join(token))
                token = []
        else:
            token.append(ch)
    if token:
        out.append("".join(token))
    return out


def _read(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise UsageError("unexpected end of process expression")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise UsageError("unbalanced parentheses in process expression")
        return items, pos + 1
    if tok == ")":
        raise UsageError("unexpected ')' in process expression")
    return tok, pos + 1


def _as_name(tok) -> Name:
    if not isinstance(tok, str):
        raise UsageError(f"expected a name, got {tok!r}")
    if tok == "true":
        return lit(True)
    if tok == "false":
        return lit(False)
    try:
        return lit(int(tok))
    except ValueError:
        pass
    try:
        return lit(float(tok))
    except ValueError:
        pass
    return name(tok)


def _build(node) -> PiProcess:
    if node in ("0", "nil"):
        return NIL
    if not isinstance(node, list) or not node:
        raise UsageError(f"cannot parse process term {node!r}")
    head = node[0]
    if head == "out":
        if len(node) not in (3, 4):
            raise UsageError("(out CH (NAMES) PROC?)")
        cont = _build(node[3]) if len(node) == 4 else NIL
        payload = tuple(_as_name(t) for t in node[2])
        return _out(_as_name(node[1]), payload, cont)
    if head == "in":
        if len(node) not in (3, 4):
            raise UsageError("(in CH (IDENTS) PROC?)")
        cont = _build(node[3]) if len(node) == 4 else NIL
        binders = tuple(_as_name(t) for t in node[2])
        return _inp(_as_name(node[1]), binders, cont)
    if head == "par":
        return par(*[_build(n) for n in node[1:]])
    if head == "sum":
        return choice(*[_build(n) for n in node[1:]])
    if head == "new":
        if len(node) != 3:
            raise UsageError("(new (IDENTS) PROC)")
        names = tuple(_as_name(t) for t in node[1])
        return nu(names, _build(node[2]))
    if head == "bang":
        if len(node) != 2:
            raise UsageError("(bang PROC)")
        return bang(_build(node[1]))
    if head == "apply":
        if len(node) != 5:
            raise UsageError("(apply FN (ARGS) RESULT PROC)")
        args = tuple(_as_name(t) for t in node[2])
        return FunctionApply(node[1], args, _as_name(node[3]), _build(node[4]))
    if head == "ref":
        if len(node) != 2:
            raise UsageError("(ref IDENT)")
        return ProcessId(node[1])
    raise UsageError(f"unknown process form {head!r}")


def parse_process(text: str) -> tuple[PiProcess, dict[str, PiProcess]]:
    """Parse a process file; returns (process, definitions)."""
    tokens = _tokenize(text)
    node, pos = _read(tokens, 0)
    defs: dict[str, PiProcess] = {}
    if isinstance(node, list) and node and node[0] == "defs":
        for entry in node[1:]:
            if not isinstance(entry, list) or len(entry) != 2 or not isinstance(entry[0], str):
                raise UsageError("(defs (IDENT PROC)*)")
            defs[entry[0]] = _build(entry[1])
        node, pos = _read(tokens, pos)
    if pos != len(tokens):
        raise UsageError("trailing tokens after process expression")
    return _build(node), defs
