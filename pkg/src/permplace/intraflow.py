"""Intraprocedural, flow-insensitive value chasing over method locals.

Two views over the same def-chase: concrete values (allocation sites,
string literals, static-field ids) for sensitive matching, and possible
runtime types for callback-registration evidence.
"""

from __future__ import annotations

from .model import (
    Assign,
    ConstStr,
    Invoke,
    LinkedProgram,
    LoadField,
    LoadStatic,
    New,
    SiteId,
    parse_method_sig,
    param_local,
)

UNKNOWN = ("unknown",)


def defs_of(body, var: str):
    out = []
    for i, stmt in enumerate(body):
        target = getattr(stmt, "target", None)
        if target == var:
            out.append((i, stmt))
    return out


def _param_index(var: str):
    if var.startswith("p") and var[1:].isdigit():
        return int(var[1:])
    return None


def intraproc_values(program: LinkedProgram, sig: str, var: str):
    """Possible values of a local: allocation sites, literals, static field
    ids, or UNKNOWN (params, instance-field loads, call returns)."""
    body = program.body_of(sig)
    if body is None:
        return {UNKNOWN}
    out = set()
    seen = set()

    def chase(v: str) -> None:
        if v in seen:
            return
        seen.add(v)
        defs = defs_of(body, v)
        if not defs:
            out.add(UNKNOWN)  # parameter, `this`, or undefined local
            return
        for i, stmt in defs:
            if isinstance(stmt, New):
                out.add(("alloc", SiteId(sig, i)))
            elif isinstance(stmt, ConstStr):
                out.add(("literal", stmt.value))
            elif isinstance(stmt, Assign):
                chase(stmt.source)
            elif isinstance(stmt, LoadStatic):
                out.add(("sfield", stmt.field))
            else:  # load_field, invoke return
                out.add(UNKNOWN)

    chase(var)
    return out


def possible_types(program: LinkedProgram, sig: str, var: str):
    """Possible runtime types of a local, as (type name, exact) pairs.

    ``exact`` types come from allocation sites; inexact ones are declared
    types of opaque defs (call returns, parameters, static-field loads),
    meaning any subtype is possible.
    """
    body = program.body_of(sig)
    cls, _, params = parse_method_sig(sig)
    if body is None:
        return set()
    out = set()
    seen = set()

    def chase(v: str) -> None:
        if v in seen:
            return
        seen.add(v)
        defs = defs_of(body, v)
        if not defs:
            if v == "this":
                out.add((cls, False))
            else:
                i = _param_index(v)
                if i is not None and i < len(params):
                    out.add((params[i], False))
            return
        for _, stmt in defs:
            if isinstance(stmt, New):
                out.add((stmt.type, True))
            elif isinstance(stmt, ConstStr):
                out.add(("java.lang.String", True))
            elif isinstance(stmt, Assign):
                chase(stmt.source)
            elif isinstance(stmt, Invoke):
                _, name, ps = parse_method_sig(stmt.method)
                found = program.lookup_method(stmt.method)
                if found is not None:
                    out.add((found[1].returnType, False))
            elif isinstance(stmt, LoadStatic):
                found = program.lookup_field(stmt.field)
                if found is not None:
                    out.add((found[1].type, False))
            elif isinstance(stmt, LoadField):
                pass  # base type unknown without points-to; contributes nothing

    chase(var)
    return out
