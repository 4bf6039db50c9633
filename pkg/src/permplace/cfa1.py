"""1-CFA context-sensitive refinement, realized as query-time filtering over
the 0-CFA solution.

A context is the call site that entered the current method (depth 1).
Actual arguments and call returns are evaluated context-insensitively in
the caller; instance-field contents use context-insensitive field sets but
through a context-refined base set, which is what lets one call site's
receiver discriminate between otherwise-merged heap objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import InvalidContext
from .hierarchy import ClassHierarchy
from .intraflow import _param_index, defs_of
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
)
from .pointsto import CallGraph, PointsToSolution


@dataclass(frozen=True, order=True)
class Context:
    entrySite: SiteId


def _check_context(program: LinkedProgram, method: str, ctx: Context) -> Invoke:
    try:
        stmt = program.stmt_at(ctx.entrySite)
    except KeyError:
        raise InvalidContext(f"{ctx.entrySite} is not a statement")
    if not isinstance(stmt, Invoke):
        raise InvalidContext(f"{ctx.entrySite} is not an invoke")
    _, cname, cparams = parse_method_sig(stmt.method)
    _, mname, mparams = parse_method_sig(method)
    if (cname, cparams) != (mname, mparams):
        raise InvalidContext(f"{ctx.entrySite} does not call {method}")
    return stmt


def refine_pts(
    sol: PointsToSolution,
    program: LinkedProgram,
    method: str,
    var: str,
    ctx: Context,
    _memo: Optional[dict] = None,
) -> frozenset:
    """Context-refined points-to set for a local of ``method`` under ``ctx``.

    Always a subset of the context-insensitive set; falls back to it on
    local-assignment cycles and at the depth-1 cutoff (call returns,
    arguments evaluated in the caller).
    """
    entry = _check_context(program, method, ctx)
    memo = _memo if _memo is not None else {}
    body = program.body_of(method) or ()
    caller = ctx.entrySite.method

    def pts0(v: str) -> frozenset:
        return sol.pts(method, v)

    def refine(v: str) -> frozenset:
        if v in memo:
            return memo[v]
        memo[v] = pts0(v)  # cycle fallback: context-insensitive set
        result = set()
        defs = defs_of(body, v)
        if v == "this" and entry.receiver is not None:
            result |= sol.pts(caller, entry.receiver)
        else:
            i = _param_index(v)
            if i is not None and i < len(entry.args):
                result |= sol.pts(caller, entry.args[i])
            elif not defs and i is None and v != "this":
                result |= pts0(v)
        for idx, stmt in defs:
            if isinstance(stmt, (New, ConstStr)):
                result.add(SiteId(method, idx))
            elif isinstance(stmt, Assign):
                result |= refine(stmt.source)
            elif isinstance(stmt, LoadField):
                for a in refine(stmt.base):
                    result |= sol.fpts(a, stmt.field)
            elif isinstance(stmt, LoadStatic):
                result |= sol.spts0.get(stmt.field, frozenset())
            elif isinstance(stmt, Invoke):
                result |= pts0(v)  # depth-1 cutoff on call returns
        memo[v] = frozenset(result) & pts0(v)
        return memo[v]

    return refine(var)


def filter_edges(
    cg: CallGraph,
    sol: PointsToSolution,
    program: LinkedProgram,
    hierarchy: ClassHierarchy,
    site: SiteId,
    ctx: Context,
):
    """Context-filter the edges at a call site; returns (edges, ambiguous).

    Augmented and entry edges pass unchanged (unique by construction), as
    do static/special edges. For points-to edges at virtual/interface
    sites, only edges compatible with the refined receiver set survive; an
    empty refined set keeps all edges (never drop reachability on
    refinement gaps). ``ambiguous`` is true when more than one points-to
    edge survives.
    """
    edges = cg.edges_at(site)
    stmt = program.stmt_at(site)
    if not isinstance(stmt, Invoke):
        return frozenset(), False
    if stmt.kind in ("static", "special"):
        return edges, False
    passthrough = {e for e in edges if e[1] in ("augmented",)}
    pointsto = edges - passthrough
    if not pointsto:
        return edges, False
    refined = refine_pts(sol, program, site.method, stmt.receiver, ctx)
    if refined:
        _, name, params = parse_method_sig(stmt.method)
        allowed = set()
        for a in sorted(refined):
            rtype = sol.alloc_type.get(a)
            if rtype is None:
                continue
            hit = hierarchy.dispatch(rtype, name, params)
            if hit is not None:
                allowed.add(hit[1].sig(hit[0]))
        surviving = frozenset(e for e in pointsto if e[0] in allowed)
        if not surviving:
            surviving = pointsto  # safety fallback
    else:
        surviving = pointsto
    ambiguous = len(surviving) > 1
    return frozenset(passthrough | surviving), ambiguous
