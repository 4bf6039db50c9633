"""Sensitive-site detection, context-filtered reachability traversal,
insertion-point reporting, and the CHA-reachability partition."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

from .cfa1 import Context, filter_edges
from .errors import InconsistentInput, UnknownType
from .hierarchy import ClassHierarchy
from .intraflow import intraproc_values
from .model import Invoke, LinkedProgram, SiteId, parse_method_sig
from .permspec import PermissionSpec
from .pointsto import CallGraph, PointsToSolution


@dataclass(frozen=True, order=True)
class SensitiveSite:
    site: SiteId
    kind: str  # method | field
    matchedKeys: tuple  # sorted method sig / field ids / literal values
    permissions: frozenset
    viaParametric: bool = False


@dataclass(frozen=True)
class PathRecord:
    nodes: tuple  # ((method sig, entry SiteId), ...)
    sensitive: SensitiveSite
    ambiguous: bool


@dataclass(frozen=True)
class Limits:
    maxDepth: int = 50
    maxPathsPerSensitive: int = 100


@dataclass
class AnalysisReport:
    app: str
    mode: str  # cfa0 | cfa1
    augment: bool
    callbacks: list = field(default_factory=list)
    # callbacks: [{class, method, insertionPoints: [...]}]
    summary: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# sensitive detection


def find_sensitive_sites(
    program: LinkedProgram, hierarchy: ClassHierarchy, spec: PermissionSpec
):
    """Scan every invoke in app/library bodies against the spec.

    Method entries match the declaration visible at the site; parametric
    entries match when the intraprocedural values of the flagged argument
    include a protected field (by id, or a string literal equal to a field
    entry's URI value). A site may yield both kinds."""
    out = []
    for decl, m, sig in program.iter_app_bodies():
        for i, stmt in enumerate(m.body):
            if not isinstance(stmt, Invoke):
                continue
            site = SiteId(sig, i)
            try:
                visible = hierarchy.resolve_declaration(stmt)
            except UnknownType:
                visible = None
            if visible is None:
                continue
            entry = spec.method_entry(visible)
            if entry is not None:
                out.append(
                    SensitiveSite(
                        site=site,
                        kind="method",
                        matchedKeys=(visible,),
                        permissions=entry.permissions,
                    )
                )
            for pentry in spec.parametric_entries(visible):
                idx = pentry.argIndex
                if idx is None or idx >= len(stmt.args):
                    continue
                matched = set()
                perms = set()
                for value in intraproc_values(program, sig, stmt.args[idx]):
                    if value[0] == "sfield":
                        fentry = spec.field_entry(value[1])
                        if fentry is not None:
                            matched.add(value[1])
                            perms |= fentry.permissions
                    elif value[0] == "literal":
                        fentry = spec.field_entry_by_value(value[1])
                        if fentry is not None:
                            matched.add(value[1])
                            perms |= fentry.permissions
                if matched:
                    out.append(
                        SensitiveSite(
                            site=site,
                            kind="field",
                            matchedKeys=tuple(sorted(matched)),
                            permissions=frozenset(perms),
                            viaParametric=True,
                        )
                    )
    return sorted(out)


# ---------------------------------------------------------------------------
# traversal


def traverse(
    program: LinkedProgram,
    cg: CallGraph,
    sol: PointsToSolution,
    hierarchy: ClassHierarchy,
    sensitives,
    mode: str = "cfa1",
    limits: Limits = Limits(),
    augment: bool = True,
) -> AnalysisReport:
    """Depth-first reachability from every dummy-main callback invocation.

    A method already on the current path stack is not re-entered; caps are
    reported in-band as ``truncated`` flags, never as errors."""
    assert mode in ("cfa0", "cfa1")
    sens_by_method = defaultdict(list)
    for s in sensitives:
        sens_by_method[s.site.method].append(s)

    report = AnalysisReport(app=program.name, mode=mode, augment=augment)
    total_paths = 0
    flagged = set()

    for entry_site in program.entry_sites:
        entry_edges = cg.edges_at(entry_site)
        if not entry_edges:
            continue
        (cb_sig, _prov) = sorted(entry_edges)[0]
        cls, mname, mparams = parse_method_sig(cb_sig)
        paths_by_sensitive = defaultdict(list)
        truncated_sensitives = set()
        depth_truncated = [False]

        def dfs(method, ctx, nodes, stack, ambiguous):
            for s in sens_by_method.get(method, ()):
                if len(paths_by_sensitive[s]) >= limits.maxPathsPerSensitive:
                    truncated_sensitives.add(s)
                    continue
                paths_by_sensitive[s].append(
                    PathRecord(nodes=tuple(nodes), sensitive=s, ambiguous=ambiguous)
                )
            if len(nodes) >= limits.maxDepth:
                depth_truncated[0] = True
                return
            body = program.body_of(method) or ()
            for i, stmt in enumerate(body):
                if not isinstance(stmt, Invoke):
                    continue
                site = SiteId(method, i)
                edges = cg.edges_at(site)
                if not edges:
                    continue
                if mode == "cfa1":
                    surviving, amb = filter_edges(cg, sol, program, hierarchy, site, ctx)
                else:
                    surviving, amb = edges, len(edges) > 1
                for target, _prov2 in sorted(surviving):
                    if target in stack or program.body_of(target) is None:
                        continue
                    dfs(
                        target,
                        Context(entrySite=site),
                        nodes + [(target, site)],
                        stack | {target},
                        ambiguous or amb,
                    )

        root_ctx = Context(entrySite=entry_site)
        dfs(cb_sig, root_ctx, [(cb_sig, entry_site)], {cb_sig}, False)

        if not paths_by_sensitive:
            continue
        # insertion point = first-call statement inside the callback body
        # (or the sensitive itself when it sits directly in the callback)
        by_stmt = defaultdict(list)  # stmt index -> [(sensitive, paths)]
        for s in sorted(paths_by_sensitive):
            paths = paths_by_sensitive[s]
            if not paths:
                continue
            stmts = set()
            for p in paths:
                if len(p.nodes) > 1:
                    stmts.add(p.nodes[1][1].stmt)
                else:
                    stmts.add(s.site.stmt)
            for idx in sorted(stmts):
                group = [
                    p
                    for p in paths
                    if (p.nodes[1][1].stmt if len(p.nodes) > 1 else s.site.stmt) == idx
                ]
                by_stmt[idx].append((s, group))
        insertion_points = []
        for idx in sorted(by_stmt):
            entries = by_stmt[idx]
            perms = set()
            sens_out = []
            for s, paths in entries:
                perms |= s.permissions
                flagged.add(s)
                total_paths += len(paths)
                sens_out.append(
                    {
                        "site": str(s.site),
                        "kind": s.kind,
                        "keys": list(s.matchedKeys),
                        "permissions": sorted(s.permissions),
                        "viaParametric": s.viaParametric,
                        "truncated": s in truncated_sensitives,
                        "paths": [
                            {
                                "nodes": [
                                    {"method": msig, "entry": str(esite)}
                                    for msig, esite in p.nodes
                                ],
                                "ambiguous": p.ambiguous,
                            }
                            for p in paths
                        ],
                    }
                )
            insertion_points.append(
                {"stmt": idx, "permissions": sorted(perms), "sensitives": sens_out}
            )
        report.callbacks.append(
            {
                "class": cls,
                "method": cb_sig,
                "entrySite": str(entry_site),
                "truncated": depth_truncated[0],
                "insertionPoints": insertion_points,
            }
        )

    report.summary = {
        "callbacksFlagged": len(report.callbacks),
        "sensitivesDetected": len(flagged),
        "paths": total_paths,
        "permissions": sorted({p for s in flagged for p in s.permissions}),
    }
    return report


def detected_sensitives(report: AnalysisReport):
    """Set of sensitive site-id strings flagged anywhere in a report."""
    out = set()
    for cb in report.callbacks:
        for ip in cb["insertionPoints"]:
            for s in ip["sensitives"]:
                out.add(s["site"])
    return out


# ---------------------------------------------------------------------------
# CHA-reachability partition


def cha_reachable_methods(program: LinkedProgram, hierarchy: ClassHierarchy):
    """Closure from the dummy main using class hierarchy data alone: every
    virtual site expands to all bodied CHA targets."""
    main = program.entry_main_sig
    if main is None:
        return frozenset()
    seen = set()
    queue = [main]
    while queue:
        m = queue.pop()
        if m in seen:
            continue
        seen.add(m)
        body = program.body_of(m)
        if body is None:
            continue
        for stmt in body:
            if not isinstance(stmt, Invoke):
                continue
            try:
                targets = hierarchy.cha_targets(stmt)
            except UnknownType:
                continue
            for t in targets:
                if t not in seen:
                    queue.append(t)
    return frozenset(seen)


def cha_reach_partition(
    program: LinkedProgram,
    hierarchy: ClassHierarchy,
    sensitives,
    detected,
):
    """Partition all sensitives into unreachable / cha_reachable_undetected /
    detected. ``detected`` is the site-id string set from a traverse run on
    the same program."""
    reachable = cha_reachable_methods(program, hierarchy)
    partition = {"unreachable": [], "cha_reachable_undetected": [], "detected": []}
    for s in sorted(sensitives):
        sid = str(s.site)
        if sid in detected:
            if s.site.method not in reachable:
                raise InconsistentInput(f"detected sensitive {sid} is not CHA-reachable")
            partition["detected"].append(s)
        elif s.site.method in reachable:
            partition["cha_reachable_undetected"].append(s)
        else:
            partition["unreachable"].append(s)
    return partition


# ---------------------------------------------------------------------------
# report serialization


def report_to_dict(report: AnalysisReport) -> dict:
    return {
        "app": report.app,
        "mode": report.mode,
        "augment": report.augment,
        "callbacks": report.callbacks,
        "summary": report.summary,
    }


def write_report(report: AnalysisReport, fmt: str = "json") -> bytes:
    """Stable serialization: sorted keys, sorted sites, byte-identical
    across reruns."""
    if fmt == "json":
        return (
            json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
        ).encode("utf-8")
    if fmt != "text":
        raise ValueError(f"unknown report format: {fmt}")
    lines = [
        f"app: {report.app}",
        f"mode: {report.mode}  augment: {'on' if report.augment else 'off'}",
        "",
    ]
    for cb in report.callbacks:
        lines.append(f"callback {cb['method']}")
        for ip in cb["insertionPoints"]:
            lines.append(
                f"  insert request at stmt {ip['stmt']}: {', '.join(ip['permissions'])}"
            )
            for s in ip["sensitives"]:
                n_amb = sum(1 for p in s["paths"] if p["ambiguous"])
                lines.append(
                    f"    {s['kind']} sensitive {s['site']} "
                    f"({len(s['paths'])} path(s), {n_amb} ambiguous)"
                )
        lines.append("")
    lines.append(
        f"summary: {report.summary.get('callbacksFlagged', 0)} callback(s), "
        f"{report.summary.get('sensitivesDetected', 0)} sensitive(s), "
        f"{report.summary.get('paths', 0)} path(s)"
    )
    return ("\n".join(lines) + "\n").encode("utf-8")
