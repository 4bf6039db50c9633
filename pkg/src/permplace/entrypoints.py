"""Callback detection and synthetic entry (dummy main) generation."""

from __future__ import annotations

from dataclasses import dataclass

from .hierarchy import ClassHierarchy
from .intraflow import possible_types
from .model import (
    ClassDecl,
    Invoke,
    LinkedProgram,
    MethodDecl,
    New,
    SiteId,
    method_sig,
    parse_method_sig,
)

ENTRY_CLASS = "synthetic.Main"


@dataclass(frozen=True, order=True)
class CallbackRef:
    hostClass: str
    sig: str
    basis: str  # override | interface-registration
    registrationSites: tuple = ()


def _excluded_anchors(program: LinkedProgram, hierarchy: ClassHierarchy):
    """Async-construct classes plus their framework supertypes."""
    excluded = set(program.config.async_excludes)
    for name in program.config.async_excludes:
        for sup in hierarchy.supertypes.get(name, frozenset()):
            decl = program.get_class(sup)
            if decl is not None and program.is_framework(decl):
                excluded.add(sup)
    return excluded


def _registration_evidence(program, hierarchy, host: str, anchors):
    """Invoke sites passing an object of type ``host`` at a parameter
    position whose declared type is one of ``anchors``."""
    sites = []
    for decl, m, sig in program.iter_app_bodies():
        types_cache = {}
        for i, stmt in enumerate(m.body):
            if not isinstance(stmt, Invoke):
                continue
            _, _, params = parse_method_sig(stmt.method)
            for pos, ptype in enumerate(params):
                if ptype not in anchors or pos >= len(stmt.args):
                    continue
                arg = stmt.args[pos]
                if arg not in types_cache:
                    types_cache[arg] = possible_types(program, sig, arg)
                for tname, exact in types_cache[arg]:
                    if (tname == host) if exact else hierarchy.is_subtype(host, tname):
                        sites.append(SiteId(sig, i))
                        break
                else:
                    continue
                break
    return tuple(sorted(set(sites)))


def detect_callbacks(program: LinkedProgram, hierarchy: ClassHierarchy):
    """Find app/library methods invoked by the framework.

    A bodied instance method C.f is a callback when a framework superclass
    declares a matching signature (override basis), or C implements a
    framework interface declaring f and an instance of C is registered by
    being passed at a parameter position of that interface type. Async
    constructs (Thread, Runnable, ...) never anchor a callback.
    """
    excluded = _excluded_anchors(program, hierarchy)
    out = []
    for decl, m, sig in program.iter_methods(origins=("app", "library")):
        if m.body is None or m.static or decl.name == program.entry_class:
            continue
        basis = None
        reg_sites = ()
        for sup in hierarchy.superclass_chain(decl.name):
            if sup.name == decl.name or sup.name in excluded:
                continue
            if program.is_framework(sup) and sup.method_by_key(m.name, m.params):
                basis = "override"
                break
        if basis is None:
            anchors = set()
            for iname in sorted(hierarchy.interface_closure(decl.name)):
                idecl = program.get_class(iname)
                if idecl is None or not program.is_framework(idecl) or iname in excluded:
                    continue
                declares = any(
                    program.get_class(s) is not None
                    and program.get_class(s).method_by_key(m.name, m.params)
                    for s in hierarchy.supertypes.get(iname, frozenset())
                    if program.get_class(s) and program.get_class(s).kind == "interface"
                )
                if declares:
                    anchors.add(iname)
            if anchors:
                reg_sites = _registration_evidence(program, hierarchy, decl.name, anchors)
                if reg_sites:
                    basis = "interface-registration"
        if basis is not None:
            out.append(
                CallbackRef(
                    hostClass=decl.name, sig=sig, basis=basis, registrationSites=reg_sites
                )
            )
    return sorted(out)


def generate_dummy_main(program: LinkedProgram, callbacks) -> LinkedProgram:
    """Build ``synthetic.Main#main()``: one allocation per host class, one
    virtual invoke per callback (each a distinct root call site), with fresh
    allocations synthesized for every parameter."""
    body = []
    entry_sites = []
    fresh = iter(range(10**6))
    main_sig = method_sig(ENTRY_CLASS, "main", ())
    hosts = sorted({cb.hostClass for cb in callbacks})
    host_var = {}
    for host in hosts:
        var = f"h{next(fresh)}"
        host_var[host] = var
        body.append(New(target=var, type=host))
    for cb in sorted(callbacks):
        _, name, params = parse_method_sig(cb.sig)
        args = []
        for ptype in params:
            var = f"a{next(fresh)}"
            body.append(New(target=var, type=ptype))
            args.append(var)
        site = SiteId(main_sig, len(body))
        body.append(
            Invoke(
                kind="virtual",
                method=cb.sig,
                receiver=host_var[cb.hostClass],
                args=tuple(args),
            )
        )
        entry_sites.append(site)
    entry_decl = ClassDecl(
        name=ENTRY_CLASS,
        kind="class",
        origin="app",
        methods=(MethodDecl(name="main", static=True, body=tuple(body)),),
    )
    return program.with_entry(entry_decl, entry_sites, callbacks)
