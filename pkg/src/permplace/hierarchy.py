"""Class-hierarchy index: subtype queries, dispatch, CHA target sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import CycleError, UnknownType
from .model import Invoke, LinkedProgram, MethodDecl, parse_method_sig


@dataclass
class ClassHierarchy:
    program: LinkedProgram
    supertypes: dict = field(default_factory=dict)  # name -> frozenset (incl. self)
    subtypes: dict = field(default_factory=dict)  # name -> frozenset (incl. self)
    _dispatch_cache: dict = field(default_factory=dict)

    # -- queries ------------------------------------------------------------

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup in self.supertypes.get(sub, frozenset())

    def superclass_chain(self, name: str):
        """The class itself followed by its transitive superclasses."""
        decl = self.program.get_class(name)
        while decl is not None:
            yield decl
            decl = self.program.get_class(decl.super) if decl.super else None

    def interface_closure(self, name: str):
        """All interfaces in the supertype closure of ``name``."""
        return frozenset(
            s
            for s in self.supertypes.get(name, frozenset())
            if self.program.get_class(s) is not None
            and self.program.get_class(s).kind == "interface"
        )

    def dispatch(self, runtime_type: str, name: str, params) -> Optional[tuple]:
        """Nearest declaration walking up the superclass chain.

        Returns (class name, MethodDecl) or None. Interface declarations do
        not participate; they are abstract-only.
        """
        key = (runtime_type, name, tuple(params))
        if key in self._dispatch_cache:
            return self._dispatch_cache[key]
        result = None
        for decl in self.superclass_chain(runtime_type):
            m = decl.method_by_key(name, params)
            if m is not None and not m.abstract:
                result = (decl.name, m)
                break
        self._dispatch_cache[key] = result
        return result

    def dispatch_sig(self, runtime_type: str, sig: str) -> Optional[tuple]:
        _, name, params = parse_method_sig(sig)
        return self.dispatch(runtime_type, name, params)

    def cha_targets(self, invoke: Invoke, include_stubs: bool = False):
        """CHA target signature set for a call site.

        static/special sites yield the single direct target. virtual and
        interface sites yield the dispatch result of every concrete subtype
        of the declared receiver type. By default only bodied declarations
        are returned (stub-only targets are useless for reachability and
        for augmentation candidacy); ``include_stubs`` lifts that.
        """
        cls, name, params = parse_method_sig(invoke.method)
        if self.program.get_class(cls) is None:
            raise UnknownType(cls)
        if invoke.kind in ("static", "special"):
            direct = self.resolve_declaration(invoke)
            if direct is None:
                return set()
            found = self.program.lookup_method(direct)
            if found is None or (found[1].body is None and not include_stubs):
                return set()
            return {direct}
        targets = set()
        for sub in sorted(self.subtypes.get(cls, frozenset())):
            decl = self.program.get_class(sub)
            if decl is None or decl.kind != "class":
                continue
            hit = self.dispatch(sub, name, params)
            if hit is None:
                continue
            owner, m = hit
            if m.body is None and not include_stubs:
                continue
            targets.add(m.sig(owner))
        return targets

    def resolve_declaration(self, invoke: Invoke) -> Optional[str]:
        """Canonical signature of the declaration visible at a call site.

        Walks upward (superclasses first, then interfaces) from the declared
        receiver type; this is the key used for spec matching, so it works
        even when points-to is empty.
        """
        cls, name, params = parse_method_sig(invoke.method)
        if self.program.get_class(cls) is None:
            raise UnknownType(cls)
        seen = set()
        queue = [cls]
        while queue:
            current = queue.pop(0)
            if current in seen:
                continue
            seen.add(current)
            decl = self.program.get_class(current)
            if decl is None:
                continue
            m = decl.method_by_key(name, params)
            if m is not None:
                return m.sig(current)
            if decl.super is not None:
                queue.append(decl.super)
            queue.extend(decl.interfaces)
        return None


def build_hierarchy(program: LinkedProgram) -> ClassHierarchy:
    """Compute supertype/subtype closures; raises CycleError on cycles."""
    parents = {}
    for name, decl in program.classes.items():
        ps = list(decl.interfaces)
        if decl.super is not None:
            ps.append(decl.super)
        parents[name] = ps

    supertypes = {}
    state = {}  # 0 = in progress, 1 = done

    def close(name: str, stack):
        if name in supertypes:
            return supertypes[name]
        if state.get(name) == 0:
            cycle = stack[stack.index(name):] + [name]
            raise CycleError(" -> ".join(cycle))
        state[name] = 0
        stack.append(name)
        closure = {name}
        for p in parents.get(name, ()):
            closure |= close(p, stack)
        stack.pop()
        state[name] = 1
        supertypes[name] = frozenset(closure)
        return supertypes[name]

    for name in sorted(parents):
        close(name, [])

    subtypes = {name: set() for name in parents}
    for name, sups in supertypes.items():
        for s in sups:
            if s in subtypes:
                subtypes[s].add(name)
    return ClassHierarchy(
        program=program,
        supertypes=supertypes,
        subtypes={k: frozenset(v) for k, v in subtypes.items()},
    )
