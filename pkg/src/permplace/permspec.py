"""Permission specification: data model, file format, merging, doc mining.

A spec file (``*.spec.json``) is a JSON array of entry objects; a group
table (``groups.json``) is a JSON array of ``{permission, group, dangerous}``
rows. Multi-permission entries mean all-of by default; ``anyOf: true``
opts into any-of semantics (reports always show the full set).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from typing import Optional

from .errors import ConflictError, ParseError, ValidationError
from .model import LinkedProgram, field_id, method_sig, parse_field_id, parse_method_sig

log = logging.getLogger(__name__)

ENTRY_KINDS = ("method", "field", "parametric")
ENTRY_SOURCES = ("annotation", "xml", "javadoc", "app-mined", "fixture")


@dataclass(frozen=True)
class SpecEntry:
    kind: str
    key: str  # canonical method sig (method/parametric) or field id (field)
    permissions: frozenset
    argIndex: Optional[int] = None
    constValue: Optional[str] = None
    anyOf: bool = False
    deprecated: bool = False
    source: str = "fixture"

    @property
    def entry_key(self):
        return (self.kind, self.key, self.argIndex)


@dataclass(frozen=True)
class PermissionSpec:
    entries: dict  # (kind, key, argIndex) -> SpecEntry
    provenance: tuple = ()

    def __len__(self):
        return len(self.entries)

    def by_kind(self, kind: str):
        return [e for k, e in sorted(self.entries.items()) if e.kind == kind]

    def method_entry(self, sig: str) -> Optional[SpecEntry]:
        return self.entries.get(("method", sig, None))

    def parametric_entries(self, sig: str):
        return [
            e
            for k, e in sorted(self.entries.items())
            if e.kind == "parametric" and e.key == sig
        ]

    def field_entry(self, fid: str) -> Optional[SpecEntry]:
        return self.entries.get(("field", fid, None))

    def field_entry_by_value(self, literal: str) -> Optional[SpecEntry]:
        for _, e in sorted(self.entries.items()):
            if e.kind == "field" and e.constValue == literal:
                return e
        return None

    def all_permissions(self) -> frozenset:
        perms = set()
        for e in self.entries.values():
            perms |= e.permissions
        return frozenset(perms)


def _entry_from_dict(d: dict, where: str) -> Optional[SpecEntry]:
    if not isinstance(d, dict):
        raise ParseError("spec entry must be an object", where)
    kind = d.get("kind")
    if kind not in ENTRY_KINDS:
        raise ValidationError(f"{where}: bad entry kind {kind!r}")
    key = d.get("key")
    if not key:
        raise ValidationError(f"{where}: missing key")
    perms = frozenset(d.get("permissions", ()))
    if not perms or any(not p for p in perms):
        raise ValidationError(f"{where}: permissions must be a non-empty set of names")
    arg = d.get("argIndex")
    if isinstance(arg, (list, tuple)):
        # Multi-parameter parametric sensitives are unsupported; skip with a
        # warning rather than failing the whole spec.
        log.warning("%s: skipping parametric entry with %d argument indices (%s)",
                    where, len(arg), key)
        return None
    if kind == "parametric":
        if arg is None:
            raise ValidationError(f"{where}: parametric entry requires argIndex")
        arg = int(arg)
    elif arg is not None:
        raise ValidationError(f"{where}: argIndex only allowed on parametric entries")
    const = d.get("constValue")
    if const is not None and kind != "field":
        raise ValidationError(f"{where}: constValue only allowed on field entries")
    try:
        if kind == "field":
            parse_field_id(key)
        else:
            parse_method_sig(key)
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}")
    source = d.get("source", "fixture")
    if source not in ENTRY_SOURCES:
        raise ValidationError(f"{where}: bad source {source!r}")
    return SpecEntry(
        kind=kind,
        key=key,
        permissions=perms,
        argIndex=arg,
        constValue=const,
        anyOf=bool(d.get("anyOf", False)),
        deprecated=bool(d.get("deprecated", False)),
        source=source,
    )


def spec_from_list(items, where: str = "<spec>") -> PermissionSpec:
    entries = {}
    for i, raw in enumerate(items):
        entry = _entry_from_dict(raw, f"{where}[{i}]")
        if entry is None:
            continue
        prev = entries.get(entry.entry_key)
        if prev is not None:
            if prev.permissions != entry.permissions:
                raise ValidationError(
                    f"{where}[{i}]: duplicate key {entry.key} with different permissions"
                )
            continue  # identical duplicates collapse
        entries[entry.entry_key] = entry
    return PermissionSpec(entries=entries, provenance=(where,))


def load_spec(path) -> PermissionSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path))
    if not isinstance(data, list):
        raise ParseError("spec file must be a JSON array of entries", str(path))
    return spec_from_list(data, str(path))


def entry_to_dict(e: SpecEntry) -> dict:
    d = {"kind": e.kind, "key": e.key, "permissions": sorted(e.permissions)}
    if e.argIndex is not None:
        d["argIndex"] = e.argIndex
    if e.constValue is not None:
        d["constValue"] = e.constValue
    if e.anyOf:
        d["anyOf"] = True
    if e.deprecated:
        d["deprecated"] = True
    d["source"] = e.source
    return d


def spec_to_list(spec: PermissionSpec):
    return [entry_to_dict(e) for _, e in sorted(spec.entries.items())]


def merge_specs(a: PermissionSpec, b: PermissionSpec):
    """Union two specs; returns (merged, report).

    The report lists common / unique-to-a / unique-to-b keys. Keys present
    in both with different permission sets raise :class:`ConflictError`.
    """
    conflicts = []
    merged = dict(a.entries)
    for key, eb in b.entries.items():
        ea = merged.get(key)
        if ea is None:
            merged[key] = eb
        elif ea.permissions != eb.permissions:
            conflicts.append(key)
    if conflicts:
        raise ConflictError(sorted(conflicts))
    common = sorted(set(a.entries) & set(b.entries))
    report = {
        "common": common,
        "unique_to_a": sorted(set(a.entries) - set(b.entries)),
        "unique_to_b": sorted(set(b.entries) - set(a.entries)),
    }
    return (
        PermissionSpec(entries=merged, provenance=a.provenance + b.provenance),
        report,
    )


# ---------------------------------------------------------------------------
# dangerous-permission groups


@dataclass(frozen=True)
class GroupTable:
    group_of: dict  # permission -> group name
    dangerous: frozenset  # permission names

    def is_dangerous(self, permission: str) -> bool:
        return permission in self.dangerous

    def group(self, permission: str) -> Optional[str]:
        return self.group_of.get(permission)

    def check_total(self, spec: PermissionSpec) -> None:
        missing = sorted(spec.all_permissions() - set(self.group_of))
        if missing:
            log.warning("group table missing permissions: %s", ", ".join(missing))


def load_groups(path) -> GroupTable:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path))
    if not isinstance(data, list):
        raise ParseError("group table must be a JSON array", str(path))
    group_of = {}
    dangerous = set()
    for i, row in enumerate(data):
        perm = row.get("permission")
        group = row.get("group")
        if not perm or not group:
            raise ValidationError(f"{path}[{i}]: permission and group are required")
        group_of[perm] = group
        if row.get("dangerous", False):
            dangerous.add(perm)
    return GroupTable(group_of=group_of, dangerous=frozenset(dangerous))


def filter_dangerous(spec: PermissionSpec, groups: GroupTable) -> PermissionSpec:
    """Drop non-dangerous permissions from entries; drop emptied entries."""
    groups.check_total(spec)
    entries = {}
    for key, e in spec.entries.items():
        kept = frozenset(p for p in e.permissions if groups.is_dangerous(p))
        if kept:
            entries[key] = replace(e, permissions=kept)
    return PermissionSpec(entries=entries, provenance=spec.provenance)


# ---------------------------------------------------------------------------
# doc-comment candidate mining


@dataclass(frozen=True)
class DocCandidate:
    element: str  # class name, method sig, or field id
    permission: str
    uniqueIdentifier: bool
    snippet: str
    needsMemberExpansion: bool


def _snippet(doc: str, match: re.Match) -> str:
    start = max(0, match.start() - 40)
    end = min(len(doc), match.end() + 40)
    return doc[start:end].replace("\n", " ").strip()


def mine_doc_candidates(program: LinkedProgram, ident_table: dict):
    """Scan framework doc comments for permission identifiers.

    ``ident_table`` maps identifier -> (permission, unique). One candidate
    is produced per (element, identifier) word-boundary match; class-level
    hits are flagged for member expansion, non-unique identifiers for
    manual review.
    """
    patterns = {
        ident: re.compile(r"\b" + re.escape(ident) + r"\b") for ident in ident_table
    }
    out = []

    def scan(element: str, doc: Optional[str], class_level: bool) -> None:
        if not doc:
            return
        for ident in sorted(patterns):
            m = patterns[ident].search(doc)
            if m is None:
                continue
            permission, unique = ident_table[ident]
            out.append(
                DocCandidate(
                    element=element,
                    permission=permission,
                    uniqueIdentifier=bool(unique),
                    snippet=_snippet(doc, m),
                    needsMemberExpansion=class_level,
                )
            )

    for cname in sorted(program.classes):
        decl = program.classes[cname]
        if not program.is_framework(decl):
            continue
        scan(cname, decl.doc, class_level=True)
        for f in sorted(decl.fields, key=lambda f: f.name):
            scan(field_id(cname, f.name), f.doc, class_level=False)
        for m in sorted(decl.methods, key=lambda m: (m.name, m.params)):
            scan(method_sig(cname, m.name, m.params), m.doc, class_level=False)
    return out


def candidates_to_csv(candidates) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["element", "permission", "unique", "needs_expansion", "snippet"])
    for c in candidates:
        writer.writerow(
            [
                c.element,
                c.permission,
                str(c.uniqueIdentifier).lower(),
                str(c.needsMemberExpansion).lower(),
                c.snippet,
            ]
        )
    return buf.getvalue()


def load_ident_table(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path))
    table = {}
    for ident, row in data.items():
        table[ident] = (row["permission"], bool(row.get("unique", True)))
    return table
