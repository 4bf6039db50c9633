"""Permission Collector and derived corpus studies: usage classification,
coverage, over-privilege, spec comparison, and precision/recall arithmetic."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass

from .analysis import find_sensitive_sites
from .errors import UndefinedCoverage
from .hierarchy import ClassHierarchy
from .model import ConstStr, LinkedProgram, LoadStatic, SiteId, parse_field_id
from .permspec import GroupTable, PermissionSpec

USAGE_LABELS = {
    (True, True, True): "MCS",
    (True, True, False): "MC",
    (True, False, True): "MS",
    (False, True, True): "CS",
    (True, False, False): "M",
    (False, True, False): "C",
    (False, False, True): "S",
}


@dataclass(frozen=True)
class PermissionUsage:
    app: str
    flags: dict  # permission -> {"M": bool, "C": bool, "S": bool}
    sites: dict  # permission -> {"code": [...], "sensitive": [...]}

    def permissions(self):
        return sorted(self.flags)


def collect_usage(
    program: LinkedProgram,
    spec: PermissionSpec,
    hierarchy: ClassHierarchy,
    groups: GroupTable | None = None,
) -> PermissionUsage:
    """Enumerate manifest (M), code-reference (C) and sensitive-consumption
    (S) evidence per permission. Scans app + library bodies only; framework
    code is never counted."""
    known = set(program.manifest.permissions) | set(spec.all_permissions())
    if groups is not None:
        known |= set(groups.group_of)
    const_class = program.config.permission_constant_class

    code_sites = defaultdict(list)
    for decl, m, sig in program.iter_app_bodies():
        for i, stmt in enumerate(m.body):
            if isinstance(stmt, ConstStr) and stmt.value in known:
                code_sites[stmt.value].append(f"{SiteId(sig, i)} (literal)")
            elif isinstance(stmt, LoadStatic):
                cls, fname = parse_field_id(stmt.field)
                if cls != const_class:
                    continue
                found = program.lookup_field(stmt.field)
                if found is not None and found[1].constValue:
                    perm = found[1].constValue
                else:
                    perm = f"android.permission.{fname}"
                code_sites[perm].append(f"{SiteId(sig, i)} (constant)")

    sensitive_sites = defaultdict(list)
    for s in find_sensitive_sites(program, hierarchy, spec):
        for perm in sorted(s.permissions):
            sensitive_sites[perm].append(str(s.site))

    flags = {}
    sites = {}
    universe = set(program.manifest.permissions) | set(code_sites) | set(sensitive_sites)
    for perm in sorted(universe):
        flags[perm] = {
            "M": perm in program.manifest.permissions,
            "C": perm in code_sites,
            "S": perm in sensitive_sites,
        }
        sites[perm] = {
            "code": sorted(code_sites.get(perm, ())),
            "sensitive": sorted(sensitive_sites.get(perm, ())),
        }
    return PermissionUsage(app=program.name, flags=flags, sites=sites)


def classify(usage: PermissionUsage) -> dict:
    """Label each observed permission by its (M, C, S) flag triple."""
    out = {}
    for perm, f in usage.flags.items():
        key = (f["M"], f["C"], f["S"])
        if key in USAGE_LABELS:
            out[perm] = USAGE_LABELS[key]
    return out


def _percent(num: float, den: float) -> int:
    import math

    return math.floor(num / den * 100 + 0.5)


def coverage(corpus_labels) -> tuple:
    """Spec coverage over a corpus: MCS / (MC + MCS), per (app, permission)
    instance. ``corpus_labels`` is an iterable of per-app classify() maps.
    Returns (ratio, percent)."""
    mcs = mc = 0
    for labels in corpus_labels:
        for label in labels.values():
            if label == "MCS":
                mcs += 1
            elif label == "MC":
                mc += 1
    if mcs + mc == 0:
        raise UndefinedCoverage("corpus has no MC or MCS instances")
    ratio = mcs / (mcs + mc)
    return ratio, _percent(mcs, mcs + mc)


def coverage_from_counts(mcs: int, mc: int) -> tuple:
    if mcs + mc == 0:
        raise UndefinedCoverage("no MC or MCS instances")
    return mcs / (mcs + mc), _percent(mcs, mcs + mc)


def overprivilege_report(corpus, groups: GroupTable) -> dict:
    """Per app, split manifest-only permissions into same-group (masked by a
    properly used permission of the same group) vs cross-group (visible to
    the user). ``corpus`` is an iterable of PermissionUsage."""
    out = {}
    for usage in sorted(corpus, key=lambda u: u.app):
        labels = classify(usage)
        m_only = sorted(p for p, label in labels.items() if label == "M")
        if not m_only:
            out[usage.app] = {"same_group": [], "cross_group": []}
            continue
        used_groups = {
            groups.group(p)
            for p, label in labels.items()
            if label != "M" and groups.group(p) is not None
        }
        same, cross = [], []
        for p in m_only:
            if groups.group(p) is not None and groups.group(p) in used_groups:
                same.append(p)
            else:
                cross.append(p)
        out[usage.app] = {"same_group": same, "cross_group": cross}
    return out


def compare_specs(programs, spec_a: PermissionSpec, spec_b: PermissionSpec, groups=None):
    """Coverage-style comparison of two specs over one corpus of linked
    programs (each paired with its hierarchy): MCS instance counts, distinct
    covered permissions, and a key diff."""
    stats = {}
    for label, spec in (("a", spec_a), ("b", spec_b)):
        mcs_instances = 0
        covered = set()
        for program, hierarchy in programs:
            usage = collect_usage(program, spec, hierarchy, groups)
            for perm, cls_label in classify(usage).items():
                if cls_label == "MCS":
                    mcs_instances += 1
                    covered.add(perm)
        stats[label] = {
            "mcs_instances": mcs_instances,
            "permissions_covered": len(covered),
            "permissions": sorted(covered),
        }
    keys_a, keys_b = set(spec_a.entries), set(spec_b.entries)
    conflicting = sorted(
        k
        for k in keys_a & keys_b
        if spec_a.entries[k].permissions != spec_b.entries[k].permissions
    )
    return {
        "a": stats["a"],
        "b": stats["b"],
        "diff": {
            "common": sorted(k[1] for k in keys_a & keys_b),
            "unique_to_a": sorted(k[1] for k in keys_a - keys_b),
            "unique_to_b": sorted(k[1] for k in keys_b - keys_a),
            "conflicting": [k[1] for k in conflicting],
        },
    }


@dataclass(frozen=True)
class EvalLabels:
    detected: int
    undetectedValid: int = 0
    undetectedInvalid: int = 0
    chaUnreachable: int = 0
    invalidPathSensitives: int = 0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def eval_metrics(labels: EvalLabels) -> dict:
    """Recall/precision over labeled sensitives, as rounded percentages.

    recall = detected / (detected + undetectedValid);
    precision = (detected - invalidPathSensitives) / detected.
    Undefined ratios are reported as None."""
    out = {"recall": None, "precision": None, "recall_pct": None, "precision_pct": None}
    denom = labels.detected + labels.undetectedValid
    if denom > 0:
        out["recall"] = labels.detected / denom
        out["recall_pct"] = _percent(labels.detected, denom)
    if labels.detected > 0:
        valid = labels.detected - labels.invalidPathSensitives
        out["precision"] = valid / labels.detected
        out["precision_pct"] = _percent(valid, labels.detected)
    return out


# ---------------------------------------------------------------------------
# corpus output


def usage_csv(corpus, groups: GroupTable | None = None) -> str:
    """CSV with one row per (app, permission): app,permission,label,group,sites."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["app", "permission", "label", "group", "sites"])
    for usage in sorted(corpus, key=lambda u: u.app):
        labels = classify(usage)
        for perm in usage.permissions():
            label = labels.get(perm, "")
            group = (groups.group(perm) or "") if groups else ""
            all_sites = usage.sites[perm]["code"] + usage.sites[perm]["sensitive"]
            writer.writerow([usage.app, perm, label, group, ";".join(all_sites)])
    return buf.getvalue()


def corpus_summary(corpus, groups: GroupTable | None = None) -> dict:
    label_maps = [classify(u) for u in sorted(corpus, key=lambda u: u.app)]
    counts = defaultdict(int)
    for labels in label_maps:
        for label in labels.values():
            counts[label] += 1
    summary = {"apps": len(label_maps), "instances": dict(sorted(counts.items()))}
    try:
        ratio, pct = coverage(label_maps)
        summary["coverage"] = {"ratio": ratio, "percent": pct}
    except UndefinedCoverage:
        summary["coverage"] = None
    if groups is not None:
        summary["overprivilege"] = overprivilege_report(corpus, groups)
    return summary
