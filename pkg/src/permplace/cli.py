"""Batch command-line front end.

Exit codes: 0 success, 1 analysis-input error, 2 usage error. Diagnostics
go to stderr; outputs to files or stdout only.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, collector, permspec, pipeline
from .analysis import Limits, cha_reach_partition, detected_sensitives, write_report
from .errors import PermplaceError
from .hierarchy import build_hierarchy
from .model import LinkConfig, link_program, load_app


def _load_config(args) -> LinkConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    if getattr(args, "framework_prefixes", None):
        data["framework_prefixes"] = args.framework_prefixes.split(",")
    if getattr(args, "async_excludes", None):
        data["async_excludes"] = args.async_excludes.split(",")
    return LinkConfig.from_dict(data)


def _emit(data: bytes, out_path):
    if out_path in (None, "-"):
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(out_path).write_bytes(data)


def _add_common(p):
    p.add_argument("--spec", action="append", default=[], help="permission spec file")
    p.add_argument("--groups", help="dangerous-group table (groups.json)")
    p.add_argument("--framework", action="append", default=[], help="framework model overlay")
    p.add_argument("--overlay", action="append", default=[], help="library overlay")
    p.add_argument("--config", help="JSON config file mirroring flags")
    p.add_argument("--framework-prefixes", help="comma-separated package prefixes")
    p.add_argument("--async-excludes", help="comma-separated async-construct classes")
    p.add_argument("-o", "--output", help="output path (default stdout)")


def _load_specs(args):
    spec = permspec.PermissionSpec(entries={})
    for path in args.spec:
        loaded = permspec.load_spec(path)
        spec, _report = permspec.merge_specs(spec, loaded)
    if getattr(args, "dangerous_only", False):
        if not args.groups:
            raise PermplaceError("--dangerous-only requires --groups")
        spec = permspec.filter_dangerous(spec, permspec.load_groups(args.groups))
    return spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="permplace",
        description="Recommend runtime-permission request insertion points; audit permission usage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="report per-callback permission request insertion points")
    p.add_argument("app", help="app model file")
    _add_common(p)
    p.add_argument("--cfa", type=int, choices=(0, 1), default=1)
    p.add_argument("--no-augment", action="store_true", help="disable safe-edge augmentation")
    p.add_argument("--augment-passes", type=int, default=None,
                   help="cap augmentation sweeps (default: fixpoint)")
    p.add_argument("--max-depth", type=int, default=50)
    p.add_argument("--max-paths", type=int, default=100)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--dump-callgraph", help="write call graph edges as JSON")
    p.add_argument("--dangerous-only", action="store_true",
                   help="filter the spec to dangerous permissions first")

    p = sub.add_parser("collect", help="permission usage audit over a corpus directory")
    p.add_argument("corpus", help="directory of app model files")
    _add_common(p)
    p.add_argument("--summary", help="write summary JSON here")
    p.add_argument("--dangerous-only", action="store_true")

    p = sub.add_parser("cha-reach", help="partition sensitives by CHA reachability")
    p.add_argument("app")
    _add_common(p)
    p.add_argument("--cfa", type=int, choices=(0, 1), default=1)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--augment-passes", type=int, default=None)

    p = sub.add_parser("compare-specs", help="coverage comparison of two specs over a corpus")
    p.add_argument("corpus")
    p.add_argument("--spec-a", required=True)
    p.add_argument("--spec-b", required=True)
    _add_common(p)

    p = sub.add_parser("mine-doc", help="mine permission candidates from framework doc comments")
    p.add_argument("app", help="app or framework model file")
    _add_common(p)
    p.add_argument("--ident-table", required=True,
                   help="JSON map identifier -> {permission, unique}")

    p = sub.add_parser("spec", help="spec file utilities")
    spec_sub = p.add_subparsers(dest="spec_command", required=True)
    v = spec_sub.add_parser("validate")
    v.add_argument("file")
    m = spec_sub.add_parser("merge")
    m.add_argument("a")
    m.add_argument("b")
    m.add_argument("-o", "--output", help="output path (default stdout)")
    return parser


def _corpus_apps(corpus_dir):
    paths = sorted(Path(corpus_dir).glob("*.json"))
    if not paths:
        raise PermplaceError(f"no app model files in {corpus_dir}")
    return paths


def _cmd_analyze(args) -> int:
    config = _load_config(args)
    spec = _load_specs(args)
    prepared = pipeline.prepare_paths(
        args.app,
        overlay_paths=args.framework + args.overlay,
        config=config,
        spec=spec,
        augment=not args.no_augment,
        augment_passes=args.augment_passes,
    )
    report = pipeline.analyze(
        prepared,
        mode=f"cfa{args.cfa}",
        limits=Limits(maxDepth=args.max_depth, maxPathsPerSensitive=args.max_paths),
        augment=not args.no_augment,
    )
    _emit(write_report(report, args.format), args.output)
    if args.dump_callgraph:
        dump = [
            {"site": str(site), "target": target, "provenance": prov}
            for site in sorted(prepared.cg.edges)
            for target, prov in sorted(prepared.cg.edges[site])
        ]
        Path(args.dump_callgraph).write_text(
            json.dumps(dump, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_collect(args) -> int:
    config = _load_config(args)
    spec = _load_specs(args)
    groups = permspec.load_groups(args.groups) if args.groups else None
    overlays = [load_app(p) for p in args.framework + args.overlay]
    corpus = []
    for path in _corpus_apps(args.corpus):
        app = load_app(path)
        program = link_program(app, overlays, config)
        hierarchy = build_hierarchy(program)
        corpus.append(collector.collect_usage(program, spec, hierarchy, groups))
    _emit(collector.usage_csv(corpus, groups).encode("utf-8"), args.output)
    if args.summary:
        summary = collector.corpus_summary(corpus, groups)
        Path(args.summary).write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_cha_reach(args) -> int:
    config = _load_config(args)
    spec = _load_specs(args)
    prepared = pipeline.prepare_paths(
        args.app,
        overlay_paths=args.framework + args.overlay,
        config=config,
        spec=spec,
        augment=not args.no_augment,
        augment_passes=args.augment_passes,
    )
    report = pipeline.analyze(prepared, mode=f"cfa{args.cfa}", augment=not args.no_augment)
    partition = cha_reach_partition(
        prepared.program, prepared.hierarchy, prepared.sensitives, detected_sensitives(report)
    )
    out = {
        name: [
            {"site": str(s.site), "kind": s.kind, "permissions": sorted(s.permissions)}
            for s in members
        ]
        for name, members in partition.items()
    }
    _emit((json.dumps(out, indent=2, sort_keys=True) + "\n").encode("utf-8"), args.output)
    return 0


def _cmd_compare_specs(args) -> int:
    config = _load_config(args)
    spec_a = permspec.load_spec(args.spec_a)
    spec_b = permspec.load_spec(args.spec_b)
    groups = permspec.load_groups(args.groups) if args.groups else None
    overlays = [load_app(p) for p in args.framework + args.overlay]
    programs = []
    for path in _corpus_apps(args.corpus):
        program = link_program(load_app(path), overlays, config)
        programs.append((program, build_hierarchy(program)))
    result = collector.compare_specs(programs, spec_a, spec_b, groups)
    _emit((json.dumps(result, indent=2, sort_keys=True) + "\n").encode("utf-8"), args.output)
    return 0


def _cmd_mine_doc(args) -> int:
    config = _load_config(args)
    overlays = [load_app(p) for p in args.framework + args.overlay]
    program = link_program(load_app(args.app), overlays, config)
    table = permspec.load_ident_table(args.ident_table)
    candidates = permspec.mine_doc_candidates(program, table)
    _emit(permspec.candidates_to_csv(candidates).encode("utf-8"), args.output)
    return 0


def _cmd_spec(args) -> int:
    if args.spec_command == "validate":
        spec = permspec.load_spec(args.file)
        print(f"{args.file}: {len(spec)} entries, OK", file=sys.stderr)
        return 0
    a = permspec.load_spec(args.a)
    b = permspec.load_spec(args.b)
    merged, report = permspec.merge_specs(a, b)
    print(
        f"merged: {len(merged)} entries "
        f"(common {len(report['common'])}, a-only {len(report['unique_to_a'])}, "
        f"b-only {len(report['unique_to_b'])})",
        file=sys.stderr,
    )
    data = json.dumps(permspec.spec_to_list(merged), indent=2) + "\n"
    _emit(data.encode("utf-8"), args.output)
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "collect": _cmd_collect,
    "cha-reach": _cmd_cha_reach,
    "compare-specs": _cmd_compare_specs,
    "mine-doc": _cmd_mine_doc,
    "spec": _cmd_spec,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except (PermplaceError, OSError, json.JSONDecodeError) as exc:
        print(f"permplace: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
