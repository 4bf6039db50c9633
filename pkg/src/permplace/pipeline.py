"""End-to-end wiring: load, link, entry synthesis, solve, traverse."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import analysis, entrypoints, pointsto
from .hierarchy import ClassHierarchy, build_hierarchy
from .model import AppModel, LinkConfig, LinkedProgram, link_program, load_app
from .permspec import GroupTable, PermissionSpec


@dataclass
class Prepared:
    """Everything downstream analyses need about one app."""

    program: LinkedProgram  # with synthetic entry
    hierarchy: ClassHierarchy
    sol: pointsto.PointsToSolution
    cg: pointsto.CallGraph  # possibly augmented
    cg_raw: pointsto.CallGraph  # before augmentation
    sensitives: list


def prepare(
    app: AppModel,
    overlays=(),
    config: Optional[LinkConfig] = None,
    spec: Optional[PermissionSpec] = None,
    augment: bool = True,
    augment_passes: Optional[int] = None,
) -> Prepared:
    linked = link_program(app, overlays, config)
    hierarchy = build_hierarchy(linked)
    callbacks = entrypoints.detect_callbacks(linked, hierarchy)
    program = entrypoints.generate_dummy_main(linked, callbacks)
    hierarchy = build_hierarchy(program)
    sol, cg_raw = pointsto.solve_0cfa(program, hierarchy)
    cg = (
        pointsto.augment_call_graph(cg_raw, program, hierarchy, passes=augment_passes)
        if augment
        else cg_raw
    )
    sensitives = (
        analysis.find_sensitive_sites(program, hierarchy, spec) if spec is not None else []
    )
    return Prepared(
        program=program,
        hierarchy=hierarchy,
        sol=sol,
        cg=cg,
        cg_raw=cg_raw,
        sensitives=sensitives,
    )


def prepare_paths(
    app_path,
    overlay_paths=(),
    config: Optional[LinkConfig] = None,
    spec: Optional[PermissionSpec] = None,
    augment: bool = True,
    augment_passes: Optional[int] = None,
) -> Prepared:
    app = load_app(app_path)
    overlays = [load_app(p) for p in overlay_paths]
    return prepare(
        app,
        overlays,
        config=config,
        spec=spec,
        augment=augment,
        augment_passes=augment_passes,
    )


def analyze(
    prepared: Prepared,
    mode: str = "cfa1",
    limits: analysis.Limits = analysis.Limits(),
    augment: bool = True,
) -> analysis.AnalysisReport:
    return analysis.traverse(
        prepared.program,
        prepared.cg,
        prepared.sol,
        prepared.hierarchy,
        prepared.sensitives,
        mode=mode,
        limits=limits,
        augment=augment,
    )
