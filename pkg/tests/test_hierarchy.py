import pytest

from permplace.errors import CycleError, UnknownType
from permplace.hierarchy import build_hierarchy
from permplace.model import Invoke, app_from_dict, link_program, parse_method_sig


def linked(classes):
    app = app_from_dict(
        {"name": "t", "manifest": {"targetApi": 23, "permissions": []}, "classes": classes}
    )
    return link_program(app, [])


@pytest.fixture(scope="module")
def threads_hier(threads):
    return threads.hierarchy


def test_subtype_reflexive(threads_hier):
    for name in threads_hier.program.classes:
        assert threads_hier.is_subtype(name, name)


def test_subtype_through_interface(threads_hier):
    assert threads_hier.is_subtype("app.Host$Run1", "java.lang.Runnable")
    assert not threads_hier.is_subtype("java.lang.Runnable", "app.Host$Run1")


def test_subtype_through_superclass(threads_hier):
    assert threads_hier.is_subtype("app.Host", "android.content.Context")


def test_supertypes_and_subtypes_are_inverse(threads_hier):
    for name, sups in threads_hier.supertypes.items():
        for s in sups:
            assert name in threads_hier.subtypes[s]
    for name, subs in threads_hier.subtypes.items():
        for s in subs:
            assert name in threads_hier.supertypes[s]


def test_dispatch_inherited_method():
    h = build_hierarchy(
        linked(
            [
                {"name": "A", "methods": [{"name": "f", "body": []}]},
                {"name": "B", "super": "A", "methods": []},
            ]
        )
    )
    assert h.dispatch("B", "f", ()) == ("A", h.program.classes["A"].methods[0])


def test_dispatch_override_wins():
    h = build_hierarchy(
        linked(
            [
                {"name": "A", "methods": [{"name": "f", "body": []}]},
                {"name": "B", "super": "A", "methods": [{"name": "f", "body": []}]},
            ]
        )
    )
    owner, _ = h.dispatch("B", "f", ())
    assert owner == "B"


def test_dispatch_skips_abstract():
    h = build_hierarchy(
        linked(
            [
                {"name": "A", "methods": [{"name": "f", "body": []}]},
                {"name": "B", "super": "A", "methods": [{"name": "f", "abstract": True}]},
            ]
        )
    )
    owner, _ = h.dispatch("B", "f", ())
    assert owner == "A"


def test_dispatch_miss_is_none(threads_hier):
    assert threads_hier.dispatch("app.Host", "nonexistent", ()) is None


def test_cha_targets_interface_call(threads, threads_hier):
    site = Invoke(kind="interface", method="java.lang.Runnable#run()", receiver="r")
    targets = threads_hier.cha_targets(site)
    assert targets == {"app.Host$Run1#run()", "app.Host$Run2#run()"}


def test_cha_targets_static(threads_hier):
    site = Invoke(kind="static", method="android.test.Api#SENSITIVE()", receiver=None)
    # the framework stub has no body, so the bodied-only view is empty
    assert threads_hier.cha_targets(site) == set()
    assert threads_hier.cha_targets(site, include_stubs=True) == {"android.test.Api#SENSITIVE()"}


def test_cha_targets_unknown_declared_type(threads_hier):
    site = Invoke(kind="virtual", method="no.Such#f()", receiver="x")
    with pytest.raises(UnknownType):
        threads_hier.cha_targets(site)


def test_cha_targets_subset_of_subtype_dispatch(viewstub):
    """Every CHA target is the dispatch result of some concrete subtype."""
    h = viewstub.hierarchy
    for _decl, m, _sig in viewstub.program.iter_app_bodies():
        for stmt in m.body:
            if not isinstance(stmt, Invoke) or stmt.kind not in ("virtual", "interface"):
                continue
            cls, name, params = parse_method_sig(stmt.method)
            for t in h.cha_targets(stmt):
                owner = t.split("#")[0]
                assert any(
                    h.dispatch(sub, name, params) is not None
                    and h.dispatch(sub, name, params)[0] == owner
                    for sub in h.subtypes.get(cls, frozenset())
                )


def test_resolve_declaration_walks_to_interface():
    h = build_hierarchy(
        linked(
            [
                {"name": "I", "kind": "interface", "methods": [{"name": "f", "abstract": True}]},
                {"name": "A", "interfaces": ["I"], "methods": []},
            ]
        )
    )
    site = Invoke(kind="virtual", method="A#f()", receiver="x")
    assert h.resolve_declaration(site) == "I#f()"


def test_resolve_declaration_prefers_superclass():
    h = build_hierarchy(
        linked(
            [
                {"name": "I", "kind": "interface", "methods": [{"name": "f", "abstract": True}]},
                {"name": "S", "methods": [{"name": "f", "body": []}]},
                {"name": "A", "super": "S", "interfaces": ["I"], "methods": []},
            ]
        )
    )
    site = Invoke(kind="virtual", method="A#f()", receiver="x")
    assert h.resolve_declaration(site) == "S#f()"


def test_cycle_detection():
    app = app_from_dict(
        {
            "name": "t",
            "manifest": {"targetApi": 23, "permissions": []},
            "classes": [
                {"name": "A", "super": "B", "methods": []},
                {"name": "B", "super": "A", "methods": []},
            ],
        }
    )
    prog = link_program(app, [])
    with pytest.raises(CycleError):
        build_hierarchy(prog)


def test_interface_closure(threads_hier):
    assert threads_hier.interface_closure("app.Host$Run1") == frozenset({"java.lang.Runnable"})
    assert threads_hier.interface_closure("app.Host") == frozenset()
