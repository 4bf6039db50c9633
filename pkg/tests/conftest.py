from pathlib import Path

import pytest

from permplace import permspec, pipeline
from permplace.model import load_app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def framework():
    return load_app(FIXTURES / "framework.json")


@pytest.fixture(scope="session")
def spec():
    return permspec.load_spec(FIXTURES / "fixture.spec.json")


@pytest.fixture(scope="session")
def groups():
    return permspec.load_groups(FIXTURES / "groups.json")


@pytest.fixture(scope="session")
def threads(spec):
    return pipeline.prepare_paths(
        FIXTURES / "threads.app.json", [FIXTURES / "framework.json"], spec=spec
    )


@pytest.fixture(scope="session")
def viewstub(spec):
    return pipeline.prepare_paths(
        FIXTURES / "viewstub.app.json", [FIXTURES / "framework.json"], spec=spec
    )


@pytest.fixture(scope="session")
def viewstub_noaug(spec):
    return pipeline.prepare_paths(
        FIXTURES / "viewstub.app.json", [FIXTURES / "framework.json"], spec=spec, augment=False
    )


@pytest.fixture(scope="session")
def parametric(spec):
    return pipeline.prepare_paths(
        FIXTURES / "parametric.app.json", [FIXTURES / "framework.json"], spec=spec
    )
