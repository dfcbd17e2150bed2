from __future__ import annotations

import os

import pytest

from frogi import adl, demo, packager
from frogi.framework import Framework
from frogi.model import Behavior, BehaviorRegistry

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
HELLOWORLD_PATH = os.path.join(REPO_ROOT, "scenarios", "helloworld.fractal")

with open(HELLOWORLD_PATH, encoding="utf-8") as _fh:
    HELLOWORLD = _fh.read()

DEPLOY_ORDER = ("frogi-runtime", "B3", "B2", "B1", "B0")


class ProbeBehavior(Behavior):
    """Records invocations and attribute changes for assertions."""

    attributes = {"knob": "initial"}

    def __init__(self):
        super().__init__()
        self.invocations: list[tuple[str, str]] = []
        self.attribute_changes: list[tuple[str, object]] = []

    def invoke(self, interface: str, argument: str) -> str:
        self.invocations.append((interface, argument))
        return f"probe:{self.attribute('knob')}"

    def attribute(self, name):
        return self.context.attribute(name) if self.context else self.attributes[name]

    def on_attribute_changed(self, name, value):
        self.attribute_changes.append((name, value))


def make_behaviors() -> BehaviorRegistry:
    registry = demo.default_behaviors()
    registry.register("ProbeImpl", ProbeBehavior)
    return registry


def make_framework(storage_dir=None) -> Framework:
    return Framework(storage_dir=storage_dir, behaviors=make_behaviors())


def emit_hello(out_dir: str, policy: str | None = None) -> dict[str, str]:
    plan = packager.partition(adl.parse_adl(HELLOWORLD))
    paths = {}
    for descriptor in plan.bundles:
        descriptor.policy = policy
        paths[descriptor.symbolic_name] = packager.emit_bundle(descriptor, out_dir)
    paths["frogi-runtime"] = packager.emit_runtime_bundle(out_dir)
    return paths


def deploy(framework: Framework, paths: dict[str, str], order=DEPLOY_ORDER) -> dict[str, int]:
    ids = {}
    for name in order:
        ids[name] = framework.install(paths[name])
    for name in order:
        framework.start_bundle(ids[name])
    return ids


@pytest.fixture
def hello_definition():
    return adl.parse_adl(HELLOWORLD)


@pytest.fixture
def hello_plan(hello_definition):
    return packager.partition(hello_definition)


@pytest.fixture(scope="session")
def hello_archives(tmp_path_factory):
    out = tmp_path_factory.mktemp("archives")
    return emit_hello(str(out))


@pytest.fixture(scope="session")
def hello_archives_autonomous(tmp_path_factory):
    out = tmp_path_factory.mktemp("archives-auto")
    return emit_hello(str(out), policy="autonomous")


@pytest.fixture
def framework():
    return make_framework()
