"""Shared fixture repositories and helpers for the test suite."""

from __future__ import annotations

import os
import textwrap

import pytest

from docweave import depgraph
from docweave.backends import make_backends
from docweave.source_model import extract_dependencies, parse_repository


def build_tree(root, files: dict[str, str]) -> str:
    """Write a mapping of relative path -> source into root."""
    for rel, body in files.items():
        path = os.path.join(root, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(textwrap.dedent(body))
    return str(root)


MINIMAL_FILES = {
    "solo.py": '''\
    def greet(name):
        return "hello " + name
    ''',
}

MEDIUM_FILES = {
    "app/core.py": '''\
    from app.helpers import clean


    def load(path):
        if not path:
            raise ValueError("empty path")
        with open(path) as fh:
            return fh.read()


    def process(data, limit=10):
        cleaned = clean(data)
        return cleaned[:limit]
    ''',
    "app/helpers.py": '''\
    def clean(text):
        return text.strip()
    ''',
    "util/fmt.py": '''\
    def default_width():
        return 80


    class Formatter:
        def __init__(self, width):
            self.width = width or default_width()

        def render(self, item):
            if "name" not in item:
                raise KeyError("name")
            return item["name"].ljust(self.width)
    ''',
    "main.py": '''\
    from app.core import process
    from util.fmt import Formatter


    def run(raw):
        data = process(raw)
        return Formatter(0).render({"name": data})
    ''',
}

CYCLE_FILES = {
    "ring/x.py": '''\
    from ring.y import pong


    def ping(n):
        return pong(n - 1) if n else 0
    ''',
    "ring/y.py": '''\
    from ring.x import ping


    def pong(n):
        return ping(n - 1) if n else 1
    ''',
}


@pytest.fixture
def minimal_repo(tmp_path):
    return build_tree(tmp_path / "minimal", MINIMAL_FILES)


@pytest.fixture
def medium_repo(tmp_path):
    return build_tree(tmp_path / "medium", MEDIUM_FILES)


@pytest.fixture
def cycle_repo(tmp_path):
    return build_tree(tmp_path / "ring", CYCLE_FILES)


def model_graph_order(repo_path):
    """The full parse -> graph -> order pipeline in one call."""
    model = parse_repository(repo_path)
    deps = extract_dependencies(model.components)
    graph = depgraph.build_graph(model.components, model.modules, model.repo, deps)
    order = depgraph.traversal_order(graph)
    return model, graph, order


@pytest.fixture
def mock_backends():
    return make_backends("mock", "mock", "mock")
