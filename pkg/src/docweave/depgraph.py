"""Unified dependency graph and bottom-up traversal order.

Three tiers share one graph: component nodes point at the components
they depend on, module nodes point at their children (components and
sub-modules), and the repository node points at every parentless unit.
Cycles (only possible among components) are collapsed into super-nodes
before a post-order walk produces the generation order: dependencies
before dependents, modules after their children, repository last.

Rendering the graph visually is out of scope here; the report path owns
anything figure-shaped.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass, field
from typing import Iterator

from .errors import GraphConstructionError
from .source_model import (
    COMPONENT,
    MODULE,
    REPO,
    REPO_ID,
    Component,
    ModuleUnit,
    RawDependency,
    RepoUnit,
)


@dataclass
class DependencyGraph:
    adjacency: dict[str, set[str]]
    granularity: dict[str, str]
    source_pos: dict[str, tuple[str, int]] = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.adjacency)

    def successors(self, unit_id: str) -> list[str]:
        return sorted(self.adjacency[unit_id])


@dataclass(frozen=True)
class SccIndex:
    node_to_super: dict[str, str]
    members: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class TraversalOrder:
    sequence: tuple[str, ...]
    n_components: int
    n_modules: int

    def __len__(self) -> int:
        return len(self.sequence)

    def position(self, unit_id: str) -> int:
        return self.sequence.index(unit_id)


def build_graph(
    components: list[Component] | tuple[Component, ...],
    modules: list[ModuleUnit] | tuple[ModuleUnit, ...],
    repo: RepoUnit,
    raw_deps: list[RawDependency] | tuple[RawDependency, ...],
) -> DependencyGraph:
    """Assemble the three-tier graph.

    Every edge endpoint must name a known unit; anything else means the
    extraction stage and the inventory disagree, which is not recoverable
    here, so it raises GraphConstructionError.
    """
    adjacency: dict[str, set[str]] = {}
    granularity: dict[str, str] = {}
    source_pos: dict[str, tuple[str, int]] = {}

    for comp in components:
        adjacency[comp.id] = set()
        granularity[comp.id] = COMPONENT
        source_pos[comp.id] = (comp.path, comp.start_line)
    for mod in modules:
        if mod.path in adjacency:
            raise GraphConstructionError(f"module id collides with a component: {mod.path}")
        adjacency[mod.path] = set(mod.children)
        granularity[mod.path] = MODULE
    if REPO_ID in adjacency:
        raise GraphConstructionError("a unit is using the reserved repo id")
    adjacency[REPO_ID] = set(repo.roots)
    granularity[REPO_ID] = REPO

    for dep in raw_deps:
        if dep.src not in granularity or dep.dst not in granularity:
            raise GraphConstructionError(
                f"dangling dependency edge: {dep.src} -> {dep.dst}"
            )
        if dep.src != dep.dst:
            adjacency[dep.src].add(dep.dst)

    for unit_id, succs in adjacency.items():
        missing = succs - granularity.keys()
        if missing:
            raise GraphConstructionError(
                f"unit {unit_id} points at unknown units: {sorted(missing)}"
            )
        succs.discard(unit_id)

    return DependencyGraph(adjacency=adjacency, granularity=granularity, source_pos=source_pos)


def condense_scc(graph: DependencyGraph) -> tuple[DependencyGraph, SccIndex]:
    """Collapse strongly connected components into super-nodes.

    Iterative Tarjan, so pathological dependency chains cannot blow the
    recursion limit. A super-node is named after its lexicographically
    smallest member; singletons keep their own id. Members are ordered
    by source position (file, then line) where known, falling back to
    the id.
    """
    index_of: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = 0

    for start in graph.nodes:
        if start in index_of:
            continue
        work: list[tuple[str, Iterator[str]]] = [(start, iter(sorted(graph.adjacency[start])))]
        index_of[start] = lowlink[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, succs = work[-1]
            advanced = False
            for succ in succs:
                if succ not in index_of:
                    index_of[succ] = lowlink[succ] = counter
                    counter += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(sorted(graph.adjacency[succ]))))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index_of[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index_of[node]:
                scc = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    scc.append(member)
                    if member == node:
                        break
                sccs.append(scc)

    def member_key(unit_id: str) -> tuple:
        pos = graph.source_pos.get(unit_id)
        if pos is not None:
            return (0, pos[0], pos[1], unit_id)
        return (1, unit_id)

    node_to_super: dict[str, str] = {}
    members: dict[str, tuple[str, ...]] = {}
    for scc in sccs:
        super_id = min(scc)
        ordered = tuple(sorted(scc, key=member_key))
        members[super_id] = ordered
        for unit_id in scc:
            node_to_super[unit_id] = super_id

    condensed_adj: dict[str, set[str]] = {s: set() for s in members}
    condensed_gran: dict[str, str] = {}
    for unit_id, succs in graph.adjacency.items():
        src = node_to_super[unit_id]
        for succ in succs:
            dst = node_to_super[succ]
            if src != dst:
                condensed_adj[src].add(dst)
    for super_id, mems in members.items():
        condensed_gran[super_id] = graph.granularity[mems[0]]

    condensed = DependencyGraph(
        adjacency=condensed_adj,
        granularity=condensed_gran,
        source_pos=graph.source_pos,
    )
    return condensed, SccIndex(node_to_super=node_to_super, members=members)


def traversal_order(graph: DependencyGraph) -> TraversalOrder:
    """Generation order over all units.

    Post-order DFS over the condensed graph from its in-degree-zero
    roots (any stragglers afterwards), children visited in
    lexicographic order, with the repository's super-node always taken
    last so the repository unit closes the sequence. Deterministic for
    a given graph.
    """
    condensed, index = condense_scc(graph)

    in_degree: dict[str, int] = {node: 0 for node in condensed.adjacency}
    for succs in condensed.adjacency.values():
        for succ in succs:
            in_degree[succ] += 1

    repo_super = index.node_to_super[REPO_ID]
    roots = [n for n, deg in sorted(in_degree.items()) if deg == 0 and n != repo_super]
    leftovers = [n for n in sorted(condensed.adjacency) if n != repo_super]
    visit_queue = roots + leftovers + [repo_super]

    emitted: list[str] = []
    visited: set[str] = set()
    for start in visit_queue:
        if start in visited:
            continue
        visited.add(start)
        work: list[tuple[str, Iterator[str]]] = [(start, iter(sorted(condensed.adjacency[start])))]
        while work:
            node, succs = work[-1]
            advanced = False
            for succ in succs:
                if succ not in visited:
                    visited.add(succ)
                    work.append((succ, iter(sorted(condensed.adjacency[succ]))))
                    advanced = True
                    break
            if not advanced:
                work.pop()
                emitted.append(node)

    sequence: list[str] = []
    for super_id in emitted:
        sequence.extend(index.members[super_id])

    n_components = sum(1 for u in sequence if graph.granularity[u] == COMPONENT)
    n_modules = sum(1 for u in sequence if graph.granularity[u] == MODULE)
    return TraversalOrder(
        sequence=tuple(sequence), n_components=n_components, n_modules=n_modules
    )


def validate_order(graph: DependencyGraph, order: TraversalOrder) -> list[str]:
    """Cheap order-sanity check used by callers and tests.

    Returns human-readable violations: duplicated or missing units, an
    acyclic edge pointing forward, a module before one of its children,
    or the repository unit anywhere but last.
    """
    problems: list[str] = []
    position = {unit_id: i for i, unit_id in enumerate(order.sequence)}
    if len(position) != len(order.sequence):
        problems.append("sequence contains duplicates")
    missing = graph.adjacency.keys() - position.keys()
    if missing:
        problems.append(f"sequence omits units: {sorted(missing)[:5]}")
        return problems

    _, index = condense_scc(graph)
    for unit_id, succs in graph.adjacency.items():
        for succ in succs:
            if index.node_to_super[unit_id] == index.node_to_super[succ]:
                continue
            if position[succ] > position[unit_id]:
                problems.append(f"edge not respected: {unit_id} -> {succ}")
    if order.sequence and order.sequence[-1] != REPO_ID:
        problems.append("repository unit is not last")
    for unit_id, gran in graph.granularity.items():
        if gran != MODULE:
            continue
        for child in graph.adjacency[unit_id]:
            if position[child] > position[unit_id]:
                problems.append(f"module {unit_id} precedes child {child}")
    return problems


def module_of(unit_id: str, graph: DependencyGraph) -> str | None:
    """Parent module path of a unit, or None for parentless units."""
    if graph.granularity.get(unit_id) == COMPONENT:
        path, _ = graph.source_pos[unit_id]
        parent = posixpath.dirname(path)
        return parent or None
    if graph.granularity.get(unit_id) == MODULE:
        parent = posixpath.dirname(unit_id)
        return parent or None
    return None
