"""Context-insensitive call graph with over-approximated virtual dispatch."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .model import Program


@dataclass(frozen=True)
class Edge:
    caller: str
    callee: str
    site: int


@dataclass(frozen=True)
class CallGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    external: frozenset[str] = field(default=frozenset())

    @cached_property
    def _out(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {}
        for e in self.edges:
            out.setdefault(e.caller, []).append(e)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def _in(self) -> dict[str, tuple[Edge, ...]]:
        inc: dict[str, list[Edge]] = {}
        for e in self.edges:
            inc.setdefault(e.callee, []).append(e)
        return {k: tuple(v) for k, v in inc.items()}

    @cached_property
    def _undirected(self) -> dict[str, frozenset[str]]:
        adj: dict[str, set[str]] = {}
        for e in self.edges:
            adj.setdefault(e.caller, set()).add(e.callee)
            adj.setdefault(e.callee, set()).add(e.caller)
        return {k: frozenset(v) for k, v in adj.items()}

    def out_edges(self, sig: str) -> tuple[Edge, ...]:
        return self._out.get(sig, ())

    def in_edges(self, sig: str) -> tuple[Edge, ...]:
        return self._in.get(sig, ())

    def callees(self, sig: str) -> list[str]:
        return sorted({e.callee for e in self.out_edges(sig)})

    def callers(self, sig: str) -> list[str]:
        return sorted({e.caller for e in self.in_edges(sig)})

    def neighbours(self, sig: str) -> frozenset[str]:
        return self._undirected.get(sig, frozenset())

    def has_edge(self, caller: str, callee: str) -> bool:
        return any(e.callee == callee for e in self.out_edges(caller))

    def with_edges(self, extra: Iterable[tuple[str, str]]) -> "CallGraph":
        """Copy with additional (caller, callee) edges at site -1."""
        edges = list(self.edges)
        nodes = set(self.nodes)
        for a, b in extra:
            if not self.has_edge(a, b):
                edges.append(Edge(a, b, -1))
                nodes.update((a, b))
        edges.sort(key=lambda e: (e.caller, e.site, e.callee))
        return CallGraph(tuple(sorted(nodes)), tuple(edges), self.external)


def dispatch_targets(program: Program, owner: str, name: str) -> list[str]:
    """Static resolution of `owner.name` plus every overriding subclass method."""
    base = program.lookup_method(owner, name)
    if base is None:
        return []
    targets = [base.sig]
    for sub in program.all_subclasses(owner):
        cd = program.cls(sub)
        m = cd.method(name) if cd else None
        if m is not None and m.sig not in targets:
            targets.append(m.sig)
    return targets


def build_cg(program: Program) -> CallGraph:
    edges: list[Edge] = []
    external: set[str] = set()
    nodes = {m.sig for m in program.methods()}
    for m in program.methods():
        if m.is_external:
            external.add(m.sig)
        for s in m.body:
            if s.kind != "call":
                continue
            for t in dispatch_targets(program, s.callee_owner, s.callee_name):
                edges.append(Edge(m.sig, t, s.id))
    edges.sort(key=lambda e: (e.caller, e.site, e.callee))
    return CallGraph(tuple(sorted(nodes)), tuple(edges), frozenset(external))


def call_depth(cg: CallGraph, anchor: Iterable[str], target: str) -> int | None:
    """Fewest call edges (either direction) from any anchor method to `target`."""
    anchor = set(anchor)
    if not anchor:
        raise ValueError("anchor must be non-empty")
    if target in anchor:
        return 0
    dist = {a: 0 for a in anchor}
    q = deque(sorted(anchor))
    while q:
        cur = q.popleft()
        for nxt in cg.neighbours(cur):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                if nxt == target:
                    return dist[nxt]
                q.append(nxt)
    return None


def depths_from(cg: CallGraph, anchor: Iterable[str], limit: int | None = None) -> dict[str, int]:
    """Bidirectional BFS depths of every method reachable from `anchor`."""
    dist = {a: 0 for a in anchor}
    q = deque(sorted(dist))
    while q:
        cur = q.popleft()
        if limit is not None and dist[cur] >= limit:
            continue
        for nxt in sorted(cg.neighbours(cur)):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                q.append(nxt)
    return dist


def directed_depth(cg: CallGraph, src: str, dst: str) -> int | None:
    """Fewest caller->callee steps from `src` to `dst`."""
    if src == dst:
        return 0
    dist = {src: 0}
    q = deque([src])
    while q:
        cur = q.popleft()
        for nxt in cg.callees(cur):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                if nxt == dst:
                    return dist[nxt]
                q.append(nxt)
    return None
