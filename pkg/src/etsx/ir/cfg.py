from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .model import IRError, MethodDef, Stmt


@dataclass(frozen=True)
class CFG:
    """Statement-level control-flow graph of one method.

    Edges are exactly the successor lists; entry is statement 0.
    """

    method: MethodDef
    succ: dict[int, tuple[int, ...]]
    pred: dict[int, tuple[int, ...]]
    warnings: tuple[str, ...] = field(default=())

    entry = 0

    @property
    def nodes(self) -> range:
        return range(len(self.method.body))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in self.nodes for b in self.succ[a]]

    def stmt(self, sid: int) -> Stmt:
        return self.method.body[sid]

    def preds(self, sid: int) -> tuple[int, ...]:
        return self.pred[sid]

    def reachable_from(self, sid: int) -> set[int]:
        seen, todo = {sid}, [sid]
        while todo:
            for nxt in self.succ[todo.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return seen

    def backward_bfs(self, sid: int) -> list[int]:
        """Strict CFG ancestors of `sid`, nearest first (ties by id)."""
        dist = {sid: 0}
        order = []
        q = deque([sid])
        while q:
            cur = q.popleft()
            for p in sorted(self.pred[cur]):
                if p not in dist:
                    dist[p] = dist[cur] + 1
                    order.append(p)
                    q.append(p)
        return sorted(order, key=lambda s: (dist[s], s))


def build_cfg(method: MethodDef) -> CFG:
    if not method.body:
        raise IRError(f"{method.sig}: cannot build a CFG for an empty body")
    n = len(method.body)
    succ: dict[int, tuple[int, ...]] = {}
    pred: dict[int, list[int]] = {i: [] for i in range(n)}
    for s in method.body:
        for t in s.succ:
            if not 0 <= t < n:
                raise IRError(f"{method.sig} stmt {s.id}: dangling successor {t}")
        succ[s.id] = tuple(s.succ)
        for t in dict.fromkeys(s.succ):
            pred[t].append(s.id)
    cfg = CFG(method, succ, {k: tuple(v) for k, v in pred.items()})
    unreachable = sorted(set(range(n)) - cfg.reachable_from(0))
    if unreachable:
        cfg = CFG(method, cfg.succ, cfg.pred,
                  (f"{method.sig}: unreachable statements {unreachable}",))
    return cfg
