"""Directed weighted credit graph with fund accounting and a reservation ledger.

A link (u, v) carries the funds u can currently transfer to v. Probes do
not spend funds directly; they place reservations, and the guaranteed
available credit of a link is its weight minus outstanding reservations.
Keeping reservations in an explicit ledger (instead of a second mutable
weight) makes rollback bugs detectable: the ledger must drain back to zero
after every failed probe.

Link-pair lifetime rule: a directed entry exists only while its weight is
positive, and a node pair stays adjacent only while at least one direction
has positive weight. Links with zero weight in both directions serve no
purpose and are pruned.
"""

from __future__ import annotations

import random
from collections.abc import Callable, Iterable
from dataclasses import dataclass

from .errors import ConfigError, InternalError

NodeId = int


@dataclass(frozen=True)
class LinkDelta:
    """One directed weight change: w(u, v) went from old to new."""

    u: NodeId
    v: NodeId
    old: int
    new: int


class CreditGraph:
    """Mutable credit graph over integer micro-unit weights.

    Single-writer: the simulation engine serializes all mutations. Clones
    are fully independent and may be used in parallel runs.
    """

    def __init__(self) -> None:
        self.nodes: set[NodeId] = set()
        # (u, v) -> [weight, reserved]; entry exists iff weight > 0
        self._links: dict[tuple[NodeId, NodeId], list[int]] = {}
        self._adj: dict[NodeId, set[NodeId]] = {}
        # Sorted-adjacency cache for deterministic hot loops; entries are
        # invalidated whenever a node's neighbor set changes.
        self._sorted_adj: dict[NodeId, list[NodeId]] = {}
        # Called as hook(u, v, amount, weight, reserved) after each
        # successful reserve; used by audit-mode test harnesses.
        self.audit_hook: Callable[[NodeId, NodeId, int, int, int], None] | None = None

    # ---- basic structure ------------------------------------------------

    def add_node(self, v: NodeId) -> None:
        if v not in self.nodes:
            self.nodes.add(v)
            self._adj[v] = set()

    def neighbors(self, v: NodeId) -> set[NodeId]:
        """Nodes adjacent to v through a link in either direction."""
        return self._adj[v]

    def sorted_neighbors(self, v: NodeId) -> list[NodeId]:
        """Neighbors in ascending id; cached until the neighbor set changes."""
        cached = self._sorted_adj.get(v)
        if cached is None:
            cached = self._sorted_adj[v] = sorted(self._adj[v])
        return cached

    def degree(self, v: NodeId) -> int:
        return len(self._adj[v])

    def link_count(self) -> int:
        """Number of directed links with positive weight."""
        return len(self._links)

    def undirected_edge_count(self) -> int:
        """Number of adjacent node pairs (each pair counted once)."""
        return sum(len(ns) for ns in self._adj.values()) // 2

    def weight(self, u: NodeId, v: NodeId) -> int:
        entry = self._links.get((u, v))
        return entry[0] if entry else 0

    def reserved(self, u: NodeId, v: NodeId) -> int:
        entry = self._links.get((u, v))
        return entry[1] if entry else 0

    def available(self, u: NodeId, v: NodeId) -> int:
        """Guaranteed available credit: weight minus outstanding reservations."""
        entry = self._links.get((u, v))
        return entry[0] - entry[1] if entry else 0

    def has_bidirectional(self, u: NodeId, v: NodeId) -> bool:
        return self.available(u, v) > 0 and self.available(v, u) > 0

    def bidirectional_degree(self, v: NodeId) -> int:
        """Count of neighbors with positive available credit in both directions."""
        return sum(1 for n in self._adj[v] if self.has_bidirectional(v, n))

    # ---- mutation --------------------------------------------------------

    def set_link(self, u: NodeId, v: NodeId, c: int) -> LinkDelta:
        """Set w(u, v) = c, clamping any reservation to the new weight.

        Self-links are rejected; negative weights are impossible in the
        model. Setting both directions of a pair to zero removes it.
        """
        if u == v:
            raise ConfigError(f"self-link {u}->{v} rejected")
        if c < 0:
            raise ConfigError("link weight must be nonnegative")
        self.add_node(u)
        self.add_node(v)
        old = self.weight(u, v)
        self._set_weight(u, v, c, clamp=True)
        return LinkDelta(u, v, old, c)

    def _set_weight(self, u: NodeId, v: NodeId, w: int, clamp: bool = False) -> None:
        key = (u, v)
        entry = self._links.get(key)
        if w > 0:
            if entry is None:
                self._links[key] = [w, 0]
                if v not in self._adj[u]:
                    self._adj[u].add(v)
                    self._adj[v].add(u)
                    self._sorted_adj.pop(u, None)
                    self._sorted_adj.pop(v, None)
            else:
                entry[0] = w
                if clamp and entry[1] > w:
                    entry[1] = w
                elif entry[1] > w:
                    raise InternalError(f"reservation {entry[1]} exceeds new weight {w} on {key}")
        elif entry is not None:
            del self._links[key]
            if (v, u) not in self._links:
                self._adj[u].discard(v)
                self._adj[v].discard(u)
                self._sorted_adj.pop(u, None)
                self._sorted_adj.pop(v, None)

    def reserve(self, u: NodeId, v: NodeId, c: int) -> bool:
        """Reserve c on (u, v); False (state unchanged) when w_A < c."""
        if c < 0:
            raise ConfigError("reservation must be nonnegative")
        entry = self._links.get((u, v))
        if entry is None:
            return c == 0
        if entry[0] - entry[1] < c:
            return False
        entry[1] += c
        if self.audit_hook is not None:
            self.audit_hook(u, v, c, entry[0], entry[1])
        return True

    def release(self, u: NodeId, v: NodeId, c: int) -> None:
        """Return a reservation to the ledger; over-release is a rollback bug."""
        if c == 0:
            return
        entry = self._links.get((u, v))
        if entry is None or entry[1] < c:
            raise InternalError(f"release of {c} exceeds reservation on ({u}, {v})")
        entry[1] -= c

    def commit_payment(self, path: Iterable[tuple[NodeId, NodeId]], c: int) -> list[LinkDelta]:
        """Settle c along a reserved path, shifting weight onto reverse links.

        Every link on the path must hold a reservation of at least c.
        Returns the directed weight deltas in application order so a
        static-mode run can restore the exact prior state.
        """
        path = list(path)
        if c == 0:
            return []
        for x, y in path:
            if self.reserved(x, y) < c:
                raise InternalError(f"commit without reservation on ({x}, {y})")
        deltas: list[LinkDelta] = []
        for x, y in path:
            entry = self._links[(x, y)]
            entry[1] -= c
            fwd_old = entry[0]
            self._set_weight(x, y, fwd_old - c)
            rev_old = self.weight(y, x)
            self._set_weight(y, x, rev_old + c)
            deltas.append(LinkDelta(x, y, fwd_old, fwd_old - c))
            deltas.append(LinkDelta(y, x, rev_old, rev_old + c))
        return deltas

    def rollback_weights(self, deltas: Iterable[LinkDelta]) -> None:
        """Undo a sequence of weight deltas (applied in reverse order)."""
        for d in reversed(list(deltas)):
            self._set_weight(d.u, d.v, d.old)

    # ---- derived quantities ----------------------------------------------

    def net_balance(self, v: NodeId) -> int:
        """Incoming minus outgoing weight; signed micro-units."""
        if v not in self.nodes:
            raise KeyError(f"unknown node {v}")
        return sum(self.weight(n, v) - self.weight(v, n) for n in self._adj[v])

    def total_reserved(self) -> int:
        return sum(entry[1] for entry in self._links.values())

    def select_landmarks(self, k: int, mode: str = "degree", seed: int = 0) -> list[NodeId]:
        """Pick k landmark nodes, either by bidirectional degree or at random.

        Degree mode ranks by the number of neighbors with positive credit
        in both directions, ties broken by ascending node id.
        """
        if k > len(self.nodes):
            raise ConfigError(f"cannot select {k} landmarks from {len(self.nodes)} nodes")
        if mode == "degree":
            ranked = sorted(self.nodes, key=lambda v: (-self.bidirectional_degree(v), v))
            return ranked[:k]
        if mode == "random":
            rng = random.Random(seed)
            pool = sorted(self.nodes)
            picks: list[NodeId] = []
            for _ in range(k):
                picks.append(pool.pop(rng.randrange(len(pool))))
            return picks
        raise ConfigError(f"unknown landmark mode {mode!r}")

    def components(self) -> list[set[NodeId]]:
        """Weakly connected components (links in either direction connect)."""
        seen: set[NodeId] = set()
        out: list[set[NodeId]] = []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                node = stack.pop()
                for n in self._adj[node]:
                    if n not in comp:
                        comp.add(n)
                        stack.append(n)
            seen |= comp
            out.append(comp)
        return out

    def giant_component(self) -> CreditGraph:
        """Subgraph induced by the largest weak component.

        Ties go to the component containing the smallest node id (components
        are discovered in ascending id order, so the first maximum wins).
        """
        best: set[NodeId] = set()
        for comp in self.components():
            if len(comp) > len(best):
                best = comp
        sub = CreditGraph()
        for v in best:
            sub.add_node(v)
        for (u, v), entry in self._links.items():
            if u in best:
                sub._set_weight(u, v, entry[0])
        return sub

    def clone(self) -> CreditGraph:
        g = CreditGraph()
        g.nodes = set(self.nodes)
        g._links = {k: entry.copy() for k, entry in self._links.items()}
        g._adj = {v: set(ns) for v, ns in self._adj.items()}
        # the sorted-adjacency cache rebuilds lazily
        return g

    def check_invariants(self) -> None:
        """Raise InternalError on any ledger or pruning violation (test aid)."""
        for (u, v), (w, r) in self._links.items():
            if w <= 0:
                raise InternalError(f"zero-weight entry persists on ({u}, {v})")
            if r < 0 or r > w:
                raise InternalError(f"reservation {r} out of range on ({u}, {v}) weight {w}")
            if v not in self._adj[u] or u not in self._adj[v]:
                raise InternalError(f"adjacency missing for ({u}, {v})")
        for v, ns in self._adj.items():
            for n in ns:
                if (v, n) not in self._links and (n, v) not in self._links:
                    raise InternalError(f"stale adjacency {v}-{n}")
