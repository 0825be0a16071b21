"""Workload files: parsing, preprocessing, and synthetic generation.

Three line-oriented CSV formats with headers, UTF-8, decimal amounts with
at most six fractional digits:

    snapshot:     u,v,weight[,limit]
    transactions: time,value,src,dst
    link changes: time,u,v,new_weight

Timestamps in event files must be nondecreasing. Parsing and serializing
round-trip exactly because amounts live in integer micro-units and are
rendered canonically.

Preprocessing applies the dataset cleaning rules in order: drop invalid
credit arrangements (weight above the granted limit, only checkable when
a limit column is present), drop self-entries, restrict to the giant
component, and drop zero-weight placeholder rows (links that only come
into existence later are represented implicitly; their creation arrives
as a link-change event). Transactions and changes are then restricted to
surviving nodes. The report counts every removal per rule.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .credit import format_credit, parse_credit
from .errors import ConfigError, ParseError
from .graph import CreditGraph, NodeId


@dataclass(frozen=True)
class LinkRecord:
    u: NodeId
    v: NodeId
    weight: int
    limit: int | None = None


@dataclass(frozen=True)
class TransactionRecord:
    time: int
    value: int
    src: NodeId
    dst: NodeId


@dataclass(frozen=True)
class LinkChangeRecord:
    time: int
    u: NodeId
    v: NodeId
    new_weight: int


@dataclass
class SnapshotFile:
    records: list[LinkRecord] = field(default_factory=list)
    has_limit: bool = False


@dataclass
class TransactionFile:
    records: list[TransactionRecord] = field(default_factory=list)


@dataclass
class LinkChangeFile:
    records: list[LinkChangeRecord] = field(default_factory=list)


# ---- parsing and serialization ------------------------------------------------


def _parse_node(token: str, line: int) -> NodeId:
    token = token.strip()
    if not token.isdigit():
        raise ParseError(f"invalid node id {token!r}", line)
    return int(token)


def _split(line_text: str, expected: int, line: int) -> list[str]:
    parts = line_text.split(",")
    if len(parts) != expected:
        raise ParseError(f"expected {expected} fields, got {len(parts)}", line)
    return parts


def parse_snapshot(text: str) -> SnapshotFile:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty snapshot file", 1)
    header = lines[0].strip()
    if header == "u,v,weight":
        has_limit = False
    elif header == "u,v,weight,limit":
        has_limit = True
    else:
        raise ParseError(f"unrecognized snapshot header {header!r}", 1)
    records = []
    for i, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = _split(raw, 4 if has_limit else 3, i)
        u = _parse_node(parts[0], i)
        v = _parse_node(parts[1], i)
        weight = parse_credit(parts[2], i)
        limit = parse_credit(parts[3], i) if has_limit else None
        if weight < 0 or (limit is not None and limit < 0):
            raise ParseError("negative amount", i)
        records.append(LinkRecord(u, v, weight, limit))
    return SnapshotFile(records, has_limit)


def serialize_snapshot(snapshot: SnapshotFile) -> str:
    header = "u,v,weight,limit" if snapshot.has_limit else "u,v,weight"
    lines = [header]
    for r in snapshot.records:
        base = f"{r.u},{r.v},{format_credit(r.weight)}"
        if snapshot.has_limit:
            base += f",{format_credit(r.limit if r.limit is not None else 0)}"
        lines.append(base)
    return "\n".join(lines) + "\n"


def parse_transactions(text: str) -> TransactionFile:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "time,value,src,dst":
        raise ParseError("expected header 'time,value,src,dst'", 1)
    records = []
    prev_time = None
    for i, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = _split(raw, 4, i)
        time = parse_credit(parts[0], i)
        value = parse_credit(parts[1], i)
        if time < 0 or value < 0:
            raise ParseError("negative time or value", i)
        if prev_time is not None and time < prev_time:
            raise ParseError("timestamps must be nondecreasing", i)
        prev_time = time
        records.append(TransactionRecord(time, value, _parse_node(parts[2], i), _parse_node(parts[3], i)))
    return TransactionFile(records)


def serialize_transactions(txs: TransactionFile) -> str:
    lines = ["time,value,src,dst"]
    for r in txs.records:
        lines.append(f"{format_credit(r.time)},{format_credit(r.value)},{r.src},{r.dst}")
    return "\n".join(lines) + "\n"


def parse_link_changes(text: str) -> LinkChangeFile:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "time,u,v,new_weight":
        raise ParseError("expected header 'time,u,v,new_weight'", 1)
    records = []
    prev_time = None
    for i, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = _split(raw, 4, i)
        time = parse_credit(parts[0], i)
        weight = parse_credit(parts[3], i)
        if time < 0 or weight < 0:
            raise ParseError("negative time or weight", i)
        if prev_time is not None and time < prev_time:
            raise ParseError("timestamps must be nondecreasing", i)
        prev_time = time
        records.append(LinkChangeRecord(time, _parse_node(parts[1], i), _parse_node(parts[2], i), weight))
    return LinkChangeFile(records)


def serialize_link_changes(changes: LinkChangeFile) -> str:
    lines = ["time,u,v,new_weight"]
    for r in changes.records:
        lines.append(f"{format_credit(r.time)},{r.u},{r.v},{format_credit(r.new_weight)}")
    return "\n".join(lines) + "\n"


def build_graph(snapshot: SnapshotFile) -> CreditGraph:
    """Materialize a credit graph; zero-weight rows add nodes but no links."""
    g = CreditGraph()
    for r in snapshot.records:
        g.add_node(r.u)
        g.add_node(r.v)
        if r.weight > 0 and r.u != r.v:
            g.set_link(r.u, r.v, r.weight)
    return g


# ---- preprocessing ---------------------------------------------------------------


@dataclass
class PreprocessResult:
    snapshot: SnapshotFile
    transactions: TransactionFile
    link_changes: LinkChangeFile
    report: dict[str, int]


def format_report(report: dict[str, int]) -> str:
    return "\n".join(f"{k}={v}" for k, v in report.items()) + "\n"


def preprocess(
    snapshot: SnapshotFile,
    transactions: TransactionFile,
    link_changes: LinkChangeFile,
) -> PreprocessResult:
    """Apply the dataset cleaning rules; see the module docstring for order."""
    report: dict[str, int] = {}

    # Rule 1: invalid credit arrangements (and degenerate self-links).
    rows = []
    invalid = 0
    for r in snapshot.records:
        if r.u == r.v or (r.limit is not None and r.weight > r.limit):
            invalid += 1
        else:
            rows.append(r)
    report["invalid_links_removed"] = invalid

    # Rule 2: self-entries in the event lists.
    txs = [t for t in transactions.records if t.src != t.dst]
    report["self_transactions_removed"] = len(transactions.records) - len(txs)
    changes = [c for c in link_changes.records if c.u != c.v]
    report["self_link_changes_removed"] = len(link_changes.records) - len(changes)

    # Rule 3: giant component over rows that carry weight in some direction.
    nodes: set[NodeId] = set()
    adj: dict[NodeId, set[NodeId]] = {}
    for r in rows:
        nodes.add(r.u)
        nodes.add(r.v)
        if r.weight > 0:
            adj.setdefault(r.u, set()).add(r.v)
            adj.setdefault(r.v, set()).add(r.u)
    giant: set[NodeId] = set()
    seen: set[NodeId] = set()
    for start in sorted(nodes):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for n in adj.get(node, ()):
                if n not in comp:
                    comp.add(n)
                    stack.append(n)
        seen |= comp
        if len(comp) > len(giant):
            giant = comp
    kept_rows = [r for r in rows if r.u in giant and r.v in giant]
    report["nongiant_nodes_removed"] = len(nodes) - len(giant)
    report["nongiant_links_removed"] = len(rows) - len(kept_rows)

    # Rule 4: zero-weight placeholder rows (future links) are implicit.
    final_rows = [r for r in kept_rows if r.weight > 0]
    report["zero_links_removed"] = len(kept_rows) - len(final_rows)

    final_txs = [t for t in txs if t.src in giant and t.dst in giant]
    report["transactions_outside_removed"] = len(txs) - len(final_txs)
    final_changes = [c for c in changes if c.u in giant and c.v in giant]
    report["link_changes_outside_removed"] = len(changes) - len(final_changes)

    report["nodes_kept"] = len(giant)
    report["links_kept"] = len(final_rows)
    report["transactions_kept"] = len(final_txs)
    report["link_changes_kept"] = len(final_changes)

    return PreprocessResult(
        SnapshotFile(final_rows, snapshot.has_limit),
        TransactionFile(final_txs),
        LinkChangeFile(final_changes),
        report,
    )


# ---- synthetic generation ---------------------------------------------------------


def _log_uniform(rng: random.Random, lo: float, hi: float) -> int:
    """Micro-unit amount log-uniform on [lo, hi] whole units."""
    x = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return max(1, round(x * 10**6))


def _scale_free_edges(
    n: int, m: int, rng: random.Random, triad_p: float = 0.0
) -> list[tuple[int, int]]:
    """Preferential attachment: each new node links to m distinct targets.

    With triad_p > 0, after each preferential pick the next link closes a
    triangle through a neighbor of that pick with this probability, which
    keeps the degree distribution scale-free while adding the local
    clustering real credit networks show.
    """
    edges: list[tuple[int, int]] = []
    endpoints: list[int] = []
    neighbors: dict[int, list[int]] = {}

    def connect(a: int, b: int) -> None:
        edges.append((a, b))
        endpoints.extend((a, b))
        neighbors.setdefault(a, []).append(b)
        neighbors.setdefault(b, []).append(a)

    start = min(m + 1, n)
    for v in range(1, start):
        connect(v, v - 1)
    for v in range(start, n):
        targets: set[int] = set()
        last_target: int | None = None
        while len(targets) < m:
            candidate: int | None = None
            if last_target is not None and rng.random() < triad_p:
                hood = neighbors[last_target]
                pick = hood[rng.randrange(len(hood))]
                if pick != v and pick not in targets:
                    candidate = pick
            if candidate is None:
                pick = endpoints[rng.randrange(len(endpoints))]
                if pick == v or pick in targets:
                    continue
                candidate = pick
            targets.add(candidate)
            last_target = candidate
        for t in sorted(targets):
            connect(v, t)
    return edges


def _small_world_edges(n: int, k: int, p: float, rng: random.Random) -> list[tuple[int, int]]:
    """Ring lattice with k/2 successors per node, each edge rewired with prob p."""
    existing: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    for v in range(n):
        for j in range(1, k // 2 + 1):
            w = (v + j) % n
            if v == w:
                continue
            key = (min(v, w), max(v, w))
            if key not in existing:
                existing.add(key)
                edges.append((v, w))
    out: list[tuple[int, int]] = []
    for v, w in edges:
        if rng.random() < p:
            for _ in range(10):
                cand = rng.randrange(n)
                key = (min(v, cand), max(v, cand))
                if cand != v and key not in existing:
                    existing.discard((min(v, w), max(v, w)))
                    existing.add(key)
                    w = cand
                    break
        out.append((v, w))
    return out


def generate_synthetic(
    n: int,
    model: str = "scale-free",
    tx_count: int = 0,
    seed: int = 0,
    *,
    m: int = 2,
    k: int = 4,
    rewire_p: float = 0.1,
    triad_p: float = 0.0,
    weight_range: tuple[float, float] = (0.5, 500.0),
    value_range: tuple[float, float] = (1.0, 100.0),
    unidirectional_fraction: float = 0.0,
    time_step: int = 10**6,
) -> tuple[SnapshotFile, TransactionFile]:
    """Deterministic desk-scale workload.

    By default every undirected attachment becomes a bidirectional link
    pair with independently drawn log-uniform weights. Credit networks
    also carry one-way credit lines; set unidirectional_fraction to make
    that share of attachments single-direction, which exercises the
    two-phase tree construction. Transaction endpoints are sampled
    proportional to degree; values are log-uniform.
    """
    if n < 2:
        raise ConfigError("need at least two nodes")
    if model not in ("scale-free", "small-world"):
        raise ConfigError(f"unknown model {model!r}")
    if weight_range[0] <= 0 or value_range[0] <= 0 or weight_range[0] > weight_range[1] \
            or value_range[0] > value_range[1]:
        raise ConfigError("ranges must be positive and ordered")
    if not 0.0 <= unidirectional_fraction <= 1.0:
        raise ConfigError("unidirectional_fraction must be in [0, 1]")
    if not 0.0 <= triad_p <= 1.0:
        raise ConfigError("triad_p must be in [0, 1]")
    rng = random.Random(seed)
    if model == "scale-free":
        edges = _scale_free_edges(n, m, rng, triad_p)
    else:
        edges = _small_world_edges(n, k, rewire_p, rng)
    records = []
    endpoints: list[int] = []
    for a, b in edges:
        if rng.random() < unidirectional_fraction:
            if rng.random() < 0.5:
                a, b = b, a
            records.append(LinkRecord(a, b, _log_uniform(rng, *weight_range)))
        else:
            records.append(LinkRecord(a, b, _log_uniform(rng, *weight_range)))
            records.append(LinkRecord(b, a, _log_uniform(rng, *weight_range)))
        endpoints += [a, b]
    txs = []
    for i in range(tx_count):
        src = endpoints[rng.randrange(len(endpoints))]
        dst = endpoints[rng.randrange(len(endpoints))]
        while dst == src:
            dst = endpoints[rng.randrange(len(endpoints))]
        txs.append(TransactionRecord(i * time_step, _log_uniform(rng, *value_range), src, dst))
    return SnapshotFile(records), TransactionFile(txs)
