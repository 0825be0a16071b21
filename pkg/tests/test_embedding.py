import random
from collections import deque

import pytest

from pbtsim.credit import credit
from pbtsim.embedding import (
    Embedding,
    address_distance,
    build_embeddings,
    coord_distance,
    derive_seed,
    gen_return_address,
    is_prefix,
)
from pbtsim.errors import ConfigError, CoordinateTooDeep
from pbtsim.graph import CreditGraph

from conftest import random_graph


def bfs_hops(adj, a, b):
    """Plain BFS hop count, the independent tree-distance oracle."""
    if a == b:
        return 0
    seen = {a: 0}
    queue = deque([a])
    while queue:
        node = queue.popleft()
        for n in adj[node]:
            if n not in seen:
                seen[n] = seen[node] + 1
                if n == b:
                    return seen[n]
                queue.append(n)
    raise AssertionError("disconnected")


def random_tree_embedding(n, seed, element_bits=16):
    """Random parent structure with fresh coordinates plus its adjacency."""
    rnd = random.Random(seed)
    emb = Embedding(0, 0, element_bits)
    adj = {0: []}
    for v in range(1, n):
        p = rnd.randrange(v)
        emb.attach(v, p, rnd.getrandbits(element_bits))
        adj.setdefault(p, []).append(v)
        adj.setdefault(v, []).append(p)
    return emb, adj


def test_coord_distance_identities():
    assert coord_distance((), ()) == 0
    assert coord_distance((5,), (5, 9)) == 1  # parent-child
    assert coord_distance((5, 1), (5, 2)) == 2  # siblings
    assert coord_distance((1, 2, 3), (4,)) == 4


def test_coord_distance_matches_bfs_on_random_trees():
    rnd = random.Random(42)
    for t in range(60):
        n = rnd.randint(2, 120)
        emb, adj = random_tree_embedding(n, seed=1000 + t)
        for _ in range(15):
            a, b = rnd.randrange(n), rnd.randrange(n)
            assert coord_distance(emb.coord[a], emb.coord[b]) == bfs_hops(adj, a, b)


def test_is_prefix():
    assert is_prefix((), (1,))
    assert is_prefix((1,), (1,))
    assert not is_prefix((1, 2), (1, 3))
    assert not is_prefix((1, 2), (1,))


# ---- construction -----------------------------------------------------------


def test_build_line_depths(line_graph):
    emb = build_embeddings(line_graph, [0], seed=5)[0]
    assert emb.coord[0] == ()
    assert len(emb.coord[1]) == 1
    assert len(emb.coord[2]) == 2
    assert emb.parent[2] == 1


def test_build_unidirectional_attaches_in_phase_two():
    # A=0 <-> B=1 bidirectional, B -> C=2 one way only: C still joins, via B.
    g = CreditGraph()
    g.set_link(0, 1, credit(5))
    g.set_link(1, 0, credit(5))
    g.set_link(1, 2, credit(5))
    emb = build_embeddings(g, [0], seed=5)[0]
    assert emb.parent[2] == 1
    assert len(emb.coord[2]) == 2


def test_build_leaves_unreachable_nodes_unattached():
    g = CreditGraph()
    g.set_link(0, 1, credit(5))
    g.set_link(1, 0, credit(5))
    g.add_node(7)  # no links at all (a zero-zero pair cannot persist)
    emb = build_embeddings(g, [0], seed=5)[0]
    assert not emb.attached(7)
    assert emb.attached(1)


def test_build_requires_known_landmark(line_graph):
    with pytest.raises(ConfigError):
        build_embeddings(line_graph, [404], seed=1)


def test_phase_one_depth_equals_bidirectional_bfs():
    """Nodes attached in phase 1 sit at their bidirectional BFS distance."""
    for seed in (3, 4, 5):
        g = random_graph(60, 40, seed=seed)
        emb = build_embeddings(g, [0], seed=seed)[0]
        adj = {v: sorted(n for n in g.neighbors(v)
                         if g.weight(v, n) > 0 and g.weight(n, v) > 0)
               for v in g.nodes}
        dist = {0: 0}
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for n in adj[node]:
                if n not in dist:
                    dist[n] = dist[node] + 1
                    queue.append(n)
        for v, d in dist.items():
            assert len(emb.coord[v]) == d


def test_tree_validity_and_coordinate_agreement():
    g = random_graph(80, 50, seed=9)
    for emb in build_embeddings(g, [0, 3], seed=9):
        for v in emb.coord:
            if v == emb.landmark:
                continue
            p = emb.parent[v]
            assert emb.coord[v][:-1] == emb.coord[p]
            chain = emb.path_to_landmark(v)
            assert chain[-1] == emb.landmark
            assert len(chain) <= len(g.nodes)


def test_build_is_deterministic():
    g = random_graph(40, 20, seed=2)
    a = build_embeddings(g, [0], seed=77)[0]
    b = build_embeddings(g, [0], seed=77)[0]
    assert a.coord == b.coord and a.parent == b.parent


# ---- return addresses ---------------------------------------------------------


def test_address_empty_coordinate_padding_only():
    addr = gen_return_address((), delta=4, rng=random.Random(1))
    assert len(addr.hashed) == 4
    assert addr.real_len == 0


def test_address_fresh_key_per_call():
    rnd = random.Random(2)
    c = (10, 20)
    a1 = gen_return_address(c, delta=6, rng=rnd)
    a2 = gen_return_address(c, delta=6, rng=rnd)
    assert a1.key != a2.key
    assert a1.hashed != a2.hashed


def test_address_depth_guard():
    with pytest.raises(CoordinateTooDeep):
        gen_return_address(tuple(range(5)), delta=4, rng=random.Random(1))


def test_address_distance_on_own_coordinate():
    rnd = random.Random(3)
    c = (7, 8, 9)
    addr = gen_return_address(c, delta=10, rng=rnd)
    assert address_distance(c, addr) == 10 - 3
    assert address_distance((), addr) == 10
    assert addr.is_receiver(c)
    assert not addr.is_receiver((7, 8))
    assert not addr.is_receiver((7, 8, 9, 1))


def test_address_distance_equals_shifted_coord_distance():
    """d~(u, addr(r)) = d(u, r) + delta - |r| for tree coordinates."""
    rnd = random.Random(8)
    for t in range(40):
        emb, _ = random_tree_embedding(rnd.randint(2, 60), seed=500 + t)
        nodes = sorted(emb.coord)
        r = nodes[rnd.randrange(len(nodes))]
        addr = gen_return_address(emb.coord[r], delta=12, rng=rnd, element_bits=16)
        shift = 12 - len(emb.coord[r])
        for _ in range(8):
            u = nodes[rnd.randrange(len(nodes))]
            assert address_distance(emb.coord[u], addr) == \
                coord_distance(emb.coord[u], emb.coord[r]) + shift


def test_undo_journal_round_trip():
    g = random_graph(30, 15, seed=4)
    emb = build_embeddings(g, [0], seed=4)[0]
    state = (dict(emb.parent), dict(emb.coord), {k: set(v) for k, v in emb.children.items()})
    emb.begin_undo()
    victims = [v for v in sorted(emb.coord) if v != 0][:5]
    for v in victims:
        for node in emb.subtree(v):
            if emb.attached(node):
                emb.detach(node)
    rnd = random.Random(0)
    for v in victims:
        if not emb.attached(v):
            emb.attach(v, 0, rnd.getrandbits(16))
    emb.rollback_undo()
    assert dict(emb.parent) == state[0]
    assert dict(emb.coord) == state[1]
    assert {k: set(v) for k, v in emb.children.items() if v} == \
        {k: set(v) for k, v in state[2].items() if v}
