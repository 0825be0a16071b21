"""Prefix embeddings: spanning-tree coordinates and anonymous return addresses.

Every landmark roots one spanning tree. The landmark's coordinate is the
empty vector and each child extends its parent's coordinate by one random
b-bit element, so the tree distance between two nodes is
``len(a) + len(b) - 2 * common_prefix_len(a, b)``.

A receiver can hand out a return address instead of its coordinate: the
coordinate is padded to a fixed element count and every element is keyed-
hashed. Forwarders compare hashed prefixes, which shifts all distances by
a constant (padding minus the receiver's depth) and therefore preserves
the greedy next-hop ordering without revealing the coordinate.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError, CoordinateTooDeep, InternalError
from .graph import CreditGraph, NodeId

Coordinate = tuple[int, ...]

DEFAULT_ELEMENT_BITS = 128
# Padded address length; comfortably above any tree depth seen at desk scale.
DEFAULT_ADDRESS_LEN = 16


def derive_seed(seed: int, label: str) -> int:
    """Stable child seed for an independent random stream."""
    digest = hashlib.blake2b(f"{seed}|{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def common_prefix_len(a: Coordinate, b: Coordinate) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def coord_distance(a: Coordinate, b: Coordinate) -> int:
    """Hop distance between two tree positions."""
    return len(a) + len(b) - 2 * common_prefix_len(a, b)


def is_prefix(a: Coordinate, b: Coordinate) -> bool:
    """True iff a is a (non-strict) prefix of b."""
    return len(a) <= len(b) and b[: len(a)] == a


# ---- anonymous return addresses -------------------------------------------


def _hash_element(key: bytes, element: int, nbytes: int) -> bytes:
    return hashlib.blake2b(
        element.to_bytes(nbytes, "big"), digest_size=16, key=key
    ).digest()


@dataclass(frozen=True)
class ReturnAddress:
    """Padded, keyed-hashed coordinate.

    ``hashed`` has exactly the padded length; positions past the real
    coordinate hold hashes of fresh random padding elements. ``elements``
    is the pre-hash padded coordinate, which only the issuing receiver
    holds; keeping it on the object stands in for the receiver's local
    memory and lets it recognize itself without re-hashing.
    """

    key: bytes
    hashed: tuple[bytes, ...]
    real_len: int
    elements: Coordinate
    element_bits: int = DEFAULT_ELEMENT_BITS

    def is_receiver(self, coord: Coordinate | None) -> bool:
        return (
            coord is not None
            and len(coord) == self.real_len
            and coord == self.elements[: self.real_len]
        )


def gen_return_address(
    c: Coordinate,
    delta: int = DEFAULT_ADDRESS_LEN,
    rng: random.Random | None = None,
    element_bits: int = DEFAULT_ELEMENT_BITS,
) -> ReturnAddress:
    """Create a fresh-keyed return address for coordinate c, padded to delta."""
    if len(c) > delta:
        raise CoordinateTooDeep(
            f"coordinate depth {len(c)} exceeds address length {delta}"
        )
    rng = rng if rng is not None else random.Random()
    key = rng.getrandbits(128).to_bytes(16, "big")
    padding = tuple(rng.getrandbits(element_bits) for _ in range(delta - len(c)))
    elements = tuple(c) + padding
    nbytes = (element_bits + 7) // 8
    hashed = tuple(_hash_element(key, e, nbytes) for e in elements)
    return ReturnAddress(key, hashed, len(c), elements, element_bits)


def hashed_prefix_len(
    c: Coordinate, addr: ReturnAddress, cache: dict[int, bytes] | None = None
) -> int:
    """Longest prefix of c whose keyed hashes match the address element-wise.

    The optional cache maps element -> digest for one address key; a probe
    reuses it across neighbor comparisons since coordinates share prefixes.
    """
    hashed = addr.hashed
    limit = min(len(c), len(hashed))
    if limit == 0:
        return 0
    key = addr.key
    nbytes = (addr.element_bits + 7) // 8
    n = 0
    if cache is None:
        for j in range(limit):
            if _hash_element(key, c[j], nbytes) != hashed[j]:
                break
            n += 1
        return n
    cache_get = cache.get
    for j in range(limit):
        element = c[j]
        digest = cache_get(element)
        if digest is None:
            digest = _hash_element(key, element, nbytes)
            cache[element] = digest
        if digest != hashed[j]:
            break
        n += 1
    return n


def address_distance(
    c: Coordinate, addr: ReturnAddress, cache: dict[int, bytes] | None = None
) -> int:
    """Distance to the hidden receiver, shifted by the padded length."""
    return len(c) + len(addr.hashed) - 2 * hashed_prefix_len(c, addr, cache)


# ---- spanning-tree embedding ----------------------------------------------


class Embedding:
    """One landmark's spanning tree: parent links plus prefix coordinates.

    Mutations go through attach/detach so the children index, the
    previous-coordinate memory (needed by the re-parent cycle rule) and the
    optional undo journal stay consistent.
    """

    def __init__(
        self,
        tree_index: int,
        landmark: NodeId,
        element_bits: int = DEFAULT_ELEMENT_BITS,
    ) -> None:
        self.tree_index = tree_index
        self.landmark = landmark
        self.element_bits = element_bits
        self.parent: dict[NodeId, NodeId] = {}
        self.coord: dict[NodeId, Coordinate] = {landmark: ()}
        self.children: dict[NodeId, set[NodeId]] = {landmark: set()}
        self.prev_coord: dict[NodeId, Coordinate] = {}
        self._journal: list[tuple] | None = None

    # -- undo journal (static-mode transaction isolation) --

    def begin_undo(self) -> None:
        self._journal = []

    def _record(self, node: NodeId) -> None:
        if self._journal is not None:
            self._journal.append(
                (node, self.parent.get(node), self.coord.get(node), self.prev_coord.get(node))
            )

    def rollback_undo(self) -> None:
        """Restore the exact state captured since begin_undo."""
        if self._journal is None:
            raise InternalError("rollback without begin_undo")
        for node, old_parent, old_coord, old_prev in reversed(self._journal):
            cur_parent = self.parent.get(node)
            if cur_parent is not None:
                self.children[cur_parent].discard(node)
            for mapping, value in ((self.parent, old_parent), (self.coord, old_coord), (self.prev_coord, old_prev)):
                if value is None:
                    mapping.pop(node, None)
                else:
                    mapping[node] = value
            if old_coord is not None:
                self.children.setdefault(node, set())
            if old_parent is not None:
                self.children[old_parent].add(node)
        self._journal = None

    def end_undo(self) -> None:
        self._journal = None

    # -- queries --

    def attached(self, node: NodeId) -> bool:
        return node in self.coord

    def depth(self, node: NodeId) -> int:
        return len(self.coord[node])

    def subtree(self, root: NodeId) -> list[NodeId]:
        """Root plus all descendants, parents before children."""
        out = [root]
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for child in sorted(self.children.get(node, ())):
                out.append(child)
                queue.append(child)
        return out

    def path_to_landmark(self, node: NodeId) -> list[NodeId]:
        """Node list from node up to the landmark, inclusive."""
        chain = [node]
        seen = {node}
        while chain[-1] != self.landmark:
            p = self.parent.get(chain[-1])
            if p is None or p in seen:
                raise InternalError(f"broken parent chain at {chain[-1]} in tree {self.tree_index}")
            chain.append(p)
            seen.add(p)
        return chain

    def tree_path(self, a: NodeId, b: NodeId) -> list[NodeId]:
        """Unique tree path a .. lowest-common-ancestor .. b."""
        up_a = self.path_to_landmark(a)
        up_b = self.path_to_landmark(b)
        ancestors_a = {n: i for i, n in enumerate(up_a)}
        for j, n in enumerate(up_b):
            if n in ancestors_a:
                return up_a[: ancestors_a[n] + 1] + up_b[:j][::-1]
        raise InternalError(f"no common ancestor for {a} and {b} in tree {self.tree_index}")

    # -- mutation --

    def attach(self, node: NodeId, parent: NodeId, element: int) -> None:
        if node in self.coord:
            raise InternalError(f"attach of already-attached node {node}")
        self._record(node)
        self.parent[node] = parent
        self.coord[node] = self.coord[parent] + (element,)
        self.children.setdefault(parent, set()).add(node)
        self.children.setdefault(node, set())

    def detach(self, node: NodeId) -> None:
        """Drop the node's coordinate, remembering it for the cycle rule."""
        if node == self.landmark:
            raise InternalError("landmark cannot be detached")
        self._record(node)
        coord = self.coord.pop(node)
        self.prev_coord[node] = coord
        parent = self.parent.pop(node, None)
        if parent is not None:
            self.children[parent].discard(node)


def build_embeddings(
    g: CreditGraph,
    landmarks: list[NodeId],
    seed: int,
    element_bits: int = DEFAULT_ELEMENT_BITS,
) -> list[Embedding]:
    """Construct one spanning tree per landmark with two-phase BFS.

    Phase one grows the tree along links with positive weight in both
    directions only. Once that frontier is exhausted, every attached node
    is re-enqueued and remaining nodes may join through a link with weight
    in at least one direction (zero-zero pairs cannot exist in the graph).
    Nodes with no usable connection to any landmark stay unattached.
    """
    embeddings = []
    for i, lm in enumerate(landmarks):
        if lm not in g.nodes:
            raise ConfigError(f"landmark {lm} not in graph")
        rng = random.Random(derive_seed(seed, f"tree:{i}"))
        emb = Embedding(i, lm, element_bits)
        queue = deque([lm])
        bi = True
        while queue:
            node = queue.popleft()
            for n in g.sorted_neighbors(node):
                if n in emb.coord:
                    continue
                if bi and not (g.weight(node, n) > 0 and g.weight(n, node) > 0):
                    continue
                emb.attach(n, node, rng.getrandbits(element_bits))
                queue.append(n)
            if not queue and bi:
                bi = False
                queue.extend(sorted(emb.coord))
        embeddings.append(emb)
    return embeddings
