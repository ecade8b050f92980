"""Finite rooted binary trees and their branching statistics.

A tree is stored as parallel numpy arrays (one row per vertex):

    children : int32 (n, 2)   child ids, (-1, -1) for leaves
    parent   : int32 (n,)     parent id, -1 for the root
    marks    : float64 (n,)   optional time marks (None when combinatorial)

Vertex ids are arbitrary non-negative integers below ``n_vertices``; no
canonical numbering is imposed.  Trees are immutable after construction and
all operations in this module are pure functions of their inputs, so
instances can be shared freely across threads.

Time marks must be strictly monotone along every root-ward path, with one
consistent global direction: merger trees grow toward the root (parent mark
larger), level-set trees grow away from it (parent mark smaller).  Both
orientations are accepted.

The module provides Horton-Strahler ordering and branch counts, Tokunaga
side-branch counts, pruning, depth restriction, canonical (embedding-free)
shape encodings, the forest decomposition of a tree along the ancestral path
of a selected leaf, the neighborhood metric built on that decomposition, and
a plain-text serialization format::

    tree := node
    node := "L" [":" mark] | "(" node "," node ")" [":" mark]
    mark := decimal real

Whitespace is insignificant; encoding is UTF-8.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConsistencyError,
    DomainError,
    StructuralError,
    TreeParseError,
)

__all__ = [
    "RootedTree",
    "HortonAnalysis",
    "SelectedLeafTree",
    "assign_horton_strahler",
    "tokunaga_counts",
    "prune",
    "canonical_shape",
    "restrict",
    "forest_decomposition",
    "mu_distance",
    "parse_tree",
    "serialize_tree",
]

_NO_CHILD = -1


class RootedTree:
    """Immutable rooted tree backed by flat arrays.

    Use :meth:`from_children` (or the module-level builders/parser) rather
    than mutating arrays in place.  The empty tree -- the result of pruning a
    single leaf -- is a distinguished value with zero vertices.
    """

    __slots__ = ("children", "parent", "marks", "root")

    def __init__(self, children, marks=None):
        children = np.asarray(children, dtype=np.int32).reshape(-1, 2)
        n = children.shape[0]
        self.children = children
        if marks is not None:
            marks = np.asarray(marks, dtype=np.float64)
            if marks.shape != (n,):
                raise StructuralError("marks length does not match vertex count")
        self.marks = marks
        parent = np.full(n, _NO_CHILD, dtype=np.int32)
        for col in (0, 1):
            ch = children[:, col]
            valid = ch >= 0
            ids = ch[valid]
            if ids.size:
                if ids.max() >= n:
                    raise StructuralError("child id out of range")
                if np.any(parent[ids] != _NO_CHILD):
                    raise StructuralError("vertex has more than one parent")
                parent[ids] = np.nonzero(valid)[0]
        self.parent = parent
        roots = np.nonzero(parent == _NO_CHILD)[0]
        if n == 0:
            self.root = _NO_CHILD
        elif len(roots) != 1:
            raise StructuralError(f"expected exactly one root, found {len(roots)}")
        else:
            self.root = int(roots[0])

    # -- builders ----------------------------------------------------------

    @classmethod
    def empty(cls) -> "RootedTree":
        return cls(np.empty((0, 2), dtype=np.int32))

    @classmethod
    def leaf(cls, mark=None) -> "RootedTree":
        marks = None if mark is None else np.array([mark], dtype=np.float64)
        return cls(np.array([[_NO_CHILD, _NO_CHILD]], dtype=np.int32), marks)

    @classmethod
    def from_children(cls, children, marks=None) -> "RootedTree":
        return cls(children, marks)

    # -- basic queries ------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.children.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.n_vertices == 0

    @property
    def leaf_mask(self) -> np.ndarray:
        return self.children[:, 0] == _NO_CHILD

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.leaf_mask))

    def leaves(self) -> np.ndarray:
        return np.nonzero(self.leaf_mask)[0]

    def is_leaf(self, v: int) -> bool:
        return self.children[v, 0] == _NO_CHILD

    def depths(self) -> np.ndarray:
        """Edge depth of every vertex from the root (root depth 0)."""
        n = self.n_vertices
        depth = np.full(n, -1, dtype=np.int64)
        if n == 0:
            return depth
        depth[self.root] = 0
        frontier = np.array([self.root], dtype=np.int64)
        while frontier.size:
            ch = self.children[frontier].ravel()
            ch = ch[ch >= 0]
            depth[ch] = depth[self.parent[ch]] + 1
            frontier = ch
        return depth

    def _levels(self):
        """Vertex ids grouped by depth, root first.  Assumes valid tree."""
        levels = []
        frontier = np.array([self.root], dtype=np.int64)
        while frontier.size:
            levels.append(frontier)
            ch = self.children[frontier].ravel()
            frontier = ch[ch >= 0]
        return levels

    def validate(self) -> None:
        """Raise :class:`StructuralError` unless this is a well-formed binary
        tree: one root, every non-root with one parent, no cycles, vertices
        with zero or two children, and (when present) strictly monotone time
        marks with a consistent orientation."""
        n = self.n_vertices
        if n == 0:
            raise StructuralError("empty tree")
        one_child = (self.children[:, 0] >= 0) != (self.children[:, 1] >= 0)
        if np.any(one_child):
            v = int(np.nonzero(one_child)[0][0])
            raise StructuralError(f"vertex {v} has exactly one child")
        # reachability from the root covers all vertices iff acyclic
        reached = sum(lv.size for lv in self._levels())
        if reached != n:
            raise StructuralError("graph is disconnected or contains a cycle")
        n_leaves = self.n_leaves
        if n - n_leaves != n_leaves - 1:
            raise StructuralError("leaf/internal count mismatch")
        if self.marks is not None:
            if not np.all(np.isfinite(self.marks)):
                raise StructuralError("non-finite time mark")
            nonroot = np.arange(n) != self.root
            diff = self.marks[self.parent[nonroot]] - self.marks[nonroot]
            if np.any(diff == 0.0) or (np.any(diff > 0) and np.any(diff < 0)):
                raise StructuralError(
                    "time marks must be strictly monotone toward the root"
                )

    # -- structure helpers ---------------------------------------------------

    def subtree(self, v: int) -> "RootedTree":
        """Copy of the subtree rooted at vertex ``v`` (ids renumbered)."""
        ids = []
        stack = [int(v)]
        while stack:
            u = stack.pop()
            ids.append(u)
            c0, c1 = self.children[u]
            if c0 >= 0:
                stack.append(int(c1))
                stack.append(int(c0))
        remap = {u: i for i, u in enumerate(ids)}
        ch = np.full((len(ids), 2), _NO_CHILD, dtype=np.int32)
        for i, u in enumerate(ids):
            c0, c1 = self.children[u]
            if c0 >= 0:
                ch[i, 0] = remap[int(c0)]
                ch[i, 1] = remap[int(c1)]
        marks = None if self.marks is None else self.marks[ids]
        return RootedTree(ch, marks)

    def equals(self, other: "RootedTree") -> bool:
        """Structural equality preserving child order and marks."""
        if self.n_vertices != other.n_vertices:
            return False
        if self.is_empty:
            return True
        if (self.marks is None) != (other.marks is None):
            return False
        stack = [(self.root, other.root)]
        while stack:
            a, b = stack.pop()
            if (self.children[a, 0] >= 0) != (other.children[b, 0] >= 0):
                return False
            if self.marks is not None and self.marks[a] != other.marks[b]:
                return False
            if self.children[a, 0] >= 0:
                stack.append((int(self.children[a, 0]), int(other.children[b, 0])))
                stack.append((int(self.children[a, 1]), int(other.children[b, 1])))
        return True

    def __repr__(self):
        if self.is_empty:
            return "RootedTree.empty()"
        return f"<RootedTree leaves={self.n_leaves} vertices={self.n_vertices}>"


@dataclass
class HortonAnalysis:
    """Per-vertex Horton-Strahler orders and order-k branch counts.

    ``branch_counts[k-1]`` is N_k, the number of maximal same-order runs of
    order k; ``omega`` is the root order.  ``n_vertices`` ties the analysis
    to the tree it was computed from.
    """

    order: np.ndarray
    omega: int
    branch_counts: np.ndarray
    n_vertices: int

    def branch_count(self, k: int) -> int:
        return int(self.branch_counts[k - 1])


def assign_horton_strahler(tree: RootedTree) -> HortonAnalysis:
    """Order every vertex by the leaves-up rules (leaf order 1; equal children
    promote, unequal children pass the maximum) and count branches per order.

    A branch of order k >= 2 starts at the unique vertex whose children both
    have order k-1, so N_k equals the number of such promotion vertices,
    while N_1 is the leaf count.
    """
    if tree.is_empty:
        raise StructuralError("cannot order the empty tree")
    tree.validate()
    n = tree.n_vertices
    orders = np.zeros(n, dtype=np.int32)
    levels = tree._levels()
    for lv in reversed(levels):
        internal = lv[tree.children[lv, 0] >= 0]
        leaf = lv[tree.children[lv, 0] < 0]
        orders[leaf] = 1
        if internal.size:
            a = orders[tree.children[internal, 0]]
            b = orders[tree.children[internal, 1]]
            orders[internal] = np.where(a == b, a + 1, np.maximum(a, b))
    omega = int(orders[tree.root])
    counts = np.zeros(omega, dtype=np.int64)
    counts[0] = tree.n_leaves
    internal = np.nonzero(~tree.leaf_mask)[0]
    if internal.size:
        a = orders[tree.children[internal, 0]]
        b = orders[tree.children[internal, 1]]
        promo = a[a == b] + 1
        counts[1:] = np.bincount(promo, minlength=omega + 1)[2 : omega + 1]
    return HortonAnalysis(orders, omega, counts, n)


def tokunaga_counts(tree: RootedTree, analysis: HortonAnalysis):
    """Side-branch count matrix N_ij and Tokunaga ratios tau_ij = N_ij / N_j.

    Entry [i-1, j-1] counts order-i branches absorbed by an order-j branch
    (i < j); a branch of order i is a side branch exactly when its sibling
    has the strictly larger order j.  Returns ``(N_ij, tau_ij)`` as
    (omega x omega) arrays with zeros outside the strict upper triangle.
    """
    if analysis.n_vertices != tree.n_vertices:
        raise ConsistencyError("analysis does not match tree size")
    if tree.is_empty or int(analysis.order[tree.root]) != analysis.omega:
        raise ConsistencyError("analysis does not match tree")
    if np.any(analysis.order[tree.leaf_mask] != 1):
        raise ConsistencyError("analysis orders are inconsistent with tree leaves")
    omega = analysis.omega
    nij = np.zeros((omega, omega), dtype=np.int64)
    internal = np.nonzero(~tree.leaf_mask)[0]
    if internal.size:
        a = analysis.order[tree.children[internal, 0]]
        b = analysis.order[tree.children[internal, 1]]
        side = a != b
        lo = np.minimum(a[side], b[side])
        hi = np.maximum(a[side], b[side])
        np.add.at(nij, (lo - 1, hi - 1), 1)
    tau = nij / analysis.branch_counts[np.newaxis, :]
    return nij, tau


def prune(tree: RootedTree) -> RootedTree:
    """Cut all leaves and collapse the resulting one-child chains.

    The result is again a binary tree; a single leaf prunes to the
    distinguished empty tree so pruning chains terminate cleanly.  Surviving
    vertices keep their time marks.
    """
    if tree.is_empty:
        return RootedTree.empty()
    n = tree.n_vertices
    # rep[v]: id of the pruned subtree root that v maps to, -1 if it vanishes
    rep = np.full(n, _NO_CHILD, dtype=np.int64)
    new_children = []
    new_marks = [] if tree.marks is not None else None
    order = _postorder(tree)
    for v in order:
        c0, c1 = tree.children[v]
        if c0 < 0:
            continue  # leaf: removed
        r0, r1 = rep[c0], rep[c1]
        if r0 < 0 and r1 < 0:
            rep[v] = len(new_children)
            new_children.append((_NO_CHILD, _NO_CHILD))
            if new_marks is not None:
                new_marks.append(tree.marks[v])
        elif r0 < 0 or r1 < 0:
            rep[v] = r0 if r0 >= 0 else r1  # degree-2 chain: collapse v
        else:
            rep[v] = len(new_children)
            new_children.append((r0, r1))
            if new_marks is not None:
                new_marks.append(tree.marks[v])
    if not new_children:
        return RootedTree.empty()
    return RootedTree(
        np.array(new_children, dtype=np.int32),
        None if new_marks is None else np.array(new_marks),
    )


def _postorder(tree: RootedTree) -> np.ndarray:
    """Vertex ids, children always before parents (iterative)."""
    levels = tree._levels()
    return np.concatenate(list(reversed(levels))) if levels else np.empty(0, np.int64)


def canonical_shape(tree: RootedTree) -> str:
    """Embedding-free encoding of the combinatorial shape.

    Leaves encode as ``"L"``; an internal vertex as the concatenation of its
    children's encodings in parentheses, children ordered deterministically
    (longer encoding first, ties lexicographic).  Two trees have equal
    encodings iff their shapes are isomorphic as non-embedded rooted trees,
    so the encoding is invariant under child swaps.  The empty tree encodes
    as the empty string.
    """
    if tree.is_empty:
        return ""
    enc = [None] * tree.n_vertices
    for v in _postorder(tree):
        c0, c1 = tree.children[v]
        if c0 < 0:
            enc[v] = "L"
        else:
            a, b = enc[c0], enc[c1]
            if (-len(a), a) > (-len(b), b):
                a, b = b, a
            enc[v] = "(" + a + b + ")"
    return enc[tree.root]


def restrict(tree: RootedTree, n: int) -> RootedTree:
    """Subgraph induced by the vertices at depth < ``n`` from the root.

    Cut vertices may keep a single child; the result is only meant for
    shape-equality tests inside :func:`mu_distance` and is never re-analyzed.
    """
    if n < 1:
        raise DomainError("restriction depth must be >= 1")
    if tree.is_empty:
        return RootedTree.empty()
    keep = tree.depths() < n
    ids = np.nonzero(keep)[0]
    remap = np.full(tree.n_vertices, _NO_CHILD, dtype=np.int64)
    remap[ids] = np.arange(ids.size)
    ch = tree.children[ids].copy()
    valid = ch >= 0
    ch[valid] = remap[ch[valid]].astype(np.int32)
    marks = None if tree.marks is None else tree.marks[ids]
    return RootedTree(ch, marks)


def _canonical_loose(tree: RootedTree) -> str:
    """Canonical encoding tolerating one-child vertices (for restrictions)."""
    if tree.is_empty:
        return ""
    enc = [None] * tree.n_vertices
    for v in _postorder(tree):
        c0, c1 = tree.children[v]
        kids = [enc[c] for c in (c0, c1) if c >= 0]
        if not kids:
            enc[v] = "L"
        else:
            kids.sort(key=lambda s: (-len(s), s))
            enc[v] = "(" + "".join(kids) + ")"
    return enc[tree.root]


@dataclass
class SelectedLeafTree:
    """A rooted binary tree with a designated leaf.

    The ancestral path runs from the selected leaf to the root; hanging off
    its i-th vertex (i >= 1) is the sibling subtree T_i, and the tree is
    recovered by reattaching the forest {T_i} along the path.
    """

    tree: RootedTree
    leaf: int

    def __post_init__(self):
        t = self.tree
        if t.is_empty or not (0 <= self.leaf < t.n_vertices) or not t.is_leaf(self.leaf):
            raise DomainError("selected vertex is not a leaf of the tree")

    def ancestral_path(self) -> list[int]:
        """Vertex ids from the selected leaf (index 0) to the root."""
        path = [self.leaf]
        v = self.leaf
        while self.tree.parent[v] >= 0:
            v = int(self.tree.parent[v])
            path.append(v)
        return path


def forest_decomposition(t: SelectedLeafTree) -> list[RootedTree]:
    """Sibling subtrees along the ancestral path of the selected leaf.

    Element i-1 of the returned list is T_i, the subtree rooted at the
    sibling of the path vertex below path vertex i; the forest is empty for
    a single-leaf tree, and conserves leaves: leaves(T) = 1 + sum leaves(T_i).
    """
    path = t.ancestral_path()
    forest = []
    for i in range(1, len(path)):
        below, here = path[i - 1], path[i]
        c0, c1 = t.tree.children[here]
        sibling = int(c1) if int(c0) == below else int(c0)
        forest.append(t.tree.subtree(sibling))
    return forest


def mu_distance(a: SelectedLeafTree, b: SelectedLeafTree) -> float:
    """Neighborhood metric around the selected leaf.

    mu = 1 / (1 + sup{ n : A_k|n = B_k|n for all k <= n }) where A_k, B_k
    are the forest members (empty past the path end) and T|n restricts to
    depth < n.  Identical decorated trees give exactly 0; ultrametric-style
    bound mu(A,C) <= max(mu(A,B), mu(B,C)) holds.
    """
    fa = forest_decomposition(a)
    fb = forest_decomposition(b)
    if len(fa) == len(fb) and all(
        x.n_vertices == y.n_vertices and canonical_shape(x) == canonical_shape(y)
        for x, y in zip(fa, fb)
    ):
        return 0.0
    # decompositions differ somewhere: the predicate fails at some finite n
    def member(f, k):
        return f[k] if k < len(f) else None

    def restricted_equal(x, y, n):
        if x is None or y is None:
            return x is None and y is None
        return _canonical_loose(restrict(x, n)) == _canonical_loose(restrict(y, n))

    sup = 0
    n = 1
    while True:
        if all(restricted_equal(member(fa, k), member(fb, k), n) for k in range(n)):
            sup = n
            n += 1
        else:
            return 1.0 / (1.0 + sup)


# -- text format -------------------------------------------------------------

_MARK_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def parse_tree(text: str) -> RootedTree:
    """Parse the plain-text tree format; inverse of :func:`serialize_tree`.

    Raises :class:`TreeParseError` with the failing offset on malformed
    input.  Iterative, so arbitrarily deep combs are fine.
    """
    s = text
    pos = 0
    n = len(s)

    def skip_ws(p):
        while p < n and s[p].isspace():
            p += 1
        return p

    children: list[tuple[int, int]] = []
    marks: list[float] = []
    any_marks = False

    def new_node(c0, c1):
        children.append((c0, c1))
        marks.append(np.nan)
        return len(children) - 1

    # frames: list of [first_child_id or None]; completed node ids bubble up
    stack: list[list] = []
    done = None  # completed node id waiting to close into the parent frame
    pos = skip_ws(pos)
    while True:
        if done is None:
            # expect a node start
            if pos >= n:
                raise TreeParseError("unexpected end of input, expected node", pos)
            ch = s[pos]
            if ch == "L":
                pos += 1
                node = new_node(_NO_CHILD, _NO_CHILD)
                pos, done = _maybe_mark(s, pos, node, marks)
                if not np.isnan(marks[node]):
                    any_marks = True
                done = node
            elif ch == "(":
                stack.append([None])
                pos = skip_ws(pos + 1)
                continue
            else:
                raise TreeParseError(f"expected 'L' or '(', found {ch!r}", pos)
        else:
            if not stack:
                break  # root completed
            frame = stack[-1]
            pos = skip_ws(pos)
            if frame[0] is None:
                if pos >= n or s[pos] != ",":
                    raise TreeParseError("expected ','", pos)
                frame[0] = done
                done = None
                pos = skip_ws(pos + 1)
            else:
                if pos >= n or s[pos] != ")":
                    raise TreeParseError("expected ')'", pos)
                pos += 1
                node = new_node(frame.pop(0), done)
                stack.pop()
                pos, _ = _maybe_mark(s, pos, node, marks)
                if not np.isnan(marks[node]):
                    any_marks = True
                done = node
        pos = skip_ws(pos)
    pos = skip_ws(pos)
    if pos != n:
        raise TreeParseError("trailing characters after tree", pos)
    mark_arr = np.array(marks)
    if any_marks:
        if np.any(np.isnan(mark_arr)):
            raise TreeParseError("marks must be given on all vertices or none", len(s))
        return RootedTree(np.array(children, dtype=np.int32), mark_arr)
    return RootedTree(np.array(children, dtype=np.int32))


def _maybe_mark(s, pos, node, marks):
    if pos < len(s) and s[pos] == ":":
        m = _MARK_RE.match(s, pos + 1)
        if not m:
            raise TreeParseError("expected a decimal mark after ':'", pos + 1)
        marks[node] = float(m.group())
        return m.end(), node
    return pos, node


def serialize_tree(tree: RootedTree) -> str:
    """Render a tree in the plain-text format (round-trips via parse_tree)."""
    if tree.is_empty:
        raise DomainError("the empty tree has no text form")
    withmarks = tree.marks is not None
    enc = [None] * tree.n_vertices
    for v in _postorder(tree):
        c0, c1 = tree.children[v]
        body = "L" if c0 < 0 else f"({enc[c0]},{enc[c1]})"
        enc[v] = body + (f":{tree.marks[v]!r}" if withmarks else "")
    return enc[tree.root]
