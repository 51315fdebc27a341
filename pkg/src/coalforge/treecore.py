"""Rooted ordered binary trees with block-labelled leaves.

A tree over n leaves is stored as an index arena: vertex v is a leaf when
left[v] == -1, otherwise left[v] and right[v] are its children.  Every leaf
carries a block of original labels (a sorted tuple); internal vertices carry
none.  A freshly sampled tree has singleton blocks (1,), ..., (n,) and
exactly 2n - 1 vertices.

Sampling grows a uniform labelled ordered tree by leaf insertion: with k
leaves present there are 2k - 1 vertices, each subtending one edge (the root
vertex owns the root edge), and the count identity C_{k+1} = 2 (2k - 1) C_k
says that subdividing a uniform edge and attaching the new leaf on a uniform
side keeps the law uniform at every step.

Codes serialize a tree textually: a leaf block is its labels joined by "+",
an internal vertex is "(left,right)".  The cherry over {1} and {2} under a
root with leaf {3} reads "((1,2),3)".
"""

from __future__ import annotations

import itertools
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "Tree",
    "sample_uniform",
    "enumerate_all",
    "subtree_leaves",
    "prune_at",
    "encode",
    "decode",
]


class Tree:
    """Arena-backed ordered binary tree; see module docstring for layout."""

    __slots__ = ("left", "right", "parent", "bsize", "bmin", "blocks", "root", "n_leaves")

    def __init__(self, left, right, parent, bsize, bmin, blocks, root, n_leaves):
        self.left = left
        self.right = right
        self.parent = parent
        self.bsize = bsize      # total labels under a leaf's block
        self.bmin = bmin        # smallest label in a leaf's block
        self.blocks = blocks    # tuple of labels per leaf, or None in light mode
        self.root = root
        self.n_leaves = n_leaves

    # -- construction ------------------------------------------------------

    @classmethod
    def leaf(cls, block: Sequence[int]) -> "Tree":
        block = tuple(sorted(block))
        if not block:
            raise ValueError("leaf block must be nonempty")
        return cls([-1], [-1], [-1], [len(block)], [block[0]], [block], 0, 1)

    @classmethod
    def join(cls, lt: "Tree", rt: "Tree") -> "Tree":
        """New tree whose root has copies of lt and rt as ordered children."""
        off = 1 + len(lt.left)

        def shift(xs, d):
            return [x if x < 0 else x + d for x in xs]

        left = [lt.root + 1]
        right = [rt.root + off]
        parent = [-1]
        left += shift(lt.left, 1) + shift(rt.left, off)
        right += shift(lt.right, 1) + shift(rt.right, off)
        parent += shift(lt.parent, 1) + shift(rt.parent, off)
        parent[lt.root + 1] = 0
        parent[rt.root + off] = 0
        bsize = [0] + list(lt.bsize) + list(rt.bsize)
        bmin = [0] + list(lt.bmin) + list(rt.bmin)
        blocks = None
        if lt.blocks is not None and rt.blocks is not None:
            blocks = [None] + list(lt.blocks) + list(rt.blocks)
        return cls(left, right, parent, bsize, bmin, blocks, 0, lt.n_leaves + rt.n_leaves)

    def clone(self) -> "Tree":
        return Tree(
            list(self.left), list(self.right), list(self.parent),
            list(self.bsize), list(self.bmin),
            None if self.blocks is None else list(self.blocks),
            self.root, self.n_leaves,
        )

    # -- queries -----------------------------------------------------------

    def is_leaf(self, v: int) -> bool:
        return self.left[v] == -1

    def live_vertices(self) -> list[int]:
        """Vertices reachable from the root (surgery can orphan arena slots)."""
        out = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            if self.left[v] != -1:
                stack.append(self.left[v])
                stack.append(self.right[v])
        return out

    def internal_vertices(self) -> list[int]:
        return [v for v in self.live_vertices() if self.left[v] != -1]

    def leaf_vertices(self) -> list[int]:
        """Leaves in left-to-right order."""
        out = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            if self.left[v] == -1:
                out.append(v)
            else:
                stack.append(self.right[v])
                stack.append(self.left[v])
        return out

    def leaf_blocks(self) -> list[tuple[int, ...]]:
        """The partition carried by the leaves, sorted by smallest label."""
        if self.blocks is None:
            raise ValueError("tree was built without label blocks")
        return sorted((self.blocks[v] for v in self.leaf_vertices()), key=lambda b: b[0])

    def subtree_leaf_vertices(self, v: int) -> list[int]:
        out = []
        stack = [v]
        while stack:
            x = stack.pop()
            if self.left[x] == -1:
                out.append(x)
            else:
                stack.append(self.right[x])
                stack.append(self.left[x])
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return self.n_leaves == other.n_leaves and encode(self) == encode(other)

    def __hash__(self):
        return hash(encode(self))

    def __repr__(self):
        return f"Tree({encode(self)})"


# ---------------------------------------------------------------------------
# sampling and enumeration
# ---------------------------------------------------------------------------


def sample_uniform(n: int, rng: np.random.Generator, with_blocks: bool = True) -> Tree:
    """Uniform ordered binary tree with n leaves labelled 1..n.

    Vertex ids are 0..2n-2.  with_blocks=False skips label tuples and keeps
    only block size and minimum per leaf, which large chains rely on.
    """
    if n < 1:
        raise ValueError(f"sample_uniform requires n >= 1, got {n}")
    nv = 2 * n - 1
    left = [-1] * nv
    right = [-1] * nv
    parent = [-1] * nv
    bsize = [0] * nv
    bmin = [0] * nv
    blocks = [None] * nv if with_blocks else None
    bsize[0] = 1
    bmin[0] = 1
    if with_blocks:
        blocks[0] = (1,)
    root = 0
    if n == 1:
        return Tree(left, right, parent, bsize, bmin, blocks, root, 1)

    picks = rng.random(n - 1)
    sides = rng.integers(0, 2, size=n - 1)
    m = 1
    for k in range(1, n):
        # subdivide the edge above a uniform vertex among the m = 2k-1 present
        v = int(picks[k - 1] * m)
        u = m
        w = m + 1
        m += 2
        p = parent[v]
        if p == -1:
            root = u
        elif left[p] == v:
            left[p] = u
        else:
            right[p] = u
        parent[u] = p
        parent[v] = u
        parent[w] = u
        if sides[k - 1]:
            left[u], right[u] = v, w
        else:
            left[u], right[u] = w, v
        bsize[w] = 1
        bmin[w] = k + 1
        if with_blocks:
            blocks[w] = (k + 1,)
    return Tree(left, right, parent, bsize, bmin, blocks, root, n)


_ENUM_LIMIT = 6


def _nested_over(labels: tuple[int, ...]) -> Iterator:
    if len(labels) == 1:
        yield labels
        return
    for k in range(1, len(labels)):
        for s in itertools.combinations(labels, k):
            rest = tuple(x for x in labels if x not in set(s))
            for lt in _nested_over(s):
                for rt in _nested_over(rest):
                    yield [lt, rt]


def from_nested(obj) -> Tree:
    """Build a Tree from nested structure: leaf = tuple of labels, node = [l, r]."""
    if isinstance(obj, tuple):
        return Tree.leaf(obj)
    lt, rt = obj
    return Tree.join(from_nested(lt), from_nested(rt))


def enumerate_all(n: int) -> list[Tree]:
    """All ordered binary trees with leaves labelled 1..n; length (2n-2)!/(n-1)!.

    Capped at n <= 6 (30240 trees).
    """
    if not 1 <= n <= _ENUM_LIMIT:
        raise ValueError(f"enumerate_all supports 1 <= n <= {_ENUM_LIMIT}, got {n}")
    return [from_nested(obj) for obj in _nested_over(tuple(range(1, n + 1)))]


# ---------------------------------------------------------------------------
# queries and surgery
# ---------------------------------------------------------------------------


def subtree_leaves(tree: Tree, v: int) -> list[tuple[int, ...]]:
    """Blocks of the leaves below internal vertex v, sorted by smallest label."""
    if tree.is_leaf(v):
        raise ValueError(f"vertex {v} is a leaf, not internal")
    if tree.blocks is None:
        raise ValueError("tree was built without label blocks")
    return sorted((tree.blocks[x] for x in tree.subtree_leaf_vertices(v)),
                  key=lambda b: b[0])


def _prune_inplace(tree: Tree, v: int) -> tuple[int, int]:
    """Collapse the subtree at internal v into one merged leaf, in place.

    Returns (number of leaf blocks merged, singletons among them).  Vertices
    of the removed subtree stay in the arena but become unreachable.
    """
    k = 0
    singles = 0
    msize = 0
    mmin = None
    labels = [] if tree.blocks is not None else None
    stack = [tree.left[v], tree.right[v]]
    while stack:
        x = stack.pop()
        if tree.left[x] == -1:
            k += 1
            s = tree.bsize[x]
            msize += s
            if s == 1:
                singles += 1
            if mmin is None or tree.bmin[x] < mmin:
                mmin = tree.bmin[x]
            if labels is not None:
                labels.extend(tree.blocks[x])
        else:
            stack.append(tree.left[x])
            stack.append(tree.right[x])
    tree.left[v] = -1
    tree.right[v] = -1
    tree.bsize[v] = msize
    tree.bmin[v] = mmin
    if labels is not None:
        tree.blocks[v] = tuple(sorted(labels))
    tree.n_leaves -= k - 1
    return k, singles


def prune_at(tree: Tree, v: int) -> Tree:
    """Copy of `tree` with the subtree at internal vertex v collapsed into a
    single leaf whose block is the union of the removed blocks."""
    if tree.is_leaf(v):
        raise ValueError(f"prune_at requires an internal vertex, got leaf {v}")
    out = tree.clone()
    _prune_inplace(out, v)
    return out


def relabel_canonical(tree: Tree) -> Tree:
    """Copy with blocks replaced by rank singletons: blocks sorted by their
    smallest label become (1,), (2,), ...  Used to pool shapes across runs."""
    out = tree.clone()
    leaves = out.leaf_vertices()
    order = sorted(leaves, key=lambda v: out.bmin[v])
    rank = {v: i + 1 for i, v in enumerate(order)}
    out.blocks = [None] * len(out.left) if out.blocks is None else out.blocks
    for v in leaves:
        r = rank[v]
        out.blocks[v] = (r,)
        out.bsize[v] = 1
        out.bmin[v] = r
    return out


# ---------------------------------------------------------------------------
# codes
# ---------------------------------------------------------------------------


def encode(tree: Tree) -> str:
    """Canonical code; distinct trees give distinct codes."""
    if tree.blocks is None:
        raise ValueError("tree was built without label blocks")
    parts = []
    # iterative post-style emit: tokens pushed in reverse visit order
    stack = [("v", tree.root)]
    while stack:
        kind, x = stack.pop()
        if kind == "t":
            parts.append(x)
        elif tree.left[x] == -1:
            parts.append("+".join(str(i) for i in tree.blocks[x]))
        else:
            parts.append("(")
            stack.append(("t", ")"))
            stack.append(("v", tree.right[x]))
            stack.append(("t", ","))
            stack.append(("v", tree.left[x]))
    return "".join(parts)


def decode(code: str) -> Tree:
    """Inverse of encode()."""
    pos = 0

    def parse() -> Tree:
        nonlocal pos
        if pos >= len(code):
            raise ValueError("unexpected end of code")
        if code[pos] == "(":
            pos += 1
            lt = parse()
            if pos >= len(code) or code[pos] != ",":
                raise ValueError(f"expected ',' at position {pos} in {code!r}")
            pos += 1
            rt = parse()
            if pos >= len(code) or code[pos] != ")":
                raise ValueError(f"expected ')' at position {pos} in {code!r}")
            pos += 1
            return Tree.join(lt, rt)
        start = pos
        while pos < len(code) and (code[pos].isdigit() or code[pos] == "+"):
            pos += 1
        if start == pos:
            raise ValueError(f"expected a leaf block at position {pos} in {code!r}")
        return Tree.leaf(tuple(int(t) for t in code[start:pos].split("+")))

    out = parse()
    if pos != len(code):
        raise ValueError(f"trailing characters at position {pos} in {code!r}")
    return out
