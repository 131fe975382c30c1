"""Set-partition lattice over a distinguished point set, plus the plain
subset lattice on the same points.

Elements of the set-partition lattice are pairs (carrier, partition of the
carrier).  Order is "carrier contained and blocks refine"; meet intersects
blockwise, join is the equivalence generated by both block structures.
"""

from __future__ import annotations

from array import array
from itertools import combinations


class RMismatchError(ValueError):
    """Operands live over point sets of different sizes."""


class TooLargeError(ValueError):
    """Requested materialization exceeds the configured bound."""


BOTTOM_TEXT = "⊥"  # printed form of the empty set-partition


class SetPartition:
    """A subset of the n points together with a partition of that subset.

    Canonical form: blocks are sorted tuples ordered by least element, the
    carrier is their sorted union.  Structural equality is semantic equality.
    """

    __slots__ = ("n", "blocks", "carrier", "_hash")

    def __init__(self, n, blocks):
        norm = []
        seen = set()
        for blk in blocks:
            b = tuple(sorted(blk))
            if not b:
                continue
            for p in b:
                if not 0 <= p < n:
                    raise ValueError(f"point {p} outside 0..{n - 1}")
                if p in seen:
                    raise ValueError(f"point {p} in two blocks")
                seen.add(p)
            norm.append(b)
        norm.sort(key=lambda b: b[0])
        self.n = n
        self.blocks = tuple(norm)
        self.carrier = tuple(sorted(seen))
        self._hash = hash((n, self.blocks))

    # -- constructors -------------------------------------------------

    @staticmethod
    def bottom(n):
        return SetPartition(n, ())

    @staticmethod
    def top(n):
        return SetPartition(n, (tuple(range(n)),))

    @staticmethod
    def point(n, r):
        return SetPartition(n, ((r,),))

    @staticmethod
    def discrete(n, points):
        return SetPartition(n, tuple((p,) for p in points))

    @staticmethod
    def one_block(n, points):
        pts = tuple(sorted(points))
        return SetPartition(n, (pts,) if pts else ())

    # -- basic protocol ------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, SetPartition)
            and self.n == other.n
            and self.blocks == other.blocks
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"SetPartition({self.n}, {self.blocks})"

    def key(self):
        """Deterministic sort key: (carrier size, blocks)."""
        return (len(self.carrier), self.blocks)

    def is_bottom(self):
        return not self.blocks

    def block_of(self):
        """Map point -> index of its block."""
        out = {}
        for i, blk in enumerate(self.blocks):
            for p in blk:
                out[p] = i
        return out

    def same_block(self, r, s):
        bo = self.block_of()
        return r in bo and s in bo and bo[r] == bo[s]

    # -- lattice operations ---------------------------------------------

    def _check(self, other):
        if self.n != other.n:
            raise RMismatchError(f"point sets differ: {self.n} vs {other.n}")

    def leq(self, other):
        """True iff carrier is contained and every block lands in one block."""
        self._check(other)
        bo = other.block_of()
        for blk in self.blocks:
            if blk[0] not in bo:
                return False
            target = bo[blk[0]]
            for p in blk[1:]:
                if bo.get(p) != target:
                    return False
        return True

    def meet(self, other):
        self._check(other)
        blocks = []
        for a in self.blocks:
            sa = set(a)
            for b in other.blocks:
                inter = sa.intersection(b)
                if inter:
                    blocks.append(tuple(sorted(inter)))
        return SetPartition(self.n, blocks)

    def join(self, other):
        """Union of carriers with the equivalence generated by both."""
        self._check(other)
        parent = {}

        def find(x):
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        def union(x, y):
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[ry] = rx

        for blk in self.blocks + other.blocks:
            for p in blk:
                parent.setdefault(p, p)
            for p in blk[1:]:
                union(blk[0], p)
        groups = {}
        for p in parent:
            groups.setdefault(find(p), []).append(p)
        return SetPartition(self.n, tuple(tuple(sorted(g)) for g in groups.values()))

    # -- text form -------------------------------------------------------

    def format(self, point_names=None):
        """`{a c | b} over {a,b,c}`; the bottom prints as the bottom glyph."""
        if self.is_bottom():
            return BOTTOM_TEXT
        name = (lambda p: point_names[p]) if point_names else (lambda p: f"r{p}")
        inner = " | ".join(" ".join(name(p) for p in blk) for blk in self.blocks)
        over = ",".join(name(p) for p in self.carrier)
        return f"{{{inner}}} over {{{over}}}"


def sp_flow_stable(a, b, img):
    """Stability of (a, b) for free flow along a map given as point->image.

    Requires the carrier image inside b's carrier and the induced block map
    injective and well defined: points with images share an a-block exactly
    when the images share a b-block.
    """
    bo_b = b.block_of()
    for q in img.values():
        if q not in bo_b:
            return False
    bo_a = a.block_of()
    pts = sorted(img)
    for i, p in enumerate(pts):
        for r in pts[i + 1 :]:
            if (bo_a[p] == bo_a[r]) != (bo_b[img[p]] == bo_b[img[r]]):
                return False
    return True


def merge_blocks(sp, pairs):
    """Least coarsening of `sp` (same carrier) putting each pair together."""
    pair_blocks = [(r, s) for r, s in pairs]
    if not pair_blocks:
        return sp
    helper = SetPartition(sp.n, tuple({r, s} for r, s in pair_blocks))
    return sp.join(helper)


def parse_set_partition(text, n, point_names=None):
    """Inverse of SetPartition.format."""
    text = text.strip()
    if text == BOTTOM_TEXT or text.lower() == "bottom":
        return SetPartition.bottom(n)
    lookup = {}
    if point_names:
        lookup = {nm: i for i, nm in enumerate(point_names)}
    else:
        lookup = {f"r{i}": i for i in range(n)}
    if "over" in text:
        text = text[: text.index("over")].strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"malformed set-partition text: {text!r}")
    body = text[1:-1].strip()
    blocks = []
    if body:
        for part in body.split("|"):
            pts = part.split()
            try:
                blocks.append(tuple(lookup[p] for p in pts))
            except KeyError as exc:
                raise ValueError(f"unknown point name {exc.args[0]!r}") from None
    return SetPartition(n, blocks)


def set_partitions_of(points):
    """All partitions of the given point tuple, canonical order."""
    points = tuple(points)
    if not points:
        yield ()
        return
    first, rest = points[0], points[1:]
    for sub in set_partitions_of(rest):
        yield ((first,),) + sub
        for i, blk in enumerate(sub):
            yield sub[:i] + (tuple(sorted((first,) + blk)),) + sub[i + 1 :]


def bell(n):
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


class SpLattice:
    """Materialized set-partition lattice over n points.

    Holds every (carrier, partition) element exactly once in canonical
    order; size is Bell(n+1).  Provides indexed meet and the order masks
    used by the relation machinery.
    """

    MAX_POINTS = 6

    def __init__(self, n, bound=MAX_POINTS):
        if n > bound:
            raise TooLargeError(
                f"|R| = {n} exceeds the explicit-backend bound {bound}"
            )
        self.n = n
        elems = []
        pts = tuple(range(n))
        for k in range(n + 1):
            for carrier in combinations(pts, k):
                for blocks in set_partitions_of(carrier):
                    elems.append(SetPartition(n, blocks))
        elems.sort(key=SetPartition.key)
        self.elements = tuple(elems)
        self.index = {sp: i for i, sp in enumerate(elems)}
        self.size = len(elems)
        self.bottom = 0
        self.top = self.index[SetPartition.top(n)]
        self._meet = None
        self._up = None

    def meet_table(self):
        if self._meet is None:
            k = self.size
            rows = []
            for i in range(k):
                row = array("i", (0 for _ in range(k)))
                ei = self.elements[i]
                for j in range(k):
                    row[j] = self.index[ei.meet(self.elements[j])]
                rows.append(row)
            self._meet = rows
        return self._meet

    def meet(self, i, j):
        return self.meet_table()[i][j]

    def leq(self, i, j):
        """i <= j in the lattice order."""
        return self.meet_table()[i][j] == i

    def up_masks(self):
        """up[i] = bitmask of indices j with element_j >= element_i."""
        if self._up is None:
            k = self.size
            mt = self.meet_table()
            masks = []
            for i in range(k):
                m = 0
                row = mt[i]
                for j in range(k):
                    if row[j] == i:
                        m |= 1 << j
                masks.append(m)
            self._up = masks
        return self._up


class SetLattice:
    """The powerset lattice on n points; element i is its own bitmask."""

    def __init__(self, n):
        self.n = n
        self.size = 1 << n
        self.bottom = 0
        self.top = self.size - 1
        self.elements = tuple(range(self.size))

    def meet(self, i, j):
        return i & j

    def leq(self, i, j):
        return i & j == i

    def up_masks(self):
        masks = []
        for i in range(self.size):
            m = 0
            for j in range(self.size):
                if i & j == i:
                    m |= 1 << j
            masks.append(m)
        return masks
