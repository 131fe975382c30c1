"""Exact backend: elements of the flow monoid as explicit meet-closed
binary relations over a materialized lattice, with composition, join,
back-flow, forward-flow, Kleene star and the omega-star operator, plus
flows on labelled automata and state sampling.

Relations are stored as per-source bitmask rows; the stable-pair set is
exactly the relation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lattice import SetPartition, SpLattice, sp_flow_stable


class LatticeMismatchError(ValueError):
    pass


class SameStateError(ValueError):
    pass


strict_checks = False  # re-verify meet-closedness after compose/join


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class FlowRelation:
    """A meet-closed set of ordered lattice-element pairs.

    rows[i] is the bitmask of j with (i, j) stable.  Always contains
    (top, top); meet-closedness is guaranteed by the constructors and
    re-verified when `strict_checks` is on.
    """

    lattice: object
    rows: tuple

    def __post_init__(self):
        t = self.lattice.top
        if not self.rows[t] >> t & 1:
            raise ValueError("relation misses the (top, top) pair")

    def has(self, i, j):
        return self.rows[i] >> j & 1

    def pairs(self):
        for i, row in enumerate(self.rows):
            for j in _bits(row):
                yield (i, j)

    def pair_count(self):
        return sum(row.bit_count() for row in self.rows)

    def domain_mask(self):
        hit = self.__dict__.get("_dom_mask")
        if hit is not None:
            return hit
        m = 0
        for i, row in enumerate(self.rows):
            if row:
                m |= 1 << i
        object.__setattr__(self, "_dom_mask", m)
        return m

    def fix_mask(self):
        m = 0
        for i, row in enumerate(self.rows):
            if row >> i & 1:
                m |= 1 << i
        return m

    def key(self):
        return self.rows

    def leq(self, other):
        """Closure-operator order: smaller means more stable pairs."""
        _same_lattice(self, other)
        return all(
            sr & orow == orow for sr, orow in zip(self.rows, other.rows)
        )

    def dump_pairs(self, names=None):
        """Diagnostic text listing of the stable pairs."""
        lat = self.lattice
        fmt = (
            (lambda i: lat.elements[i].format(names))
            if isinstance(lat, SpLattice)
            else (lambda i: f"{i:0{lat.n}b}")
        )
        lines = [f"{fmt(i)}  ->  {fmt(j)}" for i, j in self.pairs()]
        return "\n".join(lines)


def _same_lattice(f, g):
    if f.lattice is not g.lattice:
        raise LatticeMismatchError("relations over different lattices")


def _check_meet_closed(rel):
    lat = rel.lattice
    ps = list(rel.pairs())
    for a1, b1 in ps:
        for a2, b2 in ps:
            if not rel.has(lat.meet(a1, a2), lat.meet(b1, b2)):
                raise AssertionError(
                    f"meet-closedness violated at {(a1, b1)} ^ {(a2, b2)}"
                )


def _wrap(lat, rows):
    rel = FlowRelation(lat, tuple(rows))
    if strict_checks:
        _check_meet_closed(rel)
    return rel


# -- constructors --------------------------------------------------------------


def identity_flow(lat):
    """The multiplicative identity: the diagonal relation."""
    return FlowRelation(lat, tuple(1 << i for i in range(lat.size)))


def bottom_flow(lat):
    """The identity closure operator: every pair is stable."""
    full = (1 << lat.size) - 1
    return FlowRelation(lat, tuple(full for _ in range(lat.size)))


def partial_identity(lat, mask):
    """One-variable closure with the given stable set, viewed two-variable."""
    if not mask >> lat.top & 1:
        raise ValueError("stable set must contain the top")
    return FlowRelation(
        lat, tuple((1 << i) if mask >> i & 1 else 0 for i in range(lat.size))
    )


def sp_free_flow(lat, act):
    """Free flow along one generator over a set-partition lattice.

    `act` maps an R-point index to its image point or None.  Stable pairs
    are those (U, P) -> (Y, Q) where U maps into Y and distinct blocks stay
    distinct: for points with images, same P-block iff same Q-block.
    """
    rows = []
    for a in lat.elements:
        img = {p: act[p] for p in a.carrier if act[p] is not None}
        mask = 0
        for j, b in enumerate(lat.elements):
            if sp_flow_stable(a, b, img):
                mask |= 1 << j
        rows.append(mask)
    return _wrap(lat, rows)


def set_free_flow(lat, act):
    """Free flow along a generator on the subset lattice: U x <= Y."""
    rows = []
    for u in range(lat.size):
        img = 0
        for p in _bits(u):
            if act[p] is not None:
                img |= 1 << act[p]
        mask = 0
        for y in range(lat.size):
            if img & y == img:
                mask |= 1 << y
        rows.append(mask)
    return _wrap(lat, rows)


# -- the operator algebra -------------------------------------------------------


def compose(f, g):
    """Relational composition of stable-pair sets."""
    _same_lattice(f, g)
    rows = []
    for row in f.rows:
        acc = 0
        for j in _bits(row):
            acc |= g.rows[j]
        rows.append(acc)
    return _wrap(f.lattice, rows)


def join_flows(fs):
    """Join in the closure-operator lattice: intersect stable sets."""
    if not fs:
        raise ValueError("join of no flows")
    first = fs[0]
    for g in fs[1:]:
        _same_lattice(first, g)
    rows = list(first.rows)
    for g in fs[1:]:
        rows = [r & gr for r, gr in zip(rows, g.rows)]
    return _wrap(first.lattice, rows)


def backflow(f):
    """Partial identity on the domain: what is forced backward by f."""
    return partial_identity(f.lattice, f.domain_mask())


def star(f):
    """Partial identity on the fixed points of f."""
    hit = f.__dict__.get("_star")
    if hit is None:
        hit = partial_identity(f.lattice, f.fix_mask())
        object.__setattr__(f, "_star", hit)
    return hit


def omega_power(f):
    """The idempotent power of f under composition."""
    seen = {f.rows: 1}
    powers = [None, f]
    cur = f
    while True:
        cur = compose(cur, f)
        k = len(powers)
        if cur.rows in seen:
            i = seen[cur.rows]
            p = k - i
            e = p * ((i + p - 1) // p)
            return powers[e]
        seen[cur.rows] = k
        powers.append(cur)


def omega_star(f):
    return compose(omega_power(f), star(f))


def closure_pair(f, i, j):
    """Least stable pair above (element i, element j); memoized per
    relation since flow computations probe the same pairs repeatedly."""
    cache = f.__dict__.get("_closure_cache")
    if cache is None:
        cache = {}
        object.__setattr__(f, "_closure_cache", cache)
    key = (i, j)
    hit = cache.get(key)
    if hit is not None:
        return hit
    lat = f.lattice
    up = lat.up_masks()
    ua, ub = up[i], up[j]
    ca, cb = lat.top, lat.top
    for a in _bits(ua & f.domain_mask()):
        row = f.rows[a] & ub
        if row:
            ca = lat.meet(ca, a)
            for b in _bits(row):
                cb = lat.meet(cb, b)
    cache[key] = (ca, cb)
    return ca, cb


def forward(f, i):
    """Forward flow: second coordinate of the closure of (i, bottom)."""
    return closure_pair(f, i, f.lattice.bottom)[1]


def backflow_at(f, i):
    return closure_pair(f, i, f.lattice.bottom)[0]


# -- automata -------------------------------------------------------------------


@dataclass(frozen=True)
class LAutomaton:
    """Finite directed graph with edges labelled by flow relations."""

    states: tuple
    edges: tuple  # (source, target, FlowRelation)

    def lattice(self):
        return self.edges[0][2].lattice if self.edges else None


def least_flow(aut, seed):
    """Pointwise-least flow above the seed labelling (state -> index)."""
    labels = dict(seed)
    # a self-loop edge constrains its state to the star closure
    edges = []
    for q, q2, rel in aut.edges:
        edges.append((q, q2, rel, star(rel) if q == q2 else None))
    changed = True
    while changed:
        changed = False
        for q, q2, rel, loop_star in edges:
            if loop_star is not None:
                a = forward(loop_star, labels[q])
                if a != labels[q]:
                    labels[q] = a
                    changed = True
                continue
            a, b = closure_pair(rel, labels[q], labels[q2])
            if a != labels[q]:
                labels[q] = a
                changed = True
            if b != labels[q2]:
                labels[q2] = b
                changed = True
    return labels


def sample2(aut, q, q2):
    """Two-state sampling: stable pairs are the (qF, q2F) over all flows."""
    if q == q2:
        raise SameStateError("sampling needs two distinct states")
    lat = aut.lattice()
    rows = [0] * lat.size
    bot = lat.bottom
    for i in range(lat.size):
        for j in range(lat.size):
            seed = {s: bot for s in aut.states}
            seed[q] = i
            seed[q2] = j
            out = least_flow(aut, seed)
            if out[q] == i and out[q2] == j:
                rows[i] |= 1 << j
    return _wrap(lat, rows)


def sample1(aut, q):
    """One-state sampling, as a partial identity on the stable labels."""
    lat = aut.lattice()
    mask = 0
    bot = lat.bottom
    for i in range(lat.size):
        seed = {s: bot for s in aut.states}
        seed[q] = i
        if least_flow(aut, seed)[q] == i:
            mask |= 1 << i
    return partial_identity(lat, mask)


# -- lattice contexts -----------------------------------------------------------


class SpFlowContext:
    """A set-partition lattice materialized for a monoid's distinguished
    R-class, with free flows for every generator and every element."""

    def __init__(self, M, cert, bound=SpLattice.MAX_POINTS):
        self.monoid = M
        self.cert = cert
        self.points = cert.distinguished_r
        self.n = len(self.points)
        self.lattice = SpLattice(self.n, bound)
        pos = cert.r_index()
        self._act = [
            tuple(pos.get(M.table[p][m]) for m in range(M.size))
            for p in self.points
        ]
        self._letter = {}
        self._element_flow = {}

    def act(self, p, m):
        """Point index after p . m, or None when the product leaves R."""
        return self._act[p][m]

    def act_table(self, m):
        return tuple(self._act[p][m] for p in range(self.n))

    def letter_flow(self, x):
        if x not in self._letter:
            m = self.monoid.generators[x]
            self._letter[x] = self.element_flow(m)
        return self._letter[x]

    def element_flow(self, m):
        """Free flow along any monoid element (word flows factor through M)."""
        if m not in self._element_flow:
            self._element_flow[m] = sp_free_flow(self.lattice, self.act_table(m))
        return self._element_flow[m]

    def word_flow(self, word):
        return self.element_flow(self.monoid.eval_word(word))

    def sp_index(self, sp):
        return self.lattice.index[sp]

    def sp_of(self, i):
        return self.lattice.elements[i]

    def point_names(self):
        return tuple(self.monoid.names[p] for p in self.points)
