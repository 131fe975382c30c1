"""Exhaustive oracle built on the explicit backend: the flow monoid
generated from letter flows under products, back-flow and the loop
operator on certified elements; the merge closure as the join of all
back-flows; and the exact state set it induces.

Everything the symbolic engine approximates is recomputed here literally
and compared in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .explicit import (
    FlowRelation,
    backflow,
    compose,
    forward,
    identity_flow,
    omega_star,
    partial_identity,
    SpFlowContext,
)
from .lattice import SetPartition, TooLargeError
from .loopable import (
    AbstractMonoid,
    ORACLE_DECLARED,
    certify_loopable_abstract,
    type_ii_submonoid,
)


DEFAULT_CAP = 60_000


@dataclass
class FlowMonoidData:
    """The saturated flow monoid at one level, with its merge closure."""

    spctx: SpFlowContext
    level: int
    relations: tuple
    stable_mask: int         # lattice elements stable under every back-flow
    closure_rel: FlowRelation  # partial identity on the stable set
    certified: frozenset

    def stabilize_index(self, i):
        """Least back-flow-stable lattice element above element i."""
        lat = self.spctx.lattice
        out = lat.top
        up = lat.up_masks()[i]
        mask = up & self.stable_mask
        while mask:
            low = mask & -mask
            out = lat.meet(out, low.bit_length() - 1)
            mask ^= low
        return out

    def sandwich(self, rel):
        f = self.closure_rel
        return compose(f, compose(rel, f))

    def interpret(self, term):
        """Standard interpretation of a term in the saturated monoid."""
        if term.kind == "eps":
            return self.closure_rel
        if term.kind == "letter":
            return self.sandwich(self.spctx.letter_flow(term.letter))
        if term.kind == "concat":
            out = self.interpret(term.parts[0])
            for p in term.parts[1:]:
                out = compose(out, self.interpret(p))
            return out
        body = self.interpret(term.parts[0])
        if self.level > 0 and body not in self.certified:
            raise ValueError(f"loop body not certified at level {self.level}")
        return omega_star(body)

    def forward_term(self, i, term):
        return forward(self.interpret(term), i)


def saturate_flow_monoid(spctx, level, oracle, cap=DEFAULT_CAP):
    """Smallest set of relations containing the identity and the letter
    flows, closed under products, back-flow, and the loop operator on
    elements certified loopable at the given level."""
    lat = spctx.lattice
    pool = {}
    gens = []

    def add(rel):
        if rel.rows in pool:
            return None
        pool[rel.rows] = rel
        if len(pool) > cap:
            raise TooLargeError(
                f"flow monoid exceeds the cap of {cap} relations"
            )
        return rel

    ident = identity_flow(lat)
    add(ident)
    gens.append(ident)
    for x in sorted(spctx.monoid.generators):
        rel = spctx.letter_flow(x)
        if add(rel) is not None:
            gens.append(rel)

    certified = frozenset()
    while True:
        # product closure: right multiplication by the generator pool
        # reaches every product since the identity is present
        order = list(pool.values())
        i = 0
        while i < len(order):
            f = order[i]
            i += 1
            for g in gens:
                h = compose(f, g)
                if add(h) is not None:
                    order.append(h)
        certified = _certified_relations(spctx, pool, level, oracle)
        fresh = []
        for f in list(pool.values()):
            b = backflow(f)
            if b.rows not in pool:
                fresh.append(b)
            if f in certified:
                o = omega_star(f)
                if o.rows not in pool:
                    fresh.append(o)
        if not fresh:
            break
        for rel in fresh:
            if add(rel) is not None:
                gens.append(rel)

    relations = tuple(pool.values())
    stable = (1 << lat.size) - 1
    for f in relations:
        stable &= f.domain_mask()
    return FlowMonoidData(
        spctx=spctx,
        level=level,
        relations=relations,
        stable_mask=stable,
        closure_rel=partial_identity(lat, stable),
        certified=certified,
    )


def _certified_relations(spctx, pool, level, oracle):
    """Loop licenses: everything at level 0; at higher levels, loopability
    computed inside the relation monoid itself, with declared Type I
    submonoids mapped through their word flows."""
    relations = tuple(pool.values())
    if level == 0:
        return frozenset(relations)
    ident = identity_flow(spctx.lattice)

    def mul(a, b):
        h = compose(a, b)
        return pool.get(h.rows, h)

    mon = AbstractMonoid(relations, mul, pool[ident.rows])

    def candidates(sub):
        carrier = set(sub.elements)
        cands = [frozenset({sub.identity})]
        if oracle.kind == ORACLE_DECLARED:
            for subset in oracle.declared:
                rels = frozenset(spctx.element_flow(m) for m in subset)
                if rels <= carrier:
                    cands.append(rels)
        return cands

    out = set()
    for rel in relations:
        if certify_loopable_abstract(mon, rel, level, candidates) is not None:
            out.add(rel)
    return frozenset(out)


def exact_states(data):
    """The exact state set: points, closed under forward flow by every
    sandwiched relation and under merge-closing anything below a state."""
    lat = data.spctx.lattice
    spctx = data.spctx

    sandwiched = {}
    for f in data.relations:
        s = data.sandwich(f)
        sandwiched[s.rows] = s
    rels = list(sandwiched.values())
    # only maximal relations matter for forward closure; maximal in the
    # closure order means a minimal stable-pair set
    maximal = []
    for f in rels:
        if not any(g is not f and _pairs_subset(f, g) for g in rels):
            maximal.append(f)

    states = set()
    work = []

    def push(i):
        if i not in states:
            states.add(i)
            work.append(i)

    for p in range(spctx.n):
        push(lat.index[SetPartition.point(spctx.n, p)])

    up = lat.up_masks()
    while work:
        i = work.pop()
        for f in maximal:
            push(forward(f, i))
        # order ideal: anything below a state merge-closes into a state
        for x in range(lat.size):
            if x not in states and up[x] >> i & 1:
                push(data.stabilize_index(x))
    return frozenset(states)


def _pairs_subset(g, f):
    """True when g's pairs strictly contain f's (so f > g fails)."""
    ge = True
    strict = False
    for gr, fr in zip(g.rows, f.rows):
        if gr | fr != gr:
            return False
        if gr != fr:
            strict = True
    return strict


def exact_bad_pairs(data, states, h_pairs):
    """H-equivalent distinct point pairs sharing a block of some state."""
    lat = data.spctx.lattice
    out = []
    for i in sorted(states):
        sp = lat.elements[i]
        for blk in sp.blocks:
            for a in range(len(blk)):
                for b in range(a + 1, len(blk)):
                    if (blk[a], blk[b]) in h_pairs:
                        out.append((blk[a], blk[b], i))
    return out


def h_equivalent_point_pairs(M, cert):
    """Ordered pairs of distinct R-point indices that are H-equivalent."""
    green = cert.green
    pos = cert.r_index()
    out = set()
    pts = cert.distinguished_r
    for a in pts:
        for b in green.class_of("h", a):
            if b != a and b in pos:
                i, j = pos[a], pos[b]
                out.add((min(i, j), max(i, j)))
    return frozenset(out)
