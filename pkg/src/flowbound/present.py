"""Upper-bound-side certificate checking: complete flows on partial
automata, the no-bad-block condition, products of flows, and the
round-trip between flows and relational-morphism presentations on the
derived automaton.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

from .explicit import LAutomaton, least_flow
from .lattice import SetPartition, sp_flow_stable
from .monoid import PartialAction


class NotAdmissibleError(ValueError):
    def __init__(self, witness, message):
        self.witness = witness
        super().__init__(message)


@dataclass(frozen=True)
class PartialAutomaton:
    """Deterministic partial automaton over the generator alphabet."""

    states: tuple
    alphabet: tuple
    delta: dict  # (state, letter) -> state

    def __post_init__(self):
        for (q, x), q2 in self.delta.items():
            if q not in self.states or q2 not in self.states:
                raise ValueError(f"transition {(q, x, q2)} uses unknown state")
            if x not in self.alphabet:
                raise ValueError(f"transition on unknown letter {x!r}")

    def step(self, q, x):
        return self.delta.get((q, x))

    def letter_map(self, x):
        return tuple(self.delta.get((q, x)) for q in self.states)

    def transition_maps(self):
        """The transition monoid as partial maps on the state tuple."""
        idx = {q: i for i, q in enumerate(self.states)}
        ident = tuple(range(len(self.states)))
        gens = {}
        for x in self.alphabet:
            gens[x] = tuple(
                idx.get(self.delta.get((q, x))) for q in self.states
            )
        maps = {ident}
        frontier = [ident]
        while frontier:
            fresh = []
            for m in frontier:
                for g in gens.values():
                    h = tuple(g[v] if v is not None else None for v in m)
                    if h not in maps:
                        maps.add(h)
                        fresh.append(h)
            frontier = fresh
        return maps

    def is_aperiodic(self):
        """Every element of the transition monoid has trivial cycle group."""
        def comp(m, g):
            return tuple(g[v] if v is not None else None for v in m)

        for m in self.transition_maps():
            seen = {}
            cur = m
            k = 0
            while cur not in seen:
                seen[cur] = k
                cur = comp(cur, m)
                k += 1
            if k - seen[cur] > 1:
                return False
        return True


# -- complete flows -------------------------------------------------------------


@dataclass(frozen=True)
class FlowViolation:
    kind: str  # EDGE_VIOLATION | SINK_VIOLATION | NOT_FULLY_DEFINED
    state: object = None
    letter: str = None
    point: int = None

    def describe(self, point_names=None):
        if self.kind == "NOT_FULLY_DEFINED":
            p = point_names[self.point] if point_names else self.point
            return f"NOT_FULLY_DEFINED({p})"
        return f"{self.kind}({self.state}, {self.letter})"


def verify_complete_flow(aut, labeling, M, cert):
    """None when `labeling` is a complete flow on `aut`, else the first
    violation: edge stability, sink compatibility, and full definedness."""
    act = PartialAction.on_r_class(M, cert)
    n = len(act.points)
    gens = M.generators
    for q in aut.states:
        if labeling[q].n != n:
            raise ValueError(f"label at {q} over wrong point set")
    for q in aut.states:
        a = labeling[q]
        for x in aut.alphabet:
            m = gens[x]
            img = {
                p: act.act(p, m)
                for p in a.carrier
                if act.act(p, m) is not None
            }
            q2 = aut.step(q, x)
            if q2 is None:
                if img:
                    return FlowViolation("SINK_VIOLATION", q, x)
            elif not sp_flow_stable(a, labeling[q2], img):
                return FlowViolation("EDGE_VIOLATION", q, x)
    covered = set()
    for q in aut.states:
        covered.update(labeling[q].carrier)
    for r in range(n):
        if r not in covered:
            return FlowViolation("NOT_FULLY_DEFINED", point=r)
    return None


def check_presentation(aut, labeling, M, cert):
    """None, or the first state label with two distinct H-equivalent
    points of R inside one block."""
    from .exact import h_equivalent_point_pairs

    h_pairs = h_equivalent_point_pairs(M, cert)
    for q in aut.states:
        for blk in labeling[q].blocks:
            for i in range(len(blk)):
                for j in range(i + 1, len(blk)):
                    if (blk[i], blk[j]) in h_pairs:
                        return {
                            "state": q,
                            "block": blk,
                            "r": blk[i],
                            "s": blk[j],
                        }
    return None


def product_flows(flows, M, cert):
    """Componentwise product automaton labelled by the meet of the labels.

    Every input must verify; the output is re-verified rather than trusted
    and a failure is surfaced loudly as a bug.
    """
    for aut, lab in flows:
        bad = verify_complete_flow(aut, lab, M, cert)
        if bad is not None:
            raise ValueError(f"input flow fails verification: {bad.describe()}")
    auts = [aut for aut, _ in flows]
    alphabet = auts[0].alphabet
    if any(a.alphabet != alphabet for a in auts):
        raise ValueError("product needs a common alphabet")
    states = tuple(product(*(a.states for a in auts)))
    delta = {}
    for qs in states:
        for x in alphabet:
            targets = [a.step(q, x) for a, q in zip(auts, qs)]
            if all(t is not None for t in targets):
                delta[(qs, x)] = tuple(targets)
    prod_aut = PartialAutomaton(states, alphabet, delta)
    labeling = {}
    for qs in states:
        lab = flows[0][1][qs[0]]
        for (a, l), q in zip(flows[1:], qs[1:]):
            lab = lab.meet(l[q])
        labeling[qs] = lab
    bad = verify_complete_flow(prod_aut, labeling, M, cert)
    if bad is not None:
        raise RuntimeError(
            f"product of verified flows fails verification: {bad.describe()}"
        )
    return prod_aut, labeling


# -- flows <-> presentations ------------------------------------------------------


@dataclass(frozen=True)
class PresentationData:
    """A parameterized-relational-morphism presentation on the derived
    automaton: state preimages, one covering letter image per letter, and
    the partition on (point, state) pairs."""

    states: tuple
    letter_images: dict   # letter -> {state: state}
    preimages: dict       # state -> tuple of point indices
    partition: tuple      # blocks of (point, state) pairs

    def derived_states(self):
        return tuple(
            (r, q) for q in self.states for r in self.preimages[q]
        )


def flow_to_presentation(aut, labeling, M, cert):
    """Read the presentation off a complete flow: preimages are carriers,
    the partition blocks are the label blocks at each state."""
    bad = verify_complete_flow(aut, labeling, M, cert)
    if bad is not None:
        raise ValueError(f"not a complete flow: {bad.describe()}")
    letter_images = {
        x: {
            q: aut.step(q, x)
            for q in aut.states
            if aut.step(q, x) is not None
        }
        for x in aut.alphabet
    }
    preimages = {q: labeling[q].carrier for q in aut.states}
    blocks = []
    for q in aut.states:
        for blk in labeling[q].blocks:
            blocks.append(tuple((r, q) for r in blk))
    return PresentationData(
        states=aut.states,
        letter_images=letter_images,
        preimages=preimages,
        partition=tuple(blocks),
    )


def presentation_to_flow(data, M, cert):
    """Rebuild the partial automaton and complete flow from a presentation,
    after checking the partition is admissible."""
    act = PartialAction.on_r_class(M, cert)
    n = len(act.points)
    block_of = {}
    for bi, blk in enumerate(data.partition):
        qs = {q for _, q in blk}
        if len(qs) > 1:
            raise NotAdmissibleError(
                blk, f"partition block {blk} relates different states"
            )
        for d in blk:
            block_of[d] = bi
    for q in data.states:
        for r in data.preimages[q]:
            if (r, q) not in block_of:
                raise NotAdmissibleError(
                    (r, q), f"derived state {(r, q)} missing from the partition"
                )

    def derived_step(d, x):
        r, q = d
        q2 = data.letter_images[x].get(q)
        if q2 is None:
            return None
        r2 = act.act(r, M.generators[x])
        if r2 is None or r2 not in data.preimages.get(q2, ()):
            return None
        return (r2, q2)

    # transitions of the derived automaton carry their source state, so
    # congruence and injectivity only compare derived states at one state
    for x in sorted(data.letter_images):
        for q in data.states:
            images = {}
            here = sorted(d for d in block_of if d[1] == q)
            for d in here:
                d2 = derived_step(d, x)
                if d2 is None:
                    continue
                for e in here:
                    if block_of[e] == block_of[d]:
                        e2 = derived_step(e, x)
                        if e2 is not None and block_of[e2] != block_of[d2]:
                            raise NotAdmissibleError(
                                (d, e, x),
                                f"not an automaton congruence: {d} ~ {e} but "
                                f"{d2} !~ {e2} after {x!r}",
                            )
                tgt = block_of[d2]
                src = images.get(tgt)
                if src is not None and src != block_of[d]:
                    raise NotAdmissibleError(
                        (d, x),
                        f"not injective: blocks {src} and {block_of[d]} both "
                        f"reach block {tgt} under {x!r}",
                    )
                images[tgt] = block_of[d]

    alphabet = tuple(sorted(data.letter_images))
    delta = {}
    for x in alphabet:
        for q, q2 in data.letter_images[x].items():
            delta[(q, x)] = q2
    aut = PartialAutomaton(tuple(data.states), alphabet, delta)
    labeling = {}
    for q in data.states:
        blocks = [
            tuple(r for r, _ in blk)
            for blk in data.partition
            if blk and blk[0][1] == q
        ]
        labeling[q] = SetPartition(n, blocks)
    bad = verify_complete_flow(aut, labeling, M, cert)
    if bad is not None:
        raise NotAdmissibleError(
            bad, f"admissible data does not verify as a flow: {bad.describe()}"
        )
    return aut, labeling


# -- small-automata enumeration ---------------------------------------------------


def enumerate_partial_automata(n_states, alphabet, dedup=True):
    """All partial deterministic automata on the given state count, up to
    state renaming when `dedup` is set."""
    states = tuple(range(n_states))
    slots = [(q, x) for q in states for x in sorted(alphabet)]
    choices = [None] + list(states)
    seen = set()
    for assignment in product(choices, repeat=len(slots)):
        delta = {
            slot: tgt for slot, tgt in zip(slots, assignment) if tgt is not None
        }
        if dedup:
            key = min(_relabel_key(delta, states, alphabet, perm)
                      for perm in permutations(states))
            if key in seen:
                continue
            seen.add(key)
        yield PartialAutomaton(states, tuple(sorted(alphabet)), delta)


def _relabel_key(delta, states, alphabet, perm):
    # perm[i] is the original name of new state i
    inv = {orig: i for i, orig in enumerate(perm)}
    out = []
    for i in states:
        for x in sorted(alphabet):
            tgt = delta.get((perm[i], x))
            out.append(-1 if tgt is None else inv[tgt])
    return tuple(out)


def minimal_complete_flows(aut, spctx):
    """The complete flows that matter for inevitability checks.

    Every complete flow dominates the least flow above one of the point
    seedings R -> Q, and domination preserves completeness downward and
    avoidance of any candidate; so checking these suffices.
    """
    lat = spctx.lattice
    laut = LAutomaton(
        states=aut.states,
        edges=tuple(
            (q, aut.step(q, x), spctx.letter_flow(x))
            for q in aut.states
            for x in aut.alphabet
            if aut.step(q, x) is not None
        ),
    )
    n = spctx.n
    flows = {}
    for assignment in product(aut.states, repeat=n):
        seed = {q: lat.bottom for q in aut.states}
        for r, q in enumerate(assignment):
            sp = lat.elements[seed[q]].join(SetPartition.point(n, r))
            seed[q] = lat.index[sp]
        out = least_flow(laut, seed)
        key = tuple(sorted(out.items()))
        if key in flows:
            continue
        if _is_complete(aut, out, spctx):
            flows[key] = out
    return [dict(k) for k in sorted(flows)]


def _is_complete(aut, labels, spctx):
    lat = spctx.lattice
    for q in aut.states:
        sp = lat.elements[labels[q]]
        for x in aut.alphabet:
            if aut.step(q, x) is None:
                m = spctx.monoid.generators[x]
                if any(spctx.act(p, m) is not None for p in sp.carrier):
                    return False
    return True
