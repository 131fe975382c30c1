"""Scalable backend: flow terms acting on individual set-partitions by
forward flow, with merge-closure stabilization standing in for the full
back-flow join, and fixed-point evaluation of the loop operator.

The stabilizer is a sound under-approximation of the true back-flow
closure: every merge it performs is forced by the back-flow of some
monoid word or of a certified loop atom, so every value it produces sits
below the corresponding exact state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lattice import SetPartition, merge_blocks
from .loopable import TypeIOracle, certify_loopable
from .terms import Term, enumerate_loop_atoms


class BackflowSignal(Exception):
    """Raised when a word action collides distinct blocks; carries the
    forced merges.  Not a failure: callers coarsen and replay."""

    def __init__(self, merges):
        self.merges = tuple(sorted(merges))
        super().__init__(f"blocks collide, forced merges: {self.merges}")


class NotLoopableError(ValueError):
    def __init__(self, term):
        self.term = term
        super().__init__(f"loop body not certified at this level: {term}")


MODE_FULL = "full"
MODE_WORDS = "words"


@dataclass
class EvalContext:
    """Everything the symbolic engine needs for one monoid at one level."""

    monoid: object
    cert: object
    level: int
    oracle: TypeIOracle
    max_letters: int = 8
    max_nesting: int = 2
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        M, cert = self.monoid, self.cert
        self.points = cert.distinguished_r
        self.n = len(self.points)
        pos = cert.r_index()
        self._act = [
            tuple(pos.get(M.table[p][m]) for p in self.points)
            for m in range(M.size)
        ]
        self.letter_names = sorted(M.generators)
        self._loopable_cache = {}
        self._lambda_cache = {}
        self._stab_cache = {}
        self.loop_atoms = enumerate_loop_atoms(
            M, self.max_letters, self.max_nesting, certify=self.body_certified
        )
        # merge-closure ingredients: word-bodied certified loop atoms,
        # with the monoid element entering the loop at its omega power
        self.vacuum = []
        for atom in self.loop_atoms:
            body = atom.parts[0]
            if body.nesting() == 0:
                m = M.eval_word(tuple(a.letter for a in body.atoms()))
                e = M.omega_exponent(m)
                m_e = M.prod([m] * e)
                self.vacuum.append((atom, body, m, m_e))
        self.atoms = [Term.of_letter(x) for x in self.letter_names] + list(
            self.loop_atoms
        )

    # -- certification -----------------------------------------------------

    def body_certified(self, body):
        """A loop body is licensed when every monoid element it can take is
        loopable at this level.  Level 0 licenses everything."""
        if self.level == 0:
            return True
        key = body
        if key not in self._loopable_cache:
            ok = all(
                certify_loopable(self.monoid, m, self.level, self.oracle)
                is not None
                for m in sorted(interp_lambda(self, body))
            )
            self._loopable_cache[key] = ok
        return self._loopable_cache[key]

    def bump(self, key, by=1):
        self.stats[key] = self.stats.get(key, 0) + by

    # -- the point action ---------------------------------------------------

    def act_point(self, p, m):
        return self._act[m][p]

    def element_image(self, sp, m):
        """Blockwise image of sp under one monoid element.

        Raises BackflowSignal when two distinct blocks collide; callers on
        stabilized input never see the signal.
        """
        owner = {}
        merges = set()
        blocks = []
        for bi, blk in enumerate(sp.blocks):
            img = set()
            for p in blk:
                q = self._act[m][p]
                if q is None:
                    continue
                img.add(q)
                if q in owner and owner[q] != bi:
                    a, b = sorted((blk[0], sp.blocks[owner[q]][0]))
                    merges.add((a, b))
                owner[q] = bi
            if img:
                blocks.append(tuple(sorted(img)))
        if merges:
            self.bump("backflow_events")
            raise BackflowSignal(merges)
        return SetPartition(sp.n, blocks)


def act_word(ctx, sp, word):
    """Forward action of a word: images of carrier and blocks, dropping
    what leaves the point set.  Signals BACKFLOW on block collisions."""
    ctx.bump("acts")
    m = ctx.monoid.eval_word(tuple(word))
    return ctx.element_image(sp, m)


# -- stabilization ----------------------------------------------------------


def stabilize(ctx, sp, mode=MODE_FULL):
    """Least coarsening of sp (same carrier) surviving every back-flow the
    engine tracks: no two blocks may collide under any monoid element, and
    full mode also forces the domain constraints of certified word-bodied
    loop atoms.  A closure operator on its input.
    """
    key = (sp, mode)
    cached = ctx._stab_cache.get(key)
    if cached is not None:
        return cached
    cur = sp
    while True:
        pairs = _word_merges(ctx, cur)
        if pairs:
            ctx.bump("merges", len(pairs))
            cur = merge_blocks(cur, pairs)
            continue
        if mode == MODE_FULL:
            pairs = _loop_domain_merges(ctx, cur)
            if pairs:
                ctx.bump("merges", len(pairs))
                cur = merge_blocks(cur, pairs)
                continue
        break
    ctx._stab_cache[key] = cur
    if mode == MODE_FULL:
        ctx._stab_cache[(cur, mode)] = cur
    return cur


def _word_merges(ctx, sp):
    if len(sp.blocks) < 2:
        return ()
    bo = sp.block_of()
    out = set()
    for m in range(ctx.monoid.size):
        seen = {}
        tab = ctx._act[m]
        for p in sp.carrier:
            q = tab[p]
            if q is None:
                continue
            if q in seen and bo[seen[q]] != bo[p]:
                out.add(tuple(sorted((seen[q], p))))
            else:
                seen.setdefault(q, p)
    return tuple(sorted(out))


def _loop_domain_merges(ctx, sp):
    """Merges forced by membership in the domain of certified loop atoms.

    For a word body with loop entry element m_e: any two points of sp in
    distinct blocks whose m_e-images meet a common block of the loop's
    fixed point must already share a block.
    """
    if len(sp.blocks) < 2:
        return ()
    bo = sp.block_of()
    for _atom, body, _m, m_e in ctx.vacuum:
        value, _ = _loop_value(ctx, sp, body, MODE_WORDS)
        vbo = value.block_of()
        tab = ctx._act[m_e]
        landing = {}
        out = set()
        for p in sp.carrier:
            q = tab[p]
            if q is None or q not in vbo:
                continue
            vb = vbo[q]
            if vb in landing and bo[landing[vb]] != bo[p]:
                out.add(tuple(sorted((landing[vb], p))))
            else:
                landing.setdefault(vb, p)
        if out:
            return tuple(sorted(out))
    return ()


# -- term evaluation -----------------------------------------------------------


def act_term(ctx, sp, term):
    """Evaluate a term on a stabilized set-partition by forward flow."""
    return _act(ctx, sp, term, MODE_FULL)


def _act(ctx, sp, term, mode):
    cur = stabilize(ctx, sp, mode)
    for atom in term.atoms():
        if atom.kind == "letter":
            cur = _act_element(ctx, cur, ctx.monoid.generators[atom.letter], mode)
        else:
            body = atom.parts[0]
            if not ctx.body_certified(body):
                raise NotLoopableError(atom)
            cur, _ = _loop_value(ctx, cur, body, mode)
    return cur


def _act_element(ctx, sp, m, mode):
    ctx.bump("acts")
    while True:
        try:
            img = ctx.element_image(sp, m)
        except BackflowSignal as sig:
            # a collision on unstabilized input: coarsen the source, replay
            sp = stabilize(ctx, merge_blocks(sp, sig.merges), mode)
            continue
        return stabilize(ctx, img, mode)


def _loop_value(ctx, sp, body, mode):
    """Fixed point of the loop operator at sp: enter at the omega power of
    the body, then join images and merge non-injective block pairs until
    the body maps the value into itself injectively."""
    sp = stabilize(ctx, sp, mode)
    word_body = body.nesting() == 0
    if word_body:
        m = ctx.monoid.eval_word(tuple(a.letter for a in body.atoms()))
        e = ctx.monoid.omega_exponent(m)
        m_e = ctx.monoid.prod([m] * e)
        cur = _act_element(ctx, sp, m_e, mode)
    else:
        m = m_e = None
        seen = {sp: 0}
        orbit = [sp]
        nxt = sp
        while True:
            nxt = _act(ctx, nxt, body, mode)
            if nxt in seen:
                i = seen[nxt]
                p = len(orbit) - i
                e = p * ((max(i, 1) + p - 1) // p)
                cur = orbit[e] if e < len(orbit) else nxt
                break
            seen[nxt] = len(orbit)
            orbit.append(nxt)
    while True:
        ctx.bump("loop_iters")
        if word_body:
            nxt = _act_element(ctx, cur, m, mode)
        else:
            nxt = _act(ctx, cur, body, mode)
        if not nxt.leq(cur):
            cur = stabilize(ctx, cur.join(nxt), mode)
            continue
        if word_body:
            pairs = _non_injective_merges(ctx, cur, m)
            if pairs:
                cur = stabilize(ctx, merge_blocks(cur, pairs), mode)
                continue
        return cur, m_e


def _non_injective_merges(ctx, sp, m):
    """Distinct blocks of sp whose m-images land in a common block of sp
    must merge for (sp, sp) to be stable along m."""
    bo = sp.block_of()
    tab = ctx._act[m]
    landing = {}
    out = set()
    for bi, blk in enumerate(sp.blocks):
        targets = {bo[tab[p]] for p in blk if tab[p] is not None and tab[p] in bo}
        for t in targets:
            if t in landing and landing[t] != bi:
                a, b = sorted((sp.blocks[landing[t]][0], blk[0]))
                out.add((a, b))
            else:
                landing.setdefault(t, bi)
    return tuple(sorted(out))


# -- interpretations and the conjecture probe -----------------------------------


def interp_lambda(ctx, term):
    """Subset of the monoid a term can evaluate to: letters to their
    images, concatenation to setwise product, loops to the omega power of
    the body set times the union of its powers."""
    key = term
    cached = ctx._lambda_cache.get(key)
    if cached is not None:
        return cached
    M = ctx.monoid
    if term.kind == "eps":
        out = frozenset({M.identity})
    elif term.kind == "letter":
        out = frozenset({M.generators[term.letter]})
    elif term.kind == "concat":
        out = frozenset({M.identity})
        for p in term.parts:
            q = interp_lambda(ctx, p)
            out = frozenset(M.mul(a, b) for a in out for b in q)
    else:
        a = interp_lambda(ctx, term.parts[0])
        powers = [frozenset({M.identity})]
        seen = {}
        cur = frozenset({M.identity})
        while True:
            cur = frozenset(M.mul(x, y) for x in cur for y in a)
            if cur in seen:
                i = seen[cur]
                p = len(powers) - i
                e = p * ((max(i, 1) + p - 1) // p)
                a_omega = powers[e] if e < len(powers) else cur
                break
            seen[cur] = len(powers)
            powers.append(cur)
        union = frozenset().union(*powers)
        out = frozenset(M.mul(x, y) for x in a_omega for y in union)
    ctx._lambda_cache[key] = out
    return out


PROBE_EQUAL = "EQUAL"
PROBE_LHS_SUB = "LHS⊂RHS"
PROBE_RHS_SUB = "RHS⊂LHS"
PROBE_INCOMPARABLE = "INCOMPARABLE"


def conjecture_probe(ctx, sp, term):
    """Compare the carrier reached by forward flow with the carrier hit by
    the set-of-elements interpretation.  Reports the outcome; never
    assumes the two agree."""
    sp = stabilize(ctx, sp)
    lhs = frozenset(act_term(ctx, sp, term).carrier)
    rhs = set()
    for m in interp_lambda(ctx, term):
        tab = ctx._act[m]
        for p in sp.carrier:
            q = tab[p]
            if q is not None:
                rhs.add(q)
    rhs = frozenset(rhs)
    if lhs == rhs:
        outcome = PROBE_EQUAL
    elif lhs < rhs:
        outcome = PROBE_LHS_SUB
    elif rhs < lhs:
        outcome = PROBE_RHS_SUB
    else:
        outcome = PROBE_INCOMPARABLE
    return {
        "term": term.format(),
        "carrier_forward": tuple(sorted(lhs)),
        "carrier_elements": tuple(sorted(rhs)),
        "outcome": outcome,
    }
