"""Type II submonoid computation by weak-conjugation saturation, the
pluggable Type I oracle, and the recursive loopable certifier that
licenses the loop operator at a given level.

Everything here works on an abstract finite monoid given as (elements,
mul, identity), so the same machinery runs on multiplication tables and
on the exact backend's relation monoids.
"""

from __future__ import annotations

from dataclasses import dataclass


class NotASubmonoidError(ValueError):
    pass


ORACLE_TRIVIAL = "trivial"
ORACLE_DECLARED = "declared"


@dataclass(frozen=True)
class TypeIOracle:
    """Source of Type I submonoid candidates.

    The trivial oracle yields only the singleton {identity}, which is Type I
    unconditionally.  A declared oracle passes through user-asserted
    submonoids verbatim; they are tagged as unverified assertions in
    reports.
    """

    kind: str
    declared: tuple = ()

    @staticmethod
    def trivial():
        return TypeIOracle(ORACLE_TRIVIAL)

    @staticmethod
    def declared_subsets(subsets):
        return TypeIOracle(
            ORACLE_DECLARED, tuple(tuple(sorted(s)) for s in subsets)
        )

    def describe(self):
        if self.kind == ORACLE_TRIVIAL:
            return "trivial"
        return f"declared({len(self.declared)} submonoids, UNVERIFIED-ASSERTION)"


@dataclass(frozen=True)
class AbstractMonoid:
    """Finite monoid as an element tuple with a multiplication callable."""

    elements: tuple
    mul: object
    identity: object

    @staticmethod
    def of_table(M, carrier=None):
        elems = tuple(sorted(carrier)) if carrier is not None else tuple(
            range(M.size)
        )
        return AbstractMonoid(elems, lambda a, b: M.table[a][b], M.identity)

    def restricted(self, subset):
        keep = frozenset(subset)
        return AbstractMonoid(
            tuple(e for e in self.elements if e in keep), self.mul, self.identity
        )


def weak_conjugation_pairs(mon):
    """All (a, b) in the monoid with a b a = a."""
    mul = mon.mul
    out = []
    for a in mon.elements:
        for b in mon.elements:
            if mul(mul(a, b), a) == a:
                out.append((a, b))
    return out


def type_ii_submonoid(mon, pairs=None):
    """Least subset containing the identity, closed under products and
    under s -> a s b, s -> b s a for every pair with a b a = a."""
    mul = mon.mul
    if pairs is None:
        pairs = weak_conjugation_pairs(mon)
    known = {mon.identity}
    frontier = [mon.identity]
    while frontier:
        fresh = []

        def push(v):
            if v not in known:
                known.add(v)
                fresh.append(v)

        for s in frontier:
            for t in sorted(known, key=mon.elements.index):
                push(mul(s, t))
                push(mul(t, s))
            for a, b in pairs:
                push(mul(mul(a, s), b))
                push(mul(mul(b, s), a))
        frontier = fresh
    return frozenset(known)


def type_i_candidates(mon, oracle):
    """Candidate Type I submonoids per the oracle.

    The trivial oracle returns just {identity}.  Declared subsets are
    validated (identity present, closed under the table) and restricted to
    the current carrier; out-of-carrier declarations are skipped.
    """
    if oracle.kind == ORACLE_TRIVIAL:
        return [frozenset({mon.identity})]
    carrier = set(mon.elements)
    out = []
    for subset in oracle.declared:
        s = frozenset(subset)
        if not s <= carrier:
            continue
        if mon.identity not in s:
            raise NotASubmonoidError(
                f"declared subset {sorted(subset)} misses the identity"
            )
        for a in s:
            for b in s:
                if mon.mul(a, b) not in s:
                    raise NotASubmonoidError(
                        f"declared subset {sorted(subset)} is not closed"
                    )
        out.append(s)
    return out


@dataclass(frozen=True)
class LoopableCert:
    """Witness chain for an n-loopable element: per level, the Type I
    submonoid used and the Type II image it was traced into."""

    element: object
    level: int
    chain: tuple


def certify_loopable(M, s, n, oracle):
    """Certificate that s is n-loopable in M, or None.

    Level 0 certifies everything.  For n >= 1, s must lie in the Type II
    submonoid of some oracle candidate and be (n-1)-loopable there.
    """
    mon = AbstractMonoid.of_table(M)
    return certify_loopable_abstract(
        mon, s, n, lambda m: type_i_candidates(m, oracle)
    )


def certify_loopable_abstract(mon, s, n, candidates_fn):
    """The recursion over an abstract monoid; `candidates_fn` supplies the
    Type I candidates for any submonoid encountered."""
    if s not in mon.elements:
        raise ValueError(f"{s!r} not in the monoid carrier")
    if n == 0:
        return LoopableCert(s, 0, ())
    for t in candidates_fn(mon):
        sub = mon.restricted(t)
        k = type_ii_submonoid(sub)
        if s not in k:
            continue
        tail = certify_loopable_abstract(mon.restricted(k), s, n - 1, candidates_fn)
        if tail is not None:
            return LoopableCert(s, n, ((t, k),) + tail.chain)
    return None


def loopable_set(M, n, oracle):
    """All n-loopable elements of the table monoid M."""
    return frozenset(
        s for s in range(M.size) if certify_loopable(M, s, n, oracle) is not None
    )
