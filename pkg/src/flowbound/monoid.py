"""Finite monoids given by multiplication tables, their Green structure,
the group-mapping certificate, the right-letter-mapping image, and Rees
matrix coordinates for the distinguished 0-minimal ideal.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class MonoidError(ValueError):
    pass


class NotGroupMappingError(ValueError):
    """The monoid fails one of the group-mapping conditions."""

    def __init__(self, reason, detail=""):
        self.reason = reason
        super().__init__(f"{reason}" + (f": {detail}" if detail else ""))


class NotRegularError(ValueError):
    pass


GM_NO_GROUP = "no-nontrivial-group"
GM_NO_IDEAL = "no-0-minimal-regular-ideal"
GM_LEFT = "left-unfaithful"
GM_RIGHT = "right-unfaithful"


class FiniteMonoid:
    """An X-generated finite monoid as a size x size multiplication table.

    Elements are dense indices 0..size-1.  The table is validated on
    construction: identity laws, X-generatedness, and associativity (full
    scan for small tables, Light's generator test above that).
    """

    __slots__ = ("size", "table", "identity", "generators", "names")

    FULL_ASSOC_SCAN = 64

    def __init__(self, table, identity, generators, names=None, check=True):
        self.table = tuple(tuple(row) for row in table)
        self.size = len(self.table)
        self.identity = identity
        self.generators = dict(sorted(generators.items()))
        if names is None:
            names = tuple(f"m{i}" for i in range(self.size))
        self.names = tuple(names)
        if check:
            self._validate()

    def _validate(self):
        n = self.size
        if len(self.names) != n:
            raise MonoidError("names length differs from size")
        for i, row in enumerate(self.table):
            if len(row) != n:
                raise MonoidError(f"row {i} has length {len(row)}, want {n}")
            for v in row:
                if not 0 <= v < n:
                    raise MonoidError(f"table entry {v} out of range")
        e = self.identity
        for m in range(n):
            if self.table[e][m] != m or self.table[m][e] != m:
                raise MonoidError(f"identity law fails at element {m}")
        for x, g in self.generators.items():
            if not 0 <= g < n:
                raise MonoidError(f"generator {x!r} index out of range")
        reached = self._closure(set(self.generators.values()) | {e})
        if len(reached) != n:
            missing = sorted(set(range(n)) - reached)
            raise MonoidError(f"not generated by X, unreachable: {missing}")
        if n <= self.FULL_ASSOC_SCAN:
            t = self.table
            for a in range(n):
                for b in range(n):
                    ab = t[a][b]
                    for c in range(n):
                        if t[ab][c] != t[a][t[b][c]]:
                            raise MonoidError(
                                f"not associative at ({a},{b},{c})"
                            )
        else:
            # Light's test: generators in the middle slot suffice once the
            # table is known to be X-generated.
            t = self.table
            for g in set(self.generators.values()):
                for a in range(n):
                    ag = t[a][g]
                    for b in range(n):
                        if t[ag][b] != t[a][t[g][b]]:
                            raise MonoidError(
                                f"not associative at ({a},{g},{b})"
                            )

    def _closure(self, seed):
        gens = sorted(set(self.generators.values()))
        out = set(seed)
        frontier = sorted(out)
        while frontier:
            nxt = []
            for m in frontier:
                for g in gens:
                    p = self.table[m][g]
                    if p not in out:
                        out.add(p)
                        nxt.append(p)
            frontier = nxt
        return out

    # -- basic operations --------------------------------------------------

    def mul(self, a, b):
        return self.table[a][b]

    def prod(self, elems):
        out = self.identity
        for m in elems:
            out = self.table[out][m]
        return out

    def eval_word(self, word):
        """Image of a tuple/list of generator names."""
        out = self.identity
        for x in word:
            out = self.table[out][self.generators[x]]
        return out

    def elements(self):
        return range(self.size)

    def name(self, m):
        return self.names[m]

    def idempotents(self):
        return [m for m in range(self.size) if self.table[m][m] == m]

    def index_period(self, s):
        """(i, p) with s^(i+p) = s^i, i >= 1 minimal, then p minimal."""
        seen = {}
        cur = s
        k = 1
        while cur not in seen:
            seen[cur] = k
            cur = self.table[cur][s]
            k += 1
        i = seen[cur]
        return i, k - i

    def omega_power(self, s):
        """The unique idempotent in the subsemigroup generated by s."""
        i, p = self.index_period(s)
        k = p * ((i + p - 1) // p)
        out = s
        for _ in range(k - 1):
            out = self.table[out][s]
        return out

    def omega_exponent(self, s):
        """Least k >= 1 with s^k idempotent."""
        i, p = self.index_period(s)
        return p * ((i + p - 1) // p)

    def is_aperiodic_element(self, s):
        w = self.omega_power(s)
        return self.table[w][s] == w

    def is_aperiodic(self):
        return all(self.is_aperiodic_element(s) for s in range(self.size))

    def zero(self):
        """The two-sided zero, or None."""
        for z in range(self.size):
            if all(
                self.table[z][m] == z and self.table[m][z] == z
                for m in range(self.size)
            ):
                return z
        return None

    def submonoid_closure(self, subset):
        """Least subset containing `subset` and identity, closed under mul."""
        out = set(subset) | {self.identity}
        frontier = sorted(out)
        while frontier:
            nxt = []
            for a in frontier:
                for b in sorted(out):
                    for p in (self.table[a][b], self.table[b][a]):
                        if p not in out:
                            out.add(p)
                            nxt.append(p)
            frontier = nxt
        return frozenset(out)

    def is_submonoid(self, subset):
        s = set(subset)
        if self.identity not in s:
            return False
        return all(self.table[a][b] in s for a in s for b in s)


# -- Green's relations ------------------------------------------------------


@dataclass(frozen=True)
class GreenClasses:
    """Partitions of the element set into R-, L-, J- and H-classes."""

    r_classes: tuple
    l_classes: tuple
    j_classes: tuple
    h_classes: tuple

    def class_of(self, kind, m):
        for cls in getattr(self, f"{kind}_classes"):
            if m in cls:
                return cls
        raise KeyError(m)

    def h_related(self, a, b):
        return b in self.class_of("h", a)


def right_ideal(M, a):
    """aM as a frozenset (includes a via the identity)."""
    return frozenset(M.table[a][m] for m in range(M.size))


def left_ideal(M, a):
    return frozenset(M.table[m][a] for m in range(M.size))


def two_sided_ideal(M, a):
    return frozenset(
        M.table[M.table[m][a]][n] for m in range(M.size) for n in range(M.size)
    )


def _group_by(ideals):
    buckets = {}
    for m, ideal in enumerate(ideals):
        buckets.setdefault(ideal, []).append(m)
    classes = [tuple(v) for v in buckets.values()]
    classes.sort(key=lambda c: c[0])
    return tuple(classes)


def green_classes(M):
    """R, L, J by ideal comparison; H as the common refinement of R and L."""
    rights = [right_ideal(M, a) for a in range(M.size)]
    lefts = [left_ideal(M, a) for a in range(M.size)]
    twos = [two_sided_ideal(M, a) for a in range(M.size)]
    r_cls = _group_by(rights)
    l_cls = _group_by(lefts)
    j_cls = _group_by(twos)
    h_buckets = {}
    for m in range(M.size):
        h_buckets.setdefault((rights[m], lefts[m]), []).append(m)
    h_cls = tuple(sorted((tuple(v) for v in h_buckets.values()), key=lambda c: c[0]))
    return GreenClasses(r_cls, l_cls, j_cls, h_cls)


# -- group mapping -----------------------------------------------------------


@dataclass(frozen=True)
class GroupMappingCert:
    """Witness data for the group-mapping property.

    `distinguished_r` is the chosen R-class of the ideal, as a sorted tuple;
    the engine's point set.  Witness maps give, for each ordered pair of
    distinct elements, an ideal element separating them on that side.
    """

    ideal: frozenset
    zero: int
    j_class: tuple
    distinguished_r: tuple
    max_subgroup: frozenset
    subgroup_identity: int
    faithful_left_witnesses: dict
    faithful_right_witnesses: dict
    green: GreenClasses = field(repr=False)

    def r_index(self):
        return {m: i for i, m in enumerate(self.distinguished_r)}


def _zero_minimal_regular_ideals(M, green):
    """J-classes J with J u {0} a 0-minimal regular ideal, sorted."""
    z = M.zero()
    if z is None:
        return None, []
    out = []
    for j in green.j_classes:
        if j == (z,):
            continue
        members = set(j) | {z}
        is_ideal = all(
            M.table[a][m] in members and M.table[m][a] in members
            for a in j
            for m in range(M.size)
        )
        if not is_ideal:
            continue
        regular = any(M.table[e][e] == e for e in j)
        if regular:
            out.append(j)
    return z, out


def check_group_mapping(M):
    """Return a GroupMappingCert or raise NotGroupMappingError.

    A monoid passes when it has a (necessarily unique) 0-minimal regular
    ideal containing a nontrivial group, on which it acts faithfully from
    both sides.  Monoids without a zero are rejected: there is then no
    0-minimal ideal distinct from the whole monoid.
    """
    green = green_classes(M)
    if M.is_aperiodic():
        raise NotGroupMappingError(GM_NO_GROUP, "monoid is aperiodic")
    z, candidates = _zero_minimal_regular_ideals(M, green)
    if z is None or not candidates:
        raise NotGroupMappingError(
            GM_NO_IDEAL,
            "no zero" if z is None else "no 0-minimal regular ideal",
        )
    with_group = []
    for j in candidates:
        idems = [e for e in j if M.table[e][e] == e]
        has_group = any(len(green.class_of("h", e)) > 1 for e in idems)
        if has_group:
            with_group.append(j)
    if not with_group:
        raise NotGroupMappingError(
            GM_NO_GROUP, "no 0-minimal regular ideal contains a nontrivial group"
        )

    failure = None
    for j in with_group:
        ideal = frozenset(j) | {z}
        ordered = sorted(ideal)
        left_w, right_w = {}, {}
        ok = True
        for a in range(M.size):
            for b in range(a + 1, M.size):
                li = next((i for i in ordered if M.table[a][i] != M.table[b][i]), None)
                if li is None:
                    failure = failure or (GM_LEFT, (a, b))
                    ok = False
                    break
                left_w[(a, b)] = li
                ri = next((i for i in ordered if M.table[i][a] != M.table[i][b]), None)
                if ri is None:
                    failure = failure or (GM_RIGHT, (a, b))
                    ok = False
                    break
                right_w[(a, b)] = ri
            if not ok:
                break
        if not ok:
            continue
        # distinguished R-class: the one containing the least element whose
        # H-class is nontrivial (a fixed rule keeps runs reproducible)
        anchor = next(
            m for m in sorted(j) if len(green.class_of("h", m)) > 1
        )
        r_class = tuple(sorted(set(green.class_of("r", anchor)) & set(j)))
        e = next(
            e
            for e in sorted(j)
            if M.table[e][e] == e and len(green.class_of("h", e)) > 1
        )
        subgroup = frozenset(green.class_of("h", e))
        return GroupMappingCert(
            ideal=ideal,
            zero=z,
            j_class=tuple(sorted(j)),
            distinguished_r=r_class,
            max_subgroup=subgroup,
            subgroup_identity=e,
            faithful_left_witnesses=left_w,
            faithful_right_witnesses=right_w,
            green=green,
        )
    reason, pair = failure
    raise NotGroupMappingError(
        reason, f"elements {pair[0]} and {pair[1]} act identically"
    )


class PartialAction:
    """A faithful-by-construction partial right action on a point tuple."""

    __slots__ = ("points", "_table", "_monoid_size")

    def __init__(self, points, table, monoid_size):
        self.points = tuple(points)
        self._table = table
        self._monoid_size = monoid_size

    @staticmethod
    def on_r_class(M, cert):
        pts = cert.distinguished_r
        pos = {m: i for i, m in enumerate(pts)}
        table = [
            tuple(pos.get(M.table[p][m]) for m in range(M.size)) for p in pts
        ]
        return PartialAction(pts, table, M.size)

    def act(self, point_index, m):
        """Point index after acting by monoid element m, or None."""
        return self._table[point_index][m]

    def act_word_table(self, ms):
        idx = range(len(self.points))
        cur = {i: i for i in idx}
        for m in ms:
            cur = {
                i: (self._table[j][m] if j is not None else None)
                for i, j in cur.items()
            }
        return cur


def rlm(M, cert):
    """Right-letter-mapping image: the action on the L-classes of the
    distinguished ideal's nonzero part, and the faithful quotient monoid.
    """
    green = cert.green
    j = set(cert.j_class)
    l_classes = sorted(
        (tuple(sorted(set(c) & j)) for c in green.l_classes if set(c) & j),
    )
    l_of = {}
    for i, cls in enumerate(l_classes):
        for m in cls:
            l_of[m] = i
    table = []
    for cls in l_classes:
        rep = cls[0]
        row = []
        for m in range(M.size):
            img = M.table[rep][m]
            row.append(l_of.get(img))
        table.append(tuple(row))
    action = PartialAction(tuple(range(len(l_classes))), table, M.size)

    # quotient by the kernel of the action
    sig = {}
    for m in range(M.size):
        sig.setdefault(tuple(row[m] for row in table), []).append(m)
    classes = sorted(sig.values(), key=lambda c: c[0])
    rep_of_class = [c[0] for c in classes]
    class_of = {}
    for ci, c in enumerate(classes):
        for m in c:
            class_of[m] = ci
    q_table = [
        [class_of[M.table[rep_of_class[a]][rep_of_class[b]]] for b in range(len(classes))]
        for a in range(len(classes))
    ]
    q_gens = {x: class_of[g] for x, g in M.generators.items()}
    q_names = tuple(f"[{M.names[rep_of_class[i]]}]" for i in range(len(classes)))
    quotient = FiniteMonoid(q_table, class_of[M.identity], q_gens, q_names)
    return action, quotient


# -- Rees coordinates ---------------------------------------------------------


@dataclass(frozen=True)
class ReesCoordinates:
    """Coordinates (row, group element, column) for the nonzero ideal part.

    `sandwich[b][a]` is a group index or None (zero entry).  `embed` maps a
    triple to the monoid element it represents; `coords` is its inverse.
    """

    group: FiniteMonoid
    group_elements: tuple
    rows: tuple
    cols: tuple
    sandwich: tuple
    embed: dict
    coords: dict

    def multiply(self, t1, t2):
        """Rees multiplication on triples; None encodes the zero."""
        a, g, b = t1
        a2, g2, b2 = t2
        c = self.sandwich[b][a2]
        if c is None:
            return None
        gg = self.group.mul(self.group.mul(g, c), g2)
        return (a, gg, b2)


def rees_coordinatize(M, cert):
    """Coordinatize the nonzero part of the distinguished ideal.

    The first row and first column of the sandwich matrix are normalized to
    the group identity wherever nonzero, so fixtures compare canonically.
    """
    green = cert.green
    j = sorted(cert.j_class)
    jset = set(j)
    r_classes = sorted(tuple(sorted(set(c) & jset)) for c in green.r_classes if set(c) & jset)
    l_classes = sorted(tuple(sorted(set(c) & jset)) for c in green.l_classes if set(c) & jset)
    e = cert.subgroup_identity
    G = sorted(cert.max_subgroup)
    g_index = {g: i for i, g in enumerate(G)}

    r_of = {m: i for i, cls in enumerate(r_classes) for m in cls}
    l_of = {m: i for i, cls in enumerate(l_classes) for m in cls}
    a0, b0 = r_of[e], l_of[e]

    # representatives: row a meets the L-class of e, column b meets the
    # R-class of e; the element e represents both its row and column
    row_rep = {}
    for a, cls in enumerate(r_classes):
        row_rep[a] = e if a == a0 else next(m for m in cls if l_of[m] == b0)
    col_rep = {}
    for b, cls in enumerate(l_classes):
        col_rep[b] = e if b == b0 else next(m for m in cls if r_of[m] == a0)

    def sandwich_entry(b, a):
        v = M.table[col_rep[b]][row_rep[a]]
        return g_index[v] if v in g_index else None

    # normalize: scale row reps so row b0 of the sandwich is the identity,
    # then column reps so column a0 is, where entries are nonzero
    g_inv = {}
    for g in G:
        g_inv[g] = next(h for h in G if M.table[g][h] == e)
    e_gi = g_index[e]
    for a in range(len(r_classes)):
        c = sandwich_entry(b0, a)
        if c is not None and c != e_gi:
            row_rep[a] = M.table[row_rep[a]][g_inv[G[c]]]
    for b in range(len(l_classes)):
        c = sandwich_entry(b, a0)
        if c is not None and c != e_gi:
            col_rep[b] = M.table[g_inv[G[c]]][col_rep[b]]

    n_rows, n_cols = len(r_classes), len(l_classes)
    sandwich = tuple(
        tuple(sandwich_entry(b, a) for a in range(n_rows)) for b in range(n_cols)
    )
    for b in range(n_cols):
        if all(v is None for v in sandwich[b]):
            raise NotRegularError(f"column {b} of the sandwich matrix is zero")
    for a in range(n_rows):
        if all(sandwich[b][a] is None for b in range(n_cols)):
            raise NotRegularError(f"row {a} of the sandwich matrix is zero")

    embed = {}
    for a in range(n_rows):
        for gi, g in enumerate(G):
            for b in range(n_cols):
                m = M.table[M.table[row_rep[a]][g]][col_rep[b]]
                embed[(a, gi, b)] = m
    if len(set(embed.values())) != len(jset):
        raise NotRegularError("coordinate map is not a bijection onto the ideal")
    coords = {m: t for t, m in embed.items()}

    sub_table = [[g_index[M.table[a][b]] for b in G] for a in G]
    group = FiniteMonoid(
        sub_table,
        g_index[e],
        {M.names[g]: g_index[g] for g in G if g != e} or {M.names[e]: g_index[e]},
        tuple(M.names[g] for g in G),
    )
    return ReesCoordinates(
        group=group,
        group_elements=tuple(G),
        rows=tuple(range(n_rows)),
        cols=tuple(range(n_cols)),
        sandwich=sandwich,
        embed=embed,
        coords=coords,
    )


# -- constructors -------------------------------------------------------------


def from_rees(group_table, group_identity, n_rows, n_cols, sandwich, names=None,
              generator_triples=None):
    """Build the monoid M0(G, A, B, C) with adjoined identity.

    `sandwich[b][a]` gives a group index or None for a zero entry.  Element
    order: identity, then triples (a, g, b) lexicographically, then zero.
    Generators default to all nonzero triples plus the zero.
    """
    gsize = len(group_table)
    triples = [
        (a, g, b) for a in range(n_rows) for g in range(gsize) for b in range(n_cols)
    ]
    idx = {t: i + 1 for i, t in enumerate(triples)}
    size = len(triples) + 2
    zero = size - 1
    table = [[0] * size for _ in range(size)]
    for i in range(size):
        table[0][i] = i
        table[i][0] = i
        table[zero][i] = zero
        table[i][zero] = zero
    for t1 in triples:
        for t2 in triples:
            a, g, b = t1
            a2, g2, b2 = t2
            c = sandwich[b][a2]
            if c is None:
                table[idx[t1]][idx[t2]] = zero
            else:
                gg = group_table[group_table[g][c]][g2]
                table[idx[t1]][idx[t2]] = idx[(a, gg, b2)]
    if names is None:
        gnames = [f"g{i}" for i in range(gsize)]
        gnames[group_identity] = "e"
        names = (
            ["I"]
            + [f"a{a}.{gnames[g]}.b{b}" for (a, g, b) in triples]
            + ["0"]
        )
    if generator_triples is None:
        gens = {names[idx[t]]: idx[t] for t in triples}
    else:
        gens = {names[idx[t]]: idx[t] for t in generator_triples}
    gens[names[zero]] = zero
    return FiniteMonoid(table, 0, gens, names)
