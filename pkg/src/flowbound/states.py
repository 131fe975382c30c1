"""State generation and the lower-bound verdict: close the points under
forward flow by budgeted terms and the pair rule, look for distinct
H-equivalent points trapped in one block, and certify the resulting
complexity bound with replayable traces.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import __version__
from .exact import (
    exact_bad_pairs,
    exact_states,
    h_equivalent_point_pairs,
    saturate_flow_monoid,
)
from .explicit import SpFlowContext
from .lattice import SetPartition, SpLattice
from .loopable import TypeIOracle
from .monoid import check_group_mapping
from .symbolic import EvalContext, act_term, stabilize
from .terms import parse_term

TIER_EXACT = "EXACT-explicit"
TIER_UNDER = "UNDER-APPROX-symbolic"

STEP_POINT = "POINT"
STEP_FORWARD = "FORWARD"
STEP_ORDER_IDEAL = "ORDER_IDEAL"
STEP_COARSEN = "BACKFLOW_COARSEN"


@dataclass(frozen=True)
class StateTrace:
    """A generated state with the steps that produced it; replaying the
    steps from their point seed reproduces the state exactly."""

    state: SetPartition
    steps: tuple
    level: int

    def describe(self, point_names=None):
        return {
            "state": self.state.format(point_names),
            "steps": [list(s) for s in self.steps],
            "level": self.level,
        }


def replay_trace(ctx, steps):
    """Re-run a trace's steps; the result must equal the stored state."""
    cur = None
    for step in steps:
        kind = step[0]
        if kind == STEP_POINT:
            cur = stabilize(ctx, SetPartition.point(ctx.n, step[1]))
        elif kind == STEP_FORWARD:
            term = parse_term(step[1], ctx.monoid.generators)
            cur = act_term(ctx, cur, term)
        elif kind == STEP_ORDER_IDEAL:
            r, s = step[2]
            cur = stabilize(ctx, SetPartition.one_block(ctx.n, (r, s)))
        elif kind == STEP_COARSEN:
            cur = stabilize(ctx, cur)
        else:
            raise ValueError(f"unknown step kind {kind!r}")
    return cur


@dataclass(frozen=True)
class BadPair:
    r: int
    s: int
    level: int
    trace: StateTrace

    def describe(self, point_names, h_class=None):
        out = {
            "r": point_names[self.r],
            "s": point_names[self.s],
            "level": self.level,
            "trace": self.trace.describe(point_names),
        }
        if h_class is not None:
            out["h_class"] = list(h_class)
        return out


class BudgetExhausted(Exception):
    pass


def generate_states(ctx, state_budget=5000, exhaustive=True, h_pairs=None):
    """Worklist closure of the points under every budgeted action atom and
    the two-point order-ideal rule.

    Returns (traces, bad_pairs, exhausted_flag).  With `exhaustive` off the
    search stops at the first bad pair; the partial result is still sound.
    """
    if state_budget <= 0:
        raise ValueError("state budget must be positive")
    h_pairs = h_pairs or frozenset()
    pool = {}
    bad = []
    heap = []
    counter = 0

    bad_seen = set()

    def found_bad(trace):
        bo = trace.state.block_of()
        for r, s in sorted(h_pairs):
            if (r, s) in bad_seen:
                continue
            if bo.get(r) is not None and bo.get(r) == bo.get(s):
                bad_seen.add((r, s))
                bad.append(BadPair(r, s, ctx.level, trace))

    def push(sp, steps):
        nonlocal counter
        if sp in pool:
            return
        trace = StateTrace(sp, tuple(steps), ctx.level)
        pool[sp] = trace
        found_bad(trace)
        counter += 1
        heapq.heappush(heap, (len(sp.carrier), sp.blocks, counter, sp))

    for r in range(ctx.n):
        sp = stabilize(ctx, SetPartition.point(ctx.n, r))
        push(sp, ((STEP_POINT, r),))

    exhausted = False
    while heap:
        if bad and not exhaustive:
            break
        if len(pool) >= state_budget:
            exhausted = True
            break
        _, _, _, sp = heapq.heappop(heap)
        trace = pool[sp]
        for atom in ctx.atoms:
            nxt = act_term(ctx, sp, atom)
            push(nxt, trace.steps + ((STEP_FORWARD, atom.format()),))
        # order ideal, down to two-point one-block states
        for blk in sp.blocks:
            for i in range(len(blk)):
                for j in range(i + 1, len(blk)):
                    pair = stabilize(
                        ctx, SetPartition.one_block(ctx.n, (blk[i], blk[j]))
                    )
                    push(
                        pair,
                        trace.steps
                        + ((STEP_ORDER_IDEAL, sp.format(), (blk[i], blk[j])),),
                    )
    return pool, bad, exhausted


def bad_pairs(pool, h_pairs, level):
    """All H-equivalent distinct pairs inside one block of some state."""
    out = []
    for sp in sorted(pool, key=SetPartition.key):
        bo = sp.block_of()
        for r, s in sorted(h_pairs):
            if bo.get(r) is not None and bo.get(r) == bo.get(s):
                out.append(BadPair(r, s, level, pool[sp]))
    return out


def pointlike_candidates(pool_states, min_size=2):
    """Every block subset of size >= min_size, deduplicated and sorted;
    each is a certified pointlike candidate for the level it came from."""
    seen = set()
    for sp in pool_states:
        for blk in sp.blocks:
            n = len(blk)
            if n < min_size:
                continue
            for mask in range(1, 1 << n):
                sub = tuple(blk[i] for i in range(n) if mask >> i & 1)
                if len(sub) >= min_size:
                    seen.add(sub)
    return sorted(seen, key=lambda s: (len(s), s))


# -- the full pipeline ---------------------------------------------------------


@dataclass
class LevelResult:
    level: int
    backend: str
    tier: str
    state_count: int
    bad: list
    partial: bool = False
    atom_count: int = 0
    states_text: list = field(default_factory=list)
    pointlikes: list = field(default_factory=list)


@dataclass
class LowerBoundReport:
    monoid_path: str
    monoid_size: int
    generator_names: list
    point_names: list
    config: dict
    group_mapping_ok: bool
    gm_reason: str
    levels: list
    bound: int
    tier: str
    budgets: dict
    conjecture_probes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "tool": {"name": "flowbound", "version": __version__},
            "input": {
                "path": self.monoid_path,
                "size": self.monoid_size,
                "generators": self.generator_names,
            },
            "config": self.config,
            "group_mapping": {
                "ok": self.group_mapping_ok,
                "reason": self.gm_reason,
                "distinguished_r": self.point_names,
            },
            "levels": [
                {
                    "level": lv.level,
                    "backend": lv.backend,
                    "tier": lv.tier,
                    "states": lv.state_count,
                    "atoms": lv.atom_count,
                    "bad_pairs": lv.bad,
                    "partial": lv.partial,
                    "pointlike_candidates": lv.pointlikes,
                }
                for lv in self.levels
            ],
            "bad_pairs": [
                bp for lv in self.levels for bp in lv.bad
            ],
            "pointlike_candidates": self._pointlikes_by_level(),
            "bound": self.bound,
            "tier": self.tier,
            "budgets": self.budgets,
            "conjecture_probes": self.conjecture_probes,
        }

    def _pointlikes_by_level(self):
        # prefer the explicit backend's exact candidates where available
        out = {}
        for lv in self.levels:
            key = str(lv.level)
            if key not in out or lv.backend == "explicit":
                out[key] = lv.pointlikes
        return out


def lower_bound(
    M,
    max_level=0,
    oracle=None,
    backend="symbolic",
    max_letters=8,
    max_nesting=2,
    state_budget=5000,
    exhaustive=True,
    monoid_path="<memory>",
    explicit_bound=SpLattice.MAX_POINTS,
):
    """Run the pipeline for levels 0..max_level and assemble the report.

    Raises NotGroupMappingError when the input is not group mapping; the
    CLI turns that into its diagnostic path.
    """
    oracle = oracle or TypeIOracle.trivial()
    cert = check_group_mapping(M)
    h_pairs = h_equivalent_point_pairs(M, cert)
    point_names = [M.names[p] for p in cert.distinguished_r]
    levels = []
    exhausted_any = False
    spctx = None

    for level in range(max_level + 1):
        if backend in ("symbolic", "both"):
            ctx = EvalContext(
                M, cert, level, oracle,
                max_letters=max_letters, max_nesting=max_nesting,
            )
            pool, bad, exhausted = generate_states(
                ctx, state_budget=state_budget,
                exhaustive=exhaustive, h_pairs=h_pairs,
            )
            exhausted_any = exhausted_any or exhausted
            levels.append(
                LevelResult(
                    level=level,
                    backend="symbolic",
                    tier=TIER_UNDER,
                    state_count=len(pool),
                    bad=[
                        bp.describe(point_names, _h_class_of(M, cert, bp.r))
                        for bp in bad
                    ],
                    partial=exhausted,
                    atom_count=len(ctx.atoms),
                    states_text=sorted(
                        sp.format(point_names) for sp in pool
                    ),
                    pointlikes=[
                        [point_names[p] for p in cand]
                        for cand in pointlike_candidates(pool)
                    ],
                )
            )
        if backend in ("explicit", "both"):
            if spctx is None:
                spctx = SpFlowContext(M, cert, bound=explicit_bound)
            data = saturate_flow_monoid(spctx, level, oracle)
            st = exact_states(data)
            ebad = exact_bad_pairs(data, st, h_pairs)
            lat = spctx.lattice
            sps = [lat.elements[i] for i in sorted(st)]
            levels.append(
                LevelResult(
                    level=level,
                    backend="explicit",
                    tier=TIER_EXACT,
                    state_count=len(st),
                    bad=[
                        {
                            "r": point_names[r],
                            "s": point_names[s],
                            "level": level,
                            "state": lat.elements[i].format(point_names),
                            "h_class": _h_class_of(M, cert, r),
                        }
                        for r, s, i in ebad
                    ],
                    atom_count=len(data.relations),
                    states_text=[sp.format(point_names) for sp in sps],
                    pointlikes=[
                        [point_names[p] for p in cand]
                        for cand in pointlike_candidates(sps)
                    ],
                )
            )

    bad_levels = [lv.level for lv in levels if lv.bad]
    bound = max(bad_levels) + 2 if bad_levels else 1
    tier = TIER_EXACT if all(
        any(lv.backend == "explicit" and lv.level == n for lv in levels)
        for n in range(max_level + 1)
    ) else TIER_UNDER
    return LowerBoundReport(
        monoid_path=monoid_path,
        monoid_size=M.size,
        generator_names=sorted(M.generators),
        point_names=point_names,
        config={
            "max_level": max_level,
            "backend": backend,
            "oracle": oracle.describe(),
            "exhaustive": exhaustive,
        },
        group_mapping_ok=True,
        gm_reason=None,
        levels=levels,
        bound=bound,
        tier=tier,
        budgets={
            "term_letters": max_letters,
            "term_nesting": max_nesting,
            "state_budget": state_budget,
            "exhausted": exhausted_any,
        },
    )


def _h_class_of(M, cert, point):
    elem = cert.distinguished_r[point]
    pos = cert.r_index()
    return sorted(
        M.names[m] for m in cert.green.class_of("h", elem)
    )
