"""The degree-reduction coloring stack.

A run is organized in phases.  Phase i owns a color class C_i and a bank of
per-color matcher instances (degree bound d_i, slack q_i); every uncolored
edge is fed, at its arrival, to the matchers of its phase-i sublist
l_i(e) = L(e) cap C_i in ascending color order and takes the first color
whose matcher matched it.  Edges that survive phases 0..f-1 are colored by
a greedy tail from l_{f+1}(e) = L(e) cap C_{f+1}.  Interleaving: a single
online pass; each arriving edge cascades through all phase machinery to
completion (each phase sees exactly the sub-stream of edges not colored by
earlier phases, in arrival order), so every decision stays irrevocable and
immediate.

The schedule (Δ = d_0 > d_1 > ... and the slack sequence a_i) controls the
phase count f, the sublist sizes lambda_i = d_i^(2/3) ln^(1/3) n, and the
per-phase slacks q_i.  Two recurrences for d_{i+1} are provided: the
analyzed one (whose correction terms dominate outside the asymptotic regime,
making it non-decreasing -- a loud error at desk scale) and the achieved
one, d_{i+1} = d_i - ceil(0.9 lambda_i).  The schedule is computed with
mpmath at 50 digits so that e.g. d_0 = 10^30 still registers its first
decrement.

Density (a vertex's running uncolored degree within the phase reaching
d_i - lambda_i, counting the arriving edge) gates only the list-size
*promise* lambda_i <= |l_i(e)| <= lambda_i + 10 sqrt(lambda_i ln n);
feeding itself is unconditional for edges of the phase's uncolored graph.

Three front ends: plain_color (palette {1..Δ+q'} with deterministic color
ranges per phase), list_color (arbitrary per-edge palettes, phase classes
sampled online), local_color (palette sizes tied to the endpoint degrees,
known a priori).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from mpmath import mp, mpf

from .matcher import MatcherConfig, MatcherState
from .profiles import RECURRENCE_ANALYZED, ConstantsProfile
from .seeding import rng_for
from .stream import ArrivalStream


class ScheduleError(ValueError):
    pass


class PartitionError(ValueError):
    pass


class PromiseViolation(ValueError):
    pass


class TailFailure(Exception):
    """Greedy tail ran out of colors for an edge (time, u, v)."""

    def __init__(self, time: int, u: int, v: int):
        super().__init__(f"t={time}: no tail color available for edge ({u},{v})")
        self.time, self.u, self.v = time, u, v


# ---------------------------------------------------------------------------
# Degree and slack schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DegreeSchedule:
    """Sequences d_0..d_{f+1}, lambda_0..lambda_f, q_0..q_f, a_0..a_{f+1}.

    f is the minimal index with d_f < c_stop * ln n; phases 0..f-1 are the
    active reduction phases (none when f = 0, in which case the pipeline is
    the bare greedy tail).  Values are mpmath floats.
    """

    n: int
    f: int
    d: tuple
    lam: tuple
    q: tuple
    a: tuple
    recurrence: str

    @property
    def active_phases(self) -> range:
        return range(self.f)

    def dense_threshold(self, i: int) -> float:
        return float(self.d[i] - self.lam[i])

    def promise_bounds(self, i: int) -> tuple[float, float]:
        lam = self.lam[i]
        return float(lam), float(lam + 10 * mp.sqrt(lam * mp.log(self.n)))

    def prune_target(self, i: int) -> int:
        return int(mp.floor(self.d[i] + self.a[i]))

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "d": [float(x) for x in self.d],
            "lambda": [float(x) for x in self.lam],
            "q": [float(x) for x in self.q],
            "a": [float(x) for x in self.a],
            "recurrence": self.recurrence,
        }


def recurrence_step(d0, n: int, profile: ConstantsProfile):
    """One application of the profile's degree recurrence, at 50 digits.

    Lets the asymptotic regime be probed (e.g. d_1 < d_0 at d_0 = 10^30,
    where the full schedule would have ~10^10 phases and float64 cannot even
    register the decrement) without materializing a schedule.
    """
    with mp.workdps(50):
        ln_n = mp.log(n)
        di = mpf(d0)
        li = di ** (mpf(2) / 3) * ln_n ** (mpf(1) / 3)
        if profile.degree_recurrence == RECURRENCE_ANALYZED:
            qi = mpf(profile.c_q_color) * di ** (mpf(3) / 4) * mp.sqrt(mp.log(di))
            dn = di - li + 2 * li * (qi + li) / (di + qi) + 6 * mp.sqrt(li * ln_n)
            if dn >= di:
                raise ScheduleError(
                    f"analyzed recurrence non-decreasing at d={float(di):.6g}"
                )
            return dn
        return max(di - mp.ceil(mpf(9) / 10 * li), mpf(0))


def degree_schedule(
    d0: int, n: int, profile: ConstantsProfile, max_phases: int = 100_000
) -> DegreeSchedule:
    if d0 < 1:
        raise ScheduleError("d0 must be >= 1")
    if n < 2:
        raise ScheduleError("n must be >= 2")
    analyzed = profile.degree_recurrence == RECURRENCE_ANALYZED
    with mp.workdps(50):
        ln_n = mp.log(n)
        stop = mpf(profile.c_stop) * ln_n
        d = [mpf(d0)]
        lam: list = []
        q: list = []

        def lam_of(di):
            return di ** (mpf(2) / 3) * ln_n ** (mpf(1) / 3) if di > 0 else mpf(0)

        def q_of(di):
            if di <= 1:
                return mpf(0)
            return mpf(profile.c_q_color) * di ** (mpf(3) / 4) * mp.sqrt(mp.log(di))

        while d[-1] >= stop:
            di = d[-1]
            li, qi = lam_of(di), q_of(di)
            lam.append(li)
            q.append(qi)
            if analyzed:
                dn = di - li + 2 * li * (qi + li) / (di + qi) + 6 * mp.sqrt(li * ln_n)
                if dn >= di:
                    raise ScheduleError(
                        f"analyzed recurrence non-decreasing at d_{len(d) - 1}={float(di):.6g} "
                        "(correction terms dominate outside the asymptotic regime); "
                        "use the achieved recurrence"
                    )
            else:
                dn = di - mp.ceil(mpf(9) / 10 * li)
                if dn < 0:
                    dn = mpf(0)
            d.append(dn)
            if len(d) > max_phases:
                raise ScheduleError(
                    f"more than {max_phases} phases before the stop threshold; "
                    "the schedule is astronomically long at these parameters "
                    "(use recurrence_step to probe single steps)"
                )
        f = len(d) - 1  # minimal index with d_f < stop
        # Entries at index f exist for reporting and for the tail rules even
        # though phase f never runs; the tail-entry degree d_{f+1} always uses
        # the achieved decrement (the analyzed recurrence is not meaningful
        # below the stop threshold).
        df = d[f]
        lam.append(lam_of(df))
        q.append(q_of(df))
        d.append(max(df - mp.ceil(mpf(9) / 10 * lam[f]), mpf(0)))
        a = [mpf(0)] * (f + 2)
        a[f + 1] = mpf(profile.a_base_mult) * ln_n
        for i in range(f, -1, -1):
            if lam[i] == 0:
                a[i] = a[i + 1]
                continue
            a[i] = a[i + 1] + 2 * lam[i] * (q[i] + lam[i]) / (d[i] + q[i]) + 16 * mp.sqrt(lam[i] * ln_n)
    return DegreeSchedule(
        n=n, f=f, d=tuple(d), lam=tuple(lam), q=tuple(q), a=tuple(a),
        recurrence=profile.degree_recurrence,
    )


# ---------------------------------------------------------------------------
# Color partitions
# ---------------------------------------------------------------------------

def list_prune(colors: tuple, target: int) -> tuple:
    """Keep the target-size prefix in ascending color order ("arbitrary"
    pruning resolved deterministically as keep-smallest)."""
    if len(colors) < target:
        raise PartitionError(f"list of {len(colors)} colors cannot be pruned to {target}")
    return colors[:target]


class RangePartition:
    """Deterministic interval classes: C_i = {top_i - |C_i| + 1 .. top_i} with
    top_i = floor(d_i + a_i) and |C_i| = ceil(lambda_i); tail C_{f+1} =
    {1 .. floor(2 d_f)}.  Colors in the gaps belong to no phase and are never
    used.  Disjointness is verified at construction."""

    method = "range"

    def __init__(self, schedule: DegreeSchedule):
        self.schedule = schedule
        f = schedule.f
        self.intervals: list[tuple[int, int]] = []
        for i in range(f + 1):
            top = int(mp.floor(schedule.d[i] + schedule.a[i]))
            size = int(mp.ceil(schedule.lam[i]))
            lo = top - size + 1
            if size > 0 and lo < 1:
                raise PartitionError(f"phase {i} color range extends below 1")
            self.intervals.append((lo, top) if size > 0 else (1, 0))
        self.tail_interval = (1, int(mp.floor(2 * schedule.d[f])))
        spans = [iv for iv in self.intervals + [self.tail_interval] if iv[0] <= iv[1]]
        spans.sort()
        for (alo, ahi), (blo, bhi) in zip(spans, spans[1:]):
            if blo <= ahi:
                raise PartitionError(
                    f"color ranges overlap ({alo},{ahi}) vs ({blo},{bhi}): "
                    "schedule inconsistent with profile"
                )

    def interval(self, phase: int) -> tuple[int, int]:
        if phase == self.schedule.f + 1:
            return self.tail_interval
        return self.intervals[phase]

    def phase_of(self, color: int) -> int | None:
        lo, hi = self.tail_interval
        if lo <= color <= hi:
            return self.schedule.f + 1
        for i, (ilo, ihi) in enumerate(self.intervals):
            if ilo <= color <= ihi:
                return i
        return None

    def assignment(self) -> dict:
        return {
            "tail": list(self.tail_interval),
            "phases": [list(iv) for iv in self.intervals],
        }


class SampledPartition:
    """Online random classes: a color seen for the first time joins active
    phase i with probability p_i = (lambda_i + 5 sqrt(lambda_i ln n)) /
    (d_i + a_i), trying phases in order; unclaimed colors go to the tail.
    Inactive phases (those at or below the stop threshold) are skipped so
    their classes do not swallow colors that no machinery will ever use."""

    method = "sampled"

    def __init__(self, schedule: DegreeSchedule, rng):
        self.schedule = schedule
        self.rng = rng
        self._assign: dict[int, int] = {}
        ln_n = mp.log(schedule.n)
        self.p = []
        for i in schedule.active_phases:
            lam, di, ai = schedule.lam[i], schedule.d[i], schedule.a[i]
            p_i = float((lam + 5 * mp.sqrt(lam * ln_n)) / (di + ai))
            if p_i > 1.0:
                raise PartitionError(f"phase {i}: sampling probability {p_i:.4g} > 1")
            self.p.append(p_i)

    def phase_of(self, color: int) -> int:
        got = self._assign.get(color)
        if got is None:
            got = self.schedule.f + 1
            for i, p_i in zip(self.schedule.active_phases, self.p):
                if self.rng.random() < p_i:
                    got = i
                    break
            self._assign[color] = got
        return got

    def assignment(self) -> dict:
        return dict(self._assign)


# ---------------------------------------------------------------------------
# One reduction phase: a per-color matcher bank
# ---------------------------------------------------------------------------

class PhaseReducer:
    """Per-color gated matcher instances sharing one phase sub-stream.

    Each color launches a fresh instance (degree bound d_i, slack q_i) on
    first sight.  An edge is fed to every matcher of its sublist in
    ascending color order and takes the first color whose matcher matched
    it; later matchers still see the edge (their internal matchings may
    record it even when the color is not used for the edge).
    """

    def __init__(self, n: int, delta: float, q: float, phase: int, master_seed: int):
        if q <= 0:
            raise ScheduleError(f"phase {phase}: non-positive slack q={q}")
        self.n = n
        self.phase = phase
        self.master_seed = master_seed
        self.config = MatcherConfig(delta=delta, q=q)
        self.instances: dict[int, MatcherState] = {}
        self.rngs: dict = {}

    def feed(self, u: int, v: int, sublist) -> int | None:
        won = None
        for c in sublist:
            inst = self.instances.get(c)
            if inst is None:
                inst = MatcherState(self.n, self.config)
                self.instances[c] = inst
                self.rngs[c] = rng_for(self.master_seed, "phase", self.phase, "color", c)
            matched, _, _ = inst.advance(u, v, self.rngs[c].random())
            if matched and won is None:
                won = c
        return won


# ---------------------------------------------------------------------------
# The pipeline
# ---------------------------------------------------------------------------

@dataclass
class PhaseStats:
    phase: int
    entered: int = 0
    colored: int = 0
    dense_edges: int = 0
    promise_violations: int = 0
    max_uncolored_degree_after: int = 0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ColoringResult:
    colors: list  # per arrival index; int color or None (None only on failure paths)
    stage: list  # per arrival index; phase that colored it (f+1 = tail)
    fallback_taken: bool
    per_phase: list[PhaseStats]
    tail: PhaseStats
    schedule: DegreeSchedule
    partition_method: str
    partition_assignment: dict
    budget: int | None = None  # plain mode: total palette size d_0 + a_0
    local_bounds: list | None = None  # local mode: per-edge color bound |L(e)|
    list_ledger_violations: int = 0
    seed: int | None = None

    @property
    def max_color(self) -> int:
        return max((c for c in self.colors if c is not None), default=0)

    @property
    def colors_used(self) -> int:
        return len({c for c in self.colors if c is not None})

    def report(self, profile: ConstantsProfile) -> dict:
        return {
            "profile": profile.as_dict(),
            "schedule": self.schedule.as_dict(),
            "colors_used": self.colors_used,
            "max_color": self.max_color,
            "fallback_taken": self.fallback_taken,
            "budget": self.budget,
            "seed": self.seed,
            "list_ledger_violations": self.list_ledger_violations,
            "per_phase": [p.as_dict() for p in self.per_phase],
            "tail": self.tail.as_dict(),
            "partition": {"method": self.partition_method},
        }


def _range_intersect(a: range, lo: int, hi: int) -> range:
    start = max(a.start, lo)
    stop = min(a.stop, hi + 1)
    return range(start, max(start, stop))


def _smallest_free_in_span(lo: int, hi: int, taken: int) -> int | None:
    if hi < lo:
        return None
    mask = ((1 << (hi + 1)) - (1 << lo))
    avail = ~taken & mask
    if avail == 0:
        return None
    return (avail & -avail).bit_length() - 1


def run_generic(
    stream: ArrivalStream,
    lists_fn,
    schedule: DegreeSchedule,
    partition,
    profile: ConstantsProfile,
    seed: int,
    prune: bool = False,
    track_list_ledger: bool = False,
) -> ColoringResult:
    """One online pass of the full pipeline.  lists_fn(e) -> palette.

    Palettes may be ``range`` objects (plain/local modes; sublists then come
    from the partition's intervals) or sorted tuples (list mode).  A greedy
    tail failure raises TailFailure unless the profile asks for the
    (2*dmax-1)-greedy fallback, in which case the whole instance is recolored
    by the baseline and flagged.
    """
    try:
        return _run_pipeline(stream, lists_fn, schedule, partition, profile, seed,
                             prune=prune, track_list_ledger=track_list_ledger)
    except TailFailure:
        if not profile.fallback_on_tail_failure:
            raise
        return _fallback_result(stream, schedule, partition, seed)


def _run_pipeline(stream, lists_fn, schedule, partition, profile, seed, prune, track_list_ledger):
    n, m, f = stream.n, stream.m, schedule.f
    active = list(schedule.active_phases)
    reducers = {
        i: PhaseReducer(n, float(schedule.d[i]), float(schedule.q[i]), i, seed) for i in active
    }
    thresholds = {i: schedule.dense_threshold(i) for i in active}
    bounds = {i: schedule.promise_bounds(i) for i in active}
    targets = {i: schedule.prune_target(i) for i in active}
    deg = {i: [0] * n for i in active}
    tail_deg = [0] * n
    used = [0] * n  # per-vertex bitmask of assigned colors
    stats = {i: PhaseStats(phase=i) for i in active}
    tail_stats = PhaseStats(phase=f + 1)
    colors_out: list = [None] * m
    stage_out: list = [None] * m
    ledger_violations = 0

    range_mode = isinstance(partition, RangePartition)

    for idx, e in enumerate(stream.arrivals):
        u, v = e.u, e.v
        palette = lists_fn(e)
        remaining = palette
        dense_ok = False
        got: int | None = None
        for i in active:
            st = stats[i]
            st.entered += 1
            di = deg[i]
            di[u] += 1
            di[v] += 1
            if prune and not isinstance(remaining, range) and len(remaining) > targets[i]:
                remaining = list_prune(remaining, targets[i])
            if isinstance(remaining, range):
                if not range_mode:
                    raise PartitionError("range palettes need a range partition")
                lo, hi = partition.interval(i)
                sublist = _range_intersect(remaining, lo, hi)
            else:
                sublist = tuple(c for c in remaining if partition.phase_of(c) == i)
            dense = di[u] >= thresholds[i] or di[v] >= thresholds[i]
            if track_list_ledger:
                enough = len(remaining) >= targets[i]
                if dense_ok and not enough:
                    ledger_violations += 1
                if dense and enough:
                    dense_ok = True
            if dense:
                st.dense_edges += 1
                lo_b, hi_b = bounds[i]
                if not lo_b <= len(sublist) <= hi_b:
                    st.promise_violations += 1
                    if profile.strict_promises:
                        raise PromiseViolation(
                            f"t={e.time} phase {i}: sublist size {len(sublist)} outside "
                            f"[{lo_b:.6g}, {hi_b:.6g}]"
                        )
            got = reducers[i].feed(u, v, sublist)
            if got is not None:
                st.colored += 1
                colors_out[idx] = got
                stage_out[idx] = i
                used[u] |= 1 << got
                used[v] |= 1 << got
                break
            if not isinstance(remaining, range) and sublist:
                drop = set(sublist)
                remaining = tuple(c for c in remaining if c not in drop)
        if got is not None:
            continue
        # greedy tail
        tail_stats.entered += 1
        tail_deg[u] += 1
        tail_deg[v] += 1
        taken = used[u] | used[v]
        c: int | None = None
        if isinstance(remaining, range):
            lo, hi = partition.interval(f + 1)
            span = _range_intersect(remaining, lo, hi)
            if len(span) > 0:
                c = _smallest_free_in_span(span.start, span.stop - 1, taken)
        else:
            for cand in remaining:
                if partition.phase_of(cand) == f + 1 and not (taken >> cand & 1):
                    c = cand
                    break
        if c is None:
            raise TailFailure(e.time, u, v)
        tail_stats.colored += 1
        colors_out[idx] = c
        stage_out[idx] = f + 1
        used[u] |= 1 << c
        used[v] |= 1 << c

    for pos, i in enumerate(active):
        nxt = deg[active[pos + 1]] if pos + 1 < len(active) else tail_deg
        stats[i].max_uncolored_degree_after = max(nxt, default=0)
    # Degree accounting cross-check: every arrival was counted at each stage
    # it reached uncolored.
    for i in active:
        assert stats[i].entered == sum(deg[i]) // 2

    return ColoringResult(
        colors=colors_out,
        stage=stage_out,
        fallback_taken=False,
        per_phase=[stats[i] for i in active],
        tail=tail_stats,
        schedule=schedule,
        partition_method=partition.method,
        partition_assignment=partition.assignment(),
        list_ledger_violations=ledger_violations,
        seed=seed,
    )


def _fallback_result(stream, schedule, partition, seed) -> ColoringResult:
    from .matcher import greedy_palette_coloring

    colors = greedy_palette_coloring(stream, stream.delta_bound)
    tail_stats = PhaseStats(phase=schedule.f + 1, entered=stream.m, colored=stream.m)
    return ColoringResult(
        colors=list(colors),
        stage=["fallback"] * stream.m,
        fallback_taken=True,
        per_phase=[],
        tail=tail_stats,
        schedule=schedule,
        partition_method=partition.method,
        partition_assignment={},
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Front ends
# ---------------------------------------------------------------------------

def plain_color(stream: ArrivalStream, delta: int, profile: ConstantsProfile, seed: int) -> ColoringResult:
    """Color with the fixed palette {1..Δ+q'}, q' = floor(d_0 + a_0) - Δ."""
    schedule = degree_schedule(delta, stream.n, profile)
    partition = RangePartition(schedule)
    budget = int(mp.floor(schedule.d[0] + schedule.a[0]))
    palette = range(1, budget + 1)
    result = run_generic(stream, lambda e: palette, schedule, partition, profile, seed)
    result.budget = budget
    return result


def list_color(stream: ArrivalStream, profile: ConstantsProfile, seed: int) -> ColoringResult:
    """Color every edge from its own arriving palette (sampled partition)."""
    if not stream.has_lists:
        raise PartitionError("list mode needs a stream with L= palettes")
    schedule = degree_schedule(stream.delta_bound, stream.n, profile)
    partition = SampledPartition(schedule, rng_for(seed, "partition"))
    need = 2.0 * profile.a_base_mult * math.log(stream.n)
    short = min((len(e.colors) for e in stream.arrivals if e.colors is not None), default=0)
    if short < need:
        msg = f"minimum list size {short} below 2 * a_base_mult * ln n = {need:.4g}"
        if profile.enforce_guard:
            raise PartitionError(msg)
        warnings.warn(msg, stacklevel=2)

    def lists_fn(e):
        if e.colors is None:
            raise PartitionError(f"t={e.time}: arrival without a palette in list mode")
        return e.colors

    return run_generic(stream, lists_fn, schedule, partition, profile, seed,
                       prune=True, track_list_ledger=True)


def local_lists(deg_u: int, deg_v: int, schedule: DegreeSchedule) -> range:
    """Palette for an edge from its endpoints' (a priori known) degrees.

    Small edges (d_max <= d_{f+1}) draw from {1..2 d_{f+1}}; otherwise the
    palette is {1..floor(d_i + a_i)} for i = i(e), the last schedule index
    whose degree still dominates d_max(e).
    """
    dmax = max(deg_u, deg_v)
    if dmax <= schedule.d[schedule.f + 1]:
        return range(1, 2 * int(schedule.d[schedule.f + 1]) + 1)
    i_e = max(i for i in range(schedule.f + 2) if schedule.d[i] >= dmax)
    return range(1, int(mp.floor(schedule.d[i_e] + schedule.a[i_e])) + 1)


def local_color(
    stream: ArrivalStream,
    profile: ConstantsProfile,
    seed: int,
    degrees: list[int] | None = None,
) -> ColoringResult:
    """Color with per-edge bounds tied to max(deg(u), deg(v)).

    ``degrees`` may be upper bounds; by default the true final degrees are
    taken from the stream (the setting assumes they are known a priori).
    """
    degrees = stream.degrees() if degrees is None else degrees
    schedule = degree_schedule(stream.delta_bound, stream.n, profile)
    partition = RangePartition(schedule)
    palettes = [local_lists(degrees[e.u], degrees[e.v], schedule) for e in stream.arrivals]
    result = run_generic(
        stream, lambda e: palettes[e.time - 1], schedule, partition, profile, seed
    )
    result.local_bounds = [len(p) for p in palettes]
    return result


def greedy_color(stream: ArrivalStream, palettes) -> list[int]:
    """Smallest available color per edge from its own palette; error if none.

    ``palettes`` is a shared palette (a range, or a tuple of color ids) or a
    list with one palette per edge.
    """
    shared = isinstance(palettes, range) or len(palettes) == 0 or isinstance(palettes[0], int)
    per_edge = [palettes] * stream.m if shared else list(palettes)
    if len(per_edge) != stream.m:
        raise ValueError("need one palette per edge")
    used = [0] * stream.n
    out = []
    for e, palette in zip(stream.arrivals, per_edge):
        taken = used[e.u] | used[e.v]
        c = None
        if isinstance(palette, range):
            c = _smallest_free_in_span(palette.start, palette.stop - 1, taken)
        else:
            for cand in palette:
                if not (taken >> cand & 1):
                    c = cand
                    break
        if c is None:
            raise TailFailure(e.time, e.u, e.v)
        used[e.u] |= 1 << c
        used[e.v] |= 1 << c
        out.append(c)
    return out
