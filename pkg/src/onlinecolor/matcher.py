"""Online matching under adversarial edge arrivals.

The main algorithm keeps a per-vertex budget F(v), initialized to 1, and on
arrival of e_t = (u, v) proposes

    P(e_t) = 1 / ((D + q) * F_t(u) * F_t(v))   if u, v are both unmatched,
             0                                  otherwise,

matching the edge iff the uniform draw X_t < P_hat(e_t), where the *gate*

    P_hat(e_t) = P(e_t)  if min{F_t(u), F_t(v)} * (1 - P(e_t)) >= q/(4D),
                 0       otherwise

keeps the F values above the hard floor q/(4D) and hence P a valid
probability.  Both endpoints' F values are multiplied by (1 - P_hat)
regardless of the match outcome; conditioned on any execution path, an edge
whose gate never interferes is matched with probability exactly 1/(D + q).

Three modes:

  * analysis_friendly -- the gated algorithm above (the default);
  * natural           -- the gate-free variant.  Its proposal P can exceed 1
                         (the tree produced by stream.gen_lower_bound_tree
                         drives it there); we clamp the match probability at
                         1 and flag the step as an overflow so the
                         counterexample demo can run to that point.  The
                         overflow flag, not the clamped run, is the artifact
                         of record.
  * greedy_fallback   -- for q > D/4 the guarantee is weaker than picking a
                         random color class of the greedy (2D-1)-coloring,
                         which matches every edge with probability exactly
                         1/(2D-1); run_greedy_fallback implements that.

F values stay in plain floats: the gate bounds them below by q/(4D), so the
dynamic range is tame and cancellation is benign.  All state classes also
run exactly on fractions.Fraction inputs (used by the oracle's rational mode
and the overflow demo).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .profiles import ConstantsProfile
from .stream import ArrivalStream

MODE_ANALYSIS_FRIENDLY = "analysis_friendly"
MODE_NATURAL = "natural"
MODE_GREEDY_FALLBACK = "greedy_fallback"


class MatcherError(ValueError):
    pass


class GuardError(MatcherError):
    """q outside [8*sqrt(D), D/4] with guard enforcement on."""


def choose_q(delta: int, profile: ConstantsProfile) -> tuple[float, bool]:
    """Slack for a degree bound: q = c_q * D^(3/4) * ln^(1/2) D.

    Returns (q, fallback).  fallback=True means q > D/4 under an enforced
    guard, in which case the caller must use greedy_fallback mode.  A q below
    8*sqrt(D) under an enforced guard is an error: the guarantee is violated
    from below and no cheaper algorithm covers that regime.
    """
    if delta < 2:
        raise MatcherError("choose_q needs delta >= 2")
    if profile.q_override is not None:
        q = float(profile.q_override)
    else:
        q = profile.c_q * delta ** 0.75 * math.sqrt(math.log(delta))
    fallback = False
    if profile.enforce_guard:
        # the q > D/4 escape comes first: the greedy fallback ignores q, so it
        # also covers degrees whose guard window [8*sqrt(D), D/4] is empty
        if q > delta / 4.0:
            fallback = True
        elif q < 8.0 * math.sqrt(delta):
            raise GuardError(
                f"q={q:.6g} < 8*sqrt(delta)={8.0 * math.sqrt(delta):.6g}: below the valid regime"
            )
    return q, fallback


def guard_holds(delta: float, q: float) -> bool:
    """The slack window 8*sqrt(D) <= q <= D/4 (empty below D=1024)."""
    return 8.0 * math.sqrt(delta) <= q <= delta / 4.0


@dataclass(frozen=True)
class MatcherConfig:
    delta: float
    q: float
    mode: str = MODE_ANALYSIS_FRIENDLY
    gate_enabled: bool = True
    profile: ConstantsProfile = ConstantsProfile.practical()

    def __post_init__(self) -> None:
        if self.q <= 0:
            raise MatcherError("q must be positive")
        if self.delta < 1:
            raise MatcherError("delta must be >= 1")
        if self.mode not in (MODE_ANALYSIS_FRIENDLY, MODE_NATURAL, MODE_GREEDY_FALLBACK):
            raise MatcherError(f"unknown mode {self.mode!r}")
        if (
            self.profile.enforce_guard
            and self.mode != MODE_GREEDY_FALLBACK
            and not guard_holds(self.delta, self.q)
        ):
            raise GuardError(
                f"q={self.q:.6g} outside [8*sqrt(D), D/4] for D={self.delta:.6g}; "
                "use greedy_fallback mode or a profile with enforce_guard=False"
            )


@dataclass
class StepTrace:
    time: int
    u: int
    v: int
    p: object  # proposal P(e_t); may exceed 1 in natural mode
    p_hat: object  # gated/clamped value actually used
    x: object  # the uniform draw
    matched: bool
    gate_fired: bool  # P_hat != P because of the gate
    overflow: bool  # natural mode only: P > 1

    CSV_HEADER = "time,u,v,p,p_hat,x,matched,gate_fired,overflow"

    def csv_row(self) -> str:
        return (
            f"{self.time},{self.u},{self.v},{float(self.p)!r},{float(self.p_hat)!r},"
            f"{float(self.x)!r},{int(self.matched)},{int(self.gate_fired)},{int(self.overflow)}"
        )


class MultiplicativeState:
    """Shared skeleton of the matcher and the rounder.

    Subclasses define the proposal numerator and the gate floor.  The oracle
    drives instances through (proposal, apply) directly; simulated runs use
    step().  Vertices are dense ints below n; F defaults to 1 via a plain
    list.  When ``exact`` numbers (Fractions) flow in, every derived quantity
    stays exact.
    """

    floor: object  # gate floor; subclass-provided

    def __init__(self, n: int, exact: bool = False):
        one = Fraction(1) if exact else 1.0
        self.exact = exact
        self.F = [one] * n
        self.matched = bytearray(n)
        self.matching: list[tuple[int, int]] = []  # endpoint pairs, in match order
        self.t = 0  # arrivals processed so far

    # -- hooks ------------------------------------------------------------
    def _numerator(self, x_e) -> object:
        raise NotImplementedError

    def _gate(self, fu, fv, p) -> bool:
        return min(fu, fv) * (1 - p) >= self.floor

    # -- core -------------------------------------------------------------
    def proposal(self, u: int, v: int, x_e=None):
        """(p, p_hat, gate_fired, overflow) for the next arrival, no mutation."""
        if self.matched[u] or self.matched[v]:
            zero = Fraction(0) if self.exact else 0.0
            return zero, zero, False, False
        fu, fv = self.F[u], self.F[v]
        p = self._numerator(x_e) / (fu * fv)
        return self._dispose(fu, fv, p)

    def _dispose(self, fu, fv, p):
        """Mode-specific gating; overridden by the natural matcher."""
        if self._gate(fu, fv, p):
            return p, p, False, False
        zero = Fraction(0) if self.exact else 0.0
        return p, zero, True, False

    def apply(self, u: int, v: int, p_hat, matched: bool) -> None:
        if p_hat:
            scale = 1 - p_hat
            self.F[u] *= scale
            self.F[v] *= scale
        if matched:
            if self.matched[u] or self.matched[v]:
                raise MatcherError(f"matching edge ({u},{v}) at a matched vertex")
            self.matched[u] = True
            self.matched[v] = True
            self.matching.append((u, v))
        self.t += 1

    def advance(self, u: int, v: int, x, x_e=None):
        """Feed one edge with an externally supplied uniform; returns (matched, p, p_hat)."""
        p, p_hat, _, _ = self.proposal(u, v, x_e)
        matched = x < p_hat
        self.apply(u, v, p_hat, matched)
        return matched, p, p_hat

    def step(self, e, x) -> StepTrace:
        if e.time != self.t + 1:
            raise MatcherError(f"arrival out of order: got t={e.time}, expected {self.t + 1}")
        n = len(self.F)
        if not (0 <= e.u < n and 0 <= e.v < n):
            raise MatcherError(f"t={e.time}: endpoint out of range for n={n}")
        p, p_hat, gate_fired, overflow = self.proposal(e.u, e.v, e.x)
        matched = x < p_hat
        self.apply(e.u, e.v, p_hat, matched)
        return StepTrace(
            time=e.time, u=e.u, v=e.v, p=p, p_hat=p_hat, x=x,
            matched=matched, gate_fired=gate_fired, overflow=overflow,
        )

    def clone(self):
        dup = object.__new__(type(self))
        dup.__dict__.update(self.__dict__)
        dup.F = list(self.F)
        dup.matched = bytearray(self.matched)
        dup.matching = list(self.matching)
        return dup


class MatcherState(MultiplicativeState):
    def __init__(self, n: int, config: MatcherConfig, exact: bool = False):
        if config.mode == MODE_GREEDY_FALLBACK:
            raise MatcherError("greedy fallback is not a stepwise matcher; use run_greedy_fallback")
        super().__init__(n, exact=exact)
        self.config = config
        delta, q = config.delta, config.q
        if exact:
            d, fq = Fraction(delta), Fraction(q)
            self.scale = 1 / (d + fq)
            self.floor = fq / (4 * d)
        else:
            self.scale = 1.0 / (delta + q)
            self.floor = q / (4.0 * delta)

    def _numerator(self, x_e) -> object:
        return self.scale

    def _dispose(self, fu, fv, p):
        mode = self.config.mode
        if mode == MODE_NATURAL:
            if p > 1:
                return p, (Fraction(1) if self.exact else 1.0), False, True
            return p, p, False, False
        if not self.config.gate_enabled:
            if p > 1:
                raise MatcherError(
                    f"P={float(p):.6g} > 1 with the gate disabled (diagnostic abort)"
                )
            return p, p, False, False
        return super()._dispose(fu, fv, p)


def run(
    stream: ArrivalStream, config: MatcherConfig, seed: int, exact: bool = False
) -> tuple[list[tuple[int, int]], list[StepTrace]]:
    """One full pass; X_t drawn from random.Random(seed) in arrival order.

    Returns (matching as endpoint pairs, per-step traces).  Deterministic:
    identical (stream, config, seed) give bit-identical traces.
    """
    if config.mode == MODE_GREEDY_FALLBACK:
        raise MatcherError("greedy fallback has its own runner: run_greedy_fallback")
    state = MatcherState(stream.n, config, exact=exact)
    rng = random.Random(seed)
    traces = [state.step(e, rng.random()) for e in stream.arrivals]
    return list(state.matching), traces


def run_fast(us, vs, n: int, delta: float, q: float, rng: random.Random):
    """Trace-free gated run over pre-split endpoint arrays (Monte-Carlo path).

    Consumes exactly one uniform per arrival (the same contract as run(), so
    fast and traced runs make identical decisions for the same seed).
    Returns (matched-edge flag list, min F observed, gate fire count).
    """
    F = [1.0] * n
    vertex_matched = bytearray(n)
    scale = 1.0 / (delta + q)
    floor = q / (4.0 * delta)
    hit = []
    min_f = 1.0
    gate_fires = 0
    rand = rng.random
    for i in range(len(us)):
        u = us[i]
        v = vs[i]
        x = rand()
        if vertex_matched[u] or vertex_matched[v]:
            hit.append(False)
            continue
        fu = F[u]
        fv = F[v]
        p = scale / (fu * fv)
        if (fu if fu < fv else fv) * (1.0 - p) < floor:
            gate_fires += 1
            hit.append(False)
            continue
        s = 1.0 - p
        fu *= s
        fv *= s
        F[u] = fu
        F[v] = fv
        if fu < min_f:
            min_f = fu
        if fv < min_f:
            min_f = fv
        if x < p:
            vertex_matched[u] = True
            vertex_matched[v] = True
            hit.append(True)
        else:
            hit.append(False)
    return hit, min_f, gate_fires


# ---------------------------------------------------------------------------
# Greedy fallback (q > D/4 regime)
# ---------------------------------------------------------------------------

def greedy_palette_coloring(stream: ArrivalStream, delta: int) -> list[int]:
    """Greedy coloring with palette {1..2*delta-1}; never runs out of colors."""
    if delta < 1:
        raise MatcherError("greedy fallback needs delta >= 1")
    used = [0] * stream.n  # bitmask per vertex, bit c = color c used
    colors = []
    for e in stream.arrivals:
        taken = used[e.u] | used[e.v]
        c = 1
        while taken >> c & 1:
            c += 1
        if c > 2 * delta - 1:
            raise MatcherError(
                f"t={e.time}: greedy exceeded 2*delta-1 colors; delta bound violated"
            )
        used[e.u] |= 1 << c
        used[e.v] |= 1 << c
        colors.append(c)
    return colors


def run_greedy_fallback(
    stream: ArrivalStream, delta: int, seed: int
) -> tuple[list[tuple[int, int]], int, list[int]]:
    """Match the color class of a pre-sampled c* in {1..2*delta-1}.

    Returns (matching as endpoint pairs, c_star, full greedy coloring).  Over
    the draw of c*, every edge is matched with probability exactly
    1/(2*delta-1).
    """
    c_star = random.Random(seed).randint(1, 2 * delta - 1)
    colors = greedy_palette_coloring(stream, delta)
    matching = [(e.u, e.v) for e, c in zip(stream.arrivals, colors) if c == c_star]
    return matching, c_star, colors


# ---------------------------------------------------------------------------
# Run-level checks
# ---------------------------------------------------------------------------

def matching_is_valid(matching: list[tuple[int, int]]) -> bool:
    touched: set[int] = set()
    for u, v in matching:
        if u in touched or v in touched:
            return False
        touched.add(u)
        touched.add(v)
    return True


def check_run_invariants(
    stream: ArrivalStream, config: MatcherConfig, traces: list[StepTrace], rel_tol: float = 1e-9
) -> list[str]:
    """Post-hoc invariant audit of a traced run; returns violation strings.

    Checked: matched <=> x < p_hat; gate coherence; the F floor q/(4D) and
    monotonicity (analysis_friendly with gate, when q <= 4D so the floor is
    below the initial value); P <= 1/4 and the min-F gate-pass condition
    whenever the guard 8*sqrt(D) <= q <= D/4 holds; and the product identity
    F_final(v) = prod (1 - p_hat) over v's edges, recomputed from the traces.
    """
    bad: list[str] = []
    delta, q = config.delta, config.q
    floor = q / (4.0 * delta)
    guarded = guard_holds(delta, q)
    gated = config.mode == MODE_ANALYSIS_FRIENDLY and config.gate_enabled
    F = [1.0] * stream.n
    vertex_matched = bytearray(stream.n)
    for e, tr in zip(stream.arrivals, traces):
        if tr.matched != (tr.x < tr.p_hat):
            bad.append(f"t={tr.time}: matched flag disagrees with x < p_hat")
        free = not (vertex_matched[e.u] or vertex_matched[e.v])
        if not free and tr.p != 0:
            bad.append(f"t={tr.time}: nonzero P at a matched endpoint")
        if gated and free:
            if guarded and tr.p > 0.25 + 1e-12:
                bad.append(f"t={tr.time}: P={tr.p} > 1/4 under the slack guard")
            min_f = min(F[e.u], F[e.v])
            if min_f >= q / (3.0 * delta) and guarded and tr.gate_fired:
                bad.append(f"t={tr.time}: gate fired although min F >= q/(3D) and guard holds")
        scale = 1.0 - tr.p_hat
        for w in (e.u, e.v):
            nxt = F[w] * scale
            if nxt > F[w] + 1e-15:
                bad.append(f"t={tr.time}: F({w}) increased")
            F[w] = nxt
            if gated and q <= 4.0 * delta and nxt < floor * (1.0 - 1e-12):
                bad.append(f"t={tr.time}: F({w})={nxt} fell below q/(4D)={floor}")
        if tr.matched:
            vertex_matched[e.u] = True
            vertex_matched[e.v] = True
    recomputed = [1.0] * stream.n
    for e, tr in zip(stream.arrivals, traces):
        recomputed[e.u] *= 1.0 - tr.p_hat
        recomputed[e.v] *= 1.0 - tr.p_hat
    for w in range(stream.n):
        if not math.isclose(recomputed[w], F[w], rel_tol=rel_tol):
            bad.append(f"vertex {w}: F product identity off ({recomputed[w]} vs {F[w]})")
    matching = [(e.u, e.v) for e, tr in zip(stream.arrivals, traces) if tr.matched]
    if not matching_is_valid(matching):
        bad.append("output matching has adjacent edges")
    return bad
