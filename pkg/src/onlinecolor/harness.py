"""Monte-Carlo drivers, validators, martingale diagnostics, and reports.

Seeding contract: trial t of a run with master seed S uses the generator
``seeding.rng_for(S, t)`` and consumes one uniform per arrival, in arrival
order.  Reports embed S, so re-running a report reproduces every decision
bit for bit.  Invariant checks are always on in harness entry points; a
report with violation count zero certifies that every per-module invariant
held at every step it audited.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .colorer import ColoringResult
from .matcher import (
    MODE_ANALYSIS_FRIENDLY,
    MODE_GREEDY_FALLBACK,
    MODE_NATURAL,
    MatcherConfig,
    MatcherState,
    check_run_invariants,
    matching_is_valid,
    run,
    run_fast,
    run_greedy_fallback,
)
from .oracle import OracleLimitError, exact_marginals
from .rounder import RoundingConfig, check_round_invariants, round_run
from .seeding import rng_for
from .stream import ArrivalStream, gen_lower_bound_tree

Z95 = 1.959963984540054  # two-sided 95%


def wilson_interval(hits: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval; preferred over the normal approximation because
    the marginals of interest sit near 1/D."""
    if trials == 0:
        return 0.0, 1.0
    phat = hits / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def freedman_bound(lam: float, sigma2: float, a: float) -> float:
    """Tail bound 2*exp(-lam^2 / (2*(sigma^2 + a*lam/3))), capped at 1.

    The cap matters: the raw expression exceeds 1 (and is then vacuous)
    whenever the deviation lam is small against the variance proxy.
    """
    if lam < 0 or sigma2 < 0 or a <= 0:
        raise ValueError("need lam >= 0, sigma2 >= 0, a > 0")
    if lam == 0.0:
        return 1.0
    return min(1.0, 2.0 * math.exp(-lam * lam / (2.0 * (sigma2 + a * lam / 3.0))))


def freedman_matcher_check(delta: float) -> dict:
    """Numeric instantiation of the matcher's concentration step.

    Plugs the step bound A = 8/q, the observed-variance bound
    sigma^2 = 128 D ln D / q^2, and the deviation lam = q/(3D) -- with the
    analyzed q = sqrt(200) * D^(3/4) * ln^(1/2) D -- into the tail bound and
    compares against the claimed 2*D^(-3).
    """
    q = math.sqrt(200.0) * delta ** 0.75 * math.sqrt(math.log(delta))
    sigma2 = 128.0 * delta * math.log(delta) / (q * q)
    a = 8.0 / q
    lam = q / (3.0 * delta)
    bound = freedman_bound(lam, sigma2, a)
    target = 2.0 * delta ** -3.0
    return {
        "delta": delta,
        "q": q,
        "lambda": lam,
        "sigma2": sigma2,
        "A": a,
        "bound": bound,
        "target": target,
        "ok": bound <= target * 1.01,  # 1% relative tolerance
    }


# ---------------------------------------------------------------------------
# Monte-Carlo marginals
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    kind: str
    config: dict
    master_seed: int
    trials: int
    edges: list
    diagnostics: dict
    violations: list
    wall_time: float

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    def to_json(self, indent: int = 2) -> str:
        payload = {
            "kind": self.kind,
            "config": self.config,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "violation_count": self.violation_count,
            "violations": self.violations[:100],
            "diagnostics": self.diagnostics,
            "wall_time_sec": self.wall_time,
            "edges": self.edges,
        }
        return json.dumps(payload, indent=indent)

    def edges_csv(self) -> str:
        header = "time,u,v,hits,frequency,ci_lo,ci_hi,below_bound"
        rows = [header]
        for rec in self.edges:
            rows.append(
                f"{rec['time']},{rec['u']},{rec['v']},{rec['hits']},{rec['frequency']!r},"
                f"{rec['ci_lo']!r},{rec['ci_hi']!r},{int(rec['below_bound'])}"
            )
        return "\n".join(rows) + "\n"


def mc_marginals(
    stream: ArrivalStream,
    config: MatcherConfig,
    trials: int,
    master_seed: int,
    audit_first: int = 3,
) -> RunReport:
    """Per-edge empirical matching frequencies with Wilson 95% intervals.

    Edges whose whole interval lies below 1/(D + 4q) (the guarantee the
    analysis actually delivers) are flagged; on gated instances such edges
    are expected, so the flag is reported, not counted as a violation.  The
    first ``audit_first`` trials are re-run through the traced path and every
    per-step invariant is audited.
    """
    t0 = time.perf_counter()
    m = stream.m
    hits = [0] * m
    min_f = 1.0
    gate_fires = 0
    overflow = 0
    violations: list[str] = []
    fast = config.mode == MODE_ANALYSIS_FRIENDLY and config.gate_enabled
    greedy = config.mode == MODE_GREEDY_FALLBACK
    us = [e.u for e in stream.arrivals]
    vs = [e.v for e in stream.arrivals]
    for t in range(trials):
        rng = rng_for(master_seed, t)
        if greedy:
            delta = int(config.delta)
            matching, _, colors = run_greedy_fallback(stream, delta, rng_seed_int(master_seed, t))
            pairs = set(matching)
            got = [(e.u, e.v) in pairs for e in stream.arrivals]
        elif fast:
            got, mf, gf = run_fast(us, vs, stream.n, config.delta, config.q, rng)
            min_f = min(min_f, mf)
            gate_fires += gf
        else:
            _, traces = run(stream, config, rng_seed_int(master_seed, t))
            got = [tr.matched for tr in traces]
            gate_fires += sum(tr.gate_fired for tr in traces)
            overflow += sum(tr.overflow for tr in traces)
        for i, flag in enumerate(got):
            if flag:
                hits[i] += 1
        if t < audit_first:
            if greedy:
                if not matching_is_valid(matching):
                    violations.append(f"trial {t}: fallback matching invalid")
            else:
                _, traces = run(stream, config, rng_seed_int(master_seed, t))
                if [tr.matched for tr in traces] != list(got):
                    violations.append(f"trial {t}: fast and traced paths disagree")
                violations.extend(check_run_invariants(stream, config, traces))
    floor_marginal = 1.0 / (config.delta + 4.0 * config.q)
    edges = []
    for e, h in zip(stream.arrivals, hits):
        lo, hi = wilson_interval(h, trials)
        edges.append(
            {
                "time": e.time,
                "u": e.u,
                "v": e.v,
                "hits": h,
                "frequency": h / trials if trials else 0.0,
                "ci_lo": lo,
                "ci_hi": hi,
                "below_bound": hi < floor_marginal,
            }
        )
    return RunReport(
        kind="mc_marginals",
        config={
            "delta": config.delta,
            "q": config.q,
            "mode": config.mode,
            "gate_enabled": config.gate_enabled,
            "profile": config.profile.as_dict(),
        },
        master_seed=master_seed,
        trials=trials,
        edges=edges,
        diagnostics={
            "min_F_observed": min_f,
            "gate_fires": gate_fires,
            "overflow_count": overflow,
            "marginal_floor": floor_marginal,
        },
        violations=violations,
        wall_time=time.perf_counter() - t0,
    )


def rng_seed_int(master_seed: int, trial: int) -> int:
    from .seeding import derive_seed

    return derive_seed(master_seed, trial)


# ---------------------------------------------------------------------------
# Coloring validation
# ---------------------------------------------------------------------------

def validate_coloring(
    stream: ArrivalStream,
    colors,
    palettes=None,
    require_complete: bool = True,
    limit: int = 100,
) -> list[str]:
    """Properness, palette membership, completeness.  Violations are data,
    not exceptions; the first ``limit`` are returned."""
    if isinstance(colors, ColoringResult):
        colors = colors.colors
    bad: list[str] = []
    at_vertex: dict[tuple[int, int], int] = {}
    for idx, e in enumerate(stream.arrivals):
        if len(bad) >= limit:
            break
        c = colors[idx]
        if c is None:
            if require_complete:
                bad.append(f"t={e.time}: uncolored edge")
            continue
        if palettes is not None:
            palette = palettes[idx] if isinstance(palettes, list) else palettes
            if c not in palette:
                bad.append(f"t={e.time}: color {c} not in the edge's palette")
        for w in (e.u, e.v):
            prev = at_vertex.get((w, c))
            if prev is not None:
                bad.append(f"t={e.time}: color {c} repeated at vertex {w} (first at t={prev})")
            at_vertex[(w, c)] = e.time
    return bad[:limit]


# ---------------------------------------------------------------------------
# Martingale diagnostics
# ---------------------------------------------------------------------------

@dataclass
class MartingaleReport:
    vertex: int
    y0: float
    trials: int
    mean_ym: float
    ci_lo: float
    ci_hi: float
    max_step: float
    step_bound: float
    max_wm: float
    wm_bound: float
    violations: list = field(default_factory=list)

    @property
    def ci_contains_y0(self) -> bool:
        return self.ci_lo <= self.y0 <= self.ci_hi

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ci_contains_y0"] = self.ci_contains_y0
        return d


@dataclass
class MartingaleTrace:
    """One run's Y trajectory for a vertex: values, step deltas, per-step
    conditional variance contributions, and the match outcomes."""

    vertex: int
    y: list
    deltas: list
    variances: list
    matched: list

    def shape_violations(self) -> list[str]:
        """Steps must be <= 0 on a match and >= 0 otherwise, with a variance
        contribution exactly when the step could have moved."""
        bad = []
        for t, (dy, var, hit) in enumerate(zip(self.deltas, self.variances, self.matched)):
            if hit and dy > 0:
                bad.append(f"t={t + 1}: positive step on a match")
            if not hit and dy < 0:
                bad.append(f"t={t + 1}: negative step without a match")
            if var < 0 or (var == 0) != (dy == 0):
                bad.append(f"t={t + 1}: variance contribution inconsistent with the step")
        return bad


def _martingale_trial(stream, config, vertex, neighbors, rng, collect=False):
    """One simulated run tracking the neighborhood martingale of ``vertex``.

    Y starts at deg(v)/(D+q); a neighbor's term 1/((D+q) F(u_i)) updates
    while the edge (v,u_i) is still in the future, freezes at its arrival,
    and drops if u_i is matched beforehand.  Only arrivals touching a live,
    unfrozen neighbor move Y: down by the term sum on a match, up by the
    factor p_hat/(1-p_hat) otherwise.  The conditional variance of a step is
    (term sum)^2 * p_hat/(1-p_hat) regardless of the outcome.
    """
    n = stream.n
    delta, q = config.delta, config.q
    scale = 1.0 / (delta + q)
    floor = q / (4.0 * delta)
    F = [1.0] * n
    vertex_matched = bytearray(n)
    contrib = {w: scale for w in neighbors}  # live, unfrozen neighbor terms
    y = scale * len(neighbors)
    max_step = 0.0
    wm = 0.0
    trail = [y] if collect else None
    deltas = [] if collect else None
    variances = [] if collect else None
    hits = [] if collect else None
    rand = rng.random
    for e in stream.arrivals:
        u, v = e.u, e.v
        x = rand()
        # freeze the term of a neighbor whose (vertex, w) edge is arriving now
        if u == vertex or v == vertex:
            w = v if u == vertex else u
            contrib.pop(w, None)  # value stays inside y permanently
        # matcher step
        p_hat = 0.0
        if not (vertex_matched[u] or vertex_matched[v]):
            fu, fv = F[u], F[v]
            p = scale / (fu * fv)
            if (fu if fu < fv else fv) * (1.0 - p) >= floor:
                p_hat = p
                s = 1.0 - p
                F[u] = fu * s
                F[v] = fv * s
        matched = x < p_hat
        # martingale step
        dy = 0.0
        var = 0.0
        if p_hat > 0.0:
            sumterm = 0.0
            movers = []
            for w in (u, v):
                cw = contrib.get(w)
                if cw is not None:
                    sumterm += cw
                    movers.append(w)
            if sumterm > 0.0:
                var = sumterm * sumterm * p_hat / (1.0 - p_hat)
                wm += var
                if matched:
                    dy = -sumterm
                    for w in movers:
                        del contrib[w]
                else:
                    grow = 1.0 / (1.0 - p_hat)
                    dy = sumterm * (p_hat / (1.0 - p_hat))
                    for w in movers:
                        contrib[w] *= grow
                y += dy
                if abs(dy) > max_step:
                    max_step = abs(dy)
        if matched:
            vertex_matched[u] = True
            vertex_matched[v] = True
        if collect:
            trail.append(y)
            deltas.append(dy)
            variances.append(var)
            hits.append(matched)
    if collect:
        return y, max_step, wm, MartingaleTrace(
            vertex=vertex, y=trail, deltas=deltas, variances=variances, matched=hits
        )
    return y, max_step, wm, None


def martingale_trace(stream: ArrivalStream, config: MatcherConfig, vertex: int, seed: int) -> MartingaleTrace:
    """Full Y trajectory, step deltas, and variance contributions for one run."""
    neighbors = _neighbor_times(stream, vertex)
    _, _, _, trace = _martingale_trial(
        stream, config, vertex, neighbors, rng_for(seed), collect=True
    )
    return trace


def _neighbor_times(stream: ArrivalStream, vertex: int) -> dict[int, int]:
    out = {}
    for e in stream.arrivals:
        if e.u == vertex:
            out[e.v] = e.time
        elif e.v == vertex:
            out[e.u] = e.time
    return out


def martingale_monitor(
    stream: ArrivalStream,
    config: MatcherConfig,
    vertex: int,
    trials: int,
    master_seed: int,
) -> MartingaleReport:
    """Checks the step bound 8/q and the observed-variance bound
    128 D ln D / q^2 on every trial, and that the 4-sigma interval around
    mean(Y_m) contains Y_0 = deg(v)/(D+q)."""
    if not 0 <= vertex < stream.n:
        raise ValueError(f"vertex {vertex} not in the stream")
    neighbors = _neighbor_times(stream, vertex)
    delta, q = config.delta, config.q
    y0 = len(neighbors) / (delta + q)
    step_bound = 8.0 / q
    wm_bound = 128.0 * delta * math.log(delta) / (q * q)
    tol = 1.0 + 1e-12
    violations: list[str] = []
    total = 0.0
    total_sq = 0.0
    max_step = 0.0
    max_wm = 0.0
    for t in range(trials):
        ym, ms, wm, _ = _martingale_trial(
            stream, config, vertex, neighbors, rng_for(master_seed, t)
        )
        total += ym
        total_sq += ym * ym
        max_step = max(max_step, ms)
        max_wm = max(max_wm, wm)
        if ms > step_bound * tol:
            violations.append(f"trial {t}: step {ms:.6g} exceeds 8/q={step_bound:.6g}")
        if wm > wm_bound * tol:
            violations.append(f"trial {t}: W_m {wm:.6g} exceeds bound {wm_bound:.6g}")
    mean = total / trials
    var = max(0.0, total_sq / trials - mean * mean)
    half = 4.0 * math.sqrt(var / trials)
    return MartingaleReport(
        vertex=vertex,
        y0=y0,
        trials=trials,
        mean_ym=mean,
        ci_lo=mean - half,
        ci_hi=mean + half,
        max_step=max_step,
        step_bound=step_bound,
        max_wm=max_wm,
        wm_bound=wm_bound,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# The overflow counterexample
# ---------------------------------------------------------------------------

def counterexample_demo(delta: int, q: int) -> dict:
    """Drive the naive matcher over the overflow tree on the forced
    no-match path (X_t = sup [0,1)) in exact rational arithmetic.

    Asserts P(child_i) = 1/(q+3-i) for i = 1..q+1 and P(root) =
    (q+2)/(q+1) > 1 with the overflow flag set, and that the gated
    algorithm on the same path keeps P_hat <= 1 and zeroes the root edge
    via its gate.  Any assertion failure here is an implementation bug.
    """
    tree = gen_lower_bound_tree(delta, q)
    x_sup = Fraction((1 << 53) - 1, 1 << 53)  # largest double below 1
    results: dict = {"delta": delta, "q": q, "m": tree.m, "n": tree.n}

    natural = MatcherState(
        tree.n, MatcherConfig(delta=delta, q=q, mode=MODE_NATURAL), exact=True
    )
    traces = [natural.step(e, x_sup) for e in tree.arrivals]
    child = [tr for tr in traces[:-1] if min(tr.u, tr.v) == 0]
    root = traces[-1]
    expected_children = [Fraction(1, q + 3 - i) for i in range(1, q + 2)]
    got_children = [tr.p for tr in child]
    if got_children != expected_children:
        raise AssertionError(f"child P values {got_children} != {expected_children}")
    if root.p != Fraction(q + 2, q + 1):
        raise AssertionError(f"root P {root.p} != (q+2)/(q+1)")
    if not root.overflow or root.p <= 1:
        raise AssertionError("root edge did not overflow")
    if any(tr.overflow for tr in traces[:-1]):
        raise AssertionError("overflow before the root edge")

    gated = MatcherState(
        tree.n, MatcherConfig(delta=delta, q=q, mode=MODE_ANALYSIS_FRIENDLY), exact=True
    )
    gtraces = [gated.step(e, x_sup) for e in tree.arrivals]
    if any(tr.p_hat > 1 for tr in gtraces):
        raise AssertionError("gated run produced P_hat > 1")
    if any(tr.overflow for tr in gtraces):
        raise AssertionError("gated run flagged an overflow")
    if any(tr.gate_fired for tr in gtraces[:-1]):
        raise AssertionError("a gate fired before the root edge")
    if [a.p for a in gtraces] != [a.p for a in traces]:
        raise AssertionError("gated and natural proposals diverged on the forced path")
    groot = gtraces[-1]
    if not groot.gate_fired or groot.p_hat != 0:
        raise AssertionError("gate did not zero the root edge")

    results["child_p"] = [str(p) for p in expected_children]
    results["root_p"] = str(root.p)
    results["root_p_float"] = float(root.p)
    results["gated_root_gate_fired"] = groot.gate_fired
    results["gated_max_p_hat"] = float(max(tr.p_hat for tr in gtraces))
    return results


# ---------------------------------------------------------------------------
# Oracle-vs-MC verification
# ---------------------------------------------------------------------------

def verify_stream(
    stream: ArrivalStream,
    config: MatcherConfig | RoundingConfig,
    trials: int,
    master_seed: int,
) -> dict:
    """Exact oracle vs Monte-Carlo within 4 sigma, plus invariant audits.

    Returns a dict with per-edge rows and a ``violations`` list; exit-code
    semantics (0 iff no violations) belong to the CLI.
    """
    t0 = time.perf_counter()
    violations: list[str] = []
    rounding = isinstance(config, RoundingConfig)
    oracle = None
    try:
        oracle = exact_marginals(stream, config)
    except OracleLimitError as exc:
        violations_note = f"oracle skipped: {exc}"
    hits = [0] * stream.m
    for t in range(trials):
        seed = rng_seed_int(master_seed, t)
        if rounding:
            _, traces = round_run(stream, config, seed)
            if t == 0:
                violations.extend(check_round_invariants(stream, config, traces))
        else:
            _, traces = run(stream, config, seed)
            if t == 0:
                violations.extend(check_run_invariants(stream, config, traces))
        for i, tr in enumerate(traces):
            if tr.matched:
                hits[i] += 1
    rows = []
    for i, e in enumerate(stream.arrivals):
        freq = hits[i] / trials if trials else 0.0
        row = {"time": e.time, "u": e.u, "v": e.v, "frequency": freq}
        if oracle is not None:
            p = oracle.marginal[i]
            sigma = math.sqrt(max(p * (1 - p), 1e-300) / trials) if trials else 1.0
            row["oracle"] = p
            row["conditional_sum"] = oracle.conditional_sum[i]
            row["expected_sum"] = float(oracle.expected[i])
            if abs(oracle.conditional_sum[i] - float(oracle.expected[i])) > 1e-9:
                violations.append(
                    f"t={e.time}: conditional sum {oracle.conditional_sum[i]!r} != "
                    f"{float(oracle.expected[i])!r}"
                )
            if p == 0.0:
                if hits[i]:
                    violations.append(f"t={e.time}: matched despite oracle marginal 0")
            elif trials and abs(freq - p) > 4.0 * sigma:
                violations.append(
                    f"t={e.time}: |freq {freq:.6g} - oracle {p:.6g}| > 4 sigma"
                )
        rows.append(row)
    out = {
        "edges": rows,
        "violations": violations,
        "trials": trials,
        "master_seed": master_seed,
        "wall_time_sec": time.perf_counter() - t0,
    }
    if oracle is None:
        out["note"] = violations_note
    else:
        out["leaf_total"] = float(oracle.leaf_total)
        out["branches"] = oracle.branches
    return out
