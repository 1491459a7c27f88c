import math
import random
from fractions import Fraction

import pytest

from conftest import path, random_simple_graph, star, triangle
from onlinecolor.matcher import (
    MODE_NATURAL,
    GuardError,
    MatcherConfig,
    MatcherError,
    MatcherState,
    check_run_invariants,
    choose_q,
    greedy_palette_coloring,
    guard_holds,
    matching_is_valid,
    run,
    run_fast,
    run_greedy_fallback,
)
from onlinecolor.profiles import ConstantsProfile
from onlinecolor.seeding import rng_for


def test_choose_q_theory_values():
    th = ConstantsProfile.theory()
    q, fb = choose_q(10**10, th)
    assert math.isclose(q, 2.146e9, rel_tol=1e-3) and fb is False
    q, fb = choose_q(1000, th)
    assert math.isclose(q, 6609.7, rel_tol=1e-4) and fb is True
    with pytest.raises(GuardError):
        # q_override below 8*sqrt(delta) under the enforced guard
        choose_q(10**10, th.replace(q_override=10.0))
    with pytest.raises(MatcherError):
        choose_q(1, th)


def test_choose_q_override():
    pr = ConstantsProfile.practical().replace(q_override=5.0)
    assert choose_q(100, pr) == (5.0, False)


def test_config_guard_enforcement():
    th = ConstantsProfile.theory()
    with pytest.raises(GuardError):
        MatcherConfig(delta=100, q=5, profile=th)
    MatcherConfig(delta=100, q=5)  # practical profile: no guard
    assert guard_holds(2000, 400) and not guard_holds(100, 5)


def test_triangle_hand_steps_exact():
    # D=2, q=1, gate on, forced no-match path: P = 1/3, 1/2, then 1 with the
    # gate zeroing the third edge.
    s = triangle()
    state = MatcherState(3, MatcherConfig(delta=2, q=1), exact=True)
    x = Fraction(9, 10)
    t1 = state.step(s.arrivals[0], x)
    assert t1.p == Fraction(1, 3) and t1.p_hat == Fraction(1, 3) and not t1.gate_fired
    t2 = state.step(s.arrivals[1], x)
    assert t2.p == Fraction(1, 2) and t2.p_hat == Fraction(1, 2) and not t2.gate_fired
    t3 = state.step(s.arrivals[2], x)
    assert t3.p == 1 and t3.p_hat == 0 and t3.gate_fired and not t3.overflow


def test_step_rejects_out_of_order():
    s = triangle()
    state = MatcherState(3, MatcherConfig(delta=2, q=1))
    state.step(s.arrivals[0], 0.99)
    with pytest.raises(MatcherError):
        state.step(s.arrivals[2], 0.99)


def test_empty_stream():
    from onlinecolor.stream import make_stream

    matching, traces = run(make_stream(2, 0, []), MatcherConfig(delta=2, q=1), seed=0)
    assert matching == [] and traces == []


def test_run_deterministic_per_seed():
    s = random_simple_graph(random.Random(3), 8, 12)
    cfg = MatcherConfig(delta=max(s.degrees()), q=1.5)
    m1, t1 = run(s, cfg, seed=11)
    m2, t2 = run(s, cfg, seed=11)
    assert m1 == m2 and t1 == t2
    assert matching_is_valid(m1)
    assert not check_run_invariants(s, cfg, t1)


def test_fast_and_traced_paths_agree():
    from onlinecolor.seeding import derive_seed

    s = random_simple_graph(random.Random(5), 9, 14)
    cfg = MatcherConfig(delta=max(s.degrees()), q=2.0)
    for trial in range(20):
        got, _, _ = run_fast([e.u for e in s.arrivals], [e.v for e in s.arrivals],
                             s.n, cfg.delta, cfg.q, rng_for(77, trial))
        _, traces = run(s, cfg, derive_seed(77, trial))
        assert [tr.matched for tr in traces] == got


def test_natural_mode_overflow_flag():
    from onlinecolor.stream import gen_lower_bound_tree

    tree = gen_lower_bound_tree(6, 2)
    cfg = MatcherConfig(delta=6, q=2, mode=MODE_NATURAL)
    state = MatcherState(tree.n, cfg, exact=True)
    x = Fraction((1 << 53) - 1, 1 << 53)
    traces = [state.step(e, x) for e in tree.arrivals]
    assert traces[-1].overflow and traces[-1].p == Fraction(4, 3)
    assert traces[-1].p_hat == 1 and traces[-1].matched  # clamped, x < 1
    assert not any(tr.overflow for tr in traces[:-1])


def test_gate_disabled_diagnostic_abort():
    # the overflow tree pushes the ungated proposal to (q+2)/(q+1) > 1
    from onlinecolor.stream import gen_lower_bound_tree

    tree = gen_lower_bound_tree(6, 2)
    cfg = MatcherConfig(delta=6, q=2, gate_enabled=False)
    state = MatcherState(tree.n, cfg, exact=True)
    x = Fraction(999, 1000)
    with pytest.raises(MatcherError, match="gate disabled"):
        for e in tree.arrivals:
            state.step(e, x)


from hypothesis import given, settings
from hypothesis import strategies as st


@st.composite
def _instances(draw):
    n = draw(st.integers(2, 8))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, min_size=1))
    from onlinecolor.stream import make_stream

    deg = {}
    for u, v in chosen:
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    return make_stream(n, max(deg.values()), chosen)


@settings(max_examples=120, deadline=None)
@given(_instances(), st.floats(0.1, 8.0), st.integers(0, 2**30))
def test_property_run_invariants(s, q, seed):
    # F floor and monotonicity, gate coherence, matching validity, product
    # identity: all hold on every instance / slack / seed
    delta = max(s.degrees())
    cfg = MatcherConfig(delta=delta, q=min(q, 4.0 * delta))
    _, traces = run(s, cfg, seed)
    assert check_run_invariants(s, cfg, traces) == []


def test_single_edge_marginal_statistical():
    # D=2, q=1: matched with probability exactly 1/3
    from onlinecolor.stream import make_stream

    s = make_stream(2, 2, [(0, 1)])
    cfg = MatcherConfig(delta=2, q=1)
    hits = 0
    trials = 30000
    for t in range(trials):
        got, _, _ = run_fast([0], [1], 2, 2.0, 1.0, rng_for(5, t))
        hits += got[0]
    p = hits / trials
    sigma = math.sqrt((1 / 3) * (2 / 3) / trials)
    assert abs(p - 1 / 3) < 4 * sigma


# -- greedy fallback ---------------------------------------------------------

def test_greedy_palette_examples():
    assert greedy_palette_coloring(star(3), 3) == [1, 2, 3]
    assert greedy_palette_coloring(path(2), 2) == [1, 2]


def test_greedy_fallback_exact_marginals_by_enumeration():
    for s, delta in ((path(2), 2), (star(3), 3), (path(1), 1)):
        colors = greedy_palette_coloring(s, delta)
        span = 2 * delta - 1
        for idx in range(s.m):
            hits = sum(1 for c_star in range(1, span + 1) if colors[idx] == c_star)
            assert Fraction(hits, span) == Fraction(1, span)


def test_greedy_fallback_runner():
    s = star(3)
    matching, c_star, colors = run_greedy_fallback(s, 3, seed=4)
    assert 1 <= c_star <= 5
    assert matching == [(e.u, e.v) for e, c in zip(s.arrivals, colors) if c == c_star]
    assert matching_is_valid(matching)
    # single edge with delta=1: always matched
    matching, c_star, _ = run_greedy_fallback(path(1), 1, seed=9)
    assert c_star == 1 and matching == [(0, 1)]
