"""Command-line harness.

Subcommands: gen, match, round, color, oracle, mc, martingale,
counterexample, verify.  Reports go to stdout as JSON (default) or CSV via
--out; --out-file redirects to a path.  The exit code is 0 only when the
run's invariant-violation count is zero.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import colorer, harness, matcher, oracle, rounder, stream as streammod
from .profiles import resolve_profile
from .seeding import derive_seed


def _read_stream(path: str) -> streammod.ArrivalStream:
    with open(path, "r", encoding="utf-8") as fh:
        return streammod.parse_stream(fh.read())


def _write(args, text: str) -> None:
    if args.out_file:
        with open(args.out_file, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _common(parser: argparse.ArgumentParser, stream_arg: bool = True) -> None:
    if stream_arg:
        parser.add_argument("--stream", required=True, help="instance file")
    parser.add_argument("--profile", default="practical", help="theory|practical|file:<path>")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=10000)
    parser.add_argument("--out", choices=("json", "csv"), default="json")
    parser.add_argument("--out-file", default=None)
    parser.add_argument("--q", type=float, default=None, help="override the slack q")
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--c-round", dest="c_round", type=float, default=None)


def _matcher_config(args, s: streammod.ArrivalStream, mode: str = matcher.MODE_ANALYSIS_FRIENDLY):
    profile = resolve_profile(args.profile)
    delta = max(s.delta_bound, 2)
    if args.q is not None:
        q, fallback = args.q, False
    else:
        q, fallback = matcher.choose_q(delta, profile)
    if fallback:
        mode = matcher.MODE_GREEDY_FALLBACK
    return matcher.MatcherConfig(delta=delta, q=q, mode=mode, profile=profile), fallback


def cmd_gen(args) -> int:
    params = []
    if args.kind == "regular":
        params = [("n", args.n), ("delta", args.delta), ("seed", args.seed)]
    elif args.kind == "erdos_renyi":
        params = [("n", args.n), ("p", args.p), ("seed", args.seed)]
    elif args.kind == "complete_bipartite":
        params = [("a", args.a), ("b", args.b)]
    elif args.kind == "lower_bound_tree":
        params = [("delta", args.delta), ("q", args.q_int)]
    spec = streammod.GeneratorSpec(
        kind=args.kind,
        params=tuple(params),
        order=args.order,
        order_seed=derive_seed(args.seed, "order") if args.order == "random" else None,
    )
    s = spec.generate()
    if args.x_uniform is not None:
        s = streammod.with_uniform_x(s, args.x_uniform)
    if args.list_size is not None:
        s = streammod.with_range_lists(s, args.list_size)
    _write(args, streammod.emit_stream(s))
    return 0


def cmd_match(args) -> int:
    s = _read_stream(args.stream)
    mode = args.mode
    config, fallback = _matcher_config(args, s, mode)
    if config.mode == matcher.MODE_GREEDY_FALLBACK:
        matching, c_star, colors = matcher.run_greedy_fallback(s, s.delta_bound, args.seed)
        payload = {
            "mode": "greedy_fallback",
            "fallback_taken": True,
            "c_star": c_star,
            "matched_edges": matching,
            "violations": [],
        }
        _write(args, json.dumps(payload, indent=2))
        return 0
    matching, traces = matcher.run(s, config, args.seed)
    violations = matcher.check_run_invariants(s, config, traces)
    if args.out == "csv":
        rows = [matcher.StepTrace.CSV_HEADER] + [tr.csv_row() for tr in traces]
        _write(args, "\n".join(rows) + "\n")
    else:
        payload = {
            "mode": config.mode,
            "delta": config.delta,
            "q": config.q,
            "fallback_taken": fallback,
            "seed": args.seed,
            "matched_edges": matching,
            "overflow_count": sum(tr.overflow for tr in traces),
            "gate_fires": sum(tr.gate_fired for tr in traces),
            "violations": violations,
        }
        _write(args, json.dumps(payload, indent=2))
    if violations:
        print(f"{len(violations)} invariant violations", file=sys.stderr)
    return 1 if violations else 0


def cmd_round(args) -> int:
    s = _read_stream(args.stream)
    if not s.is_fractional:
        print("round needs a stream with x= values", file=sys.stderr)
        return 2
    profile = resolve_profile(args.profile)
    epsilon = args.epsilon if args.epsilon is not None else max(
        e.x for e in s.arrivals if e.x is not None
    )
    c_round = args.c_round if args.c_round is not None else profile.c_round
    config = rounder.RoundingConfig(epsilon=epsilon, c_round=c_round)
    matching, traces = rounder.round_run(s, config, args.seed)
    violations = rounder.check_round_invariants(s, config, traces)
    if args.out == "csv":
        rows = [matcher.StepTrace.CSV_HEADER] + [tr.csv_row() for tr in traces]
        _write(args, "\n".join(rows) + "\n")
    else:
        payload = {
            "epsilon": epsilon,
            "c_round": c_round,
            "s": config.s,
            "seed": args.seed,
            "matched_edges": matching,
            "violations": violations,
        }
        _write(args, json.dumps(payload, indent=2))
    return 1 if violations else 0


def cmd_color(args) -> int:
    s = _read_stream(args.stream)
    profile = resolve_profile(args.profile)
    if args.q is not None:
        profile = profile.replace(q_override=args.q)
    if args.mode == "plain":
        result = colorer.plain_color(s, s.delta_bound, profile, args.seed)
        palettes = range(1, (result.budget or 0) + 1) if result.budget else None
    elif args.mode == "list":
        result = colorer.list_color(s, profile, args.seed)
        palettes = [e.colors for e in s.arrivals]
    else:
        result = colorer.local_color(s, profile, args.seed)
        palettes = [range(1, b + 1) for b in result.local_bounds]
    violations = harness.validate_coloring(
        s, result, palettes=None if result.fallback_taken else palettes
    )
    payload = result.report(profile)
    payload["violations"] = violations
    _write(args, json.dumps(payload, indent=2))
    return 1 if violations else 0


def cmd_oracle(args) -> int:
    s = _read_stream(args.stream)
    if args.epsilon is not None or s.is_fractional:
        epsilon = args.epsilon if args.epsilon is not None else max(
            e.x for e in s.arrivals if e.x is not None
        )
        c_round = args.c_round if args.c_round is not None else resolve_profile(args.profile).c_round
        config = rounder.RoundingConfig(epsilon=epsilon, c_round=c_round)
    else:
        config, fallback = _matcher_config(args, s)
        if fallback:
            print("q > delta/4 under this profile: the fallback matches each edge "
                  "with probability exactly 1/(2*delta-1); no enumeration needed",
                  file=sys.stderr)
            return 2
    res = oracle.exact_marginals(s, config, exact=args.exact)
    drift = max(
        abs(cs - float(ex)) for cs, ex in zip(res.conditional_sum, res.expected)
    ) if s.m else 0.0
    if args.out == "csv":
        rows = [res.CSV_HEADER] + res.csv_rows(s)
        _write(args, "\n".join(rows) + "\n")
    else:
        payload = {
            "marginals": [float(x) for x in res.marginal],
            "conditional_sums": [float(x) for x in res.conditional_sum],
            "expected": [float(x) for x in res.expected],
            "leaf_total": float(res.leaf_total),
            "branches": res.branches,
            "max_conditional_drift": drift,
        }
        _write(args, json.dumps(payload, indent=2))
    return 0 if drift <= 1e-9 else 1


def cmd_mc(args) -> int:
    s = _read_stream(args.stream)
    config, _ = _matcher_config(args, s)
    report = harness.mc_marginals(s, config, args.trials, args.seed)
    _write(args, report.edges_csv() if args.out == "csv" else report.to_json())
    return 1 if report.violation_count else 0


def cmd_martingale(args) -> int:
    s = _read_stream(args.stream)
    config, fallback = _matcher_config(args, s)
    if fallback:
        print("martingale diagnostics apply to the multiplicative matcher; "
              "this profile falls back to the greedy matcher (q > delta/4)",
              file=sys.stderr)
        return 2
    report = harness.martingale_monitor(s, config, args.vertex, args.trials, args.seed)
    _write(args, json.dumps(report.as_dict(), indent=2))
    ok = not report.violations and report.ci_contains_y0
    return 0 if ok else 1


def cmd_counterexample(args) -> int:
    result = harness.counterexample_demo(args.delta, args.q_int)
    _write(args, json.dumps(result, indent=2))
    return 0


def cmd_verify(args) -> int:
    s = _read_stream(args.stream)
    if s.is_fractional:
        epsilon = args.epsilon if args.epsilon is not None else max(
            e.x for e in s.arrivals if e.x is not None
        )
        c_round = args.c_round if args.c_round is not None else resolve_profile(args.profile).c_round
        config = rounder.RoundingConfig(epsilon=epsilon, c_round=c_round)
    else:
        config, fallback = _matcher_config(args, s)
        if fallback:
            print("this profile falls back to the greedy matcher; verify covers "
                  "the multiplicative matcher (pass an explicit --q)", file=sys.stderr)
            return 2
    result = harness.verify_stream(s, config, args.trials, args.seed)
    _write(args, json.dumps(result, indent=2))
    n_bad = len(result["violations"])
    if n_bad:
        print(f"{n_bad} violations", file=sys.stderr)
    return 1 if n_bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="onlinecolor", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--kind", required=True,
                   choices=("regular", "erdos_renyi", "complete_bipartite", "lower_bound_tree"))
    g.add_argument("--n", type=int, default=16)
    g.add_argument("--delta", type=int, default=4)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--a", type=int, default=4)
    g.add_argument("--b", type=int, default=4)
    g.add_argument("--q-int", type=int, default=1, help="q for the lower-bound tree")
    g.add_argument("--order", choices=("given", "random", "reversed"), default="given")
    g.add_argument("--x-uniform", type=float, default=None, help="annotate every edge with x")
    g.add_argument("--list-size", type=int, default=None, help="annotate every edge with {1..k}")
    _common(g, stream_arg=False)
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("match", help="run the online matcher")
    m.add_argument("--mode", choices=(matcher.MODE_ANALYSIS_FRIENDLY, matcher.MODE_NATURAL,
                                      matcher.MODE_GREEDY_FALLBACK),
                   default=matcher.MODE_ANALYSIS_FRIENDLY)
    _common(m)
    m.set_defaults(func=cmd_match)

    r = sub.add_parser("round", help="round a fractional matching online")
    _common(r)
    r.set_defaults(func=cmd_round)

    c = sub.add_parser("color", help="run the coloring pipeline")
    c.add_argument("--mode", choices=("plain", "list", "local"), default="plain")
    _common(c)
    c.set_defaults(func=cmd_color)

    o = sub.add_parser("oracle", help="exact marginals by branch enumeration")
    o.add_argument("--exact", action="store_true", help="rational arithmetic (m <= 12)")
    _common(o)
    o.set_defaults(func=cmd_oracle)

    mc = sub.add_parser("mc", help="Monte-Carlo marginals")
    _common(mc)
    mc.set_defaults(func=cmd_mc)

    mg = sub.add_parser("martingale", help="martingale diagnostics for one vertex")
    mg.add_argument("--vertex", type=int, default=0)
    _common(mg)
    mg.set_defaults(func=cmd_martingale)

    ce = sub.add_parser("counterexample", help="the naive-matcher overflow demo")
    ce.add_argument("--delta", type=int, default=10)
    ce.add_argument("--q-int", type=int, default=2)
    _common(ce, stream_arg=False)
    ce.set_defaults(func=cmd_counterexample)

    v = sub.add_parser("verify", help="oracle vs Monte-Carlo plus invariant audit")
    _common(v)
    v.set_defaults(func=cmd_verify)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        # StreamError / MatcherError / ScheduleError / PartitionError and
        # unreadable files all land here; exit 2 distinguishes config errors
        # from invariant violations (exit 1)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
