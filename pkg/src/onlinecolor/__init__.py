"""Online matching, fractional-matching rounding, and online edge coloring
under adversarial edge arrivals, with exact-probability and Monte-Carlo
verification machinery."""

from .colorer import (
    ColoringResult,
    DegreeSchedule,
    RangePartition,
    SampledPartition,
    degree_schedule,
    greedy_color,
    list_color,
    list_prune,
    local_color,
    local_lists,
    plain_color,
    recurrence_step,
    run_generic,
)
from .harness import (
    MartingaleTrace,
    RunReport,
    counterexample_demo,
    freedman_bound,
    freedman_matcher_check,
    martingale_monitor,
    martingale_trace,
    mc_marginals,
    validate_coloring,
    verify_stream,
    wilson_interval,
)
from .matcher import (
    MODE_ANALYSIS_FRIENDLY,
    MODE_GREEDY_FALLBACK,
    MODE_NATURAL,
    MatcherConfig,
    MatcherState,
    choose_q,
    run,
    run_greedy_fallback,
)
from .oracle import exact_colored_marginals, exact_marginals
from .profiles import ConstantsProfile, resolve_profile
from .rounder import RounderState, RoundingConfig, config_for_loss, round_run, s_eps
from .stream import (
    ArrivalStream,
    EdgeArrival,
    GeneratorSpec,
    emit_stream,
    gen_complete_bipartite,
    gen_erdos_renyi,
    gen_lower_bound_tree,
    gen_regular,
    parse_stream,
    reorder,
    with_range_lists,
    with_uniform_x,
)

__version__ = "0.1.0"
