import random

import pytest

from onlinecolor.stream import ArrivalStream, make_stream


def triangle(x=None):
    xs = [x, x, x] if x is not None else None
    return make_stream(3, 2, [(0, 1), (1, 2), (0, 2)], xs=xs)


def path(k: int, x=None):
    """Path with k edges 0-1-2-...-k."""
    edges = [(i, i + 1) for i in range(k)]
    xs = [x] * k if x is not None else None
    return make_stream(k + 1, 2 if k > 1 else 1, edges, xs=xs)


def star(k: int):
    return make_stream(k + 1, k, [(0, i + 1) for i in range(k)])


def random_simple_graph(rng: random.Random, n: int, m: int) -> ArrivalStream:
    """m distinct edges over n vertices, random arrival order."""
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng.shuffle(pairs)
    chosen = pairs[:m]
    deg = {}
    for u, v in chosen:
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    dmax = max(deg.values(), default=0)
    return make_stream(n, dmax, chosen)


@pytest.fixture
def rng():
    return random.Random(20260810)
