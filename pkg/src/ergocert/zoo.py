"""Built-in chain specifications."""

from __future__ import annotations

import numpy as np

from .errors import UnknownZooEntry


def t_grid(total: float, points: int = 20) -> list[float]:
    return [total * k / points for k in range(1, points + 1)]


def _spec(name, matrix, small_set, start, n, target, **extra) -> dict:
    m = len(matrix)
    labels = [f"s{k}" for k in range(m)]
    spec = {
        "schema_version": 1,
        "name": name,
        "states": labels,
        "matrix": [[float(v) for v in row] for row in matrix],
        "small_set": [labels[k] for k in small_set],
        "start": labels[start],
        "horizon": n,
        "functional": {"kind": "occupation", "target": [labels[k] for k in target]},
        "t_grid": t_grid(float(n)),
    }
    spec.update(extra)
    return spec


def two_state(a: float = 0.1, b: float = 0.2, n: int = 8) -> dict:
    return _spec("two-state", [[1 - a, a], [b, 1 - b]], [0], 0, n, [1])


def lazy_cycle(m: int = 3, laziness: float = 0.5, n: int = 8) -> dict:
    P = laziness * np.eye(m) + (1 - laziness) * np.roll(np.eye(m), 1, axis=1)
    return _spec("lazy-cycle", P.tolist(), [0], 0, n, [0])


def birth_death(m: int = 3, p: float = 0.3, q: float = 0.4, n: int = 8) -> dict:
    P = np.zeros((m, m))
    for k in range(m):
        up = p if k < m - 1 else 0.0
        down = q if k > 0 else 0.0
        if k < m - 1:
            P[k, k + 1] = up
        if k > 0:
            P[k, k - 1] = down
        P[k, k] = 1.0 - up - down
    return _spec("birth-death", P.tolist(), [0], 0, n, [m - 1])


def iid(pi=(0.5, 0.3, 0.2), n: int = 8) -> dict:
    pi = [float(v) for v in pi]
    m = len(pi)
    return _spec("iid", [pi] * m, list(range(m)), 0, n, [0])


def metropolis_two_valley(m: int = 7, barrier: float = 3.0, n: int = 6) -> dict:
    """Metropolis walk on a path graph, target ``exp(-V)`` with valleys at both ends."""
    k = np.arange(m)
    V = barrier * (1.0 - np.abs(2.0 * k / (m - 1) - 1.0))
    target = np.exp(-V)
    P = np.zeros((m, m))
    for x in range(m):
        for y in (x - 1, x + 1):
            if 0 <= y < m:
                P[x, y] = 0.5 * min(1.0, target[y] / target[x])
        P[x, x] = 1.0 - P[x].sum()
    return _spec("metropolis-two-valley", P.tolist(), [0], 0, n, list(range(m // 2 + 1, m)))


REGISTRY = {
    "two-state": (two_state, "two-state chain, flip rates (a, b)"),
    "lazy-cycle": (lazy_cycle, "lazy walk on a cycle of m states"),
    "birth-death": (birth_death, "birth-death chain on m states, up p / down q"),
    "iid": (iid, "i.i.d. kernel: every row equals pi"),
    "metropolis-two-valley": (metropolis_two_valley, "slow-mixing Metropolis walk on a double well"),
}


def names() -> list[str]:
    return list(REGISTRY)


def build(name: str, **params) -> dict:
    try:
        factory = REGISTRY[name][0]
    except KeyError:
        raise UnknownZooEntry(f"unknown zoo entry {name!r}; known: {', '.join(REGISTRY)}") from None
    return factory(**params)


def parse_param(text: str):
    key, _, raw = text.partition("=")
    if not raw:
        raise ValueError(f"parameter must look like key=value, got {text!r}")
    if "," in raw:
        return key, tuple(float(v) for v in raw.split(","))
    value = float(raw)
    return key, int(value) if value.is_integer() and key in ("m", "n") else value


def listing() -> list[dict]:
    return [{"name": k, "description": d} for k, (_, d) in REGISTRY.items()]

