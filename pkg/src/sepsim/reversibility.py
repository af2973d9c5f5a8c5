"""Reversibility checks: pairwise balance, reversed rates, cycle criterion.

The stationary lattice process satisfies detailed balance: every directed
transition rate weighted by the stationary probability of its source
equals the reverse rate weighted by the target's probability, for general
arrival/departure rates.  Consequently the time-reversed process has the
same rates as the forward one.  This module computes the residuals of
those statements so they can be asserted (or, for deliberately broken
generators, shown to fail).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LatticeState, decode
from .exact import (
    EDGE_CLASS_NAMES,
    EDGE_HOP,
    Generator,
    balance_residuals,
    build_generator,
    reverse_rates,
    solve_stationary,
)

__all__ = [
    "BalanceReport",
    "NotStationaryError",
    "detailed_balance_residual",
    "reversed_generator",
    "kolmogorov_cycle_residual",
    "uniformity_check",
    "perturb_hop_rate",
]


class NotStationaryError(ValueError):
    """The supplied distribution is not stationary for the generator."""


@dataclass(frozen=True)
class BalanceReport:
    """Pairwise-balance residuals |p_i * rate(i->j) - p_j * rate(j->i)|.

    ``worst_pair`` holds the ordered state pair attaining the maximum
    (decoded when the generator knows its model, state indices otherwise);
    ``by_class`` breaks the maximum down per transition class.
    """

    max_abs_residual: float
    worst_pair: tuple[LatticeState, LatticeState] | tuple[int, int] | None
    by_class: dict[str, float]


def detailed_balance_residual(gen: Generator, dist: np.ndarray) -> BalanceReport:
    """Evaluate pairwise balance of ``dist`` over every stored edge."""
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (gen.dim,):
        raise ValueError(f"distribution has shape {dist.shape}, expected ({gen.dim},)")
    if gen.n_edges == 0:
        return BalanceReport(0.0, None, {name: 0.0 for name in EDGE_CLASS_NAMES.values()})
    residuals = np.abs(dist[gen.rows] * gen.rates - dist[gen.cols] * reverse_rates(gen))
    worst = int(residuals.argmax())
    i, j = int(gen.rows[worst]), int(gen.cols[worst])
    if gen.params is not None:
        pair: tuple = (decode(i, gen.params), decode(j, gen.params))
    else:
        pair = (i, j)
    by_class = {}
    for code, name in EDGE_CLASS_NAMES.items():
        mask = gen.kinds == code
        by_class[name] = float(residuals[mask].max()) if mask.any() else 0.0
    return BalanceReport(float(residuals.max()), pair, by_class)


def reversed_generator(
    gen: Generator, dist: np.ndarray, *, stationarity_tol: float = 1e-8
) -> Generator:
    """Rates of the time-reversed process under stationary ``dist``.

    The reversed rate of i -> j is ``dist[j] * rate(j -> i) / dist[i]``;
    the support mirrors the forward support.  ``dist`` must be strictly
    positive and stationary for ``gen`` (balance residual at most
    ``stationarity_tol``); both are checked rather than assumed.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (gen.dim,):
        raise ValueError(f"distribution has shape {dist.shape}, expected ({gen.dim},)")
    if np.any(dist <= 0.0):
        raise ValueError("distribution must be strictly positive everywhere")
    residual = float(np.abs(balance_residuals(gen, dist)).max())
    if residual > stationarity_tol:
        raise NotStationaryError(
            f"distribution is not stationary: balance residual {residual:.3e} "
            f"> {stationarity_tol:.1e}"
        )
    reversed_rates = dist[gen.cols] * reverse_rates(gen) / dist[gen.rows]
    return Generator(
        dim=gen.dim,
        rows=gen.rows.copy(),
        cols=gen.cols.copy(),
        rates=reversed_rates,
        kinds=gen.kinds.copy(),
        params=gen.params,
    )


def _edge_maps(gen: Generator):
    rate_of: dict[tuple[int, int], float] = {}
    adjacency: dict[int, list[int]] = {}
    for i, j, rate in zip(gen.rows.tolist(), gen.cols.tolist(), gen.rates.tolist()):
        rate_of[(i, j)] = rate
        adjacency.setdefault(i, []).append(j)
    return rate_of, adjacency


def _cycle_residual(cycle: list[int], rate_of: dict[tuple[int, int], float]) -> float:
    forward = 1.0
    reverse = 1.0
    length = len(cycle)
    for pos in range(length):
        i, j = cycle[pos], cycle[(pos + 1) % length]
        forward *= rate_of[(i, j)]
        reverse *= rate_of.get((j, i), 0.0)
    return abs(forward - reverse) / forward


def kolmogorov_cycle_residual(
    gen: Generator,
    max_cycle_len: int,
    *,
    exhaustive_limit: int = 729,
    n_samples: int = 2000,
    seed: int = 0,
) -> float:
    """Worst relative mismatch of forward vs reverse rate products over
    directed cycles of length up to ``max_cycle_len``.

    Zero (up to rounding) characterises a reversible chain.  All simple
    cycles are enumerated when the state space has at most
    ``exhaustive_limit`` states (root-anchored DFS so each cycle is seen
    once); larger spaces fall back to sampling ``n_samples`` random simple
    paths and closing them where an edge back to the start exists, with a
    deterministic ``seed``.
    """
    if max_cycle_len < 3:
        raise ValueError(f"max_cycle_len must be >= 3, got {max_cycle_len}")
    rate_of, adjacency = _edge_maps(gen)
    worst = 0.0

    if gen.dim <= exhaustive_limit:
        for root in range(gen.dim):
            if root not in adjacency:
                continue
            path = [root]
            on_path = {root}

            def extend(node: int) -> None:
                nonlocal worst
                for succ in adjacency.get(node, ()):
                    if succ == root and len(path) >= 2:
                        worst = max(worst, _cycle_residual(path, rate_of))
                    elif succ > root and succ not in on_path and len(path) < max_cycle_len:
                        path.append(succ)
                        on_path.add(succ)
                        extend(succ)
                        path.pop()
                        on_path.remove(succ)

            extend(root)
        return worst

    rng = np.random.default_rng(seed)
    starts = rng.integers(gen.dim, size=n_samples)
    for start in starts.tolist():
        if start not in adjacency:
            continue
        path = [start]
        on_path = {start}
        node = start
        for _ in range(max_cycle_len - 1):
            candidates = [succ for succ in adjacency.get(node, ()) if succ not in on_path]
            if not candidates:
                break
            node = candidates[int(rng.integers(len(candidates)))]
            path.append(node)
            on_path.add(node)
            if (node, start) in rate_of and len(path) >= 2:
                worst = max(worst, _cycle_residual(path, rate_of))
    return worst


def uniformity_check(params) -> float:
    """Max deviation of the solved stationary distribution from uniform.

    Only meaningful when every type's arrival rate equals its departure
    rate, in which case the closed form collapses to the uniform
    distribution; raises otherwise.
    """
    if any(a != b for a, b in zip(params.alpha, params.beta)):
        raise ValueError("uniformity requires alpha[k] == beta[k] for every type")
    dist = solve_stationary(build_generator(params))
    return float(np.abs(dist - 1.0 / dist.size).max())


def perturb_hop_rate(gen: Generator, factor: float = 2.0) -> Generator:
    """Copy of ``gen`` with one directed hop rate scaled by ``factor``.

    Scaling a single direction breaks the hop-rate symmetry, producing a
    generator whose stationary distribution is no longer the product form;
    used as a negative control for the balance and cycle checks.
    """
    if factor <= 0.0 or factor == 1.0:
        raise ValueError(f"factor must be positive and different from 1, got {factor}")
    hop_edges = np.nonzero(gen.kinds == EDGE_HOP)[0]
    if hop_edges.size == 0:
        raise ValueError("generator has no hop transitions to perturb")
    rates = gen.rates.copy()
    rates[hop_edges[0]] *= factor
    return Generator(
        dim=gen.dim,
        rows=gen.rows.copy(),
        cols=gen.cols.copy(),
        rates=rates,
        kinds=gen.kinds.copy(),
        params=gen.params,
    )
