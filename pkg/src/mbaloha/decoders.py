"""Decoding algorithms on the station/active-user graph.

Non-cooperative decoding is one parallel round: a station delivers a user iff
that user is its only active neighbor.  Cooperative decoding iterates that
rule as synchronous peeling: every degree-1 station resolves its user, the
user's edges are removed, and the next round starts; it stops when no
degree-1 station remains (a stopping set).  The brute-force oracle integrates
either decoder exactly over all 2^n activation masks of a fixed placement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .scenario import BipartiteGraph, NetworkInstance, build_adjacency

NONCOOPERATIVE = "non-cooperative"
COOPERATIVE = "cooperative"

BRUTE_FORCE_MAX_USERS = 20


@dataclass(frozen=True)
class DecodingResult:
    """Outcome of one decode: collected mask plus the per-round trace."""

    collected: np.ndarray
    iterations_run: int
    per_iteration_collected: list[int]
    mode: str
    per_iteration_stations: list[int] | None = None

    @property
    def collected_count(self) -> int:
        return int(self.collected.sum())


def decode_noncooperative(graph: BipartiteGraph) -> DecodingResult:
    """Single-round decoding by isolated stations."""
    collected = np.zeros(graph.n_users, dtype=bool)
    stations = 0
    for nbrs in graph.station_neighbors:
        if len(nbrs) == 1:
            collected[nbrs[0]] = True
            stations += 1
    return DecodingResult(collected, 1, [int(collected.sum())], NONCOOPERATIVE, [stations])


def decode_cooperative(graph: BipartiteGraph) -> DecodingResult:
    """Parallel-round peeling on the decoding graph.

    Round t resolves all currently degree-1 stations at once; duplicate
    deliveries of the same user within a round count once.  The input graph
    is not mutated.
    """
    deg = [len(nbrs) for nbrs in graph.station_neighbors]
    # Sum-of-neighbors trick: once deg[l] == 1 the sum IS the remaining user.
    rem = [sum(nbrs) for nbrs in graph.station_neighbors]
    collected = np.zeros(graph.n_users, dtype=bool)
    trace: list[int] = []
    station_trace: list[int] = []
    iterations = 0
    while True:
        fired = [l for l in range(graph.n_stations) if deg[l] == 1]
        if not fired:
            break
        ready = sorted({rem[l] for l in fired})
        iterations += 1
        trace.append(len(ready))
        station_trace.append(len(fired))
        for u in ready:
            collected[u] = True
            for l in graph.user_neighbors[u]:
                deg[l] -= 1
                rem[l] -= u
    assert iterations <= graph.n_stations
    return DecodingResult(collected, iterations, trace, COOPERATIVE, station_trace)


def decode_cooperative_sequential(
    graph: BipartiteGraph, rng: np.random.Generator | None = None
) -> DecodingResult:
    """Peeling one degree-1 station at a time, in random order.

    Differential-test oracle for the parallel-round decoder: the final
    collected set must coincide for every processing order.
    """
    deg = [len(nbrs) for nbrs in graph.station_neighbors]
    rem = [sum(nbrs) for nbrs in graph.station_neighbors]
    collected = np.zeros(graph.n_users, dtype=bool)
    trace: list[int] = []
    while True:
        ready = [l for l in range(graph.n_stations) if deg[l] == 1]
        if not ready:
            break
        l = ready[0] if rng is None else ready[int(rng.integers(len(ready)))]
        u = rem[l]
        collected[u] = True
        trace.append(1)
        for k in graph.user_neighbors[u]:
            deg[k] -= 1
            rem[k] -= u
    return DecodingResult(collected, len(trace), trace, COOPERATIVE, [1] * len(trace))


def subgraph_for_mask(
    n_users: int,
    full_station_neighbors: list[list[int]],
    full_user_neighbors: dict[int, list[int]],
    mask,
) -> BipartiteGraph:
    """Restrict a full (all-users) adjacency to one activation mask."""
    station_neighbors = [[u for u in nbrs if mask[u]] for nbrs in full_station_neighbors]
    user_neighbors = {u: full_user_neighbors[u] for u in range(n_users) if mask[u]}
    return BipartiteGraph(
        n_users=n_users,
        n_stations=len(full_station_neighbors),
        station_neighbors=station_neighbors,
        user_neighbors=user_neighbors,
    )


def full_adjacency(instance: NetworkInstance) -> BipartiteGraph:
    """Adjacency over all users regardless of activity (mask applied later)."""
    forced = NetworkInstance(
        instance.params,
        instance.user_xy,
        instance.station_xy,
        np.ones(instance.params.n, dtype=bool),
    )
    return build_adjacency(forced)


class CollectionProbabilities(NamedTuple):
    """Per-user collection probabilities for both decoding modes."""

    noncooperative: np.ndarray
    cooperative: np.ndarray


def brute_force_collection_probability(
    instance: NetworkInstance, p: float | None = None
) -> CollectionProbabilities:
    """Exact P(user collected) by enumerating all 2^n activation masks.

    The instance's own mask is ignored; each subset S of users is weighted
    p^|S| (1-p)^(n-|S|) and both decoders run on the induced subgraph.
    """
    n = instance.params.n
    if n > BRUTE_FORCE_MAX_USERS:
        raise ValueError(f"enumeration limited to n <= {BRUTE_FORCE_MAX_USERS}, got {n}")
    if p is None:
        p = instance.params.p
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    full = full_adjacency(instance)
    prob_nc = np.zeros(n)
    prob_coop = np.zeros(n)
    mask = np.zeros(n, dtype=bool)
    for bits in range(1 << n):
        active = [i for i in range(n) if bits >> i & 1]
        weight = p ** len(active) * (1.0 - p) ** (n - len(active))
        if weight == 0.0:
            continue
        mask[:] = False
        mask[active] = True
        sub = subgraph_for_mask(n, full.station_neighbors, full.user_neighbors, mask)
        prob_nc += weight * decode_noncooperative(sub).collected
        prob_coop += weight * decode_cooperative(sub).collected
    return CollectionProbabilities(prob_nc, prob_coop)


class MaskMonteCarlo(NamedTuple):
    """Per-user mask-sampled estimates on a fixed placement."""

    prob_noncoop: np.ndarray
    prob_coop: np.ndarray
    stderr_noncoop: np.ndarray
    stderr_coop: np.ndarray
    n_masks: int


def mask_monte_carlo(
    instance: NetworkInstance,
    n_masks: int,
    seed: int,
    p: float | None = None,
) -> MaskMonteCarlo:
    """Estimate per-user collection probabilities over random activation masks.

    Runs the real decoders mask by mask; the unconditional per-user estimate
    is (times collected)/n_masks with its binomial standard error.
    """
    n = instance.params.n
    if p is None:
        p = instance.params.p
    full = full_adjacency(instance)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    hits_nc = np.zeros(n, dtype=np.int64)
    hits_coop = np.zeros(n, dtype=np.int64)
    block = 4096
    remaining = n_masks
    while remaining > 0:
        b = min(block, remaining)
        masks = rng.random((b, n)) < p
        for row in masks:
            sub = subgraph_for_mask(n, full.station_neighbors, full.user_neighbors, row)
            hits_nc += decode_noncooperative(sub).collected
            hits_coop += decode_cooperative(sub).collected
        remaining -= b
    ph_nc = hits_nc / n_masks
    ph_coop = hits_coop / n_masks
    se = lambda ph: np.sqrt(ph * (1.0 - ph) / n_masks)
    return MaskMonteCarlo(ph_nc, ph_coop, se(ph_nc), se(ph_coop), n_masks)


def format_trace(result: DecodingResult) -> str:
    """Per-iteration trace dump for debugging fixtures."""
    lines = [f"mode {result.mode}", f"iterations {result.iterations_run}"]
    stations = result.per_iteration_stations or [0] * result.iterations_run
    for t, (n_stations, count) in enumerate(zip(stations, result.per_iteration_collected), start=1):
        lines.append(f"iteration {t} stations_resolved {n_stations} collected {count}")
    lines.append(f"total {result.collected_count}")
    return "\n".join(lines) + "\n"
