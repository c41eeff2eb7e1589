"""Hand-built decoding-graph fixtures with hand-executed expected outcomes."""

from mbaloha.scenario import BipartiteGraph


def graph_from_station_lists(n_users: int, station_neighbors: list[list[int]], active=None) -> BipartiteGraph:
    if active is None:
        active = range(n_users)
    user_neighbors: dict[int, list[int]] = {u: [] for u in active}
    for l, nbrs in enumerate(station_neighbors):
        for u in nbrs:
            user_neighbors[u].append(l)
    return BipartiteGraph(
        n_users=n_users,
        n_stations=len(station_neighbors),
        station_neighbors=[list(nbrs) for nbrs in station_neighbors],
        user_neighbors=user_neighbors,
    )


def ten_user_showcase() -> BipartiteGraph:
    """Ten active users, nine stations, worked out by hand.

    Round 1 resolves u0..u3 (the four isolated-clean users), round 2 resolves
    u4..u6, round 3 resolves u7..u8; u9 is active but covered by no station
    and stays uncollected.  Single-round decoding therefore collects exactly
    4 users, peeling collects 9 in 3 rounds.
    """
    return graph_from_station_lists(
        10,
        [
            [0],
            [1],
            [2],
            [3],
            [0, 4],
            [1, 5],
            [2, 3, 6],
            [4, 5, 7],
            [6, 8],
        ],
    )


def four_cycle() -> BipartiteGraph:
    """Two users sharing two stations: the minimal stopping set."""
    return graph_from_station_lists(2, [[0, 1], [0, 1]])


def two_station_chain() -> BipartiteGraph:
    """u0 at b0 and b1, u1 at b1 only: b0 frees u1's station in round 2."""
    return graph_from_station_lists(2, [[0], [0, 1]])
