"""One slot's network realization and its decoding graph.

Users and base stations are placed uniformly in the unit square; each user
is independently active with probability p.  The decoding graph links every
station to the active users within distance r.  Degree laws and the coverage
probability are provided in both their finite (binomial) and asymptotic
(Poisson) forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import HALF_SIDE, uniform_points

REL_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """System parameters for a single slot.

    n users, m base stations, adjacency radius r (at most 1/4 so the
    boundary-strip argument applies), activation probability p.
    """

    n: int
    m: int
    r: float
    p: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not 0.0 < self.r <= 0.25:
            raise ValueError(f"r must lie in (0, 1/4], got {self.r}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if abs(self.psi - self.load_g * self.lam) > REL_TOL * max(1.0, self.psi):
            raise ValueError("inconsistent derived load: psi != G * lambda")

    @property
    def load_g(self) -> float:
        """Normalized load G = n p / m."""
        return self.n * self.p / self.m

    @property
    def lam(self) -> float:
        """Mean number of stations adjacent to a nominally placed user."""
        return self.m * self.r * self.r * math.pi

    @property
    def psi(self) -> float:
        """Mean number of active users adjacent to a nominally placed station."""
        return self.n * self.p * self.r * self.r * math.pi


@dataclass(frozen=True)
class NetworkInstance:
    """One slot's realization: positions plus the activation mask.

    Positions are stored as (n, 2) and (m, 2) float arrays.
    """

    params: SystemParams
    user_xy: np.ndarray
    station_xy: np.ndarray
    active: np.ndarray

    def __post_init__(self) -> None:
        n, m = self.params.n, self.params.m
        if self.user_xy.shape != (n, 2) or self.station_xy.shape != (m, 2):
            raise ValueError("position arrays do not match params")
        if self.active.shape != (n,) or self.active.dtype != np.bool_:
            raise ValueError("active must be a boolean mask of length n")
        for arr in (self.user_xy, self.station_xy):
            if arr.size and np.abs(arr).max() > HALF_SIDE:
                raise ValueError("positions must lie inside the unit square")

    @property
    def active_count(self) -> int:
        return int(self.active.sum())


@dataclass(frozen=True)
class BipartiteGraph:
    """Station <-> active-user adjacency of one realization.

    ``station_neighbors[l]`` lists the active users within distance r of
    station l; ``user_neighbors`` maps every active user (including isolated
    ones) to its stations.  Inactive users appear nowhere.
    """

    n_users: int
    n_stations: int
    station_neighbors: list[list[int]]
    user_neighbors: dict[int, list[int]]


def generate_instance(params: SystemParams, rng: np.random.Generator) -> NetworkInstance:
    """Draw user positions, station positions, then the activation mask."""
    user_xy = uniform_points(rng, params.n)
    station_xy = uniform_points(rng, params.m)
    active = rng.random(params.n) < params.p
    return NetworkInstance(params, user_xy, station_xy, active)


def build_adjacency(instance: NetworkInstance) -> BipartiteGraph:
    """Exhaustive all-pairs distance test between stations and active users."""
    r2 = instance.params.r**2
    active_idx = np.flatnonzero(instance.active)
    m = instance.params.m
    station_neighbors: list[list[int]] = [[] for _ in range(m)]
    user_neighbors: dict[int, list[int]] = {int(u): [] for u in active_idx}
    if active_idx.size:
        diff = instance.station_xy[:, None, :] - instance.user_xy[None, active_idx, :]
        adj = (diff**2).sum(axis=2) <= r2
        ls, js = np.nonzero(adj)
        for l, j in zip(ls.tolist(), js.tolist()):
            u = int(active_idx[j])
            station_neighbors[l].append(u)
            user_neighbors[u].append(l)
    return BipartiteGraph(
        n_users=instance.params.n,
        n_stations=m,
        station_neighbors=station_neighbors,
        user_neighbors=user_neighbors,
    )


def _binom_pmf(d: int, total: int, q: float) -> float:
    if not 0 <= d <= total:
        raise ValueError(f"degree {d} outside 0..{total}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"success probability {q} outside [0, 1]")
    if q == 0.0:
        return 1.0 if d == 0 else 0.0
    if q == 1.0:
        return 1.0 if d == total else 0.0
    log_pmf = (
        math.lgamma(total + 1)
        - math.lgamma(d + 1)
        - math.lgamma(total - d + 1)
        + d * math.log(q)
        + (total - d) * math.log1p(-q)
    )
    return math.exp(log_pmf)


def user_degree_pmf(d: int, m: int, r: float) -> float:
    """P(user has exactly d adjacent stations | nominal placement)."""
    return _binom_pmf(d, m, r * r * math.pi)


def station_degree_pmf(d: int, n: int, p: float, r: float) -> float:
    """P(station hears exactly d active users among n-1 | nominal placement).

    One fixed user is excluded from the count, matching the conditioning used
    by the analytic formulas.
    """
    return _binom_pmf(d, n - 1, p * r * r * math.pi)


def poisson_pmf(d: int, mean: float) -> float:
    """Poisson pmf, evaluated in log space for large d."""
    if mean < 0:
        raise ValueError(f"mean must be nonnegative, got {mean}")
    if d < 0:
        raise ValueError(f"degree must be nonnegative, got {d}")
    if mean == 0.0:
        return 1.0 if d == 0 else 0.0
    return math.exp(-mean + d * math.log(mean) - math.lgamma(d + 1))


def coverage_probability(lam: float) -> float:
    """Asymptotic probability that a user is heard by at least one station."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return -math.expm1(-lam)


def lambda_min(eps: float) -> float:
    """Smallest lambda guaranteeing coverage at least 1 - eps."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return math.log(1.0 / eps)


def nominal_user_mask(instance: NetworkInstance) -> np.ndarray:
    """Users placed in the inner square at distance >= 2r from the boundary."""
    bound = HALF_SIDE - 2.0 * instance.params.r
    return np.abs(instance.user_xy).max(axis=1) <= bound


def nominal_station_mask(instance: NetworkInstance) -> np.ndarray:
    bound = HALF_SIDE - 2.0 * instance.params.r
    return np.abs(instance.station_xy).max(axis=1) <= bound


def dump_instance(instance: NetworkInstance) -> str:
    """Plain-text fixture format: params header, user rows, station rows."""
    p = instance.params
    lines = [f"n {p.n}", f"m {p.m}", f"r {format(p.r, '.17g')}", f"p {format(p.p, '.17g')}"]
    for (x, y), a in zip(instance.user_xy, instance.active):
        lines.append(f"{format(x, '.17g')} {format(y, '.17g')} {int(a)}")
    for x, y in instance.station_xy:
        lines.append(f"{format(x, '.17g')} {format(y, '.17g')}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> NetworkInstance:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4:
        raise ValueError("truncated instance header")
    header: dict[str, str] = {}
    for key, ln in zip(("n", "m", "r", "p"), lines):
        parts = ln.split()
        if len(parts) != 2 or parts[0] != key:
            raise ValueError(f"bad instance header line {ln!r}")
        header[key] = parts[1]
    params = SystemParams(int(header["n"]), int(header["m"]), float(header["r"]), float(header["p"]))
    body = lines[4:]
    if len(body) != params.n + params.m:
        raise ValueError("instance row count does not match header")
    users = body[: params.n]
    user_xy = np.array([[float(v) for v in ln.split()[:2]] for ln in users])
    active = np.array([bool(int(ln.split()[2])) for ln in users])
    station_xy = np.array([[float(v) for v in ln.split()] for ln in body[params.n :]])
    station_xy = station_xy.reshape(params.m, 2)
    return NetworkInstance(params, user_xy, station_xy, active)
