"""Random placements, disk adjacency, and union-of-disks area moments.

The normalized union area alpha_k (area of k unit disks with centers drawn
uniformly in the unit disk, divided by pi) is supported on [1, 4]; its
moments drive the analytic decoding-probability formulas.  Moments are
estimated by plain Monte Carlo and cached to a plain-text table.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

HALF_SIDE = 0.5

MOMENT_FILE_VERSION = 1


class MomentTableError(ValueError):
    """Raised when a moment table file is malformed or violates invariants."""


@dataclass(frozen=True)
class Point2:
    """A position inside the closed unit square centered at the origin."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (abs(self.x) <= HALF_SIDE and abs(self.y) <= HALF_SIDE):
            raise ValueError(f"point ({self.x}, {self.y}) outside the unit square")


def uniform_point(rng: np.random.Generator) -> Point2:
    """Draw one point uniformly from the unit square."""
    x, y = rng.uniform(-HALF_SIDE, HALF_SIDE, size=2)
    return Point2(float(x), float(y))


def uniform_points(rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. uniform points as a (count, 2) array.

    Consumes the stream exactly like ``count`` successive ``uniform_point``
    calls.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    return rng.uniform(-HALF_SIDE, HALF_SIDE, size=(count, 2))


def _xy(p) -> tuple[float, float]:
    if isinstance(p, Point2):
        return p.x, p.y
    x, y = p
    return float(x), float(y)


def is_adjacent(u, b, r: float) -> bool:
    """Closed-ball adjacency test: Euclidean distance(u, b) <= r."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    ux, uy = _xy(u)
    bx, by = _xy(b)
    return (ux - bx) ** 2 + (uy - by) ** 2 <= r * r


class AreaEstimate(NamedTuple):
    """Monte Carlo estimate of a normalized union-of-disks area."""

    alpha: float
    stderr: float


def _centers_array(centers) -> np.ndarray:
    if isinstance(centers, np.ndarray):
        arr = np.asarray(centers, dtype=float)
    else:
        arr = np.asarray([_xy(c) for c in centers], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError("centers must be a nonempty sequence of 2-d points")
    norms2 = (arr**2).sum(axis=1)
    if np.any(norms2 > 1.0):
        raise ValueError("all centers must lie within the unit disk")
    return arr


def disk_union_area(centers, n_samples: int, rng: np.random.Generator) -> AreaEstimate:
    """Estimate area(union of unit disks at ``centers``) / pi by rejection counting.

    Sampling is uniform over the square [-2, 2]^2, which contains every
    admissible union; the hit fraction is rescaled by 16/pi.  Returns the
    estimate together with its binomial standard error.
    """
    arr = _centers_array(centers)
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    scale = 16.0 / math.pi
    hits = 0
    remaining = n_samples
    c_norm2 = (arr**2).sum(axis=1)
    # Chunked so huge sample counts stay within a few MB of temporaries.
    while remaining > 0:
        block = min(remaining, 1 << 16)
        pts = rng.uniform(-2.0, 2.0, size=(block, 2))
        d2 = pts @ arr.T
        d2 *= -2.0
        d2 += (pts**2).sum(axis=1)[:, None]
        d2 += c_norm2[None, :]
        hits += int((d2 <= 1.0).any(axis=1).sum())
        remaining -= block
    frac = hits / n_samples
    alpha = scale * frac
    stderr = scale * math.sqrt(frac * (1.0 - frac) / n_samples)
    return AreaEstimate(alpha, stderr)


def sample_unit_disk(rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` points uniformly from the closed unit disk (rejection)."""
    out = np.empty((count, 2))
    have = 0
    while have < count:
        cand = rng.uniform(-1.0, 1.0, size=(2 * (count - have) + 8, 2))
        keep = cand[(cand**2).sum(axis=1) <= 1.0]
        take = min(len(keep), count - have)
        out[have : have + take] = keep[:take]
        have += take
    return out


@dataclass(frozen=True)
class MomentTable:
    """Tabulated moments of the normalized union-of-disks area.

    ``moments[k-1, s-1]`` holds the s-th moment for k disks.  The k=1 row is
    analytic (the distribution is a Dirac at 1).  ``stderrs`` carries the
    Monte Carlo standard error of each entry for freshly tabulated tables and
    is ``None`` for tables loaded from disk.
    """

    k_max: int
    s_max: int
    moments: np.ndarray
    placements_per_k: int
    samples_per_placement: int
    seed: int
    stderrs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.moments.shape != (self.k_max, self.s_max):
            raise MomentTableError(
                f"moments shape {self.moments.shape} != ({self.k_max}, {self.s_max})"
            )
        self.validate()

    def validate(self) -> None:
        m = self.moments
        if not np.all(np.isfinite(m)):
            raise MomentTableError("non-finite moment entries")
        if not np.all(m[0] == 1.0):
            raise MomentTableError("k=1 row must be exactly 1 (Dirac at 1)")
        first = m[:, 0]
        if not (np.all(first >= 1.0) and np.all(first <= 4.0)):
            raise MomentTableError("first moments must lie in [1, 4]")
        if np.any(np.diff(first) < 0.0):
            raise MomentTableError("first moments must be nondecreasing in k")
        if self.s_max > 1:
            lo, hi = m[:, :-1], m[:, 1:]
            if np.any(hi < lo):
                raise MomentTableError("moments must be nondecreasing in s")
            if np.any(hi > 4.0 * lo):
                raise MomentTableError("moment ratio between adjacent s exceeds 4")

    def moment(self, k: int, s: int = 1) -> float:
        """The s-th moment for k disks (``s=0`` is the trivial unit moment)."""
        if not 1 <= k <= self.k_max:
            raise ValueError(f"k={k} outside tabulated range 1..{self.k_max}")
        if s == 0:
            return 1.0
        if not 1 <= s <= self.s_max:
            raise ValueError(f"s={s} outside tabulated range 1..{self.s_max}")
        return float(self.moments[k - 1, s - 1])

    @property
    def first_moments(self) -> np.ndarray:
        return self.moments[:, 0]

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(format_moment_table(self))

    @classmethod
    def load(cls, path) -> "MomentTable":
        with open(path, "r", encoding="ascii") as fh:
            return parse_moment_table(fh.read())


def format_moment_table(table: MomentTable) -> str:
    lines = [
        "# mbaloha moment table",
        f"format_version {MOMENT_FILE_VERSION}",
        f"k_max {table.k_max}",
        f"s_max {table.s_max}",
        f"placements_per_k {table.placements_per_k}",
        f"samples_per_placement {table.samples_per_placement}",
        f"seed {table.seed}",
    ]
    for row in table.moments:
        lines.append(" ".join(format(v, ".17g") for v in row))
    return "\n".join(lines) + "\n"


def parse_moment_table(text: str) -> MomentTable:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    header_keys = ("format_version", "k_max", "s_max", "placements_per_k", "samples_per_placement", "seed")
    if len(lines) < len(header_keys):
        raise MomentTableError("truncated moment table header")
    fields: dict[str, int] = {}
    for key, ln in zip(header_keys, lines):
        parts = ln.split()
        if len(parts) != 2 or parts[0] != key:
            raise MomentTableError(f"bad header line {ln!r}, expected {key!r}")
        try:
            fields[key] = int(parts[1])
        except ValueError as exc:
            raise MomentTableError(f"non-integer value in header line {ln!r}") from exc
    if fields["format_version"] != MOMENT_FILE_VERSION:
        raise MomentTableError(f"unsupported format_version {fields['format_version']}")
    k_max, s_max = fields["k_max"], fields["s_max"]
    if k_max < 1 or s_max < 1:
        raise MomentTableError("k_max and s_max must be positive")
    rows = lines[len(header_keys) :]
    if len(rows) != k_max:
        raise MomentTableError(f"expected {k_max} moment rows, found {len(rows)}")
    try:
        moments = np.array([[float(v) for v in row.split()] for row in rows])
    except ValueError as exc:
        raise MomentTableError("non-numeric moment entry") from exc
    if moments.shape != (k_max, s_max):
        raise MomentTableError(f"expected {s_max} columns per row")
    return MomentTable(
        k_max=k_max,
        s_max=s_max,
        moments=moments,
        placements_per_k=fields["placements_per_k"],
        samples_per_placement=fields["samples_per_placement"],
        seed=fields["seed"],
    )


def _lens_area(t: np.ndarray) -> np.ndarray:
    """Intersection area of two unit disks with centers ``t`` apart (t <= 2)."""
    half = np.clip(t / 2.0, 0.0, 1.0)
    return 2.0 * np.arccos(half) - half * np.sqrt(np.clip(4.0 - t * t, 0.0, None)) * 1.0


def mean_alpha_quadrature(k: int, intervals: int = 200_000) -> float:
    """Exact first moment of the normalized k-disk union area by quadrature.

    A point at distance t from the origin is covered by one random unit disk
    with probability lens(t)/pi, so the expected union area over the plane is
    the radial integral of 1 - (1 - lens(t)/pi)^k; normalized by pi this is
    2 int_0^2 t (1 - (1 - lens(t)/pi)^k) dt, evaluated by composite Simpson.
    Only the first moment has this closed integral form; higher moments need
    the Monte Carlo tabulation.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k == 1:
        return 1.0
    t = np.linspace(0.0, 2.0, 2 * intervals + 1)
    survival = 1.0 - _lens_area(t) / math.pi
    f = 2.0 * t * (1.0 - survival**k)
    weights = np.ones_like(t)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    h = 2.0 / (2 * intervals)
    return float((weights * f).sum() * h / 3.0)


def quadrature_first_moments(k_max: int) -> MomentTable:
    """First-moment table (s_max=1) with quadrature-exact entries.

    Used where the alternating series needs noise-free first moments; the
    placement/sample counts in the header are placeholders since nothing was
    sampled.
    """
    moments = np.array([[mean_alpha_quadrature(k)] for k in range(1, k_max + 1)])
    return MomentTable(
        k_max=k_max,
        s_max=1,
        moments=moments,
        placements_per_k=1,
        samples_per_placement=1,
        seed=0,
    )


def _placement_alpha(seed: int, k: int, placement: int, samples: int) -> float:
    """One placement's area estimate from its own derived substream."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, k, placement]))
    centers = sample_unit_disk(rng, k)
    return disk_union_area(centers, samples, rng).alpha


def _alpha_block(args) -> tuple[int, int, np.ndarray]:
    seed, k, lo, hi, samples = args
    vals = np.array([_placement_alpha(seed, k, j, samples) for j in range(lo, hi)])
    return k, lo, vals


def tabulate_moments(
    k_max: int,
    s_max: int,
    placements_per_k: int,
    samples_per_placement: int,
    seed: int,
    workers: int | None = None,
) -> MomentTable:
    """Monte Carlo tabulation of the moments ``E[alpha_k^s]``.

    Each (k, placement) pair samples from an independent substream derived
    from ``(seed, k, placement)``, so the result is identical for any worker
    count.  Workers only produce per-placement alpha values; moments are
    computed in a single aggregation pass.
    """
    for name, v in (
        ("k_max", k_max),
        ("s_max", s_max),
        ("placements_per_k", placements_per_k),
        ("samples_per_placement", samples_per_placement),
    ):
        if v < 1:
            raise ValueError(f"{name} must be positive, got {v}")

    block = 128
    jobs = [
        (seed, k, lo, min(lo + block, placements_per_k), samples_per_placement)
        for k in range(2, k_max + 1)
        for lo in range(0, placements_per_k, block)
    ]
    alphas = {k: np.empty(placements_per_k) for k in range(2, k_max + 1)}
    if workers is not None and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for k, lo, vals in pool.map(_alpha_block, jobs, chunksize=4):
                alphas[k][lo : lo + len(vals)] = vals
    else:
        for job in jobs:
            k, lo, vals = _alpha_block(job)
            alphas[k][lo : lo + len(vals)] = vals

    moments = np.ones((k_max, s_max))
    stderrs = np.zeros((k_max, s_max))
    powers = np.arange(1, s_max + 1)
    for k in range(2, k_max + 1):
        pw = alphas[k][:, None] ** powers[None, :]
        moments[k - 1] = pw.mean(axis=0)
        if placements_per_k > 1:
            stderrs[k - 1] = pw.std(axis=0, ddof=1) / math.sqrt(placements_per_k)
    return MomentTable(
        k_max=k_max,
        s_max=s_max,
        moments=moments,
        placements_per_k=placements_per_k,
        samples_per_placement=samples_per_placement,
        seed=seed,
        stderrs=stderrs,
    )
