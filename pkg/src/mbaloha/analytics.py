"""Closed-form and heuristic performance formulas.

The non-cooperative collection probability is an inclusion-exclusion series
over the number k of stations jointly empty of interferers; the k-th term
couples a degree weight (binomial zeta_k, or its Poisson limit lambda^k/k!)
with a moment of the normalized union-of-disks area.  The cooperative
heuristic chains two peeling iterations of the same structure.  Truncated
alternating series can leave [0, 1]; values are clamped and flagged rather
than silently repaired.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import MomentTable
from .scenario import SystemParams, coverage_probability

REL_TOL = 1e-12

#: Truncation is unreliable once lambda approaches k_max; see the warning below.
TRUNCATION_SAFE_FACTOR = 0.25

_MAX_CANCELLATION_DIGITS = 12.0


@dataclass(frozen=True)
class AsymptoticParams:
    """Asymptotic regime parameters: lambda, psi = G * lambda, and p."""

    lam: float
    psi: float
    load_g: float
    p: float

    def __post_init__(self) -> None:
        if self.lam < 0 or self.psi < 0 or self.load_g < 0:
            raise ValueError("lambda, psi and G must be nonnegative")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if abs(self.psi - self.load_g * self.lam) > REL_TOL * max(1.0, self.psi):
            raise ValueError("psi and G * lambda disagree")

    @classmethod
    def from_load(cls, lam: float, load_g: float, p: float) -> "AsymptoticParams":
        return cls(lam=lam, psi=load_g * lam, load_g=load_g, p=p)

    @classmethod
    def from_system(cls, params: SystemParams) -> "AsymptoticParams":
        return cls(lam=params.lam, psi=params.psi, load_g=params.load_g, p=params.p)


@dataclass(frozen=True)
class SeriesValue:
    """A truncated-series value clamped to [0, 1] with a diagnostic flag."""

    value: float
    clamped: bool
    raw: float


@dataclass(frozen=True)
class HeuristicState:
    """Two-iteration peeling heuristic state.

    sigma1: P(user uncollected after round 1 | active); rho1: P(a station
    still hears undecoded interferers after round 1); sigma2: P(user
    uncollected after round 2 | active).
    """

    sigma1: float
    rho1: float
    sigma2: float


@dataclass(frozen=True)
class HeuristicResult:
    state: HeuristicState
    conditional: float
    clamped: tuple[str, ...]


@dataclass(frozen=True)
class FiniteBracket:
    """Theorem-style bracket on the unconditional collection probability."""

    lower: float
    upper: float
    conditional_nominal: float


def _clamp01(raw: float) -> tuple[float, bool]:
    if raw < 0.0:
        return 0.0, True
    if raw > 1.0:
        return 1.0, True
    return raw, False


def _poisson_weights(rate: float, k_max: int) -> np.ndarray:
    """rate^k / k! for k = 1..k_max, via log space."""
    if rate == 0.0:
        return np.zeros(k_max)
    ks = np.arange(1, k_max + 1)
    return np.exp(ks * math.log(rate) - np.array([math.lgamma(k + 1) for k in ks]))


def _alternating_sum(weights: np.ndarray, factors: np.ndarray) -> float:
    signs = np.where(np.arange(len(weights)) % 2 == 0, 1.0, -1.0)
    return math.fsum((signs * weights * factors).tolist())


def _check_truncation(lam: float, k_max: int) -> None:
    if lam > TRUNCATION_SAFE_FACTOR * k_max:
        warnings.warn(
            f"series truncated at k_max={k_max} is unreliable for lambda={lam:g}; "
            f"use k_max >= {math.ceil(lam / TRUNCATION_SAFE_FACTOR)}",
            stacklevel=3,
        )


def _first_moments(table: MomentTable, k_max: int | None) -> np.ndarray:
    if k_max is None:
        k_max = table.k_max
    if not 1 <= k_max <= table.k_max:
        raise ValueError(f"k_max={k_max} exceeds tabulated k_max={table.k_max}")
    return table.first_moments[:k_max]


def zeta(k: int, m: int, r: float) -> float:
    """Sum over d >= k of C(d, k) times the binomial user-degree pmf.

    Evaluated by direct log-space summation; tends to lambda^k / k! for
    large m at fixed lambda = m r^2 pi.
    """
    if not 1 <= k <= m:
        raise ValueError(f"k={k} outside 1..{m}")
    q = r * r * math.pi
    if not 0.0 < q < 1.0:
        raise ValueError(f"r^2 pi must lie in (0, 1), got {q}")
    log_q, log_1mq = math.log(q), math.log1p(-q)
    lg_m1 = math.lgamma(m + 1)
    lg_k1 = math.lgamma(k + 1)
    terms = []
    for d in range(k, m + 1):
        log_binom_pmf = lg_m1 - math.lgamma(d + 1) - math.lgamma(m - d + 1) + d * log_q + (m - d) * log_1mq
        log_choose = math.lgamma(d + 1) - lg_k1 - math.lgamma(d - k + 1)
        terms.append(math.exp(log_choose + log_binom_pmf))
    return math.fsum(terms)


def collection_prob_noncoop_asymptotic(
    params: AsymptoticParams, table: MomentTable, k_max: int | None = None
) -> SeriesValue:
    """Truncated series for P(collected | active) without cooperation.

    Uses the first area moments; the unconditional probability is p times
    the returned value.
    """
    alphas = _first_moments(table, k_max)
    _check_truncation(params.lam, len(alphas))
    weights = _poisson_weights(params.lam, len(alphas))
    raw = _alternating_sum(weights, np.exp(-alphas * params.psi))
    value, clamped = _clamp01(raw)
    return SeriesValue(value, clamped, raw)


def collection_prob_noncoop_finite(
    params: SystemParams, table: MomentTable, k_max: int | None = None
) -> FiniteBracket:
    """Finite-regime bracket on the unconditional collection probability.

    The nominal-placement probability is the alternating sum of zeta_k times
    the moment-expanded integral I_k; the boundary strip contributes the
    bracket width p (8r - 16r^2).  Refuses inputs whose polynomial expansion
    would lose more than ~12 digits to cancellation (use the asymptotic
    series instead).
    """
    n, m, r, p = params.n, params.m, params.r, params.p
    if n - 1 > table.s_max:
        raise ValueError(
            f"table provides moments up to s_max={table.s_max}, need n-1={n - 1}; "
            "tabulate more moments or use the asymptotic path"
        )
    if k_max is None:
        k_max = min(m, table.k_max)
    if not 1 <= k_max <= min(m, table.k_max):
        raise ValueError(f"k_max={k_max} outside 1..min(m, table.k_max)")

    x = p * r * r * math.pi
    log_x = math.log(x)
    lg_n = math.lgamma(n)  # lgamma(n) = log (n-1)!
    log_choose = np.array(
        [lg_n - math.lgamma(s + 1) - math.lgamma(n - s) for s in range(n)]
    )
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)

    integrals = np.empty(k_max)
    for k in range(1, k_max + 1):
        log_moments = np.concatenate(([0.0], np.log(table.moments[k - 1, : n - 1])))
        mags = np.exp(log_choose + np.arange(n) * log_x + log_moments)
        value = math.fsum((signs * mags).tolist())
        if value <= 0.0 or (mags.max() > 0 and math.log10(mags.max() / abs(value)) > _MAX_CANCELLATION_DIGITS):
            raise ValueError(
                f"polynomial moment expansion for n={n} is numerically unstable; "
                "use the asymptotic path"
            )
        integrals[k - 1] = value

    zetas = np.array([zeta(k, m, r) for k in range(1, k_max + 1)])
    if k_max < m:
        tail = zeta(k_max + 1, m, r)
        if tail > 1e-9:
            raise ValueError(
                f"k-sum truncated at {k_max} leaves a non-negligible tail ({tail:.3g}); "
                "provide a table with larger k_max"
            )
    conditional = _alternating_sum(zetas, integrals)
    width = 8.0 * r - 16.0 * r * r
    return FiniteBracket(
        lower=p * conditional,
        upper=p * (conditional + width),
        conditional_nominal=conditional,
    )


def lower_bound_noncoop(params: AsymptoticParams) -> float:
    """Empty-double-radius lower bound p (1 - e^-lambda) e^-4psi (loose)."""
    return params.p * (-math.expm1(-params.lam)) * math.exp(-4.0 * params.psi)


def heuristic_coop(
    params: AsymptoticParams, table: MomentTable, k_max: int | None = None
) -> HeuristicResult:
    """Two-iteration cooperative heuristic: sigma1 -> rho1 -> sigma2.

    Each stage is the same truncated alternating series with the previous
    stage's survival probability raised to the mean area; each stage is
    clamped to [0, 1] with the stage name recorded when clamping fired.
    The conditional collection probability is 1 - sigma2.
    """
    alphas = _first_moments(table, k_max)
    _check_truncation(params.lam, len(alphas))
    w_lam = _poisson_weights(params.lam, len(alphas))
    w_psi = _poisson_weights(params.psi, len(alphas))
    flags: list[str] = []

    sigma1_raw = 1.0 - _alternating_sum(w_lam, np.exp(-alphas * params.psi))
    sigma1, c1 = _clamp01(sigma1_raw)
    if c1:
        flags.append("sigma1")

    rho1_raw = _alternating_sum(w_psi, sigma1**alphas)
    rho1, c2 = _clamp01(rho1_raw)
    if c2:
        flags.append("rho1")

    sigma2_raw = 1.0 - _alternating_sum(w_lam, (1.0 - rho1) ** alphas)
    sigma2, c3 = _clamp01(sigma2_raw)
    if c3:
        flags.append("sigma2")

    state = HeuristicState(sigma1=sigma1, rho1=rho1, sigma2=sigma2)
    return HeuristicResult(state=state, conditional=1.0 - sigma2, clamped=tuple(flags))


def throughput(load_g: float, conditional_prob: float) -> float:
    """Normalized per-station throughput T = G * P(collected | active)."""
    if load_g < 0 or conditional_prob < 0:
        raise ValueError("inputs must be nonnegative")
    return load_g * conditional_prob


def single_station(np_product: float) -> float:
    """Classic single-station slotted Aloha throughput n p e^{-n p}."""
    if np_product < 0:
        raise ValueError("n p must be nonnegative")
    return np_product * math.exp(-np_product)


def g_bullet_from_values(
    lam: float,
    eps: float,
    g_grid: Sequence[float],
    values: Sequence[float],
    smooth_window: int = 1,
) -> float:
    """Largest grid load whose (optionally smoothed) probability stays >= 1-eps.

    Returns 0 when even full coverage cannot reach 1-eps, or when no grid
    point qualifies.  ``smooth_window=3`` applies the centered moving average
    used for noisy Monte Carlo evaluators.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    grid = np.asarray(g_grid, dtype=float)
    vals = np.asarray(values, dtype=float)
    if grid.size == 0:
        raise ValueError("empty load grid")
    if grid.shape != vals.shape:
        raise ValueError("grid and values must have matching shapes")
    if smooth_window not in (1, 3):
        raise ValueError("smooth_window must be 1 (off) or 3")
    if 1.0 - eps > coverage_probability(lam):
        return 0.0
    if smooth_window == 3 and vals.size >= 2:
        smoothed = np.empty_like(vals)
        for i in range(vals.size):
            smoothed[i] = vals[max(0, i - 1) : i + 2].mean()
        vals = smoothed
    qualifying = grid[vals >= 1.0 - eps]
    return float(qualifying.max()) if qualifying.size else 0.0


def g_bullet(
    lam: float,
    eps: float,
    evaluator: Callable[[float], float],
    g_max: float = 1.0,
    step: float = 0.01,
    smooth_window: int = 1,
) -> float:
    """Grid supremum of {G : evaluator(G) >= 1 - eps} on 0..g_max."""
    if step <= 0 or g_max < 0:
        raise ValueError("step must be positive and g_max nonnegative")
    grid = np.arange(0.0, g_max + step / 2, step)
    values = [evaluator(float(g)) for g in grid]
    return g_bullet_from_values(lam, eps, grid, values, smooth_window=smooth_window)
