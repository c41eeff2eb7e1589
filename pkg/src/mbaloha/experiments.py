"""Monte Carlo load sweeps with analytic overlays, and the max-load metric.

A sweep fixes (m, p, lambda) and varies the user count n to realize a grid
of normalized loads G; every (grid point, run) pair draws its own substream
from (seed, n, run), so results are identical for any worker count and any
grid subset.  The pooled estimator of P(collected | active) divides total
collected by total active across runs; the classic per-run estimator
(collected / n / p, averaged) is exposed as ``paper_prob_*`` and equals
mc_T / G_realized exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .analytics import (
    AsymptoticParams,
    collection_prob_noncoop_asymptotic,
    g_bullet_from_values,
    heuristic_coop,
    lower_bound_noncoop,
)
from .decoders import decode_cooperative, decode_noncooperative
from .geometry import MomentTable
from .scenario import SystemParams, build_adjacency, generate_instance


@dataclass(frozen=True)
class SweepConfig:
    """Load-sweep configuration; r is derived from lambda_target."""

    m: int
    p: float
    lambda_target: float
    g_grid: tuple[float, ...]
    runs_per_point: int
    seed: int
    k_max: int = 34
    moment_table_path: str | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.lambda_target <= 0:
            raise ValueError("lambda_target must be positive")
        if self.r > 0.25:
            raise ValueError(
                f"lambda_target={self.lambda_target} needs r={self.r:.4f} > 1/4; "
                "increase m or decrease lambda"
            )
        if not self.g_grid:
            raise ValueError("empty load grid")
        if any(g < 0 for g in self.g_grid):
            raise ValueError("loads must be nonnegative")
        if self.runs_per_point < 1:
            raise ValueError("runs_per_point must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be positive")

    @property
    def r(self) -> float:
        return math.sqrt(self.lambda_target / (self.m * math.pi))

    def realized_users(self, g: float) -> int:
        if g == 0.0:
            return 0
        return max(1, round(g * self.m / self.p))


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a sweep; field names are the CSV column names."""

    G_realized: float
    n: int
    mc_prob_noncoop: float
    mc_prob_noncoop_stderr: float
    mc_prob_coop: float
    mc_prob_coop_stderr: float
    mc_T_noncoop: float
    mc_T_coop: float
    analytic_prob_noncoop: float
    analytic_prob_coop: float
    lower_bound: float
    clamp_flags: str

    @property
    def paper_prob_noncoop(self) -> float:
        """Per-run estimator collected/(n p), identical to T / G."""
        return self.mc_T_noncoop / self.G_realized if self.G_realized > 0 else 0.0

    @property
    def paper_prob_coop(self) -> float:
        return self.mc_T_coop / self.G_realized if self.G_realized > 0 else 0.0


SWEEP_COLUMNS = tuple(f.name for f in fields(SweepRow))


@dataclass(frozen=True)
class GBulletCell:
    lam: float
    eps: float
    gbullet_noncoop: float
    gbullet_coop: float


def _simulate_runs(args) -> tuple[int, int, np.ndarray, np.ndarray, np.ndarray]:
    """Worker: decode runs [lo, hi) of one grid point, seeds derived per run."""
    m, p, r, n, seed, lo, hi = args
    params = SystemParams(n=n, m=m, r=r, p=p)
    active = np.empty(hi - lo, dtype=np.int64)
    coll_nc = np.empty(hi - lo, dtype=np.int64)
    coll_coop = np.empty(hi - lo, dtype=np.int64)
    for i, run in enumerate(range(lo, hi)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, n, run]))
        graph = build_adjacency(generate_instance(params, rng))
        active[i] = len(graph.user_neighbors)
        coll_nc[i] = decode_noncooperative(graph).collected_count
        coll_coop[i] = decode_cooperative(graph).collected_count
    return n, lo, active, coll_nc, coll_coop


def _pooled_ratio(collected: np.ndarray, active: np.ndarray) -> tuple[float, float]:
    """Pooled P(collected | active) and its linearized ratio standard error."""
    total_active = int(active.sum())
    if total_active == 0:
        return 0.0, 0.0
    phat = float(collected.sum()) / total_active
    runs = len(active)
    if runs < 2:
        return phat, float("nan")
    resid = collected - phat * active
    se = float(resid.std(ddof=1)) / (float(active.mean()) * math.sqrt(runs))
    return phat, se


def sweep_load(config: SweepConfig, workers: int | None = None) -> list[SweepRow]:
    """Run both decoders over the load grid and attach analytic columns.

    A missing moment table disables (NaNs) the analytic columns and flags
    the rows; Monte Carlo columns are always produced.
    """
    table: MomentTable | None = None
    if config.moment_table_path is not None:
        table = MomentTable.load(config.moment_table_path)
        if config.k_max > table.k_max:
            raise ValueError(
                f"k_max={config.k_max} exceeds the table's k_max={table.k_max}"
            )

    points = [(g, config.realized_users(g)) for g in config.g_grid]
    chunk = max(1, math.ceil(config.runs_per_point / 8))
    jobs = [
        (config.m, config.p, config.r, n, config.seed, lo, min(lo + chunk, config.runs_per_point))
        for _, n in points
        if n > 0
        for lo in range(0, config.runs_per_point, chunk)
    ]
    results: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    if workers is not None and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for n, lo, act, nc, coop in pool.map(_simulate_runs, jobs, chunksize=1):
                results[(n, lo)] = (act, nc, coop)
    else:
        for job in jobs:
            n, lo, act, nc, coop = _simulate_runs(job)
            results[(n, lo)] = (act, nc, coop)

    lam = config.m * config.r**2 * math.pi
    rows: list[SweepRow] = []
    for _, n in points:
        g_real = n * config.p / config.m
        flags: list[str] = []
        if n == 0:
            mc = dict(
                mc_prob_noncoop=0.0,
                mc_prob_noncoop_stderr=0.0,
                mc_prob_coop=0.0,
                mc_prob_coop_stderr=0.0,
                mc_T_noncoop=0.0,
                mc_T_coop=0.0,
            )
        else:
            parts = [
                results[(n, lo)] for lo in range(0, config.runs_per_point, chunk)
            ]
            act = np.concatenate([p_[0] for p_ in parts])
            nc = np.concatenate([p_[1] for p_ in parts])
            coop = np.concatenate([p_[2] for p_ in parts])
            p_nc, se_nc = _pooled_ratio(nc, act)
            p_coop, se_coop = _pooled_ratio(coop, act)
            runs = config.runs_per_point
            mc = dict(
                mc_prob_noncoop=p_nc,
                mc_prob_noncoop_stderr=se_nc,
                mc_prob_coop=p_coop,
                mc_prob_coop_stderr=se_coop,
                mc_T_noncoop=float(nc.sum()) / (runs * config.m),
                mc_T_coop=float(coop.sum()) / (runs * config.m),
            )
        asym = AsymptoticParams.from_load(lam, g_real, config.p)
        lower = lower_bound_noncoop(asym) / config.p
        if table is not None:
            series = collection_prob_noncoop_asymptotic(asym, table, config.k_max)
            if series.clamped:
                flags.append("analytic_noncoop")
            heur = heuristic_coop(asym, table, config.k_max)
            flags.extend(f"coop_{name}" for name in heur.clamped)
            analytic_nc = series.value
            analytic_coop = heur.conditional
        else:
            flags.append("no_analytic")
            analytic_nc = float("nan")
            analytic_coop = float("nan")
        rows.append(
            SweepRow(
                G_realized=g_real,
                n=n,
                analytic_prob_noncoop=analytic_nc,
                analytic_prob_coop=analytic_coop,
                lower_bound=lower,
                clamp_flags=";".join(flags),
                **mc,
            )
        )
    return rows


def estimate_gbullet(
    config: SweepConfig,
    lambda_grid: tuple[float, ...],
    eps_list: tuple[float, ...],
    workers: int | None = None,
) -> list[GBulletCell]:
    """Estimate the max load G(lambda, eps) for both decoders by simulation.

    Each lambda cell derives its sweep seed from the float bits of lambda, so
    rerunning any subset of the grid reproduces the full run's cells.  The
    Monte Carlo probability columns are smoothed (window 3) before
    thresholding, per the max-load policy.
    """
    if not lambda_grid or not eps_list:
        raise ValueError("lambda grid and eps list must be nonempty")
    cells: list[GBulletCell] = []
    for lam in lambda_grid:
        lam_bits = int(np.float64(lam).view(np.uint64))
        sub_seed = int(
            np.random.SeedSequence([config.seed, lam_bits]).generate_state(1, np.uint64)[0]
        )
        sub = replace(
            config, lambda_target=lam, seed=sub_seed, moment_table_path=None
        )
        rows = [row for row in sweep_load(sub, workers=workers) if row.n > 0]
        grid = [row.G_realized for row in rows]
        nc_vals = [row.mc_prob_noncoop for row in rows]
        coop_vals = [row.mc_prob_coop for row in rows]
        for eps in eps_list:
            cells.append(
                GBulletCell(
                    lam=lam,
                    eps=eps,
                    gbullet_noncoop=g_bullet_from_values(lam, eps, grid, nc_vals, smooth_window=3),
                    gbullet_coop=g_bullet_from_values(lam, eps, grid, coop_vals, smooth_window=3),
                )
            )
    return cells


def _fmt_estimate(v: float) -> str:
    return format(v, ".6g")


def render_sweep_csv(rows: list[SweepRow], metadata: str) -> str:
    """CSV with a '#' metadata line, exact column names, 6-digit estimates."""
    lines = [f"# {metadata}", ",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = [format(row.G_realized, ".17g"), str(row.n)]
        cells += [
            _fmt_estimate(getattr(row, name))
            for name in SWEEP_COLUMNS[2:-1]
        ]
        cells.append(row.clamp_flags)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render_gbullet_csv(cells: list[GBulletCell], metadata: str) -> str:
    lines = [f"# {metadata}", "lambda,eps,gbullet_noncoop,gbullet_coop"]
    for c in cells:
        lines.append(
            ",".join(
                [
                    format(c.lam, ".17g"),
                    format(c.eps, ".17g"),
                    _fmt_estimate(c.gbullet_noncoop),
                    _fmt_estimate(c.gbullet_coop),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def compare_report(rows: list[SweepRow], m: int) -> str:
    """Deterministic text summary: analytic-vs-MC deviation, peaks, baseline."""
    lines = ["== sweep comparison report =="]
    live = [r for r in rows if r.n > 0]
    lines.append(f"grid points: {len(rows)} ({len(rows) - len(live)} empty)")
    has_analytic = any(
        r.n > 0 and not math.isnan(r.analytic_prob_noncoop) for r in rows
    )
    if not has_analytic:
        lines.append("analytic columns: absent")
    else:
        for label, a_name, mc_name, flag in (
            ("noncoop", "analytic_prob_noncoop", "mc_prob_noncoop", "analytic_noncoop"),
            ("coop", "analytic_prob_coop", "mc_prob_coop", "coop_"),
        ):
            usable = [
                r
                for r in live
                if not math.isnan(getattr(r, a_name))
                and not any(f.startswith(flag) for f in r.clamp_flags.split(";") if f)
            ]
            skipped = len(live) - len(usable)
            if not usable:
                lines.append(f"max |analytic - mc| {label}: n/a (all points clamped)")
                continue
            best = max(usable, key=lambda r: abs(getattr(r, a_name) - getattr(r, mc_name)))
            dev = abs(getattr(best, a_name) - getattr(best, mc_name))
            note = f" ({skipped} clamped points excluded)" if skipped else ""
            lines.append(
                f"max |analytic - mc| {label}: {_fmt_estimate(dev)} "
                f"at G={_fmt_estimate(best.G_realized)}{note}"
            )
    for label, t_name in (("noncoop", "mc_T_noncoop"), ("coop", "mc_T_coop")):
        if live:
            best = max(live, key=lambda r: getattr(r, t_name))
            t = getattr(best, t_name)
            lines.append(
                f"peak T {label}: {_fmt_estimate(t)} at G={_fmt_estimate(best.G_realized)} "
                f"(un-normalized m*T = {_fmt_estimate(m * t)})"
            )
    lines.append(
        "single-station baseline: peak n p exp(-n p) = "
        f"{_fmt_estimate(1.0 / math.e)} at n p = 1"
    )
    return "\n".join(lines) + "\n"
