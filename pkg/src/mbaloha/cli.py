"""Command-line front end: tabulate, sweep, gbullet, oracle.

Every subcommand is deterministic given its flags; seeds default to a fixed
documented constant, never the clock.  Exit codes: 0 success, 1 usage error,
2 runtime or validation error.  Output files are written atomically so a
failing run never leaves a partial file.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analytics import collection_prob_noncoop_finite
from .decoders import brute_force_collection_probability, mask_monte_carlo
from .experiments import (
    SweepConfig,
    compare_report,
    estimate_gbullet,
    render_gbullet_csv,
    render_sweep_csv,
    sweep_load,
)
from .geometry import MomentTable, tabulate_moments
from .scenario import SystemParams, generate_instance, parse_instance

DEFAULT_SEED = 20259

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for runtime."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunManifest:
    """Everything needed to reproduce one invocation byte for byte."""

    subcommand: str
    seed: int
    params: dict = field(default_factory=dict)
    moment_table_checksum: str | None = None
    outputs: list[str] = field(default_factory=list)

    def render(self) -> str:
        parts = [f"mbaloha={__version__}", f"cmd={self.subcommand}", f"seed={self.seed}"]
        parts += [f"{k}={v}" for k, v in sorted(self.params.items())]
        if self.moment_table_checksum is not None:
            parts.append(f"moment_table_sha256={self.moment_table_checksum}")
        if self.outputs:
            parts.append("out=" + ";".join(self.outputs))
        return " ".join(parts)


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mbaloha-")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _checksum(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _parse_grid(spec: str) -> tuple[float, ...]:
    """Either 'start:stop:step' or a comma-separated list of loads."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid range must be start:stop:step, got {spec!r}")
        start, stop, step = (float(v) for v in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 0.5)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    return tuple(float(v) for v in spec.split(","))


def _parse_floats(spec: str) -> tuple[float, ...]:
    return tuple(float(v) for v in spec.split(","))


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    sub.add_argument("--threads", type=int, default=0, help="worker processes, 0 = all cores")
    sub.add_argument("--out", type=str, default=None, help="output file (default: stdout)")


def _workers(args) -> int:
    return args.threads if args.threads > 0 else (os.cpu_count() or 1)


def _emit(args, text: str, manifest: RunManifest) -> None:
    if args.out is not None:
        manifest.outputs.append(args.out)
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_tabulate(args) -> int:
    table = tabulate_moments(
        k_max=args.k_max,
        s_max=args.s_max,
        placements_per_k=args.placements,
        samples_per_placement=args.samples,
        seed=args.seed,
        workers=_workers(args),
    )
    table.save(args.out)
    print(f"wrote {args.out} (sha256 {_checksum(args.out)})")
    print(
        f"k_max={table.k_max} s_max={table.s_max} "
        f"placements={table.placements_per_k} samples={table.samples_per_placement} seed={table.seed}"
    )
    first = table.first_moments
    print(
        "invariants ok: k=1 row exact, first moments in "
        f"[{first.min():.6g}, {first.max():.6g}], nondecreasing in k and s"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    manifest = RunManifest(
        "sweep",
        args.seed,
        params={
            "m": args.m,
            "p": args.p,
            "lambda": args.lam,
            "grid": args.grid,
            "runs": args.runs,
            "k_max": args.k_max,
        },
    )
    if args.moment_table is None and not args.no_analytic:
        raise ValueError("no moment table given; pass --moment-table or --no-analytic")
    if args.moment_table is not None:
        manifest.moment_table_checksum = _checksum(args.moment_table)
    config = SweepConfig(
        m=args.m,
        p=args.p,
        lambda_target=args.lam,
        g_grid=_parse_grid(args.grid),
        runs_per_point=args.runs,
        seed=args.seed,
        k_max=args.k_max,
        moment_table_path=args.moment_table,
    )
    manifest.params["r"] = config.r
    rows = sweep_load(config, workers=_workers(args))
    csv = render_sweep_csv(rows, manifest.render())
    report = compare_report(rows, m=args.m)
    _emit(args, csv, manifest)
    # Keep the report out of the CSV stream.
    stream = sys.stdout if args.out is not None else sys.stderr
    stream.write(report)
    return EXIT_OK


def _cmd_gbullet(args) -> int:
    manifest = RunManifest(
        "gbullet",
        args.seed,
        params={
            "m": args.m,
            "p": args.p,
            "lambdas": args.lambdas,
            "eps": args.eps,
            "grid": args.grid,
            "runs": args.runs,
        },
    )
    config = SweepConfig(
        m=args.m,
        p=args.p,
        lambda_target=max(_parse_floats(args.lambdas)),
        g_grid=_parse_grid(args.grid),
        runs_per_point=args.runs,
        seed=args.seed,
    )
    manifest.params["r_per_lambda"] = ";".join(
        format(math.sqrt(lam / (args.m * math.pi)), ".6g") for lam in _parse_floats(args.lambdas)
    )
    cells = estimate_gbullet(
        config,
        lambda_grid=_parse_floats(args.lambdas),
        eps_list=_parse_floats(args.eps),
        workers=_workers(args),
    )
    _emit(args, render_gbullet_csv(cells, manifest.render()), manifest)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.instance is not None:
        with open(args.instance, "r", encoding="ascii") as fh:
            instance = parse_instance(fh.read())
        params = instance.params
    else:
        params = SystemParams(n=args.n, m=args.m, r=args.r, p=args.p)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
        instance = generate_instance(params, rng)
    exact = brute_force_collection_probability(instance)
    mc = mask_monte_carlo(instance, n_masks=args.masks, seed=args.seed + 1)
    manifest = RunManifest(
        "oracle",
        args.seed,
        params={
            "n": params.n,
            "m": params.m,
            "r": params.r,
            "p": params.p,
            "masks": args.masks,
            "instance": args.instance or "",
        },
    )
    if args.moment_table is not None:
        manifest.moment_table_checksum = _checksum(args.moment_table)
    lines = [f"# {manifest.render()}"]
    lines.append("user,oracle_noncoop,mc_noncoop,z_noncoop,oracle_coop,mc_coop,z_coop,verdict")
    worst = 0.0
    for i in range(params.n):
        zs = []
        for exact_v, mc_v, se in (
            (exact.noncooperative[i], mc.prob_noncoop[i], mc.stderr_noncoop[i]),
            (exact.cooperative[i], mc.prob_coop[i], mc.stderr_coop[i]),
        ):
            zs.append((mc_v - exact_v) / se if se > 0 else 0.0)
        worst = max(worst, abs(zs[0]), abs(zs[1]))
        verdict = "pass" if max(abs(z) for z in zs) <= 3.0 else "FAIL"
        lines.append(
            f"{i},{exact.noncooperative[i]:.6g},{mc.prob_noncoop[i]:.6g},{zs[0]:.3g},"
            f"{exact.cooperative[i]:.6g},{mc.prob_coop[i]:.6g},{zs[1]:.3g},{verdict}"
        )
    lines.append(f"# max |z| = {worst:.3g} over {params.n} users, {args.masks} masks, 3-sigma check")
    superset = bool(np.all(exact.cooperative >= exact.noncooperative - 1e-15))
    lines.append(f"# cooperative >= non-cooperative per user: {'pass' if superset else 'FAIL'}")
    if args.moment_table is not None:
        table = MomentTable.load(args.moment_table)
        bracket = collection_prob_noncoop_finite(params, table)
        lines.append(
            "# finite bracket on position-averaged P(coll), noncoop: "
            f"[{bracket.lower:.6g}, {bracket.upper:.6g}] (reference; this run is one placement)"
        )
    _emit(args, "\n".join(lines) + "\n", manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mbaloha", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mbaloha {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    tab = subs.add_parser("tabulate", help="tabulate union-of-disks area moments", parents=[])
    _add_common(tab)
    tab.add_argument("--k-max", dest="k_max", type=int, default=34)
    tab.add_argument("--s-max", dest="s_max", type=int, default=1)
    tab.add_argument("--placements", type=int, default=4000)
    tab.add_argument("--samples", type=int, default=30000)
    tab.set_defaults(func=_cmd_tabulate, needs_out=True)

    sweep = subs.add_parser("sweep", help="Monte Carlo load sweep with analytic overlays")
    _add_common(sweep)
    sweep.add_argument("--m", type=int, default=100)
    sweep.add_argument("--p", type=float, default=0.25)
    sweep.add_argument("--lambda", dest="lam", type=float, default=3.0)
    sweep.add_argument("--grid", type=str, default="0:1:0.05", help="start:stop:step or comma list of G values")
    sweep.add_argument("--runs", type=int, default=1000)
    sweep.add_argument("--k-max", dest="k_max", type=int, default=34)
    sweep.add_argument("--moment-table", dest="moment_table", type=str, default=None)
    sweep.add_argument("--no-analytic", dest="no_analytic", action="store_true")
    sweep.set_defaults(func=_cmd_sweep, needs_out=False)

    gb = subs.add_parser("gbullet", help="max-load metric over a lambda grid")
    _add_common(gb)
    gb.add_argument("--m", type=int, default=100)
    gb.add_argument("--p", type=float, default=0.25)
    gb.add_argument("--lambdas", type=str, default="2,2.5,3,3.5,4,5,6")
    gb.add_argument("--eps", type=str, default="0.08,0.1,0.2")
    gb.add_argument("--grid", type=str, default="0:1:0.02")
    gb.add_argument("--runs", type=int, default=200)
    gb.set_defaults(func=_cmd_gbullet, needs_out=False)

    orc = subs.add_parser("oracle", help="brute-force oracle vs Monte Carlo on a tiny instance")
    _add_common(orc)
    orc.add_argument("--n", type=int, default=8)
    orc.add_argument("--m", type=int, default=3)
    orc.add_argument("--r", type=float, default=0.2)
    orc.add_argument("--p", type=float, default=0.25)
    orc.add_argument("--masks", type=int, default=100000)
    orc.add_argument("--moment-table", dest="moment_table", type=str, default=None)
    orc.add_argument("--instance", type=str, default=None, help="load a dumped instance instead of generating one")
    orc.set_defaults(func=_cmd_oracle, needs_out=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_out", False) and args.out is None:
        parser.error(f"{args.command} requires --out")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"mbaloha {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
