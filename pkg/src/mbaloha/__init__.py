"""Slotted Aloha with multiple geographically deployed base stations."""

__version__ = "0.1.0"

from .analytics import (
    AsymptoticParams,
    FiniteBracket,
    HeuristicResult,
    HeuristicState,
    SeriesValue,
    collection_prob_noncoop_asymptotic,
    collection_prob_noncoop_finite,
    g_bullet,
    g_bullet_from_values,
    heuristic_coop,
    lower_bound_noncoop,
    single_station,
    throughput,
    zeta,
)
from .decoders import (
    DecodingResult,
    brute_force_collection_probability,
    decode_cooperative,
    decode_cooperative_sequential,
    decode_noncooperative,
    mask_monte_carlo,
)
from .experiments import (
    GBulletCell,
    SweepConfig,
    SweepRow,
    compare_report,
    estimate_gbullet,
    render_gbullet_csv,
    render_sweep_csv,
    sweep_load,
)
from .geometry import (
    AreaEstimate,
    MomentTable,
    MomentTableError,
    Point2,
    disk_union_area,
    is_adjacent,
    tabulate_moments,
    uniform_point,
    uniform_points,
)
from .scenario import (
    BipartiteGraph,
    NetworkInstance,
    SystemParams,
    build_adjacency,
    coverage_probability,
    generate_instance,
    lambda_min,
    poisson_pmf,
    station_degree_pmf,
    user_degree_pmf,
)
