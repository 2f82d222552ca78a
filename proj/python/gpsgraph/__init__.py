"""GPS graph Transformer: graph encodings, hybrid MPNN+attention layers, training."""

from gpsgraph._core import (
    Graph,
    ExpressivityReport,
    RunResult,
    decalin_anchors,
    expressivity_suite,
    gen_csl,
    gen_decalin,
    gen_zinc_like,
    lap_pe,
    load_graphs,
    normalized_laplacian,
    param_count_for,
    rel_distances,
    run_config_text,
    rwse,
    save_graphs,
    timing_benchmark,
    wl_colors,
)

__all__ = [
    "Graph",
    "ExpressivityReport",
    "RunResult",
    "decalin_anchors",
    "expressivity_suite",
    "gen_csl",
    "gen_decalin",
    "gen_zinc_like",
    "lap_pe",
    "load_graphs",
    "normalized_laplacian",
    "param_count_for",
    "rel_distances",
    "run_config_text",
    "rwse",
    "save_graphs",
    "timing_benchmark",
    "wl_colors",
]
