"""Multiple-active spatial modulation: codec, detectors, replica analysis and Monte Carlo."""

from ._core import (
    Codebook,
    Constellation,
    ConvergenceError,
    FixedPointResult,
    RateBounds,
    __version__,
    build_codebook,
    decode,
    encode,
    figure,
    figure_names,
    index_bits,
    monte_carlo,
    per_antenna_rate,
    prox_box_soft_threshold,
    replica_box_lasso,
    replica_map_bound,
    sample_rayleigh,
    solve_box_lasso,
    tune_lambda,
)

__all__ = [
    "Codebook",
    "Constellation",
    "ConvergenceError",
    "FixedPointResult",
    "RateBounds",
    "__version__",
    "build_codebook",
    "decode",
    "encode",
    "figure",
    "figure_names",
    "index_bits",
    "monte_carlo",
    "per_antenna_rate",
    "prox_box_soft_threshold",
    "replica_box_lasso",
    "replica_map_bound",
    "sample_rayleigh",
    "solve_box_lasso",
    "tune_lambda",
]
