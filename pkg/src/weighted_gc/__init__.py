"""Weighted leverage-score sketching with Reed-Solomon gradient coding."""

from .coding import (
    CodingParams,
    CodingScheme,
    build_scheme,
    cyclic_mask,
    decode_vector,
    interleaved_mask,
    validate_params,
    weight_scheme,
)
from .data import Dataset, load_mnist, synth_regression
from .numkit import leverage_scores, normalize_scores, reduced_svd
from .optimize import GdConfig, GdTrace, LossModel, gd, partial_gradient, sketched_ls_gradient, weighted_gradient
from .simulate import StragglerModel, decode_round, encode_tasks, run_distributed_gd, select_responders
from .sketch import (
    PartitionPlan,
    SketchPlan,
    build_classic_sketch,
    build_s_hat,
    build_sp,
    make_partition,
    sample_weighted,
)

__all__ = [
    "CodingParams", "CodingScheme", "build_scheme", "cyclic_mask", "decode_vector", "interleaved_mask",
    "validate_params", "weight_scheme",
    "Dataset", "load_mnist", "synth_regression",
    "leverage_scores", "normalize_scores", "reduced_svd",
    "GdConfig", "GdTrace", "LossModel", "gd", "partial_gradient", "sketched_ls_gradient", "weighted_gradient",
    "StragglerModel", "decode_round", "encode_tasks", "run_distributed_gd", "select_responders",
    "PartitionPlan", "SketchPlan", "build_classic_sketch", "build_s_hat", "build_sp", "make_partition",
    "sample_weighted",
]

__version__ = "0.1.0"
