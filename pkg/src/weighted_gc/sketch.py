"""Block leverage-score sampling and the sketching operators built from it.

Rows are split into K contiguous, equally sized parts. A weighted sketch
draws k parts with replacement according to the block scores, keeps each
drawn part once and records how often it was drawn as its weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConsistencyError, DivisibilityError, InvalidDistributionError, InvalidInputError
from .numkit import as_mat

Seed = int | np.random.Generator


@dataclass(frozen=True)
class PartitionPlan:
    N: int
    K: int
    Pi: NDArray[np.float64]

    @property
    def part_size(self) -> int:
        return self.N // self.K

    @property
    def part_ranges(self) -> list[range]:
        return [self.rows(i) for i in range(self.K)]

    def rows(self, part: int) -> range:
        size = self.part_size
        return range(part * size, (part + 1) * size)

    def row_slice(self, part: int) -> slice:
        size = self.part_size
        return slice(part * size, (part + 1) * size)


@dataclass(frozen=True)
class SketchPlan:
    """Outcome of one weighted draw.

    ``rescale[j]`` is 1/sqrt(r * Pi[distinct_parts[j]]) where ``r`` is the
    with-multiplicity row budget k * N/K.
    """

    draws: NDArray[np.intp]
    distinct_parts: NDArray[np.intp]
    weights: NDArray[np.float64]
    rescale: NDArray[np.float64]
    r: int
    part_size: int

    @property
    def k(self) -> int:
        return len(self.draws)

    @property
    def n_distinct(self) -> int:
        return len(self.distinct_parts)

    def unweighted(self) -> "SketchPlan":
        """Same parts and rescaling with every weight set to one."""
        return SketchPlan(
            draws=self.draws,
            distinct_parts=self.distinct_parts,
            weights=np.ones_like(self.weights),
            rescale=self.rescale,
            r=self.r,
            part_size=self.part_size,
        )


def make_partition(N: int, K: int, pi: ArrayLike) -> PartitionPlan:
    if K < 1 or N < 1 or N % K:
        raise DivisibilityError(f"K={K} must divide N={N}")
    pi = as_mat(pi, ndim=1)
    if pi.shape != (N,):
        raise InvalidInputError(f"pi has length {pi.size}, expected {N}")
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise InvalidDistributionError("pi must be a probability vector")
    Pi = pi.reshape(K, N // K).sum(axis=1)
    # renormalize away the summation rounding so sum(Pi) == 1 to 1e-12
    Pi = Pi / Pi.sum()
    return PartitionPlan(N=N, K=K, Pi=Pi)


def draw_indices(probs: ArrayLike, count: int, seed: Seed) -> NDArray[np.intp]:
    """Inverse-CDF draws with replacement; zero-probability entries are never hit."""
    probs = np.asarray(probs, dtype=float)
    if count < 1:
        raise InvalidInputError("need at least one draw")
    if np.any(probs < 0) or not probs.sum() > 0:
        raise InvalidDistributionError("sampling distribution has no mass")
    cdf = np.cumsum(probs)
    u = np.random.default_rng(seed).random(count) * cdf[-1]
    return np.searchsorted(cdf, u, side="right").astype(np.intp)


def sample_weighted(plan: PartitionPlan, k: int, seed: Seed) -> SketchPlan:
    draws = draw_indices(plan.Pi, k, seed)
    parts, counts = np.unique(draws, return_counts=True)
    r = k * plan.part_size
    return SketchPlan(
        draws=draws,
        distinct_parts=parts.astype(np.intp),
        weights=counts.astype(np.float64),
        rescale=1.0 / np.sqrt(r * plan.Pi[parts]),
        r=r,
        part_size=plan.part_size,
    )


def identity_sketch(plan: PartitionPlan) -> SketchPlan:
    """Every part once with unit weight and no rescaling (S = I)."""
    parts = np.arange(plan.K, dtype=np.intp)
    return SketchPlan(
        draws=parts,
        distinct_parts=parts,
        weights=np.ones(plan.K),
        rescale=np.ones(plan.K),
        r=plan.N,
        part_size=plan.part_size,
    )


def check_consistent(plan: PartitionPlan, sp: SketchPlan) -> None:
    if sp.part_size != plan.part_size:
        raise ConsistencyError(f"sketch part size {sp.part_size} != partition part size {plan.part_size}")
    if sp.n_distinct and (sp.distinct_parts.min() < 0 or sp.distinct_parts.max() >= plan.K):
        raise ConsistencyError("sketch refers to parts outside the partition")
    if len(sp.weights) != sp.n_distinct or len(sp.rescale) != sp.n_distinct:
        raise ConsistencyError("weights/rescale do not match the distinct parts")


def sampled_rows(plan: PartitionPlan, sp: SketchPlan) -> NDArray[np.intp]:
    """Row indices of the retained parts, block by block."""
    check_consistent(plan, sp)
    size = plan.part_size
    return (sp.distinct_parts[:, None] * size + np.arange(size)).ravel()


def row_scales(plan: PartitionPlan, sp: SketchPlan, weighted: bool = True) -> NDArray[np.float64]:
    """Per-retained-row multiplier: rescale, times sqrt(weight) if weighted."""
    check_consistent(plan, sp)
    scale = sp.rescale * (np.sqrt(sp.weights) if weighted else 1.0)
    return np.repeat(scale, plan.part_size)


def _selector(N: int, rows: NDArray[np.intp], scales: NDArray[np.float64]) -> NDArray[np.float64]:
    S = np.zeros((len(rows), N))
    S[np.arange(len(rows)), rows] = scales
    return S


def build_sp(plan: PartitionPlan, sp: SketchPlan) -> NDArray[np.float64]:
    """S_p = D_p S_Xp^T: one scaled selector row per retained row."""
    return _selector(plan.N, sampled_rows(plan, sp), row_scales(plan, sp, weighted=False))


def build_s_hat(plan: PartitionPlan, sp: SketchPlan) -> NDArray[np.float64]:
    """sqrt(W) S_p with W = diag(weights) kron I_{N/K}."""
    return _selector(plan.N, sampled_rows(plan, sp), row_scales(plan, sp, weighted=True))


def build_block_classic_sketch(plan: PartitionPlan, sp: SketchPlan) -> NDArray[np.float64]:
    """With-replacement operator: every draw contributes its whole part again."""
    check_consistent(plan, sp)
    size = plan.part_size
    rows = (sp.draws[:, None] * size + np.arange(size)).ravel()
    scales = np.repeat(1.0 / np.sqrt(sp.r * plan.Pi[sp.draws]), size)
    return _selector(plan.N, rows, scales)


def build_classic_sketch(pi: ArrayLike, r: int, seed: Seed) -> NDArray[np.float64]:
    """Row-level leverage sketch: r rows drawn by pi, each scaled 1/sqrt(r pi_i)."""
    pi = as_mat(pi, ndim=1)
    if abs(pi.sum() - 1.0) > 1e-9 or np.any(pi < 0):
        raise InvalidDistributionError("pi must be a probability vector")
    idx = draw_indices(pi, r, seed)
    return _selector(len(pi), idx, 1.0 / np.sqrt(r * pi[idx]))
