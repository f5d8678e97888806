"""Logical-time simulation of coded gradient descent on n workers.

Stragglers are erasures: the server decodes from exactly f messages and
never waits. Each round computes the partial gradients of the sampled,
rescaled parts, has every worker combine its assigned parts with its row of
B~, drops the stragglers and decodes the weighted gradient.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .coding import CodingParams, CodingScheme, decode_vector, weight_scheme
from .errors import ArityError, ConditioningWarning, ConsistencyError, StragglerModelError
from .optimize import GdConfig, GdTrace, LossModel, descend, partial_gradient, weighted_loss
from .sketch import PartitionPlan, Seed, SketchPlan, check_consistent

IMAG_TOL = 1e-7

STRAGGLER_KINDS = ("none", "uniform-random", "fixed-set")


@dataclass(frozen=True)
class StragglerModel:
    kind: str = "none"
    s_actual: int = 0
    fixed: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in STRAGGLER_KINDS:
            raise StragglerModelError(f"unknown straggler model {self.kind!r}")
        if self.kind == "fixed-set" and len(set(self.fixed)) != self.s_actual:
            raise StragglerModelError("fixed straggler set must have s_actual distinct workers")

    @classmethod
    def uniform(cls, s_actual: int) -> "StragglerModel":
        return cls("uniform-random", s_actual)

    @classmethod
    def fixed_set(cls, workers) -> "StragglerModel":
        workers = tuple(int(w) for w in workers)
        return cls("fixed-set", len(workers), workers)


@dataclass
class AccessLog:
    """Counts which parts each worker touched while encoding."""

    reads: dict[int, Counter] = field(default_factory=dict)

    def record(self, worker: int, column: int):
        self.reads.setdefault(worker, Counter())[column] += 1


@dataclass
class RoundResult:
    responders: NDArray[np.intp]
    decoded: NDArray[np.float64]
    imag_residual: float
    messages_used: int
    conditioning_warning: bool = False


def select_responders(model: StragglerModel, params: CodingParams, seed: Seed) -> NDArray[np.intp]:
    """Sorted indices of the f workers whose messages are decoded."""
    n, s, f = params.n, params.s, params.f
    if model.s_actual > s:
        raise StragglerModelError(f"{model.s_actual} stragglers exceed tolerance s={s}")
    if model.kind == "none":
        return np.arange(f, dtype=np.intp)
    rng = np.random.default_rng(seed)
    if model.kind == "fixed-set":
        if min(model.fixed, default=0) < 0 or max(model.fixed, default=0) >= n:
            raise StragglerModelError("fixed straggler outside worker range")
        alive = np.setdiff1d(np.arange(n), model.fixed)
    else:
        stragglers = rng.choice(n, size=model.s_actual, replace=False)
        alive = np.setdiff1d(np.arange(n), stragglers)
    if alive.size > f:
        # more messages arrived than needed; keep a uniform subset of f
        alive = np.sort(rng.choice(alive, size=f, replace=False))
    return alive.astype(np.intp)


def encode_tasks(
    scheme: CodingScheme,
    B_tilde: ArrayLike,
    partials: ArrayLike,
    access: AccessLog | None = None,
    workers: ArrayLike | None = None,
) -> NDArray[np.complex128]:
    """Row i is sum over worker i's assigned parts of B~[i, j] * g_j.

    Zero-weight columns are skipped, so a worker never reads more than its
    w_supp parts. With ``workers`` only those rows are filled in.
    """
    B_tilde = np.asarray(B_tilde)
    partials = np.asarray(partials, dtype=float)
    n, k = scheme.params.n, scheme.params.k
    if B_tilde.shape != (n, k):
        raise ArityError(f"B~ has shape {B_tilde.shape}, expected ({n}, {k})")
    if partials.ndim != 2 or partials.shape[0] != k:
        raise ArityError(f"need k={k} partial gradients, got shape {partials.shape}")
    out = np.zeros((n, partials.shape[1]), dtype=np.complex128)
    rows = range(n) if workers is None else np.asarray(workers, dtype=np.intp)
    for i in rows:
        cols = scheme.support(i)
        cols = cols[B_tilde[i, cols] != 0]
        if access is not None:
            for j in cols:
                access.record(int(i), int(j))
        out[i] = B_tilde[i, cols] @ partials[cols]
    return out


def decode_round(scheme: CodingScheme, responders: ArrayLike, messages: ArrayLike) -> RoundResult:
    """Apply a_I to the f received messages (rows ordered like ``responders``)."""
    I = np.asarray(responders, dtype=np.intp)
    messages = np.asarray(messages)
    if messages.shape[0] != I.size:
        raise ArityError(f"{messages.shape[0]} messages for {I.size} responders")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConditioningWarning)
        a = decode_vector(scheme, I)
    combo = a @ messages
    decoded = combo.real.copy()
    imag = float(np.linalg.norm(combo.imag))
    # near the optimum the decoded sum is small while the messages are not,
    # so this flag is informational; only the coding guard warns
    flagged = bool(caught) or imag > IMAG_TOL * (1.0 + float(np.linalg.norm(decoded)))
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return RoundResult(I, decoded, imag, int(I.size), flagged)


def padded_parts(plan: PartitionPlan, sp: SketchPlan, k: int) -> tuple[NDArray[np.intp], NDArray[np.float64], NDArray[np.float64]]:
    """Part list, weights and rescale factors padded to exactly k columns.

    Padding parts are unused parts with weight 0, so their columns of B~
    vanish and they never reach a worker.
    """
    check_consistent(plan, sp)
    if sp.n_distinct > k:
        raise ConsistencyError(f"{sp.n_distinct} distinct parts do not fit in k={k} code columns")
    extra = k - sp.n_distinct
    unused = np.setdiff1d(np.arange(plan.K), sp.distinct_parts)[:extra]
    if unused.size < extra:
        raise ConsistencyError("not enough parts to pad the code")
    parts = np.concatenate([sp.distinct_parts, unused]).astype(np.intp)
    weights = np.concatenate([sp.weights, np.zeros(extra)])
    rescale = np.concatenate([sp.rescale, np.ones(extra)])
    return parts, weights, rescale


@dataclass
class DistributedRun:
    trace: GdTrace
    rounds: list[RoundResult]
    access: AccessLog
    flagged_rounds: int = 0


def run_distributed_gd(
    model: LossModel,
    plan: PartitionPlan,
    sp: SketchPlan,
    scheme: CodingScheme,
    config: GdConfig,
    stragglers: StragglerModel,
    seed: Seed,
    keep_rounds: bool = False,
    keep_iterates: bool = False,
    track_loss: bool = True,
) -> DistributedRun:
    """Gradient descent where every gradient is decoded from f worker messages.

    The weight vector of ``sp`` is embedded in B~; the per-round straggler
    pattern comes from one generator seeded with ``seed``.
    """
    parts, weights, rescale = padded_parts(plan, sp, scheme.params.k)
    B_tilde = weight_scheme(scheme, weights)
    live = np.flatnonzero(weights)
    rng = np.random.default_rng(seed)
    access = AccessLog()
    rounds: list[RoundResult] = []
    flagged = [0]

    def step(theta):
        partials = np.zeros((scheme.params.k, model.p))
        for j in live:
            partials[j] = partial_gradient(model, plan.row_slice(parts[j]), theta, scale=rescale[j] ** 2)
        I = select_responders(stragglers, scheme.params, rng)
        messages = encode_tasks(scheme, B_tilde, partials, access, workers=I)
        result = decode_round(scheme, I, messages[I])
        if keep_rounds:
            rounds.append(result)
        flagged[0] += result.conditioning_warning
        return result.decoded, tuple(I)

    loss_fn = (lambda th: weighted_loss(model, plan, sp, th)) if track_loss else None
    trace = descend(model.p, step, config, loss_fn, keep_iterates)
    return DistributedRun(trace, rounds, access, flagged[0])
