"""Losses, partial gradients, the sketched least-squares objective and plain GD."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ArityError, DivergenceError, InvalidInputError
from .numkit import as_mat
from .sketch import PartitionPlan, SketchPlan, check_consistent

DIVERGENCE_NORM = 1e12

LEAST_SQUARES = "least-squares"
LOGISTIC = "logistic"


@dataclass(frozen=True)
class LossModel:
    kind: str
    X: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self):
        if self.kind not in (LEAST_SQUARES, LOGISTIC):
            raise InvalidInputError(f"unknown loss kind {self.kind!r}")
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ArityError(f"X {self.X.shape} and y {self.y.shape} disagree")
        if self.kind == LOGISTIC and not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise InvalidInputError("logistic labels must be -1 or +1")

    @classmethod
    def least_squares(cls, X: ArrayLike, y: ArrayLike) -> "LossModel":
        return cls(LEAST_SQUARES, as_mat(X), as_mat(y, ndim=1))

    @classmethod
    def logistic(cls, X: ArrayLike, y: ArrayLike) -> "LossModel":
        return cls(LOGISTIC, as_mat(X), as_mat(y, ndim=1))

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _rows(model: LossModel, rows) -> tuple[NDArray, NDArray]:
    if rows is None:
        return model.X, model.y
    if isinstance(rows, range):
        rows = slice(rows.start, rows.stop, rows.step)
    return model.X[rows], model.y[rows]


def _sigmoid(z: NDArray) -> NDArray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def partial_gradient(model: LossModel, rows, theta: ArrayLike, scale: float = 1.0) -> NDArray[np.float64]:
    """Gradient of the loss over ``rows`` (a range, slice or index array).

    ``scale`` multiplies each row's loss term; for least squares this is the
    same as scaling the rows of X and y by sqrt(scale).
    """
    X, y = _rows(model, rows)
    theta = np.asarray(theta, dtype=float)
    if model.kind == LEAST_SQUARES:
        return scale * 2.0 * (X.T @ (X @ theta - y))
    margin = y * (X @ theta)
    return scale * (X.T @ (-y * _sigmoid(-margin)))


def loss_value(model: LossModel, rows, theta: ArrayLike, scale: float = 1.0) -> float:
    X, y = _rows(model, rows)
    theta = np.asarray(theta, dtype=float)
    if model.kind == LEAST_SQUARES:
        r = X @ theta - y
        return float(scale * (r @ r))
    return float(scale * np.sum(np.logaddexp(0.0, -y * (X @ theta))))


def full_gradient(model: LossModel, theta: ArrayLike) -> NDArray[np.float64]:
    return partial_gradient(model, None, theta)


def sketched_ls_gradient(S: ArrayLike, model: LossModel, theta: ArrayLike) -> NDArray[np.float64]:
    """Gradient of ||S(X theta - y)||^2, i.e. 2 (SX)^T (SX theta - Sy)."""
    if model.kind != LEAST_SQUARES:
        raise InvalidInputError("sketched gradient is defined for least squares")
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] != model.X.shape[0]:
        raise ArityError(f"sketch with {S.shape[-1]} columns cannot act on {model.X.shape[0]} rows")
    SX = S @ model.X
    return 2.0 * SX.T @ (SX @ np.asarray(theta, dtype=float) - S @ model.y)


def sketched_ls_loss(S: ArrayLike, model: LossModel, theta: ArrayLike) -> float:
    S = np.asarray(S, dtype=float)
    r = S @ (model.X @ np.asarray(theta, dtype=float) - model.y)
    return float(r @ r)


def weighted_gradient(model: LossModel, plan: PartitionPlan, sp: SketchPlan, theta: ArrayLike) -> NDArray[np.float64]:
    """sum_j w_j * (partial gradient of rescaled part j)."""
    check_consistent(plan, sp)
    theta = np.asarray(theta, dtype=float)
    g = np.zeros(model.p)
    for part, w, c in zip(sp.distinct_parts, sp.weights, sp.rescale):
        g += w * partial_gradient(model, plan.row_slice(part), theta, scale=c * c)
    return g


def weighted_loss(model: LossModel, plan: PartitionPlan, sp: SketchPlan, theta: ArrayLike) -> float:
    check_consistent(plan, sp)
    return float(
        sum(
            w * loss_value(model, plan.row_slice(part), theta, scale=c * c)
            for part, w, c in zip(sp.distinct_parts, sp.weights, sp.rescale)
        )
    )


@dataclass(frozen=True)
class GdConfig:
    step: float
    max_iters: int
    grad_tol: float

    def __post_init__(self):
        if not self.step > 0 or not self.grad_tol > 0 or self.max_iters < 0:
            raise InvalidInputError("step and grad_tol must be positive, max_iters nonnegative")


@dataclass
class IterRecord:
    iteration: int
    grad_norm: float
    loss: float
    responders: tuple[int, ...] = ()


@dataclass
class GdTrace:
    records: list[IterRecord] = field(default_factory=list)
    theta: NDArray[np.float64] | None = None
    iterations: int = 0
    converged: bool = False
    thetas: list[NDArray[np.float64]] = field(default_factory=list)

    @property
    def grad_norms(self) -> NDArray[np.float64]:
        return np.array([r.grad_norm for r in self.records])


GradFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]
LossFn = Callable[[NDArray[np.float64]], float]


def descend(
    p: int,
    step_fn: Callable[[NDArray[np.float64]], tuple[NDArray[np.float64], tuple[int, ...]]],
    config: GdConfig,
    loss_fn: LossFn | None = None,
    keep_iterates: bool = False,
) -> GdTrace:
    """Fixed-step descent from theta = 0 driven by ``step_fn(theta) -> (grad, responders)``.

    A run that stops after t steps holds t + 1 records; the last one is the
    gradient that met the tolerance.
    """
    theta = np.zeros(p)
    trace = GdTrace()
    for t in range(config.max_iters + 1):
        g, responders = step_fn(theta)
        norm = float(np.linalg.norm(g))
        loss = loss_fn(theta) if loss_fn is not None else float("nan")
        trace.records.append(IterRecord(t, norm, loss, tuple(int(i) for i in responders)))
        if keep_iterates:
            trace.thetas.append(theta.copy())
        trace.theta, trace.iterations = theta, t
        if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
            raise DivergenceError(f"gradient norm {norm:.3e} at iteration {t}", trace)
        if norm < config.grad_tol:
            trace.converged = True
            return trace
        if t < config.max_iters:
            theta = theta - config.step * g
    return trace


def gd(
    model: LossModel,
    grad_fn: GradFn,
    config: GdConfig,
    loss_fn: LossFn | None = None,
    keep_iterates: bool = False,
) -> GdTrace:
    return descend(model.p, lambda th: (grad_fn(th), ()), config, loss_fn, keep_iterates)
