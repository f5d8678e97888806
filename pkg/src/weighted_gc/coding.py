"""Balanced Reed-Solomon gradient codes over the n-th roots of unity.

Column j of the encoding matrix B is a polynomial p_j with p_j(0) = 1 that
vanishes at the evaluation points of the workers not holding part j, so
B = G T with G the Vandermonde matrix of the points and T the coefficient
matrix whose first row is all ones. For any f responders, the first row of
G_I^{-1} decodes sum_j p_j(0) g_j; scaling the columns by w decodes the
weighted sum instead.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike, NDArray

from .errors import ArityError, ConditioningWarning, InfeasibleParametersError, MaskError

CONDITIONING_GUARD = 1e-6
AGREEMENT_TOL = 1e-8


@dataclass(frozen=True)
class CodingParams:
    n: int
    k: int
    d: int
    w_supp: int
    s: int
    f: int


def validate_params(n: int, k: int, d: int) -> CodingParams:
    if min(n, k, d) < 1:
        raise InfeasibleParametersError(f"n, k, d must be positive (got {n}, {k}, {d})")
    if d > n:
        raise InfeasibleParametersError(f"replication d={d} exceeds worker count n={n}")
    if (k * d) % n:
        raise InfeasibleParametersError(f"n={n} does not divide k*d={k * d}")
    s = d - 1
    return CodingParams(n=n, k=k, d=d, w_supp=k * d // n, s=s, f=n - s)


def cyclic_mask(params: CodingParams) -> NDArray[np.bool_]:
    """Column j is held by workers j*d, ..., j*d + d - 1 (mod n).

    The k windows tile k*d = n*w_supp consecutive slots around the circle,
    so every worker is covered exactly w_supp times.
    """
    n, k, d = params.n, params.k, params.d
    mask = np.zeros((n, k), dtype=bool)
    for j in range(k):
        mask[(j * d + np.arange(d)) % n, j] = True
    return mask


def _strided_mask(params: CodingParams, step: int) -> NDArray[np.bool_]:
    # relabel the cyclic rows by i -> i * step (mod n); a row permutation keeps balance
    rows = (np.arange(params.n) * step) % params.n
    mask = np.zeros((params.n, params.k), dtype=bool)
    mask[rows] = cyclic_mask(params)
    return mask


def interleaved_mask(params: CodingParams, step: int | None = None) -> NDArray[np.bool_]:
    """Cyclic windows spread around the circle by a stride coprime to n.

    Contiguous windows put every column's zeros on one arc, which makes
    |B| grow like 2^(n-d) and costs accuracy when the responders also form
    an arc. Without ``step`` the stride minimising max |B| is used.
    """
    n = params.n
    if step is not None:
        if math.gcd(step, n) != 1:
            raise MaskError(f"stride {step} is not coprime to n={n}")
        return _strided_mask(params, step % n)
    a = eval_points(n)
    best, best_val = 1, np.inf
    for st in range(1, n):
        if math.gcd(st, n) != 1:
            continue
        val = _max_abs_b(params, _strided_mask(params, st), a)
        if val < best_val - 1e-9:
            best, best_val = st, val
    return _strided_mask(params, best)


def _column_values(mask_col: NDArray[np.bool_], a: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """p_j at the holding workers, in product form."""
    zeros = a[~mask_col]
    held = a[mask_col]
    if not zeros.size:
        return np.ones(held.size, dtype=np.complex128)
    return np.prod((held[:, None] - zeros[None, :]) / (-zeros[None, :]), axis=1)


def _max_abs_b(params: CodingParams, mask: NDArray[np.bool_], a: NDArray[np.complex128]) -> float:
    return max(float(np.abs(_column_values(mask[:, j], a)).max()) for j in range(params.k))


def eval_points(n: int) -> NDArray[np.complex128]:
    return np.exp(2j * np.pi * np.arange(n) / n)


def vandermonde(points: NDArray[np.complex128], f: int) -> NDArray[np.complex128]:
    return np.vander(points, f, increasing=True)


@dataclass(frozen=True)
class CodingScheme:
    params: CodingParams
    mask: NDArray[np.bool_]
    B: NDArray[np.complex128]
    T: NDArray[np.complex128]
    points: NDArray[np.complex128]

    @cached_property
    def G(self) -> NDArray[np.complex128]:
        return vandermonde(self.points, self.params.f)

    def support(self, worker: int) -> NDArray[np.intp]:
        return np.flatnonzero(self.mask[worker])


def check_mask(params: CodingParams, mask: NDArray[np.bool_]) -> None:
    if mask.shape != (params.n, params.k):
        raise MaskError(f"mask shape {mask.shape} != ({params.n}, {params.k})")
    if np.any(mask.sum(axis=0) != params.d):
        raise MaskError(f"every column must hold exactly d={params.d} workers")
    if np.any(mask.sum(axis=1) != params.w_supp):
        raise MaskError(f"every row must hold exactly w={params.w_supp} parts")


def build_scheme(params: CodingParams, mask: NDArray[np.bool_] | None = None) -> CodingScheme:
    mask = cyclic_mask(params) if mask is None else np.asarray(mask, dtype=bool)
    check_mask(params, mask)
    n, k, f = params.n, params.k, params.f
    a = eval_points(n)
    B = np.zeros((n, k), dtype=np.complex128)
    T = np.zeros((f, k), dtype=np.complex128)
    for j in range(k):
        zeros = a[~mask[:, j]]
        # product form gives exact zeros on the non-assigned workers
        B[mask[:, j], j] = _column_values(mask[:, j], a)
        coef = P.polyfromroots(zeros) if zeros.size else np.ones(1, dtype=np.complex128)
        T[: coef.size, j] = coef / coef[0]
    return CodingScheme(params=params, mask=mask, B=B, T=T, points=a)


def _check_responders(scheme: CodingScheme, responders: ArrayLike) -> NDArray[np.intp]:
    I = np.asarray(responders, dtype=np.intp)
    f, n = scheme.params.f, scheme.params.n
    if I.ndim != 1 or I.size != f:
        raise ArityError(f"need exactly f={f} responders, got {I.size}")
    if len(set(I.tolist())) != f or I.min() < 0 or I.max() >= n:
        raise ArityError("responders must be distinct worker indices")
    return I


def lagrange_decode(nodes: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """a with a^T V = e_1^T for V the Vandermonde on ``nodes``.

    a_i is the i-th Lagrange basis polynomial evaluated at zero,
    prod_{l != i} x_l / (x_l - x_i).
    """
    diff = nodes[None, :] - nodes[:, None]
    np.fill_diagonal(diff, 1.0)
    ratio = nodes[None, :] / diff
    np.fill_diagonal(ratio, 1.0)
    return np.prod(ratio, axis=1)


def elimination_decode(nodes: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Solve V^T a = e_1 by LU with partial pivoting."""
    f = nodes.size
    rhs = np.zeros(f, dtype=np.complex128)
    rhs[0] = 1.0
    return np.linalg.solve(vandermonde(nodes, f).T, rhs)


def decode_residual(scheme: CodingScheme, I: NDArray[np.intp], a: NDArray[np.complex128]) -> float:
    e1 = np.zeros(scheme.params.f)
    e1[0] = 1.0
    return float(np.max(np.abs(a @ scheme.G[I] - e1)))


def decode_vector(scheme: CodingScheme, responders: ArrayLike) -> NDArray[np.complex128]:
    """Decoding coefficients for the responder set, ordered like ``responders``.

    Uses the Lagrange closed form and falls back to pivoted elimination if
    its residual is worse. A ConditioningWarning is issued when the best
    residual still exceeds ``CONDITIONING_GUARD``.
    """
    I = _check_responders(scheme, responders)
    nodes = scheme.points[I]
    a = lagrange_decode(nodes)
    res = decode_residual(scheme, I, a)
    if res > AGREEMENT_TOL:
        alt = elimination_decode(nodes)
        alt_res = decode_residual(scheme, I, alt)
        if alt_res < res:
            a, res = alt, alt_res
    if res > CONDITIONING_GUARD:
        warnings.warn(
            f"decode residual {res:.2e} exceeds {CONDITIONING_GUARD:.0e} for responders {I.tolist()}",
            ConditioningWarning,
            stacklevel=2,
        )
    return a


def weight_scheme(scheme: CodingScheme, wvec: ArrayLike) -> NDArray[np.complex128]:
    """B~ = B diag(w)."""
    w = np.asarray(wvec)
    if w.shape != (scheme.params.k,):
        raise ArityError(f"weight vector must have length k={scheme.params.k}, got shape {w.shape}")
    return scheme.B * w[None, :]


def responder_sets(params: CodingParams):
    return itertools.combinations(range(params.n), params.f)
