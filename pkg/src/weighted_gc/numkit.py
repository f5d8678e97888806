"""Dense matrix helpers, a one-sided Jacobi SVD and exact leverage scores.

Real matrices are float64 ndarrays and complex matrices are complex128
ndarrays; ``as_mat`` / ``as_cmat`` are the validating constructors.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    InvalidDistributionError,
    InvalidInputError,
    NumericalFailureError,
    RankDeficiencyError,
)

MAX_SWEEPS = 60
SWEEP_TOL = 1e-12
RANK_RTOL = 1e-10
# Above this width the Python-level rotation rounds cost O(p^3) per sweep
# and "auto" hands the problem to LAPACK instead.
JACOBI_MAX_COLS = 256


def as_mat(a: ArrayLike, ndim: int | None = 2) -> NDArray[np.float64]:
    out = np.array(a, dtype=np.float64)
    if ndim is not None and out.ndim != ndim:
        raise InvalidInputError(f"expected a {ndim}-d array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("matrix contains NaN or Inf entries")
    return out


def as_cmat(a: ArrayLike, ndim: int | None = 2) -> NDArray[np.complex128]:
    out = np.array(a, dtype=np.complex128)
    if ndim is not None and out.ndim != ndim:
        raise InvalidInputError(f"expected a {ndim}-d array, got shape {out.shape}")
    if not (np.all(np.isfinite(out.real)) and np.all(np.isfinite(out.imag))):
        raise InvalidInputError("complex matrix contains NaN or Inf parts")
    return out


def _round_robin(p: int) -> list[tuple[NDArray[np.intp], NDArray[np.intp]]]:
    """Tournament schedule: p-1 rounds of disjoint column pairs covering all pairs."""
    players = list(range(p + (p % 2)))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        left = np.array([players[i] for i in range(m // 2)], dtype=np.intp)
        right = np.array([players[m - 1 - i] for i in range(m // 2)], dtype=np.intp)
        # drop the bye when p is odd
        keep = (left < p) & (right < p)
        rounds.append((left[keep], right[keep]))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_rows(M: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Orthogonalize the rows of M in place by plane rotations.

    Returns (Omega @ M, Omega) with Omega the accumulated orthogonal
    rotation. Each round of the round-robin schedule rotates p/2 disjoint
    row pairs at once; rows keep the gathers contiguous.
    """
    p = M.shape[0]
    Omega = np.eye(p)
    if p < 2:
        return M, Omega
    schedule = _round_robin(p)
    for _ in range(MAX_SWEEPS):
        worst = 0.0
        for left, right in schedule:
            mi, mj = M[left], M[right]
            alpha = np.einsum("ij,ij->i", mi, mi)
            beta = np.einsum("ij,ij->i", mj, mj)
            gamma = np.einsum("ij,ij->i", mi, mj)
            scale = np.sqrt(alpha * beta)
            with np.errstate(divide="ignore", invalid="ignore"):
                off = np.where(scale > 0, np.abs(gamma) / scale, 0.0)
            active = off > SWEEP_TOL
            if not np.any(active):
                continue
            worst = max(worst, float(off.max()))
            li, rj = left[active], right[active]
            a, b, g = alpha[active], beta[active], gamma[active]
            zeta = (b - a) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = (1.0 / np.hypot(1.0, t))[:, None]
            s = c * t[:, None]
            mi, mj = M[li], M[rj]
            M[li] = c * mi - s * mj
            M[rj] = s * mi + c * mj
            oi, oj = Omega[li], Omega[rj]
            Omega[li] = c * oi - s * oj
            Omega[rj] = s * oi + c * oj
        if worst <= SWEEP_TOL:
            return M, Omega
    raise NumericalFailureError(f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")


def reduced_svd(
    X: ArrayLike, method: str = "auto"
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Thin SVD ``X = U @ diag(sigma) @ V.T`` with sigma non-increasing.

    ``method="jacobi"``: X is reduced to its triangular factor R by
    Householder QR and one-sided Jacobi runs on R^T. The accumulated
    rotations give the left singular vectors directly, so U is orthonormal
    to rounding even when X is rank deficient.
    ``method="lapack"`` calls numpy's gesdd driver. ``"auto"`` uses Jacobi
    up to ``JACOBI_MAX_COLS`` columns.
    """
    X = as_mat(X)
    m, p = X.shape
    if p < 1 or m < p:
        raise InvalidInputError(f"reduced_svd needs rows >= cols >= 1, got {X.shape}")
    if method == "auto":
        method = "jacobi" if p <= JACOBI_MAX_COLS else "lapack"
    if method == "lapack":
        try:
            U, sigma, Vt = np.linalg.svd(X, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(str(exc)) from exc
        return U, sigma, Vt.T
    if method != "jacobi":
        raise InvalidInputError(f"unknown SVD method {method!r}")
    Q, R = np.linalg.qr(X)
    # Omega R = M with orthogonal rows  =>  R = Omega^T diag(sigma) (M / sigma)
    M, Omega = _jacobi_rows(R)
    Z, W = M.T, Omega.T
    sigma = np.linalg.norm(Z, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, Z, W = sigma[order], Z[:, order], W[:, order]
    U = Q @ W
    null = sigma <= sigma[0] * p * np.finfo(float).eps if sigma[0] > 0 else np.ones(p, bool)
    V = np.zeros((p, p))
    nz = ~null
    V[:, nz] = Z[:, nz] / sigma[nz]
    if np.any(null):
        r = int(nz.sum())
        full, _ = np.linalg.qr(V[:, :r], mode="complete") if r else (np.eye(p), None)
        V[:, null] = full[:, r:]
    return U, sigma, V


def numerical_rank(sigma: NDArray[np.float64], rtol: float = RANK_RTOL) -> int:
    if sigma.size == 0 or sigma[0] == 0:
        return 0
    return int(np.sum(sigma > rtol * sigma[0]))


def leverage_scores(
    X: ArrayLike, allow_rank_deficient: bool = False, method: str = "auto"
) -> NDArray[np.float64]:
    """Row leverage scores: squared row norms of the left singular basis.

    With ``allow_rank_deficient`` the basis is truncated to the numerical
    rank, which still gives the diagonal of the projector onto range(X).
    """
    U, sigma, _ = reduced_svd(X, method=method)
    rank = numerical_rank(sigma)
    if rank < U.shape[1] and not allow_rank_deficient:
        raise RankDeficiencyError(rank, U.shape[1])
    ell = np.einsum("ij,ij->i", U[:, :rank], U[:, :rank])
    return np.clip(ell, 0.0, 1.0)


def normalize_scores(ell: ArrayLike) -> NDArray[np.float64]:
    ell = as_mat(ell, ndim=1)
    if np.any(ell < 0):
        raise InvalidDistributionError("scores must be nonnegative")
    total = ell.sum()
    if not total > 0:
        raise InvalidDistributionError("scores sum to zero")
    return ell / total


def pinv_solve(U: NDArray, sigma: NDArray, V: NDArray, y: ArrayLike) -> NDArray[np.float64]:
    """Minimum-norm least-squares solution X^+ y from SVD factors of X."""
    rank = numerical_rank(sigma)
    coef = (U[:, :rank].T @ np.asarray(y, dtype=float)) / sigma[:rank]
    return V[:, :rank] @ coef
