"""Spectral kernels: extreme eigenvalues, spectral norm, truncated SVD and
orthogonal Procrustes.

Matrices up to ``DENSE_MAX`` rows go through LAPACK; larger ones through
ARPACK's implicitly restarted Lanczos, started from a vector seeded by the
matrix checksum so repeated calls are reproducible.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

DENSE_MAX = 512
LANCZOS_TOL = 1e-11
LANCZOS_MAXITER = 5000


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class SymEigResult:
    lambda_max: float
    lambda_min: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class TruncatedSvd:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def _square(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _start_vector(a: np.ndarray) -> np.ndarray:
    crc = zlib.crc32(np.ascontiguousarray(a).tobytes())
    return np.random.default_rng(crc).standard_normal(a.shape[0])


def _lanczos(a: np.ndarray, k: int, which: str):
    af = a.astype(float, copy=False)
    calls = [0]

    def matvec(x):
        calls[0] += 1
        return af @ x

    op = LinearOperator(af.shape, matvec=matvec, dtype=float)
    try:
        w, v = eigsh(op, k=k, which=which, v0=_start_vector(a), tol=LANCZOS_TOL,
                     maxiter=LANCZOS_MAXITER, ncv=min(a.shape[0], max(2 * k + 1, 20)))
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            res = np.linalg.norm(af @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues, axis=0)
            best = float(res.min())
        else:
            best = float("inf")
        raise ConvergenceError("Lanczos iteration did not converge", best) from None
    res = np.linalg.norm(af @ v - v * w, axis=0) / np.maximum(1.0, np.abs(w))
    return w, v, calls[0], float(res.max(initial=0.0))


def extreme_eigenvalues(a, *, dense_max: int | None = None) -> SymEigResult:
    """Largest and smallest eigenvalue of a symmetric matrix."""
    a = _square(a)
    n = a.shape[0]
    if n <= (DENSE_MAX if dense_max is None else dense_max) or not a.any():
        w = np.linalg.eigvalsh(a.astype(float, copy=False))
        return SymEigResult(float(w[-1]), float(w[0]), 0, 0.0)
    w, _, its, res = _lanczos(a, 2, "BE")
    return SymEigResult(float(w.max()), float(w.min()), its, res)


def spectral_norm(a, *, dense_max: int | None = None) -> float:
    """Largest absolute eigenvalue of a symmetric matrix (its operator 2-norm)."""
    e = extreme_eigenvalues(a, dense_max=dense_max)
    return max(abs(e.lambda_max), abs(e.lambda_min))


def _fix_signs(u: np.ndarray, v: np.ndarray) -> None:
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1
    v[:, flip] *= -1


def truncated_svd(a, r: int, *, dense_max: int | None = None) -> TruncatedSvd:
    """Top-``r`` singular triplets of a square matrix.

    Each left singular vector is signed so that its largest-magnitude entry
    is nonnegative.  Symmetric input is handled through its eigenvalues of
    largest modulus.
    """
    a = _square(a)
    n = a.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"rank must lie in [1, {n}], got {r}")
    af = a.astype(float, copy=False)
    if not af.any():
        eye = np.eye(n, r)
        return TruncatedSvd(eye, np.zeros(r), eye.copy())
    if not np.array_equal(af, af.T):
        u, s, vt = np.linalg.svd(af)
        u, s, v = u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy()
    else:
        dense = n <= (DENSE_MAX if dense_max is None else dense_max) or 2 * r + 1 >= n
        if dense:
            w, vec = np.linalg.eigh(af)
        else:
            w, vec, _, _ = _lanczos(a, r, "LM")
        order = np.argsort(-np.abs(w), kind="stable")[:r]
        w, u = w[order], vec[:, order].copy()
        s = np.abs(w)
        v = u * np.where(w < 0, -1.0, 1.0)
    _fix_signs(u, v)
    return TruncatedSvd(u, s, v)


def procrustes_rotation(x, y) -> np.ndarray:
    """Orthogonal ``W`` minimizing ``||x - y W||_F``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    u, _, vt = np.linalg.svd(y.T @ x)
    return u @ vt


def procrustes_distance(x, y) -> float:
    """``min ||x - y W||_F`` over orthogonal ``W``.

    With ``y^T x = U S V^T`` the minimizer is ``W = U V^T``; the residual is
    evaluated directly rather than as ``||x||^2 + ||y||^2 - 2 tr S``, which
    cancels badly when the two are nearly aligned.
    """
    w = procrustes_rotation(x, y)
    return float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float) @ w))
